#pragma once

// Supervised LDA with a Gaussian response y_d ~ N(w . zbar_d, sigma2).
//
// Inference is collapsed Gibbs over token topics, with the response
// likelihood folded into each token's conditional, plus an exact conjugate
// draw of w given the topic histograms. Held-out documents are scored by
// sampling their topics against frozen global counts and estimating the
// entropy of the resulting Gaussian mixture over y.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "infoplan/corpus.hpp"
#include "infoplan/info_measures.hpp"
#include "infoplan/random.hpp"
#include "infoplan/text_format.hpp"

namespace infoplan::slda {

struct SldaHyper {
  std::size_t topics = 8;
  double alpha = 1.0;        // Dirichlet concentration on theta_d
  double eta = 0.1;          // Dirichlet concentration on beta_k
  double sigma2 = 1.0;       // response noise variance (fixed)
  double w_prior_var = 10.0; // N(0, w_prior_var I) prior on w

  void validate() const {
    if (topics < 1) throw std::invalid_argument("SldaHyper: need at least one topic");
    if (!(alpha > 0 && eta > 0 && sigma2 > 0 && w_prior_var > 0)) {
      throw std::invalid_argument("SldaHyper: alpha, eta, sigma2 and w_prior_var must be positive");
    }
  }
};

struct SamplerConfig {
  int sweeps = 2500;
  int burn_in = 500;
  int thin = 10;
  std::uint64_t seed = 0;
};

using TokenList = std::vector<std::uint32_t>;

// Expand a count row into a token list (word ids in ascending order).
inline TokenList tokens_of(std::span<const BowEntry> row) {
  TokenList out;
  for (const auto& e : row) out.insert(out.end(), e.count, e.word);
  return out;
}

struct SldaState {
  std::size_t topics = 0;
  std::size_t words = 0;
  std::vector<std::vector<std::uint32_t>> z;  // per document, per token
  std::vector<std::uint32_t> topic_word;      // topics x words
  std::vector<std::uint32_t> topic_total;     // topics
  std::vector<std::uint32_t> doc_topic;       // docs x topics
  std::vector<double> w;
  int sweep = 0;

  std::uint32_t nkw(std::size_t k, std::size_t v) const { return topic_word[k * words + v]; }
  std::uint32_t ndk(std::size_t d, std::size_t k) const { return doc_topic[d * topics + k]; }

  std::vector<double> zbar(std::size_t d) const {
    std::vector<double> out(topics, 0.0);
    const auto n = z.at(d).size();
    if (n == 0) return out;
    for (std::size_t k = 0; k < topics; ++k) out[k] = static_cast<double>(ndk(d, k)) / static_cast<double>(n);
    return out;
  }

  // Topic-word distribution beta_k under the posterior mean.
  std::vector<double> beta(std::size_t k, double eta) const {
    std::vector<double> out(words);
    const double denom = topic_total[k] + eta * static_cast<double>(words);
    for (std::size_t v = 0; v < words; ++v) out[v] = (nkw(k, v) + eta) / denom;
    return out;
  }
};

// Recompute every count table from z and compare exactly.
inline bool counts_consistent(const SldaState& s, std::span<const TokenList> docs) {
  if (s.z.size() != docs.size()) return false;
  std::vector<std::uint32_t> tw(s.topics * s.words, 0), tt(s.topics, 0), dt(docs.size() * s.topics, 0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    if (s.z[d].size() != docs[d].size()) return false;
    for (std::size_t n = 0; n < docs[d].size(); ++n) {
      const auto k = s.z[d][n];
      if (k >= s.topics) return false;
      ++tw[k * s.words + docs[d][n]];
      ++tt[k];
      ++dt[d * s.topics + k];
    }
  }
  return tw == s.topic_word && tt == s.topic_total && dt == s.doc_topic;
}

struct RunReport {
  int sweeps_run = 0;
  int audits_run = 0;
  bool audit_passed = true;
  std::vector<std::string> warnings;
};

struct SldaTrace {
  SldaHyper hyper;
  std::size_t words = 0;
  std::vector<SldaState> states;  // retained, ordered by sweep
  int burn_in = 0;
  int thin = 1;
  std::uint64_t seed = 0;
  RunReport report;
};

using SweepObserver = std::function<void(const SldaState&, std::span<const TokenList>)>;

namespace detail {

// Posterior over w given the nonempty documents' topic histograms:
// precision A = Z^T Z / s2 + I / v, mean A^{-1} Z^T y / s2. Returns a draw.
inline std::vector<double> draw_weights(const SldaState& s, std::span<const double> y, const SldaHyper& h, Rng& rng) {
  const auto K = static_cast<Eigen::Index>(s.topics);
  Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(K, K) / h.w_prior_var;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K);
  for (std::size_t d = 0; d < s.z.size(); ++d) {
    if (s.z[d].empty()) continue;
    const auto zb = s.zbar(d);
    const Eigen::Map<const Eigen::VectorXd> v(zb.data(), K);
    precision.noalias() += v * v.transpose() / h.sigma2;
    rhs += v * (y[d] / h.sigma2);
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) throw std::runtime_error("slda: weight posterior precision not positive definite");
  const Eigen::VectorXd mean = llt.solve(rhs);
  Eigen::VectorXd eps(K);
  for (Eigen::Index k = 0; k < K; ++k) eps[k] = rng.normal();
  // L L^T = A  =>  L^{-T} eps ~ N(0, A^{-1})
  const Eigen::VectorXd noise = llt.matrixU().solve(eps);
  const Eigen::VectorXd w = mean + noise;
  return std::vector<double>(w.data(), w.data() + K);
}

}  // namespace detail

inline SldaTrace fit_mcmc(std::span<const TokenList> docs, std::span<const double> y, std::size_t n_words,
                          const SldaHyper& hyper, const SamplerConfig& cfg, const SweepObserver& observer = {}) {
  hyper.validate();
  if (docs.size() != y.size()) throw std::invalid_argument("slda::fit_mcmc: need one score per document");
  if (n_words == 0) throw std::invalid_argument("slda::fit_mcmc: empty vocabulary");
  if (cfg.burn_in < 0 || cfg.thin < 1 || cfg.sweeps <= cfg.burn_in) {
    throw std::invalid_argument("slda::fit_mcmc: need sweeps > burn_in >= 0 and thin >= 1");
  }
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument("slda::fit_mcmc: non-finite score");

  const std::size_t K = hyper.topics, V = n_words, n = docs.size();
  Rng rng(derive_seed(cfg.seed, 0x51da));
  SldaState s;
  s.topics = K;
  s.words = V;
  s.z.resize(n);
  s.topic_word.assign(K * V, 0);
  s.topic_total.assign(K, 0);
  s.doc_topic.assign(n * K, 0);

  SldaTrace trace;
  trace.hyper = hyper;
  trace.words = V;
  trace.burn_in = cfg.burn_in;
  trace.thin = cfg.thin;
  trace.seed = cfg.seed;

  std::vector<bool> seen(V, false);
  std::size_t effective_vocab = 0;
  for (std::size_t d = 0; d < n; ++d) {
    s.z[d].resize(docs[d].size());
    for (std::size_t t = 0; t < docs[d].size(); ++t) {
      const auto v = docs[d][t];
      if (v >= V) throw std::invalid_argument("slda::fit_mcmc: word id out of range");
      if (!seen[v]) {
        seen[v] = true;
        ++effective_vocab;
      }
      const auto k = static_cast<std::uint32_t>(rng.below(K));
      s.z[d][t] = k;
      ++s.topic_word[k * V + v];
      ++s.topic_total[k];
      ++s.doc_topic[d * K + k];
    }
  }
  if (K > effective_vocab) {
    trace.report.warnings.push_back("topic count " + std::to_string(K) + " exceeds effective vocabulary " +
                                    std::to_string(effective_vocab));
  }
  s.w = detail::draw_weights(s, y, hyper, rng);

  const double v_eta = static_cast<double>(V) * hyper.eta;
  const double inv_2s2 = 1.0 / (2.0 * hyper.sigma2);
  std::vector<double> weights(K), response(K);

  for (int sweep = 1; sweep <= cfg.sweeps; ++sweep) {
    for (std::size_t d = 0; d < n; ++d) {
      const auto& toks = docs[d];
      if (toks.empty()) continue;
      const double inv_n = 1.0 / static_cast<double>(toks.size());
      double wdot = 0.0;
      for (std::size_t k = 0; k < K; ++k) wdot += s.w[k] * s.doc_topic[d * K + k];
      for (std::size_t t = 0; t < toks.size(); ++t) {
        const auto v = toks[t];
        const auto old = s.z[d][t];
        --s.topic_word[old * V + v];
        --s.topic_total[old];
        --s.doc_topic[d * K + old];
        wdot -= s.w[old];

        double rmax = -INFINITY;
        for (std::size_t k = 0; k < K; ++k) {
          const double resid = y[d] - (wdot + s.w[k]) * inv_n;
          response[k] = -resid * resid * inv_2s2;
          rmax = std::max(rmax, response[k]);
        }
        for (std::size_t k = 0; k < K; ++k) {
          weights[k] = (s.doc_topic[d * K + k] + hyper.alpha) * (s.topic_word[k * V + v] + hyper.eta) /
                       (s.topic_total[k] + v_eta) * std::exp(response[k] - rmax);
        }
        const auto knew = static_cast<std::uint32_t>(rng.categorical(weights));
        s.z[d][t] = knew;
        ++s.topic_word[knew * V + v];
        ++s.topic_total[knew];
        ++s.doc_topic[d * K + knew];
        wdot += s.w[knew];
      }
    }
    s.w = detail::draw_weights(s, y, hyper, rng);
    s.sweep = sweep;
    if (observer) observer(s, docs);
    if (sweep > cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0) {
      ++trace.report.audits_run;
      trace.report.audit_passed = trace.report.audit_passed && counts_consistent(s, docs);
      trace.states.push_back(s);
    }
  }
  trace.report.sweeps_run = cfg.sweeps;
  if (trace.states.empty()) trace.states.push_back(s);
  return trace;
}

// Fit on selected rows of a count matrix.
inline SldaTrace fit_mcmc(const BowMatrix& x, std::span<const std::size_t> rows, std::span<const double> y,
                          const SldaHyper& hyper, const SamplerConfig& cfg, const SweepObserver& observer = {}) {
  if (x.mode() != BowMode::count) throw std::invalid_argument("slda::fit_mcmc: matrix must hold counts");
  std::vector<TokenList> docs;
  docs.reserve(rows.size());
  for (auto r : rows) docs.push_back(tokens_of(x.row(r)));
  return fit_mcmc(docs, y, x.cols(), hyper, cfg, observer);
}

// Equal-weight mixture of N(mean_i, sigma2) predictive components.
class PredictiveMixture {
 public:
  PredictiveMixture(std::vector<double> means, double sigma2) : means_(std::move(means)), sigma2_(sigma2) {
    if (means_.empty()) throw std::invalid_argument("PredictiveMixture: no components");
    if (!(sigma2_ > 0)) throw std::invalid_argument("PredictiveMixture: variance must be positive");
    // Components with identical means collapse into one weighted term.
    std::vector<double> sorted = means_;
    std::sort(sorted.begin(), sorted.end());
    for (double m : sorted) {
      if (!unique_.empty() && unique_.back() == m) {
        ++counts_.back();
      } else {
        unique_.push_back(m);
        counts_.push_back(1);
      }
    }
    log_weights_.resize(unique_.size());
    for (std::size_t i = 0; i < unique_.size(); ++i)
      log_weights_[i] = std::log(static_cast<double>(counts_[i]) / static_cast<double>(means_.size()));
  }

  const std::vector<double>& means() const { return means_; }
  double sigma2() const { return sigma2_; }

  double mean() const { return std::accumulate(means_.begin(), means_.end(), 0.0) / static_cast<double>(means_.size()); }

  double log_density(double y) const {
    thread_local std::vector<double> terms;
    terms.resize(unique_.size());
    for (std::size_t i = 0; i < unique_.size(); ++i) terms[i] = log_weights_[i] + gaussian_log_pdf(y, unique_[i], sigma2_);
    return log_sum_exp(terms);
  }

  double sample(Rng& rng) const { return rng.normal(means_[rng.below(means_.size())], std::sqrt(sigma2_)); }

 private:
  std::vector<double> means_;
  double sigma2_;
  std::vector<double> unique_;
  std::vector<std::size_t> counts_;
  std::vector<double> log_weights_;
};

struct ScoreConfig {
  int inner_sweeps = 5;
  std::size_t components = 200;
  std::size_t draws = 10000;
};

namespace detail {

// Topic histogram of a held-out document under one retained state, with the
// state's global counts held fixed.
inline std::vector<double> heldout_zbar(const SldaState& s, const SldaHyper& h, const TokenList& doc, int inner_sweeps,
                                        Rng& rng) {
  const std::size_t K = s.topics;
  const double v_eta = static_cast<double>(s.words) * h.eta;
  std::vector<std::uint32_t> local(K, 0), z(doc.size());
  std::vector<double> weights(K);
  auto sample_token = [&](std::uint32_t v) {
    for (std::size_t k = 0; k < K; ++k)
      weights[k] = (local[k] + h.alpha) * (s.nkw(k, v) + h.eta) / (s.topic_total[k] + v_eta);
    return static_cast<std::uint32_t>(rng.categorical(weights));
  };
  for (std::size_t t = 0; t < doc.size(); ++t) {
    z[t] = sample_token(doc[t]);
    ++local[z[t]];
  }
  for (int sweep = 0; sweep < inner_sweeps; ++sweep) {
    for (std::size_t t = 0; t < doc.size(); ++t) {
      --local[z[t]];
      z[t] = sample_token(doc[t]);
      ++local[z[t]];
    }
  }
  std::vector<double> zb(K);
  for (std::size_t k = 0; k < K; ++k) zb[k] = static_cast<double>(local[k]) / static_cast<double>(doc.size());
  return zb;
}

}  // namespace detail

// One predictive component w^(i) . zbar^(i) per draw, cycling over the
// retained states.
inline PredictiveMixture predictive_mixture(const SldaTrace& trace, const TokenList& doc, int inner_sweeps,
                                            std::size_t n_components, std::uint64_t seed) {
  if (doc.empty()) throw std::invalid_argument("slda: cannot score an empty document");
  if (n_components == 0) throw std::invalid_argument("slda: need at least one predictive component");
  if (trace.states.empty()) throw std::invalid_argument("slda: empty trace");
  for (auto v : doc)
    if (v >= trace.words) throw std::invalid_argument("slda: word id out of range");
  Rng rng(derive_seed(seed, 0x9d1c7));
  std::vector<double> means(n_components);
  for (std::size_t i = 0; i < n_components; ++i) {
    const auto& s = trace.states[i % trace.states.size()];
    const auto zb = detail::heldout_zbar(s, trace.hyper, doc, inner_sweeps, rng);
    double m = 0.0;
    for (std::size_t k = 0; k < s.topics; ++k) m += s.w[k] * zb[k];
    means[i] = m;
  }
  return PredictiveMixture(std::move(means), trace.hyper.sigma2);
}

// M draws of y_d: one per predictive component.
inline SampleSet predict_score_samples(const SldaTrace& trace, const TokenList& doc, int inner_sweeps, std::size_t M,
                                       std::uint64_t seed) {
  const auto mix = predictive_mixture(trace, doc, inner_sweeps, M, seed);
  Rng rng(derive_seed(seed, 0x5a3b));
  SampleSet out;
  out.source = "slda predictive, " + std::to_string(M) + " components";
  out.values.reserve(M);
  for (double m : mix.means()) out.values.push_back(rng.normal(m, std::sqrt(mix.sigma2())));
  return out;
}

inline double score_entropy(const PredictiveMixture& mix, std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw std::invalid_argument("slda::score_entropy: need at least one draw");
  Rng rng(derive_seed(seed, 0xe27));
  std::vector<double> ys(draws);
  for (auto& y : ys) y = mix.sample(rng);
  return mc_entropy(ys, [&](double y) { return mix.log_density(y); });
}

inline double score_entropy(const SldaTrace& trace, const TokenList& doc, const ScoreConfig& cfg, std::uint64_t seed) {
  return score_entropy(predictive_mixture(trace, doc, cfg.inner_sweeps, cfg.components, seed), cfg.draws, seed);
}

// Posterior-mean regression weights across the retained states.
inline std::vector<double> mean_weights(const SldaTrace& trace) {
  std::vector<double> w(trace.hyper.topics, 0.0);
  for (const auto& s : trace.states)
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += s.w[k];
  for (auto& x : w) x /= static_cast<double>(trace.states.size());
  return w;
}

// Text export:
//   infoplan-slda-trace v1
//   topics K / words D / alpha / eta / sigma2 / w_prior_var
//   burn_in / thin / seed / sweeps_run / audit_passed / states M
//   state <sweep> / w ... / topic_words <D counts>  (K lines per state)
inline void write_trace(std::ostream& out, const SldaTrace& t) {
  out << "infoplan-slda-trace v1\n";
  out << "topics " << t.hyper.topics << "\nwords " << t.words << '\n';
  out << "alpha " << format_double(t.hyper.alpha) << "\neta " << format_double(t.hyper.eta) << '\n';
  out << "sigma2 " << format_double(t.hyper.sigma2) << "\nw_prior_var " << format_double(t.hyper.w_prior_var) << '\n';
  out << "burn_in " << t.burn_in << "\nthin " << t.thin << "\nseed " << t.seed << '\n';
  out << "sweeps_run " << t.report.sweeps_run << "\naudit_passed " << (t.report.audit_passed ? 1 : 0) << '\n';
  out << "states " << t.states.size() << '\n';
  for (const auto& s : t.states) {
    out << "state " << s.sweep << '\n';
    out << "w " << join_doubles(s.w) << '\n';
    for (std::size_t k = 0; k < s.topics; ++k) {
      out << "topic_words";
      for (std::size_t v = 0; v < s.words; ++v) out << ' ' << s.nkw(k, v);
      out << '\n';
    }
  }
}

// Restores the parts of a trace needed for prediction; per-token z and the
// training document-topic table are not part of the export.
inline SldaTrace read_trace(std::istream& in) {
  LineReader r(in);
  auto header = r.next();
  if (header.size() != 2 || header[0] != "infoplan-slda-trace" || header[1] != "v1") {
    throw std::runtime_error("not an infoplan sLDA trace");
  }
  auto one = [&](std::string_view key) {
    auto f = r.expect(key);
    if (f.size() != 1) throw std::runtime_error("line " + std::to_string(r.line_no()) + ": expected one value");
    return std::string(f[0]);
  };
  SldaTrace t;
  t.hyper.topics = static_cast<std::size_t>(parse_int(one("topics")));
  t.words = static_cast<std::size_t>(parse_int(one("words")));
  t.hyper.alpha = parse_double(one("alpha"));
  t.hyper.eta = parse_double(one("eta"));
  t.hyper.sigma2 = parse_double(one("sigma2"));
  t.hyper.w_prior_var = parse_double(one("w_prior_var"));
  t.hyper.validate();
  t.burn_in = static_cast<int>(parse_int(one("burn_in")));
  t.thin = static_cast<int>(parse_int(one("thin")));
  t.seed = parse_uint(one("seed"));
  t.report.sweeps_run = static_cast<int>(parse_int(one("sweeps_run")));
  t.report.audit_passed = parse_int(one("audit_passed")) != 0;
  const auto n_states = static_cast<std::size_t>(parse_int(one("states")));
  const std::size_t K = t.hyper.topics, V = t.words;
  for (std::size_t i = 0; i < n_states; ++i) {
    SldaState s;
    s.topics = K;
    s.words = V;
    s.sweep = static_cast<int>(parse_int(one("state")));
    s.w = r.expect_doubles("w", K);
    s.topic_word.assign(K * V, 0);
    s.topic_total.assign(K, 0);
    for (std::size_t k = 0; k < K; ++k) {
      auto f = r.expect("topic_words");
      if (f.size() != V) throw std::runtime_error("line " + std::to_string(r.line_no()) + ": bad topic_words row");
      for (std::size_t v = 0; v < V; ++v) {
        s.topic_word[k * V + v] = static_cast<std::uint32_t>(parse_int(f[v]));
        s.topic_total[k] += s.topic_word[k * V + v];
      }
    }
    t.states.push_back(std::move(s));
  }
  return t;
}

inline std::string to_text(const SldaTrace& t) {
  std::ostringstream out;
  write_trace(out, t);
  return out.str();
}

inline SldaTrace trace_from_text(const std::string& text) {
  std::istringstream in(text);
  return read_trace(in);
}

}  // namespace infoplan::slda
