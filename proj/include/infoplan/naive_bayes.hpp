#pragma once

// Bernoulli Naive Bayes over word-presence features, with closed-form label
// entropy, document mutual information and per-word mutual information.

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "infoplan/corpus.hpp"
#include "infoplan/info_measures.hpp"
#include "infoplan/text_format.hpp"

namespace infoplan::nb {

// theta is words x classes, row-major: theta(j, c) = p(x_j = 1 | y = c).
class NbParams {
 public:
  NbParams(std::size_t n_words, std::size_t n_classes, std::vector<double> theta, std::vector<double> log_pi,
           double alpha, std::vector<double> class_counts, std::vector<std::string> words = {})
      : n_words_(n_words),
        n_classes_(n_classes),
        theta_(std::move(theta)),
        log_pi_(std::move(log_pi)),
        alpha_(alpha),
        class_counts_(std::move(class_counts)),
        words_(std::move(words)) {
    if (n_words_ == 0 || n_classes_ == 0) throw std::invalid_argument("NbParams: empty model");
    if (theta_.size() != n_words_ * n_classes_ || log_pi_.size() != n_classes_ ||
        class_counts_.size() != n_classes_ || (!words_.empty() && words_.size() != n_words_)) {
      throw std::invalid_argument("NbParams: shape mismatch");
    }
    for (double t : theta_) {
      if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("NbParams: theta must lie strictly in (0,1)");
    }
    double pi_total = 0.0;
    for (double lp : log_pi_) pi_total += std::exp(lp);
    if (std::abs(pi_total - 1.0) > kProbSumTolerance) throw std::invalid_argument("NbParams: prior does not sum to 1");

    log_theta_.resize(theta_.size());
    log_not_theta_.resize(theta_.size());
    absent_base_.assign(n_classes_, 0.0);
    for (std::size_t j = 0; j < n_words_; ++j) {
      for (std::size_t c = 0; c < n_classes_; ++c) {
        const std::size_t k = j * n_classes_ + c;
        log_theta_[k] = std::log(theta_[k]);
        log_not_theta_[k] = std::log1p(-theta_[k]);
        absent_base_[c] += log_not_theta_[k];
      }
    }
  }

  std::size_t n_words() const { return n_words_; }
  std::size_t n_classes() const { return n_classes_; }
  double theta(std::size_t j, std::size_t c) const { return theta_[j * n_classes_ + c]; }
  std::span<const double> theta_table() const { return theta_; }
  std::span<const double> log_pi() const { return log_pi_; }
  double alpha() const { return alpha_; }
  std::span<const double> class_counts() const { return class_counts_; }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<double> prior() const {
    std::vector<double> p(n_classes_);
    for (std::size_t c = 0; c < n_classes_; ++c) p[c] = std::exp(log_pi_[c]);
    return p;
  }

  // Unnormalized log joint for a sparse set of present words.
  std::vector<double> log_joint(std::span<const std::uint32_t> present) const {
    std::vector<double> lj(n_classes_);
    for (std::size_t c = 0; c < n_classes_; ++c) lj[c] = log_pi_[c] + absent_base_[c];
    for (auto j : present) {
      if (j >= n_words_) throw std::invalid_argument("NbParams: word index out of range");
      for (std::size_t c = 0; c < n_classes_; ++c) {
        const std::size_t k = j * n_classes_ + c;
        lj[c] += log_theta_[k] - log_not_theta_[k];
      }
    }
    return lj;
  }

  bool operator==(const NbParams& other) const {
    return n_words_ == other.n_words_ && n_classes_ == other.n_classes_ && theta_ == other.theta_ &&
           log_pi_ == other.log_pi_ && alpha_ == other.alpha_ && class_counts_ == other.class_counts_ &&
           words_ == other.words_;
  }

 private:
  std::size_t n_words_;
  std::size_t n_classes_;
  std::vector<double> theta_;
  std::vector<double> log_pi_;
  double alpha_;
  std::vector<double> class_counts_;
  std::vector<std::string> words_;

  std::vector<double> log_theta_;
  std::vector<double> log_not_theta_;
  std::vector<double> absent_base_;  // sum_j log(1 - theta_jc)
};

struct NbPrediction {
  std::vector<double> log_posterior;  // normalized
  DiscreteDist posterior;
};

// Laplace-smoothed fit on the selected rows of a binary matrix:
//   theta_jc = (count(x_j = 1, y = c) + alpha) / (N_c + 2 alpha)
//   pi_c     = (N_c + alpha) / (n + C alpha)
namespace detail {

inline NbParams fit_impl(const BowMatrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                         std::size_t n_classes, double alpha, std::vector<std::string> words, bool require_all_classes) {
  if (x.mode() != BowMode::binary) throw std::invalid_argument("nb::fit: matrix must be binary");
  if (rows.size() != labels.size()) throw std::invalid_argument("nb::fit: rows/labels length mismatch");
  if (!(alpha > 0.0)) throw std::invalid_argument("nb::fit: alpha must be positive");
  if (n_classes == 0) throw std::invalid_argument("nb::fit: need at least one class");
  const std::size_t D = x.cols();
  const std::size_t C = n_classes;
  std::vector<double> counts(C, 0.0);
  std::vector<double> present(D * C, 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int y = labels[k];
    if (y < 0 || static_cast<std::size_t>(y) >= C) throw std::invalid_argument("nb::fit: label out of range");
    counts[y] += 1.0;
    for (const auto& e : x.row(rows[k])) present[e.word * C + y] += 1.0;
  }
  for (std::size_t c = 0; c < C && require_all_classes; ++c) {
    if (counts[c] == 0.0) {
      throw std::invalid_argument("nb::fit: class " + std::to_string(c) + " has no training documents");
    }
  }
  std::vector<double> theta(D * C);
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t c = 0; c < C; ++c) theta[j * C + c] = (present[j * C + c] + alpha) / (counts[c] + 2.0 * alpha);
  const double n = static_cast<double>(rows.size());
  std::vector<double> log_pi(C);
  for (std::size_t c = 0; c < C; ++c) log_pi[c] = std::log((counts[c] + alpha) / (n + static_cast<double>(C) * alpha));
  return NbParams(D, C, std::move(theta), std::move(log_pi), alpha, std::move(counts), std::move(words));
}

}  // namespace detail

inline NbParams fit(const BowMatrix& x, std::span<const std::size_t> rows, std::span<const int> labels,
                    std::size_t n_classes, double alpha = 1.0, std::vector<std::string> words = {}) {
  return detail::fit_impl(x, rows, labels, n_classes, alpha, std::move(words), true);
}

// Same smoothing, but a class with no training documents is kept: its
// word probabilities sit at the prior 1/2 and its prior is alpha / (n + C alpha).
// Used by the planner, where a small labelled set can miss a class.
inline NbParams fit_allow_empty_classes(const BowMatrix& x, std::span<const std::size_t> rows,
                                        std::span<const int> labels, std::size_t n_classes, double alpha = 1.0,
                                        std::vector<std::string> words = {}) {
  return detail::fit_impl(x, rows, labels, n_classes, alpha, std::move(words), false);
}

inline NbParams fit(const BowMatrix& x, std::span<const int> labels, std::size_t n_classes, double alpha = 1.0) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit(x, rows, labels, n_classes, alpha);
}

inline NbPrediction predict_present(const NbParams& params, std::span<const std::uint32_t> present) {
  auto lj = params.log_joint(present);
  const double lse = log_sum_exp(lj);
  for (auto& v : lj) v -= lse;
  auto posterior = softmax(lj);
  return {std::move(lj), std::move(posterior)};
}

inline std::vector<std::uint32_t> present_words(std::span<const std::uint8_t> x_row) {
  std::vector<std::uint32_t> present;
  for (std::size_t j = 0; j < x_row.size(); ++j) {
    if (x_row[j] > 1) throw std::invalid_argument("nb: word vector must be binary");
    if (x_row[j]) present.push_back(static_cast<std::uint32_t>(j));
  }
  return present;
}

inline std::vector<std::uint32_t> present_words(std::span<const BowEntry> row) {
  std::vector<std::uint32_t> present;
  present.reserve(row.size());
  for (const auto& e : row) present.push_back(e.word);
  return present;
}

// Dense binary word vector of length D.
inline NbPrediction predict(const NbParams& params, std::span<const std::uint8_t> x_row) {
  if (x_row.size() != params.n_words()) {
    throw std::invalid_argument("nb::predict: row has " + std::to_string(x_row.size()) + " entries, model has " +
                                std::to_string(params.n_words()));
  }
  return predict_present(params, present_words(x_row));
}

inline NbPrediction predict(const NbParams& params, std::span<const BowEntry> row) {
  return predict_present(params, present_words(row));
}

inline double entropy_score(const NbParams& params, std::span<const std::uint8_t> x_row) {
  return entropy(predict(params, x_row).posterior);
}

namespace detail {
// Per-word MI between a label distributed as q and the Bernoulli word x_j
// whose class conditionals are theta(j, .).
inline std::vector<double> label_word_mi(const NbParams& params, std::span<const double> q) {
  const std::size_t C = params.n_classes();
  std::vector<double> out(params.n_words(), 0.0);
  for (std::size_t j = 0; j < params.n_words(); ++j) {
    double on = 0.0;
    for (std::size_t c = 0; c < C; ++c) on += q[c] * params.theta(j, c);
    const double off = 1.0 - on;
    double mi = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      if (q[c] < kZeroProb) continue;
      const double t = params.theta(j, c);
      mi += q[c] * t * std::log(t / on);
      mi += q[c] * (1.0 - t) * std::log((1.0 - t) / off);
    }
    out[j] = std::max(mi, 0.0);
  }
  return out;
}
}  // namespace detail

// Per-word contributions to doc_mi_score, under the document's posterior.
inline std::vector<double> doc_mi_terms(const NbParams& params, std::span<const std::uint8_t> x_row) {
  const auto pred = predict(params, x_row);
  return detail::label_word_mi(params, pred.posterior.probs());
}

inline double doc_mi_from_posterior(const NbParams& params, const DiscreteDist& posterior) {
  const auto terms = detail::label_word_mi(params, posterior.probs());
  return std::accumulate(terms.begin(), terms.end(), 0.0);
}

inline double doc_mi_score(const NbParams& params, std::span<const std::uint8_t> x_row) {
  return doc_mi_from_posterior(params, predict(params, x_row).posterior);
}

// I(x_j; y) under the class prior, for every word.
inline std::vector<double> word_mi(const NbParams& params) { return detail::label_word_mi(params, params.prior()); }

struct TopWords {
  std::vector<std::vector<std::size_t>> per_class;  // by theta(j, c), descending
  std::vector<std::size_t> by_mi;                   // by word_mi, descending
};

namespace detail {
inline std::vector<std::size_t> rank_desc(std::span<const double> keys, std::size_t k) {
  std::vector<std::size_t> idx(keys.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return keys[a] > keys[b]; });
  idx.resize(k);
  return idx;
}
}  // namespace detail

inline TopWords top_words(const NbParams& params, std::size_t k) {
  if (k > params.n_words()) {
    throw std::invalid_argument("nb::top_words: k=" + std::to_string(k) + " exceeds vocabulary size " +
                                std::to_string(params.n_words()));
  }
  TopWords out;
  std::vector<double> column(params.n_words());
  for (std::size_t c = 0; c < params.n_classes(); ++c) {
    for (std::size_t j = 0; j < params.n_words(); ++j) column[j] = params.theta(j, c);
    out.per_class.push_back(detail::rank_desc(column, k));
  }
  const auto mi = word_mi(params);
  out.by_mi = detail::rank_desc(mi, k);
  return out;
}

// Text export, exact decimals:
//   infoplan-naive-bayes v1
//   classes C / words D / alpha a / class_counts ... / log_pi ...
//   theta <word|-> v_0 ... v_{C-1}     (D lines)
inline void write_params(std::ostream& out, const NbParams& params) {
  out << "infoplan-naive-bayes v1\n";
  out << "classes " << params.n_classes() << '\n';
  out << "words " << params.n_words() << '\n';
  out << "alpha " << format_double(params.alpha()) << '\n';
  out << "class_counts " << join_doubles(params.class_counts()) << '\n';
  out << "log_pi " << join_doubles(params.log_pi()) << '\n';
  for (std::size_t j = 0; j < params.n_words(); ++j) {
    out << "theta " << (params.words().empty() ? std::string("-") : params.words()[j]);
    for (std::size_t c = 0; c < params.n_classes(); ++c) out << ' ' << format_double(params.theta(j, c));
    out << '\n';
  }
}

inline NbParams read_params(std::istream& in) {
  LineReader reader(in);
  auto header = reader.next();
  if (header.size() != 2 || header[0] != "infoplan-naive-bayes" || header[1] != "v1") {
    throw std::runtime_error("not an infoplan naive Bayes export");
  }
  auto one = [&](std::string_view key) {
    auto f = reader.expect(key);
    if (f.size() != 1) throw std::runtime_error("line " + std::to_string(reader.line_no()) + ": expected one value");
    return std::string(f[0]);
  };
  const auto C = static_cast<std::size_t>(parse_int(one("classes")));
  const auto D = static_cast<std::size_t>(parse_int(one("words")));
  const double alpha = parse_double(one("alpha"));
  auto counts = reader.expect_doubles("class_counts", C);
  auto log_pi = reader.expect_doubles("log_pi", C);
  std::vector<double> theta(D * C);
  std::vector<std::string> words(D);
  bool named = false;
  for (std::size_t j = 0; j < D; ++j) {
    auto f = reader.expect("theta");
    if (f.size() != C + 1) throw std::runtime_error("line " + std::to_string(reader.line_no()) + ": bad theta row");
    words[j] = std::string(f[0]);
    named = named || words[j] != "-";
    for (std::size_t c = 0; c < C; ++c) theta[j * C + c] = parse_double(f[c + 1]);
  }
  if (!named) words.clear();
  return NbParams(D, C, std::move(theta), std::move(log_pi), alpha, std::move(counts), std::move(words));
}

inline std::string to_text(const NbParams& params) {
  std::ostringstream out;
  write_params(out, params);
  return out.str();
}

inline NbParams from_text(const std::string& text) {
  std::istringstream in(text);
  return read_params(in);
}

}  // namespace infoplan::nb
