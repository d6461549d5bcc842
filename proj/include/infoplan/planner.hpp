#pragma once

// Pool-based active learning: score the pool with the current model, take
// the top k (or a seeded random k), reveal their targets through an oracle,
// retrain from scratch, evaluate on the holdout, repeat.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "infoplan/corpus.hpp"
#include "infoplan/info_measures.hpp"
#include "infoplan/naive_bayes.hpp"
#include "infoplan/neural_net.hpp"
#include "infoplan/random.hpp"
#include "infoplan/slda.hpp"
#include "infoplan/text_format.hpp"

namespace infoplan::planner {

enum class ModelKind { naive_bayes, slda, neural };
enum class AcquisitionKind { random, entropy, mutual_information };
enum class Task { classification, regression };

inline std::string to_string(ModelKind m) {
  switch (m) {
    case ModelKind::naive_bayes: return "nb";
    case ModelKind::slda: return "slda";
    case ModelKind::neural: return "nn";
  }
  return "?";
}

inline std::string to_string(AcquisitionKind a) {
  switch (a) {
    case AcquisitionKind::random: return "random";
    case AcquisitionKind::entropy: return "entropy";
    case AcquisitionKind::mutual_information: return "mi";
  }
  return "?";
}

inline ModelKind parse_model(const std::string& s) {
  if (s == "nb" || s == "naive_bayes") return ModelKind::naive_bayes;
  if (s == "slda") return ModelKind::slda;
  if (s == "nn" || s == "neural") return ModelKind::neural;
  throw std::invalid_argument("unknown model '" + s + "' (expected nb, slda or nn)");
}

inline AcquisitionKind parse_acquisition(const std::string& s) {
  if (s == "random") return AcquisitionKind::random;
  if (s == "entropy") return AcquisitionKind::entropy;
  if (s == "mi" || s == "mutual_information") return AcquisitionKind::mutual_information;
  throw std::invalid_argument("unknown acquisition '" + s + "' (expected random, entropy or mi)");
}

inline Task task_of(ModelKind m) { return m == ModelKind::slda ? Task::regression : Task::classification; }

inline void check_supported(ModelKind m, AcquisitionKind a) {
  if (m == ModelKind::slda && a == AcquisitionKind::mutual_information) {
    throw std::invalid_argument("mutual-information acquisition is not defined for slda (use random or entropy)");
  }
}

// --- selection --------------------------------------------------------------

struct ScoredId {
  std::string id;
  double score = 0.0;
};

// Top k by score with ties broken by ascending id, or a seeded uniform
// sample for random acquisition. k beyond the pool returns the whole pool.
inline std::vector<std::string> select_batch(std::span<const ScoredId> scores, std::size_t k, AcquisitionKind kind,
                                             std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("select_batch: k must be >= 1");
  if (scores.empty()) throw std::invalid_argument("select_batch: pool is empty");
  std::vector<ScoredId> items(scores.begin(), scores.end());
  const std::size_t take = std::min(k, items.size());
  if (kind == AcquisitionKind::random) {
    std::sort(items.begin(), items.end(), [](const ScoredId& a, const ScoredId& b) { return a.id < b.id; });
    Rng rng(derive_seed(seed, 0x5e1ec7));
    rng.shuffle(items);
  } else {
    std::sort(items.begin(), items.end(), [](const ScoredId& a, const ScoredId& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
  }
  std::vector<std::string> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(items[i].id);
  return out;
}

// --- data -------------------------------------------------------------------

struct Target {
  std::optional<int> label;
  std::optional<double> score;
  bool operator==(const Target&) const = default;
};

struct DatasetOptions {
  int min_df = 1;
  StopwordSet stopwords = default_stopwords();
  std::size_t n_classes = 0;  // 0: one more than the largest label in the corpus
  std::size_t max_seq_len = 32;
};

// Everything the learners need, computed once per corpus. The vocabulary is
// built from document text only, never from labels.
class Dataset {
 public:
  Dataset(std::vector<Document> docs, const DatasetOptions& opt = {})
      : docs_(std::move(docs)), vocab_(build_vocabulary(docs_, opt.min_df, opt.stopwords)),
        binary_(vectorize(docs_, vocab_, BowMode::binary)), counts_(vectorize(docs_, vocab_, BowMode::count)) {
    for (std::size_t i = 0; i < docs_.size(); ++i) index_.emplace(docs_[i].id, i);
    std::size_t c = opt.n_classes;
    if (c == 0) {
      for (const auto& d : docs_)
        if (d.label) c = std::max(c, static_cast<std::size_t>(*d.label) + 1);
    }
    n_classes_ = c;
    const nn::TextEncoder enc(vocab_);
    max_seq_len_ = opt.max_seq_len;
    for (const auto& d : docs_) sequences_.push_back(enc.encode(d.tokens, max_seq_len_));
  }

  std::size_t size() const { return docs_.size(); }
  const std::vector<Document>& docs() const { return docs_; }
  const Document& doc(std::size_t row) const { return docs_.at(row); }
  const Vocabulary& vocabulary() const { return vocab_; }
  const BowMatrix& binary() const { return binary_; }
  const BowMatrix& counts() const { return counts_; }
  const std::vector<std::uint32_t>& sequence(std::size_t row) const { return sequences_.at(row); }
  std::size_t n_classes() const { return n_classes_; }
  std::size_t max_seq_len() const { return max_seq_len_; }

  std::size_t row_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw std::out_of_range("unknown document id '" + id + "'");
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.count(id) != 0; }

  // Ground truth stored in the corpus file.
  Target truth(std::size_t row) const { return Target{docs_.at(row).label, docs_.at(row).score}; }

 private:
  std::vector<Document> docs_;
  Vocabulary vocab_;
  BowMatrix binary_;
  BowMatrix counts_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::uint32_t>> sequences_;
  std::size_t n_classes_ = 0;
  std::size_t max_seq_len_ = 0;
};

// Reveals targets for queried ids. Answers for an id never change.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Target query(const std::string& id) = 0;
};

// Answers from the corpus's own labels/scores.
class SimulatedOracle : public Oracle {
 public:
  explicit SimulatedOracle(const Dataset& data) : data_(data) {}
  Target query(const std::string& id) override {
    ++queries_;
    return data_.truth(data_.row_of(id));
  }
  std::size_t queries() const { return queries_; }

 private:
  const Dataset& data_;
  std::size_t queries_ = 0;
};

// --- learners ---------------------------------------------------------------

struct Prediction {
  std::vector<double> posterior;  // classification: class probabilities
  double mean = 0.0;              // regression: predictive mean
  double entropy = 0.0;           // predictive entropy (nats)
};

class Learner {
 public:
  virtual ~Learner() = default;
  // Fit from scratch; rows index the Dataset and arrive in ascending order.
  virtual void train(std::span<const std::size_t> rows, std::span<const Target> targets, std::uint64_t seed) = 0;
  virtual std::vector<double> acquisition_scores(std::span<const std::size_t> rows, AcquisitionKind kind,
                                                 std::uint64_t seed) const = 0;
  virtual std::vector<Prediction> predict(std::span<const std::size_t> rows, std::uint64_t seed) const = 0;
  virtual std::string checkpoint() const = 0;
};

struct ModelOptions {
  double nb_alpha = 1.0;

  slda::SldaHyper slda_hyper{};
  slda::SamplerConfig slda_sampler{};
  slda::ScoreConfig slda_score{};
  std::size_t slda_score_budget = 0;  // score at most this many pool docs per round; 0 = all

  std::size_t nn_embed_dim = 50;
  std::size_t nn_conv_filters = 32;
  std::size_t nn_kernel_size = 5;
  std::size_t nn_hidden_dim = 64;
  double nn_dropout = 0.5;
  std::size_t nn_mc_passes = 32;
  nn::TrainConfig nn_train{};
  std::string nn_embedding_text;  // contents of an embedding file; empty = seeded random
  std::uint64_t nn_embedding_seed = 0;
};

namespace detail {

inline std::vector<int> labels_of(std::span<const Target> targets) {
  std::vector<int> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    if (!t.label) throw std::invalid_argument("classification target without a label");
    out.push_back(*t.label);
  }
  return out;
}

inline std::vector<double> scores_of(std::span<const Target> targets) {
  std::vector<double> out;
  out.reserve(targets.size());
  for (const auto& t : targets) {
    if (!t.score) throw std::invalid_argument("regression target without a score");
    out.push_back(*t.score);
  }
  return out;
}

inline std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace detail

class NbLearner : public Learner {
 public:
  NbLearner(const Dataset& data, double alpha) : data_(data), alpha_(alpha) {}

  void train(std::span<const std::size_t> rows, std::span<const Target> targets, std::uint64_t) override {
    const auto labels = detail::labels_of(targets);
    params_ = nb::fit_allow_empty_classes(data_.binary(), rows, labels, data_.n_classes(), alpha_,
                                          data_.vocabulary().words());
  }

  std::vector<double> acquisition_scores(std::span<const std::size_t> rows, AcquisitionKind kind,
                                         std::uint64_t) const override {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) {
      const auto pred = nb::predict(model(), data_.binary().row(r));
      out.push_back(kind == AcquisitionKind::mutual_information ? nb::doc_mi_from_posterior(model(), pred.posterior)
                                                                : entropy(pred.posterior));
    }
    return out;
  }

  std::vector<Prediction> predict(std::span<const std::size_t> rows, std::uint64_t) const override {
    std::vector<Prediction> out;
    for (auto r : rows) {
      auto pred = nb::predict(model(), data_.binary().row(r));
      Prediction p;
      p.entropy = entropy(pred.posterior);
      p.posterior = pred.posterior.probs();
      out.push_back(std::move(p));
    }
    return out;
  }

  std::string checkpoint() const override { return nb::to_text(model()); }
  const nb::NbParams& model() const {
    if (!params_) throw std::logic_error("NbLearner: not trained");
    return *params_;
  }

 private:
  const Dataset& data_;
  double alpha_;
  std::optional<nb::NbParams> params_;
};

class SldaLearner : public Learner {
 public:
  SldaLearner(const Dataset& data, const ModelOptions& opt) : data_(data), opt_(opt) {}

  void train(std::span<const std::size_t> rows, std::span<const Target> targets, std::uint64_t seed) override {
    const auto y = detail::scores_of(targets);
    auto cfg = opt_.slda_sampler;
    cfg.seed = seed;
    trace_ = slda::fit_mcmc(data_.counts(), rows, y, opt_.slda_hyper, cfg);
    fallback_mean_ = y.empty() ? 0.0 : std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  }

  std::vector<double> acquisition_scores(std::span<const std::size_t> rows, AcquisitionKind kind,
                                         std::uint64_t seed) const override {
    check_supported(ModelKind::slda, kind);
    // With a budget, only a seeded random subset of the pool is scored and
    // the rest rank last.
    std::vector<bool> scored(rows.size(), true);
    if (opt_.slda_score_budget > 0 && opt_.slda_score_budget < rows.size()) {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng rng(derive_seed(seed, 0xb0d6e7));
      rng.shuffle(order);
      std::fill(scored.begin(), scored.end(), false);
      for (std::size_t i = 0; i < opt_.slda_score_budget; ++i) scored[order[i]] = true;
    }
    std::vector<double> out(rows.size(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (scored[i]) out[i] = one(rows[i], derive_seed(seed, rows[i])).entropy;
    return out;
  }

  std::vector<Prediction> predict(std::span<const std::size_t> rows, std::uint64_t seed) const override {
    std::vector<Prediction> out;
    for (auto r : rows) out.push_back(one(r, derive_seed(seed, r)));
    return out;
  }

  std::string checkpoint() const override { return slda::to_text(model()); }
  const slda::SldaTrace& model() const {
    if (!trace_) throw std::logic_error("SldaLearner: not trained");
    return *trace_;
  }

 private:
  Prediction one(std::size_t row, std::uint64_t seed) const {
    const auto doc = slda::tokens_of(data_.counts().row(row));
    Prediction p;
    if (doc.empty()) {
      // nothing to assign topics to: fall back to the training mean
      p.mean = fallback_mean_;
      p.entropy = gaussian_entropy(model().hyper.sigma2);
      return p;
    }
    const auto mix = slda::predictive_mixture(model(), doc, opt_.slda_score.inner_sweeps, opt_.slda_score.components, seed);
    p.mean = mix.mean();
    p.entropy = slda::score_entropy(mix, opt_.slda_score.draws, seed);
    return p;
  }

  const Dataset& data_;
  ModelOptions opt_;
  std::optional<slda::SldaTrace> trace_;
  double fallback_mean_ = 0.0;
};

class NeuralLearner : public Learner {
 public:
  NeuralLearner(const Dataset& data, const ModelOptions& opt) : data_(data), opt_(opt) {
    cfg_.vocab_size = data.vocabulary().size() + 2;
    cfg_.embed_dim = opt.nn_embed_dim;
    cfg_.conv_filters = opt.nn_conv_filters;
    cfg_.kernel_size = opt.nn_kernel_size;
    cfg_.hidden_dim = opt.nn_hidden_dim;
    cfg_.n_classes = data.n_classes();
    cfg_.dropout_rate = opt.nn_dropout;
    cfg_.max_seq_len = data.max_seq_len();
    cfg_.validate();
    if (opt.nn_embedding_text.empty()) {
      embedding_ = nn::random_embedding(cfg_, opt.nn_embedding_seed);
    } else {
      std::istringstream in(opt.nn_embedding_text);
      embedding_ = nn::load_embeddings(in, nn::TextEncoder(data.vocabulary()), cfg_.embed_dim, opt.nn_embedding_seed);
    }
  }

  void train(std::span<const std::size_t> rows, std::span<const Target> targets, std::uint64_t seed) override {
    const auto labels = detail::labels_of(targets);
    std::vector<nn::Example> examples;
    examples.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      examples.push_back({data_.sequence(rows[i]), static_cast<std::size_t>(labels[i])});
    auto tc = opt_.nn_train;
    tc.seed = seed;
    auto init = nn::init_params(cfg_, seed, embedding_);
    params_ = examples.empty() ? std::move(init) : nn::train(std::move(init), cfg_, tc, examples);
  }

  std::vector<double> acquisition_scores(std::span<const std::size_t> rows, AcquisitionKind kind,
                                         std::uint64_t seed) const override {
    std::vector<double> out;
    out.reserve(rows.size());
    for (auto r : rows) {
      const auto m = nn::mc_predict(model(), cfg_, data_.sequence(r), opt_.nn_mc_passes, derive_seed(seed, r));
      out.push_back(kind == AcquisitionKind::mutual_information ? bald(m) : entropy(m.mean_row()));
    }
    return out;
  }

  std::vector<Prediction> predict(std::span<const std::size_t> rows, std::uint64_t seed) const override {
    std::vector<Prediction> out;
    for (auto r : rows) {
      const auto m = nn::mc_predict(model(), cfg_, data_.sequence(r), opt_.nn_mc_passes, derive_seed(seed, r));
      Prediction p;
      p.posterior = m.mean_row();
      p.entropy = entropy(p.posterior);
      out.push_back(std::move(p));
    }
    return out;
  }

  std::string checkpoint() const override { return nn::checkpoint_text(model(), cfg_); }
  const nn::NetParams& model() const {
    if (!params_) throw std::logic_error("NeuralLearner: not trained");
    return *params_;
  }
  const nn::NetConfig& config() const { return cfg_; }

 private:
  const Dataset& data_;
  ModelOptions opt_;
  nn::NetConfig cfg_;
  nn::Tensor embedding_;
  std::optional<nn::NetParams> params_;
};

using LearnerFactory = std::function<std::unique_ptr<Learner>()>;

inline LearnerFactory default_factory(const Dataset& data, ModelKind kind, const ModelOptions& opt) {
  switch (kind) {
    case ModelKind::naive_bayes:
      return [&data, alpha = opt.nb_alpha] { return std::make_unique<NbLearner>(data, alpha); };
    case ModelKind::slda:
      return [&data, opt] { return std::make_unique<SldaLearner>(data, opt); };
    case ModelKind::neural: {
      // The embedding table is shared by every retrain; build it once.
      auto proto = std::make_shared<NeuralLearner>(data, opt);
      return [proto] { return std::make_unique<NeuralLearner>(*proto); };
    }
  }
  throw std::invalid_argument("unknown model kind");
}

// --- evaluation -------------------------------------------------------------

struct Metrics {
  std::string name;  // "accuracy" or "mse"
  double value = 0.0;
  double mean_entropy = 0.0;
};

inline Metrics evaluate(const Learner& model, const Dataset& data, std::span<const std::size_t> holdout, Task task,
                        std::uint64_t seed) {
  if (holdout.empty()) throw std::invalid_argument("evaluate: empty holdout");
  const auto preds = model.predict(holdout, seed);
  Metrics m;
  m.name = task == Task::classification ? "accuracy" : "mse";
  double total = 0.0, ent = 0.0;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    const auto truth = data.truth(holdout[i]);
    ent += preds[i].entropy;
    if (task == Task::classification) {
      if (!truth.label) throw std::invalid_argument("evaluate: holdout document without a label");
      total += detail::argmax(preds[i].posterior) == static_cast<std::size_t>(*truth.label) ? 1.0 : 0.0;
    } else {
      if (!truth.score) throw std::invalid_argument("evaluate: holdout document without a score");
      const double e = preds[i].mean - *truth.score;
      total += e * e;
    }
  }
  const double n = static_cast<double>(holdout.size());
  m.value = total / n;
  m.mean_entropy = ent / n;
  return m;
}

// --- trials -----------------------------------------------------------------

struct TrialConfig {
  ModelKind model = ModelKind::naive_bayes;
  AcquisitionKind acquisition = AcquisitionKind::entropy;
  std::size_t k = 10;
  int rounds = 10;
  std::uint64_t seed = 0;
  ModelOptions options{};
};

struct CurvePoint {
  int round = 0;
  std::size_t n_labelled = 0;
  std::string metric_name;
  double metric_value = 0.0;
  double mean_entropy = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct TrialResult {
  ModelKind model = ModelKind::naive_bayes;
  AcquisitionKind acquisition = AcquisitionKind::random;
  std::uint64_t seed = 0;
  std::vector<CurvePoint> curve;
  std::vector<std::string> final_labelled;
  std::optional<std::string> truncated;  // why fewer rounds than requested ran
};

struct PoolState {
  std::vector<std::string> labelled;  // in order of arrival
  std::vector<std::string> pool;
  std::vector<std::string> holdout;
  int round = 0;
};

struct BatchItem {
  std::string id;
  double score = 0.0;
  Prediction prediction;
};

// Per-round seeds depend only on the trial seed and the round, so every
// acquisition kind trains identically-seeded models.
struct RoundSeeds {
  std::uint64_t model, score, select, eval;
  static RoundSeeds of(std::uint64_t trial_seed, int round) {
    const auto r = static_cast<std::uint64_t>(round);
    return {derive_seed(trial_seed, 0x40de1, r), derive_seed(trial_seed, 0x5c0e, r), derive_seed(trial_seed, 0x5e1, r),
            derive_seed(trial_seed, 0xe7a1, r)};
  }
};

using RoundObserver = std::function<void(const PoolState&, const CurvePoint&)>;

// One trial, advanced a round at a time. The annotation service drives the
// same object with human labels.
class TrialRunner {
 public:
  TrialRunner(const Dataset& data, DataSplit split, TrialConfig cfg, LearnerFactory factory = {})
      : data_(data), cfg_(std::move(cfg)), factory_(std::move(factory)) {
    if (cfg_.k == 0) throw std::invalid_argument("trial: k must be >= 1");
    if (cfg_.rounds < 1) throw std::invalid_argument("trial: rounds must be >= 1");
    check_supported(cfg_.model, cfg_.acquisition);
    if (task_of(cfg_.model) == Task::classification && data_.n_classes() < 2) {
      throw std::invalid_argument("trial: classification needs at least two classes");
    }
    if (!factory_) factory_ = default_factory(data_, cfg_.model, cfg_.options);
    std::unordered_set<std::string> seen;
    auto claim = [&](const std::vector<std::string>& ids) {
      for (const auto& id : ids) {
        data_.row_of(id);
        if (!seen.insert(id).second) throw std::invalid_argument("split: id '" + id + "' appears twice");
      }
    };
    claim(split.train_ids);
    claim(split.pool_ids);
    claim(split.holdout_ids);
    if (split.holdout_ids.empty()) throw std::invalid_argument("trial: empty holdout");
    state_.pool = std::move(split.pool_ids);
    state_.holdout = std::move(split.holdout_ids);
    for (const auto& id : split.train_ids) {
      const auto t = data_.truth(data_.row_of(id));
      check_target(id, t);
      state_.labelled.push_back(id);
      targets_.emplace(id, t);
    }
    for (const auto& id : state_.holdout) holdout_rows_.push_back(data_.row_of(id));
    retrain_and_evaluate();
  }

  const PoolState& state() const { return state_; }
  const std::vector<CurvePoint>& curve() const { return curve_; }
  const TrialConfig& config() const { return cfg_; }
  const Learner& model() const { return *model_; }
  const std::map<std::string, Target>& revealed() const { return targets_; }

  bool done() const { return state_.pool.empty() || state_.round >= cfg_.rounds; }

  // Next batch, highest score first. Random acquisition reports score 0
  // and keeps sample order.
  std::vector<BatchItem> propose() const {
    if (done()) throw std::logic_error("trial: no further rounds");
    const auto seeds = RoundSeeds::of(cfg_.seed, state_.round);
    std::vector<std::size_t> rows;
    rows.reserve(state_.pool.size());
    for (const auto& id : state_.pool) rows.push_back(data_.row_of(id));
    std::vector<ScoredId> scored(rows.size());
    std::vector<double> scores(rows.size(), 0.0);
    if (cfg_.acquisition != AcquisitionKind::random) scores = model_->acquisition_scores(rows, cfg_.acquisition, seeds.score);
    for (std::size_t i = 0; i < rows.size(); ++i) scored[i] = {state_.pool[i], scores[i]};
    const auto chosen = select_batch(scored, cfg_.k, cfg_.acquisition, seeds.select);
    std::unordered_map<std::string, double> by_id;
    for (const auto& s : scored) by_id.emplace(s.id, s.score);
    std::vector<std::size_t> chosen_rows;
    for (const auto& id : chosen) chosen_rows.push_back(data_.row_of(id));
    auto preds = model_->predict(chosen_rows, seeds.eval);
    std::vector<BatchItem> out;
    for (std::size_t i = 0; i < chosen.size(); ++i) out.push_back({chosen[i], by_id.at(chosen[i]), std::move(preds[i])});
    return out;
  }

  // Reveal targets for exactly the proposed ids, then retrain and evaluate.
  void commit(const std::vector<std::pair<std::string, Target>>& answers) {
    if (done()) throw std::logic_error("trial: no further rounds");
    std::unordered_set<std::string> in_pool(state_.pool.begin(), state_.pool.end()), moved;
    for (const auto& [id, t] : answers) {
      if (!in_pool.count(id)) throw std::invalid_argument("trial: '" + id + "' is not in the pool");
      if (!moved.insert(id).second) throw std::invalid_argument("trial: '" + id + "' answered twice");
      check_target(id, t);
    }
    if (moved.size() > cfg_.k) throw std::invalid_argument("trial: more answers than k");
    for (const auto& [id, t] : answers) {
      state_.labelled.push_back(id);
      targets_.emplace(id, t);
    }
    std::erase_if(state_.pool, [&](const std::string& id) { return moved.count(id) != 0; });
    ++state_.round;
    retrain_and_evaluate();
  }

  std::optional<std::string> truncation() const {
    if (state_.round < cfg_.rounds && state_.pool.empty()) {
      return "pool exhausted after " + std::to_string(state_.round) + " of " + std::to_string(cfg_.rounds) + " rounds";
    }
    return std::nullopt;
  }

 private:
  void check_target(const std::string& id, const Target& t) const {
    if (task_of(cfg_.model) == Task::classification) {
      if (!t.label) throw std::invalid_argument("document '" + id + "' has no label");
      if (*t.label < 0 || static_cast<std::size_t>(*t.label) >= data_.n_classes()) {
        throw std::invalid_argument("document '" + id + "': label out of range");
      }
    } else if (!t.score || !std::isfinite(*t.score)) {
      throw std::invalid_argument("document '" + id + "' has no score");
    }
  }

  void retrain_and_evaluate() {
    const auto seeds = RoundSeeds::of(cfg_.seed, state_.round);
    // canonical row order so the fit does not depend on arrival order
    std::vector<std::size_t> rows;
    for (const auto& id : state_.labelled) rows.push_back(data_.row_of(id));
    std::sort(rows.begin(), rows.end());
    std::vector<Target> targets;
    for (auto r : rows) targets.push_back(targets_.at(data_.doc(r).id));
    model_ = factory_();
    model_->train(rows, targets, seeds.model);
    const auto m = evaluate(*model_, data_, holdout_rows_, task_of(cfg_.model), seeds.eval);
    curve_.push_back({state_.round, state_.labelled.size(), m.name, m.value, m.mean_entropy});
  }

  const Dataset& data_;
  TrialConfig cfg_;
  LearnerFactory factory_;
  PoolState state_;
  std::map<std::string, Target> targets_;
  std::vector<std::size_t> holdout_rows_;
  std::unique_ptr<Learner> model_;
  std::vector<CurvePoint> curve_;
};

inline TrialResult run_trial(const Dataset& data, const DataSplit& split, const TrialConfig& cfg, Oracle& oracle,
                             LearnerFactory factory = {}, const RoundObserver& observer = {}) {
  TrialRunner runner(data, split, cfg, std::move(factory));
  if (observer) observer(runner.state(), runner.curve().back());
  while (!runner.done()) {
    std::vector<std::pair<std::string, Target>> answers;
    for (const auto& item : runner.propose()) answers.emplace_back(item.id, oracle.query(item.id));
    runner.commit(answers);
    if (observer) observer(runner.state(), runner.curve().back());
  }
  TrialResult out;
  out.model = cfg.model;
  out.acquisition = cfg.acquisition;
  out.seed = cfg.seed;
  out.curve = runner.curve();
  out.final_labelled = runner.state().labelled;
  out.truncated = runner.truncation();
  return out;
}

// --- experiments ------------------------------------------------------------

struct ExperimentConfig {
  ModelKind model = ModelKind::naive_bayes;
  std::vector<AcquisitionKind> acquisitions{AcquisitionKind::random, AcquisitionKind::entropy};
  SplitSizes split{};
  std::size_t k = 10;
  int rounds = 10;
  int trials = 10;
  std::uint64_t base_seed = 0;
  ModelOptions options{};
  unsigned threads = 1;
};

struct AggregatePoint {
  int round = 0;
  double n_labelled = 0.0;
  double metric_mean = 0.0, metric_std = 0.0;
  double entropy_mean = 0.0, entropy_std = 0.0;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialResult> trials;  // trial-major, acquisition-minor
  std::map<AcquisitionKind, std::vector<AggregatePoint>> aggregate;
};

inline double sample_std(std::span<const double> v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Pointwise mean and sample std over trials; rounds missing from a
// truncated trial are simply absent from that round's sample.
inline std::vector<AggregatePoint> aggregate_curves(const std::vector<const TrialResult*>& trials) {
  std::size_t longest = 0;
  for (auto* t : trials) longest = std::max(longest, t->curve.size());
  std::vector<AggregatePoint> out;
  for (std::size_t r = 0; r < longest; ++r) {
    std::vector<double> metric, ent, lab;
    for (auto* t : trials) {
      if (r >= t->curve.size()) continue;
      metric.push_back(t->curve[r].metric_value);
      ent.push_back(t->curve[r].mean_entropy);
      lab.push_back(static_cast<double>(t->curve[r].n_labelled));
    }
    auto mean = [](const std::vector<double>& v) {
      return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    AggregatePoint p;
    p.round = static_cast<int>(r);
    p.n_labelled = mean(lab);
    p.metric_mean = mean(metric);
    p.metric_std = sample_std(metric, p.metric_mean);
    p.entropy_mean = mean(ent);
    p.entropy_std = sample_std(ent, p.entropy_mean);
    out.push_back(p);
  }
  return out;
}

// Trial t uses seed base_seed + t for both its split and its models; all
// acquisition kinds in a trial share the split. Jobs may run on several
// threads; results do not depend on the thread count.
inline ExperimentResult run_experiment(const Dataset& data, const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("run_experiment: need at least one trial");
  if (cfg.acquisitions.empty()) throw std::invalid_argument("run_experiment: no acquisition kinds");
  for (auto a : cfg.acquisitions) check_supported(cfg.model, a);
  const std::size_t n_kinds = cfg.acquisitions.size();
  const std::size_t n_jobs = static_cast<std::size_t>(cfg.trials) * n_kinds;
  ExperimentResult res;
  res.config = cfg;
  res.trials.resize(n_jobs);
  std::vector<std::string> errors(n_jobs);
  // one factory per model so the neural embedding is built once
  const auto factory = default_factory(data, cfg.model, cfg.options);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j; (j = next.fetch_add(1)) < n_jobs;) {
      const int t = static_cast<int>(j / n_kinds);
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(t);
      try {
        const auto sp = split(data.docs(), cfg.split, seed);
        TrialConfig tc{cfg.model, cfg.acquisitions[j % n_kinds], cfg.k, cfg.rounds, seed, cfg.options};
        SimulatedOracle oracle(data);
        res.trials[j] = run_trial(data, sp, tc, oracle, factory);
      } catch (const std::exception& e) {
        errors[j] = "trial " + std::to_string(t) + " (" + to_string(cfg.acquisitions[j % n_kinds]) + "): " + e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n_jobs)));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (!e.empty()) throw std::runtime_error(e);
  for (std::size_t a = 0; a < n_kinds; ++a) {
    std::vector<const TrialResult*> group;
    for (int t = 0; t < cfg.trials; ++t) group.push_back(&res.trials[static_cast<std::size_t>(t) * n_kinds + a]);
    res.aggregate[cfg.acquisitions[a]] = aggregate_curves(group);
  }
  return res;
}

inline constexpr const char* kCsvHeader =
    "model,acquisition,trial,round,n_labelled,metric_name,metric_value,mean_entropy,seed";

inline void write_csv(std::ostream& out, const ExperimentResult& res) {
  out << kCsvHeader << '\n';
  const std::size_t n_kinds = res.config.acquisitions.size();
  for (std::size_t j = 0; j < res.trials.size(); ++j) {
    const auto& t = res.trials[j];
    for (const auto& p : t.curve) {
      out << to_string(t.model) << ',' << to_string(t.acquisition) << ',' << j / n_kinds << ',' << p.round << ','
          << p.n_labelled << ',' << p.metric_name << ',' << format_double(p.metric_value) << ','
          << format_double(p.mean_entropy) << ',' << t.seed << '\n';
    }
  }
}

inline std::string csv_text(const ExperimentResult& res) {
  std::ostringstream out;
  write_csv(out, res);
  return out.str();
}

}  // namespace infoplan::planner
