#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "infoplan/planner.hpp"
#include "infoplan/synthetic.hpp"
#include "planner_fuzz.hpp"

namespace infoplan::planner {
namespace {

std::vector<ScoredId> abc() { return {{"a", 0.1}, {"b", 0.9}, {"c", 0.5}}; }

TEST(SelectBatch, TopKByScore) {
  const auto s = abc();
  EXPECT_EQ(select_batch(s, 2, AcquisitionKind::entropy, 0), (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(select_batch(s, 2, AcquisitionKind::mutual_information, 0), (std::vector<std::string>{"b", "c"}));
}

TEST(SelectBatch, TiesGoToLowestIds) {
  const std::vector<ScoredId> s{{"d", 1.0}, {"b", 1.0}, {"c", 1.0}, {"a", 1.0}};
  EXPECT_EQ(select_batch(s, 2, AcquisitionKind::entropy, 0), (std::vector<std::string>{"a", "b"}));
}

TEST(SelectBatch, RandomIsSeeded) {
  std::vector<ScoredId> s;
  for (int i = 0; i < 50; ++i) s.push_back({synthetic::doc_id(i), 0.0});
  const auto a = select_batch(s, 5, AcquisitionKind::random, 3);
  EXPECT_EQ(a, select_batch(s, 5, AcquisitionKind::random, 3));
  EXPECT_NE(a, select_batch(s, 5, AcquisitionKind::random, 4));
  // input order does not matter
  std::reverse(s.begin(), s.end());
  EXPECT_EQ(a, select_batch(s, 5, AcquisitionKind::random, 3));
  EXPECT_EQ(std::set<std::string>(a.begin(), a.end()).size(), 5u);
}

TEST(SelectBatch, LargeKTakesWholePool) {
  const auto s = abc();
  EXPECT_EQ(select_batch(s, 10, AcquisitionKind::entropy, 0).size(), 3u);
  EXPECT_EQ(select_batch(s, 10, AcquisitionKind::random, 0).size(), 3u);
}

TEST(SelectBatch, Errors) {
  EXPECT_THROW(select_batch(std::vector<ScoredId>{}, 1, AcquisitionKind::entropy, 0), std::invalid_argument);
  EXPECT_THROW(select_batch(abc(), 0, AcquisitionKind::entropy, 0), std::invalid_argument);
}

TEST(Names, RoundTrip) {
  for (auto m : {ModelKind::naive_bayes, ModelKind::slda, ModelKind::neural}) EXPECT_EQ(parse_model(to_string(m)), m);
  for (auto a : {AcquisitionKind::random, AcquisitionKind::entropy, AcquisitionKind::mutual_information})
    EXPECT_EQ(parse_acquisition(to_string(a)), a);
  EXPECT_THROW(parse_model("svm"), std::invalid_argument);
  EXPECT_THROW(parse_acquisition("qbc"), std::invalid_argument);
}

// Learner with canned predictions, for evaluate().
class FixedLearner : public Learner {
 public:
  explicit FixedLearner(std::function<Prediction(std::size_t)> f) : f_(std::move(f)) {}
  void train(std::span<const std::size_t>, std::span<const Target>, std::uint64_t) override {}
  std::vector<double> acquisition_scores(std::span<const std::size_t> rows, AcquisitionKind, std::uint64_t) const override {
    return std::vector<double>(rows.size(), 0.0);
  }
  std::vector<Prediction> predict(std::span<const std::size_t> rows, std::uint64_t) const override {
    std::vector<Prediction> out;
    for (auto r : rows) out.push_back(f_(r));
    return out;
  }
  std::string checkpoint() const override { return {}; }

 private:
  std::function<Prediction(std::size_t)> f_;
};

Dataset labelled_set(std::size_t n, std::size_t classes) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n; ++i)
    docs.push_back(Document::make(synthetic::doc_id(i), "word" + std::to_string(i % 3) + " common",
                                  static_cast<int>(i % classes), 0.5));
  DatasetOptions opt;
  opt.n_classes = classes;
  return Dataset(docs, opt);
}

TEST(Evaluate, PerfectClassifier) {
  const auto data = labelled_set(8, 4);
  FixedLearner perfect([&](std::size_t r) {
    Prediction p;
    p.posterior.assign(4, 0.0);
    p.posterior[static_cast<std::size_t>(*data.doc(r).label)] = 1.0;
    return p;
  });
  const std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5, 6, 7};
  const auto m = evaluate(perfect, data, rows, Task::classification, 0);
  EXPECT_EQ(m.name, "accuracy");
  EXPECT_EQ(m.value, 1.0);
}

TEST(Evaluate, UniformPosteriorEntropy) {
  const auto data = labelled_set(8, 4);
  FixedLearner uniform([](std::size_t) {
    Prediction p;
    p.posterior.assign(4, 0.25);
    p.entropy = entropy(p.posterior);
    return p;
  });
  const std::vector<std::size_t> rows{0, 1, 2, 3};
  EXPECT_NEAR(evaluate(uniform, data, rows, Task::classification, 0).mean_entropy, std::log(4.0), 1e-15);
}

TEST(Evaluate, ConstantRegression) {
  const auto data = labelled_set(6, 2);
  FixedLearner constant([](std::size_t) {
    Prediction p;
    p.mean = 0.5;
    return p;
  });
  const std::vector<std::size_t> rows{0, 1, 2};
  const auto m = evaluate(constant, data, rows, Task::regression, 0);
  EXPECT_EQ(m.name, "mse");
  EXPECT_EQ(m.value, 0.0);
  EXPECT_THROW(evaluate(constant, data, std::vector<std::size_t>{}, Task::regression, 0), std::invalid_argument);
}

struct Planted {
  Dataset data;
  DataSplit split;
};

Planted planted(std::size_t docs, SplitSizes sizes, std::uint64_t seed) {
  synthetic::PlantedConfig pc;
  pc.docs = docs;
  pc.seed = seed;
  Dataset data(synthetic::planted_corpus(pc).docs);
  auto sp = split(data.docs(), sizes, seed);
  return {std::move(data), std::move(sp)};
}

TEST(RunTrial, OneBigRoundConvergesAcrossKinds) {
  const auto p = planted(300, {30, 200, 70}, 5);
  std::vector<TrialResult> results;
  for (auto kind : {AcquisitionKind::random, AcquisitionKind::entropy, AcquisitionKind::mutual_information}) {
    TrialConfig tc;
    tc.acquisition = kind;
    tc.k = 200;
    tc.rounds = 1;
    tc.seed = 11;
    SimulatedOracle oracle(p.data);
    results.push_back(run_trial(p.data, p.split, tc, oracle));
  }
  std::set<std::string> expected(p.split.train_ids.begin(), p.split.train_ids.end());
  expected.insert(p.split.pool_ids.begin(), p.split.pool_ids.end());
  for (const auto& r : results) {
    EXPECT_EQ(std::set<std::string>(r.final_labelled.begin(), r.final_labelled.end()), expected);
    EXPECT_EQ(r.curve.back(), results[0].curve.back());
    EXPECT_FALSE(r.truncated);
  }
}

TEST(RunTrial, CurveLengthAndTruncation) {
  const auto p = planted(120, {10, 23, 40}, 2);
  TrialConfig tc;
  tc.k = 5;
  tc.rounds = 10;
  SimulatedOracle oracle(p.data);
  const auto r = run_trial(p.data, p.split, tc, oracle);
  EXPECT_EQ(r.curve.size(), 5u + 1u);  // ceil(23 / 5) rounds plus round 0
  ASSERT_TRUE(r.truncated);
  EXPECT_NE(r.truncated->find("pool exhausted"), std::string::npos);
  EXPECT_EQ(r.curve.back().n_labelled, 33u);
  for (std::size_t i = 1; i < r.curve.size(); ++i) EXPECT_GT(r.curve[i].n_labelled, r.curve[i - 1].n_labelled);

  tc.rounds = 3;
  SimulatedOracle again(p.data);
  const auto short_run = run_trial(p.data, p.split, tc, again);
  EXPECT_EQ(short_run.curve.size(), 4u);
  EXPECT_FALSE(short_run.truncated);
}

TEST(RunTrial, RejectsBadConfigurations) {
  const auto p = planted(120, {10, 20, 40}, 2);
  TrialConfig tc;
  tc.k = 0;
  SimulatedOracle oracle(p.data);
  EXPECT_THROW(run_trial(p.data, p.split, tc, oracle), std::invalid_argument);
  tc.k = 5;
  tc.rounds = 0;
  EXPECT_THROW(run_trial(p.data, p.split, tc, oracle), std::invalid_argument);
  tc.rounds = 2;
  tc.model = ModelKind::slda;
  tc.acquisition = AcquisitionKind::mutual_information;
  EXPECT_THROW(run_trial(p.data, p.split, tc, oracle), std::invalid_argument);
  tc.model = ModelKind::naive_bayes;
  tc.acquisition = AcquisitionKind::entropy;
  auto overlapping = p.split;
  overlapping.pool_ids.push_back(overlapping.holdout_ids.front());
  EXPECT_THROW(run_trial(p.data, overlapping, tc, oracle), std::invalid_argument);
}

TEST(RunTrial, EntropyBatchIsSortedTopOfPool) {
  const auto p = planted(200, {20, 100, 80}, 9);
  TrialConfig tc;
  tc.k = 10;
  tc.rounds = 1;
  TrialRunner runner(p.data, p.split, tc);
  const auto batch = runner.propose();
  ASSERT_EQ(batch.size(), 10u);
  for (std::size_t i = 1; i < batch.size(); ++i) EXPECT_GE(batch[i - 1].score, batch[i].score);
  std::vector<std::size_t> rows;
  for (const auto& id : runner.state().pool) rows.push_back(p.data.row_of(id));
  auto scores = runner.model().acquisition_scores(rows, AcquisitionKind::entropy, 0);
  std::sort(scores.rbegin(), scores.rend());
  EXPECT_EQ(batch[9].score, scores[9]);
  EXPECT_EQ(batch[0].prediction.posterior.size(), p.data.n_classes());
}

TEST(RunTrial, CommitValidatesAnswers) {
  const auto p = planted(120, {10, 20, 40}, 3);
  TrialConfig tc;
  tc.k = 4;
  tc.rounds = 2;
  TrialRunner runner(p.data, p.split, tc);
  const auto before = runner.state().pool;
  EXPECT_THROW(runner.commit({{p.split.holdout_ids[0], Target{0, {}}}}), std::invalid_argument);
  EXPECT_THROW(runner.commit({{before[0], Target{99, {}}}}), std::invalid_argument);
  EXPECT_THROW(runner.commit({{before[0], Target{}}}), std::invalid_argument);
  EXPECT_EQ(runner.state().pool, before);
  EXPECT_EQ(runner.curve().size(), 1u);
}

TEST(RunTrial, NeuralAndSldaRun) {
  synthetic::SentimentConfig sc;
  sc.docs = 120;
  sc.classes = 3;
  const Dataset nn_data(synthetic::sentiment_corpus(sc).docs);
  TrialConfig tc;
  tc.model = ModelKind::neural;
  tc.acquisition = AcquisitionKind::mutual_information;
  tc.k = 10;
  tc.rounds = 2;
  tc.options.nn_embed_dim = 8;
  tc.options.nn_conv_filters = 8;
  tc.options.nn_hidden_dim = 8;
  tc.options.nn_mc_passes = 4;
  tc.options.nn_train.epochs = 2;
  SimulatedOracle oracle(nn_data);
  const auto r = run_trial(nn_data, split(nn_data.docs(), {20, 40, 30}, 1), tc, oracle);
  EXPECT_EQ(r.curve.size(), 3u);
  EXPECT_EQ(r.curve[0].metric_name, "accuracy");

  synthetic::SldaGenConfig gc;
  gc.docs = 40;
  const Dataset slda_data(synthetic::slda_corpus(gc).docs);
  TrialConfig st;
  st.model = ModelKind::slda;
  st.acquisition = AcquisitionKind::entropy;
  st.k = 3;
  st.rounds = 2;
  st.options.slda_hyper.topics = 2;
  st.options.slda_sampler = {60, 20, 10, 0};
  st.options.slda_score = {2, 20, 200};
  st.options.slda_score_budget = 5;
  SimulatedOracle slda_oracle(slda_data);
  const auto s = run_trial(slda_data, split(slda_data.docs(), {8, 12, 20}, 1), st, slda_oracle);
  EXPECT_EQ(s.curve.size(), 3u);
  EXPECT_EQ(s.curve[0].metric_name, "mse");
  EXPECT_GT(s.curve[0].mean_entropy, 0.0);
}

ExperimentConfig small_experiment() {
  ExperimentConfig ec;
  ec.acquisitions = {AcquisitionKind::random, AcquisitionKind::entropy, AcquisitionKind::mutual_information};
  ec.split = {20, 60, 40};
  ec.k = 10;
  ec.rounds = 3;
  ec.trials = 3;
  ec.base_seed = 40;
  return ec;
}

TEST(Experiment, CsvIsDeterministicAndThreadIndependent) {
  synthetic::PlantedConfig pc;
  pc.docs = 200;
  const Dataset data(synthetic::planted_corpus(pc).docs);
  auto ec = small_experiment();
  const auto a = csv_text(run_experiment(data, ec));
  EXPECT_EQ(a, csv_text(run_experiment(data, ec)));
  ec.threads = 3;
  EXPECT_EQ(a, csv_text(run_experiment(data, ec)));
  EXPECT_EQ(a.substr(0, a.find('\n')), "model,acquisition,trial,round,n_labelled,metric_name,metric_value,mean_entropy,seed");
  // 3 trials x 3 kinds x 4 points
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1 + 36);
  EXPECT_NE(a.find("\nnb,mi,2,3,50,accuracy,"), std::string::npos);
}

TEST(Experiment, SingleTrialAggregateHasZeroSpread) {
  synthetic::PlantedConfig pc;
  pc.docs = 200;
  const Dataset data(synthetic::planted_corpus(pc).docs);
  auto ec = small_experiment();
  ec.trials = 1;
  const auto res = run_experiment(data, ec);
  for (const auto& [kind, agg] : res.aggregate) {
    const TrialResult* t = nullptr;
    for (const auto& tr : res.trials)
      if (tr.acquisition == kind) t = &tr;
    ASSERT_NE(t, nullptr);
    ASSERT_EQ(agg.size(), t->curve.size());
    for (std::size_t r = 0; r < agg.size(); ++r) {
      EXPECT_EQ(agg[r].metric_mean, t->curve[r].metric_value);
      EXPECT_EQ(agg[r].metric_std, 0.0);
      EXPECT_EQ(agg[r].entropy_std, 0.0);
    }
  }
}

TEST(Experiment, TrialSeedsAreBasePlusIndex) {
  synthetic::PlantedConfig pc;
  pc.docs = 200;
  const Dataset data(synthetic::planted_corpus(pc).docs);
  const auto res = run_experiment(data, small_experiment());
  for (std::size_t j = 0; j < res.trials.size(); ++j) EXPECT_EQ(res.trials[j].seed, 40u + j / 3);
  auto ec = small_experiment();
  ec.model = ModelKind::slda;
  EXPECT_THROW(run_experiment(data, ec), std::invalid_argument);
}

TEST(Conservation, FuzzedTrials) {
  std::size_t exhausted = 0;
  for (std::uint64_t c = 0; c < 100; ++c) {
    const auto rep = fuzz::run_conservation_case(c);
    for (const auto& f : rep.failures) ADD_FAILURE() << f;
    exhausted += rep.exhausted;
  }
  // both regimes get exercised
  EXPECT_GT(exhausted, 10u);
  EXPECT_LT(exhausted, 90u);
}

}  // namespace
}  // namespace infoplan::planner
