#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "infoplan/neural_net.hpp"
#include "infoplan/synthetic.hpp"

namespace infoplan::nn {
namespace {

NetConfig small_config(std::size_t vocab = 12, std::size_t classes = 3) {
  NetConfig cfg;
  cfg.vocab_size = vocab;
  cfg.embed_dim = 4;
  cfg.conv_filters = 5;
  cfg.kernel_size = 3;
  cfg.hidden_dim = 6;
  cfg.n_classes = classes;
  cfg.dropout_rate = 0.5;
  cfg.max_seq_len = 10;
  return cfg;
}

std::vector<std::uint32_t> random_ids(Rng& rng, std::size_t vocab, std::size_t len) {
  std::vector<std::uint32_t> ids(len);
  for (auto& id : ids) id = static_cast<std::uint32_t>(1 + rng.below(vocab - 1));
  return ids;
}

// Two classes; class 1 iff token 2 is present. Other tokens are noise.
std::vector<Example> smoke_corpus(std::uint64_t seed, std::size_t n = 60) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t i = 0; i < n; ++i) {
    Example ex;
    const std::size_t len = 4 + rng.below(5);
    for (std::size_t t = 0; t < len; ++t) ex.ids.push_back(static_cast<std::uint32_t>(3 + rng.below(9)));
    ex.label = i % 2;
    if (ex.label == 1) ex.ids[rng.below(len)] = 2;
    out.push_back(std::move(ex));
  }
  return out;
}

// Wide enough that the marker token's embedding is linearly separable from
// the noise tokens; with 4-dim frozen random embeddings it often is not.
NetConfig smoke_config() {
  NetConfig cfg = small_config(24, 2);  // ids 12.. never occur in training
  cfg.embed_dim = 16;
  cfg.conv_filters = 16;
  cfg.hidden_dim = 16;
  return cfg;
}

NetParams zero_weights(const NetConfig& cfg) {
  NetParams p = init_params(cfg, 1);
  for (auto* t : p.trainable()) std::fill(t->values.begin(), t->values.end(), 0.0);
  return p;
}

double accuracy(const NetParams& p, const NetConfig& cfg, std::span<const Example> data) {
  std::size_t hits = 0;
  for (const auto& ex : data) {
    const auto d = forward(p, cfg, ex.ids);
    const auto& probs = d.probs();
    hits += static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin()) == ex.label;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

NetParams trained_smoke_net(const NetConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.seed = seed;
  return train(init_params(cfg, seed), cfg, tc, smoke_corpus(seed));
}

TEST(Config, Validation) {
  auto cfg = small_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.dropout_rate = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.hidden_dim = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = small_config();
  cfg.kernel_size = 11;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Forward, ZeroWeightsGiveUniform) {
  const auto cfg = small_config();
  const auto p = zero_weights(cfg);
  const std::vector<std::uint32_t> ids{3, 4, 5};
  const auto d = forward(p, cfg, ids);
  for (double v : d.probs()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
  EXPECT_NEAR(acquire_entropy(p, cfg, ids, 8, 1), std::log(3.0), 1e-12);
}

TEST(Forward, RateZeroMaskEqualsOff) {
  auto cfg = small_config();
  cfg.dropout_rate = 0.0;
  const auto p = init_params(cfg, 3);
  const std::vector<std::uint32_t> ids{2, 7, 9, 4};
  EXPECT_EQ(forward(p, cfg, ids, 42).probs(), forward(p, cfg, ids).probs());
}

TEST(Forward, SeededMaskIsDeterministic) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 3);
  const std::vector<std::uint32_t> ids{2, 7, 9, 4};
  EXPECT_EQ(forward(p, cfg, ids, 42).probs(), forward(p, cfg, ids, 42).probs());
  EXPECT_EQ(forward(p, cfg, ids).probs(), forward(p, cfg, ids).probs());
}

TEST(Forward, OutOfRangeTokenThrows) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 3);
  const std::vector<std::uint32_t> ids{2, 12};
  EXPECT_THROW(forward(p, cfg, ids), std::out_of_range);
}

TEST(Forward, LongInputsAreTruncated) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 3);
  std::vector<std::uint32_t> ids(10, 5);
  auto longer = ids;
  longer.push_back(11);
  longer.push_back(99);  // past max_seq_len, never looked at
  EXPECT_EQ(forward(p, cfg, ids).probs(), forward(p, cfg, longer).probs());
}

TEST(Forward, LargeLogitsStayFinite) {
  const auto cfg = small_config();
  auto p = zero_weights(cfg);
  p.out_b.values = {50.0, -50.0, 0.0};
  const std::vector<std::uint32_t> ids{3};
  const auto d = forward(p, cfg, ids);
  for (double v : d.probs()) EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(std::accumulate(d.probs().begin(), d.probs().end(), 0.0), 1.0, 1e-12);
}

TEST(Features, MaxPoolIsShiftInvariant) {
  NetConfig cfg = small_config();
  cfg.max_seq_len = 20;
  const auto p = init_params(cfg, 5);
  std::vector<std::uint32_t> a(20, kPadToken), b(20, kPadToken);
  const std::uint32_t pattern[] = {4, 8, 6};
  for (std::size_t i = 0; i < 3; ++i) {
    a[4 + i] = pattern[i];
    b[11 + i] = pattern[i];
  }
  EXPECT_EQ(pooled_features(p, cfg, a), pooled_features(p, cfg, b));
}

TEST(Embedding, PadRowIsZeroAndRowsBounded) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 8);
  for (double v : p.embedding.row(kPadToken)) EXPECT_EQ(v, 0.0);
  EXPECT_NO_THROW(check_embedding(p.embedding, cfg));
  auto bad = p.embedding;
  bad(3, 0) = 101.0;
  EXPECT_THROW(init_params(cfg, 8, bad), std::invalid_argument);
}

TEST(Embedding, FileLoaderParsesExactly) {
  const Vocabulary vocab({"alpha", "beta", "gamma"}, 1, {});
  const TextEncoder enc(vocab);
  std::istringstream in("beta 0.1 -2.5\n\nzeta 9 9\nalpha 1e-3 0.30000000000000004\n");
  std::size_t matched = 0;
  const auto emb = load_embeddings(in, enc, 2, 7, &matched);
  EXPECT_EQ(matched, 2u);
  ASSERT_EQ(emb.rows, 5u);
  EXPECT_EQ(emb(0, 0), 0.0);
  EXPECT_EQ(emb(*vocab.find("beta") + 2, 0), 0.1);
  EXPECT_EQ(emb(*vocab.find("beta") + 2, 1), -2.5);
  EXPECT_EQ(emb(*vocab.find("alpha") + 2, 0), 1e-3);
  EXPECT_EQ(emb(*vocab.find("alpha") + 2, 1), 0.30000000000000004);
  // gamma is missing from the file: seeded random row, same for the same seed
  std::istringstream again("beta 0.1 -2.5\n");
  const auto emb2 = load_embeddings(again, enc, 2, 7);
  const auto g = *vocab.find("gamma") + 2;
  EXPECT_EQ(emb(g, 0), emb2(g, 0));
  EXPECT_NE(emb(g, 0), 0.0);
}

TEST(Embedding, FileLoaderRejectsBadLines) {
  const Vocabulary vocab({"alpha"}, 1, {});
  const TextEncoder enc(vocab);
  std::istringstream short_line("alpha 0.1\n");
  EXPECT_THROW(load_embeddings(short_line, enc, 2, 0), std::runtime_error);
  std::istringstream junk("alpha 0.1 x\n");
  EXPECT_THROW(load_embeddings(junk, enc, 2, 0), std::runtime_error);
}

TEST(Encoder, KnownUnknownAndTruncation) {
  const Vocabulary vocab({"good", "bad"}, 1, {});
  const TextEncoder enc(vocab);
  EXPECT_EQ(enc.vocab_size(), 4u);
  const std::vector<std::string> toks{"good", "meh", "bad", "good"};
  const auto ids = enc.encode(toks, 3);
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[0], *vocab.find("good") + 2);
  EXPECT_EQ(ids[1], kUnknownToken);
  EXPECT_EQ(ids[2], *vocab.find("bad") + 2);
}

TEST(Gradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 100);
    NetConfig cfg = small_config(10 + rng.below(10), 2 + rng.below(4));
    cfg.embed_dim = 2 + rng.below(5);
    cfg.conv_filters = 2 + rng.below(6);
    cfg.kernel_size = 1 + rng.below(4);
    cfg.hidden_dim = 2 + rng.below(8);
    const auto p = init_params(cfg, seed);
    Example ex{random_ids(rng, cfg.vocab_size, 3 + rng.below(8)), rng.below(cfg.n_classes)};
    const auto r = grad_check(p, cfg, ex, 1e-4, 200, seed);
    EXPECT_EQ(r.checked, 200u);
    EXPECT_LT(r.max_relative_error, 1e-3) << "seed " << seed;
  }
}

TEST(Gradient, IdenticalLogitsGiveFiniteGradients) {
  const auto cfg = small_config();
  const auto p = zero_weights(cfg);
  const Example ex{{3, 4, 5}, 1};
  const auto r = grad_check(p, cfg, ex, 1e-4);
  EXPECT_TRUE(std::isfinite(r.max_relative_error));
  EXPECT_LT(r.max_relative_error, 1e-3);
}

TEST(Gradient, CentralDifferenceErrorShrinksQuadratically) {
  // loss as a function of one output bias is smooth; the central-difference
  // error against the analytic derivative is c*eps^2, so doubling eps about
  // quadruples it.
  const auto cfg = small_config();
  const auto p = init_params(cfg, 21);
  const Example ex{{3, 4, 5, 6}, 0};
  const std::vector<Example> one{ex};
  const double p0 = forward(p, cfg, ex.ids)[0];
  const double analytic = p0 - 1.0;  // d loss / d out_b[0]
  auto central = [&](double eps) {
    NetParams q = p;
    q.out_b.values[0] += eps;
    const double up = loss(q, cfg, one);
    q.out_b.values[0] -= 2 * eps;
    const double down = loss(q, cfg, one);
    return (up - down) / (2 * eps);
  };
  const double e1 = std::abs(central(1e-2) - analytic);
  const double e2 = std::abs(central(2e-2) - analytic);
  EXPECT_GT(e1, 0.0);
  EXPECT_NEAR(e2 / e1, 4.0, 0.1);
}

TEST(Train, SeparableCorpusReachesFullAccuracy) {
  const auto cfg = smoke_config();
  const auto data = smoke_corpus(4);
  TrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.seed = 4;
  std::vector<double> losses;
  const auto p = train(init_params(cfg, 4), cfg, tc, data, &losses);
  ASSERT_EQ(losses.size(), 30u);
  EXPECT_LE(losses.back(), losses.front());
  EXPECT_EQ(accuracy(p, cfg, data), 1.0);
}

TEST(Train, ZeroEpochsLeavesParamsUnchanged) {
  const auto cfg = smoke_config();
  const auto init = init_params(cfg, 4);
  TrainConfig tc;
  tc.epochs = 0;
  EXPECT_EQ(train(init, cfg, tc, smoke_corpus(4)), init);
}

TEST(Train, DeterministicAndEmbeddingFrozen) {
  const auto cfg = smoke_config();
  const auto init = init_params(cfg, 4);
  TrainConfig tc;
  tc.epochs = 3;
  tc.seed = 9;
  const auto data = smoke_corpus(5);
  const auto a = train(init, cfg, tc, data);
  const auto b = train(init, cfg, tc, data);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.embedding.values.size(), init.embedding.values.size());
  EXPECT_EQ(std::memcmp(a.embedding.values.data(), init.embedding.values.data(),
                        init.embedding.values.size() * sizeof(double)),
            0);
  EXPECT_NE(a.conv_w, init.conv_w);
}

TEST(Train, RejectsBadInput) {
  const auto cfg = small_config(12, 2);
  const auto init = init_params(cfg, 4);
  TrainConfig tc;
  EXPECT_THROW(train(init, cfg, tc, std::vector<Example>{}), std::invalid_argument);
  const std::vector<Example> bad{{{3}, 2}};
  EXPECT_THROW(train(init, cfg, tc, bad), std::invalid_argument);
}

TEST(McDropout, RateZeroRowsMatchDeterministicPass) {
  auto cfg = small_config();
  cfg.dropout_rate = 0.0;
  const auto p = init_params(cfg, 2);
  const std::vector<std::uint32_t> ids{5, 6, 7};
  const auto m = mc_predict(p, cfg, ids, 6, 11);
  const auto det = forward(p, cfg, ids).probs();
  for (std::size_t t = 0; t < 6; ++t) {
    const auto row = m.row(t);
    EXPECT_TRUE(std::equal(row.begin(), row.end(), det.begin()));
  }
  EXPECT_EQ(acquire_bald(p, cfg, ids, 6, 11), 0.0);
  EXPECT_DOUBLE_EQ(acquire_entropy(p, cfg, ids, 6, 11), entropy(det));
}

TEST(McDropout, SinglePassRow) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 2);
  const std::vector<std::uint32_t> ids{5, 6, 7};
  const auto m = mc_predict(p, cfg, ids, 1, 11);
  EXPECT_EQ(m.passes(), 1u);
  EXPECT_THROW(mc_predict(p, cfg, ids, 0, 11), std::invalid_argument);
}

TEST(McDropout, MeanVarianceShrinksWithPasses) {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 2);
  const std::vector<std::uint32_t> ids{5, 6, 7, 8};
  auto spread = [&](std::size_t T) {
    std::vector<double> means;
    for (std::uint64_t s = 0; s < 20; ++s) means.push_back(mc_predict(p, cfg, ids, T, 1000 * T + s).mean_row()[0]);
    const double mu = std::accumulate(means.begin(), means.end(), 0.0) / 20.0;
    double ss = 0.0;
    for (double m : means) ss += (m - mu) * (m - mu);
    return std::sqrt(ss / 19.0);
  };
  EXPECT_LT(spread(64), spread(8));
}

TEST(McDropout, BaldBetweenZeroAndEntropy) {
  const auto cfg = smoke_config();
  const auto p = trained_smoke_net(cfg, 3);
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const auto ids = random_ids(rng, cfg.vocab_size, 1 + rng.below(10));
    const auto seed = rng.bits();
    const double h = acquire_entropy(p, cfg, ids, 16, seed);
    const double b = acquire_bald(p, cfg, ids, 16, seed);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, h);
    EXPECT_LE(h, std::log(2.0) + 1e-12);
  }
}

TEST(McDropout, TrainedInputsDisagreeLessThanRandomTokens) {
  const auto cfg = smoke_config();
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = trained_smoke_net(cfg, seed);
    const auto data = smoke_corpus(seed);
    Rng rng(seed + 500);
    double seen = 0.0, noise = 0.0;
    for (const auto& ex : data) {
      seen += acquire_bald(p, cfg, ex.ids, 32, seed);
      noise += acquire_bald(p, cfg, random_ids(rng, cfg.vocab_size, ex.ids.size()), 32, seed);
    }
    wins += seen < noise;
  }
  EXPECT_GE(wins, 8);
}

TEST(Checkpoint, RoundTripIsExact) {
  const auto cfg = smoke_config();
  const auto p = trained_smoke_net(cfg, 6);
  const auto text = checkpoint_text(p, cfg);
  std::istringstream in(text);
  const auto [q, qcfg] = read_checkpoint(in);
  EXPECT_EQ(qcfg, cfg);
  EXPECT_EQ(q, p);
  EXPECT_EQ(checkpoint_text(q, qcfg), text);
}

TEST(Checkpoint, RejectsTruncated) {
  const auto cfg = small_config();
  auto text = checkpoint_text(init_params(cfg, 1), cfg);
  text.resize(text.size() / 2);
  std::istringstream in(text);
  EXPECT_THROW(read_checkpoint(in), std::runtime_error);
  std::istringstream wrong("infoplan-slda-trace v1\n");
  EXPECT_THROW(read_checkpoint(wrong), std::runtime_error);
}

TEST(Sentiment, ClusteredEmbeddingsLoadThroughFile) {
  synthetic::SentimentConfig sc;
  sc.docs = 50;
  const auto corpus = synthetic::sentiment_corpus(sc);
  const Vocabulary vocab = build_vocabulary(corpus.docs, 1, {});
  const TextEncoder enc(vocab);
  std::istringstream in(corpus.embedding_text());
  std::size_t matched = 0;
  const auto emb = load_embeddings(in, enc, sc.embed_dim, 0, &matched);
  EXPECT_EQ(matched, vocab.size());
  EXPECT_EQ(emb.rows, vocab.size() + 2);
}

}  // namespace
}  // namespace infoplan::nn
