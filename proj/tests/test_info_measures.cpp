#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "infoplan/info_measures.hpp"
#include "infoplan/random.hpp"

namespace infoplan {
namespace {

constexpr double kLn2 = std::numbers::ln2;
// Brute-force sum over the four cells of [[0.4,0.1],[0.1,0.4]].
constexpr double kCorrelatedMi = 0.19274475702175753;
constexpr double kGaussEntropy = 1.4189385332046727;
// Quadrature of -f ln f for 0.5 N(-5,1) + 0.5 N(5,1) over [-20, 20].
constexpr double kSeparatedMixtureEntropy = 2.112084850598574;

std::vector<double> random_dist(Rng& rng, std::size_t k) { return rng.dirichlet(k, 0.7); }

TEST(Entropy, ClosedFormValues) {
  EXPECT_NEAR(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-12);
  EXPECT_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.25, 0.25}), 1.5 * kLn2, 1e-12);
}

TEST(Entropy, RejectsInvalid) {
  EXPECT_THROW(entropy(std::vector<double>{0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(entropy(std::vector<double>{-0.1, 1.1}), std::invalid_argument);
  EXPECT_THROW(entropy(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(DiscreteDist(std::vector<double>{NAN, 1.0}), std::invalid_argument);
}

TEST(Entropy, BoundedByLogK) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 1 + rng.below(12);
    const auto p = random_dist(rng, k);
    const double h = entropy(p);
    EXPECT_GE(h, 0.0);
    EXPECT_LE(h, std::log(static_cast<double>(k)) + 1e-12);
  }
}

TEST(Kl, Values) {
  EXPECT_EQ(kl(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}), 0.0);
  EXPECT_NEAR(kl(std::vector<double>{1.0, 0.0}, std::vector<double>{0.5, 0.5}), kLn2, 1e-12);
  EXPECT_THROW(kl(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), std::domain_error);
  EXPECT_THROW(kl(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
}

TEST(Kl, NonnegativeZeroIffEqual) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + rng.below(6);
    const auto p = random_dist(rng, k);
    const auto q = random_dist(rng, k);
    EXPECT_GT(kl(p, q), 0.0);
    EXPECT_NEAR(kl(p, p), 0.0, 1e-12);
  }
}

TEST(MutualInformation, Values) {
  EXPECT_NEAR(mutual_information(JointDist(2, 2, {0.5, 0.0, 0.0, 0.5})), kLn2, 1e-12);
  EXPECT_NEAR(mutual_information(JointDist(2, 2, {0.4, 0.1, 0.1, 0.4})), kCorrelatedMi, 1e-12);
  // product of (0.3, 0.7) and (0.2, 0.5, 0.3)
  std::vector<double> prod;
  for (double a : {0.3, 0.7})
    for (double b : {0.2, 0.5, 0.3}) prod.push_back(a * b);
  EXPECT_NEAR(mutual_information(JointDist(2, 3, prod)), 0.0, 1e-12);
  EXPECT_THROW(JointDist(2, 2, {0.5, 0.5, 0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(JointDist(2, 2, {1.0}), std::invalid_argument);
}

TEST(MutualInformation, EntropyIdentity) {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t r = 1 + rng.below(5), s = 1 + rng.below(5);
    const JointDist j(r, s, random_dist(rng, r * s));
    const double lhs = mutual_information(j);
    const double rhs = entropy(j.row_marginal()) + entropy(j.col_marginal()) - entropy(j.flat());
    EXPECT_NEAR(lhs, std::max(rhs, 0.0), 1e-12);
  }
}

TEST(MutualInformation, DeterministicColumnsGiveRowEntropy) {
  // column = f(row): the joint has one nonzero per row
  const JointDist j(3, 3, {0.2, 0.0, 0.0, 0.0, 0.0, 0.5, 0.0, 0.3, 0.0});
  EXPECT_NEAR(mutual_information(j), entropy(j.row_marginal()), 1e-12);
}

TEST(McEntropy, StandardGaussian) {
  Rng rng(5);
  std::vector<double> draws(10000);
  for (auto& d : draws) d = rng.normal();
  const double h = mc_entropy(draws, [](double y) { return gaussian_log_pdf(y, 0.0, 1.0); });
  EXPECT_NEAR(h, kGaussEntropy, 0.05);
}

TEST(McEntropy, SingleSampleIsNegLogDensity) {
  const std::vector<double> one{0.7};
  EXPECT_DOUBLE_EQ(mc_entropy(one, [](double y) { return gaussian_log_pdf(y, 0.0, 2.0); }),
                   -gaussian_log_pdf(0.7, 0.0, 2.0));
}

TEST(McEntropy, SeparatedMixture) {
  EXPECT_NEAR(kSeparatedMixtureEntropy, kLn2 + kGaussEntropy, 1e-5);
  Rng rng(8);
  std::vector<double> draws(20000);
  for (auto& d : draws) d = rng.normal(rng.bernoulli(0.5) ? 5.0 : -5.0, 1.0);
  auto log_mix = [](double y) {
    const double a[2] = {std::log(0.5) + gaussian_log_pdf(y, -5.0, 1.0), std::log(0.5) + gaussian_log_pdf(y, 5.0, 1.0)};
    return log_sum_exp(a);
  };
  EXPECT_NEAR(mc_entropy(draws, log_mix), kSeparatedMixtureEntropy, 0.05);
}

TEST(McEntropy, Errors) {
  EXPECT_THROW(mc_entropy(std::vector<double>{}, [](double) { return 0.0; }), std::invalid_argument);
  EXPECT_THROW(mc_entropy(std::vector<double>{1.0}, [](double) { return -INFINITY; }), std::domain_error);
}

TEST(McEntropy, ConvergesForMostSeeds) {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    std::vector<double> draws(10000);
    for (auto& d : draws) d = rng.normal();
    const double h = mc_entropy(draws, [](double y) { return gaussian_log_pdf(y, 0.0, 1.0); });
    within += std::abs(h - kGaussEntropy) < 0.05;
  }
  EXPECT_GE(within, 95);
}

TEST(Bald, Values) {
  EXPECT_EQ(bald(ProbMatrix({{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}})), 0.0);
  EXPECT_NEAR(bald(ProbMatrix({{1.0, 0.0}, {0.0, 1.0}})), kLn2, 1e-12);
  EXPECT_NEAR(bald(ProbMatrix({{0.8, 0.2}, {0.2, 0.8}})), kCorrelatedMi, 1e-12);
  EXPECT_THROW(ProbMatrix({{0.8, 0.3}}), std::invalid_argument);
  EXPECT_THROW(ProbMatrix({{0.5, 0.5}, {1.0}}), std::invalid_argument);
}

TEST(Bald, JensenBounds) {
  Rng rng(14);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t t = 1 + rng.below(20), c = 2 + rng.below(5);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < t; ++i) rows.push_back(random_dist(rng, c));
    const ProbMatrix m(rows);
    const double b = bald(m);
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, entropy(m.mean_row()));
  }
}

TEST(Softmax, StableForLargeLogits) {
  const std::vector<double> logits{50.0, -50.0, 49.0};
  const auto p = softmax(logits);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-15);
  EXPECT_GT(p[0], p[2]);
}

}  // namespace
}  // namespace infoplan
