#pragma once

// Information measures in nats: entropy, KL divergence, discrete mutual
// information, the sample-based entropy estimator and BALD.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace infoplan {

inline constexpr double kProbSumTolerance = 1e-9;
// Probabilities below this are exact zeros for 0 ln 0 purposes.
inline constexpr double kZeroProb = 1e-300;

inline double xlogx(double p) { return p < kZeroProb ? 0.0 : p * std::log(p); }

inline void validate_distribution(std::span<const double> probs, const char* what = "distribution") {
  if (probs.empty()) throw std::invalid_argument(std::string(what) + ": empty");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument(std::string(what) + ": entries must be finite and nonnegative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kProbSumTolerance) {
    throw std::invalid_argument(std::string(what) + ": total mass " + std::to_string(total) + " != 1");
  }
}

// A normalized discrete distribution. Construction validates.
class DiscreteDist {
 public:
  DiscreteDist() = default;
  explicit DiscreteDist(std::vector<double> probs) : probs_(std::move(probs)) {
    validate_distribution(probs_);
  }

  // Normalizes nonnegative weights with positive mass.
  static DiscreteDist from_weights(std::vector<double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (!(total > 0.0) || !std::isfinite(total)) {
      throw std::invalid_argument("DiscreteDist::from_weights: weights need positive finite mass");
    }
    for (auto& w : weights) w /= total;
    return DiscreteDist(std::move(weights));
  }

  static DiscreteDist uniform(std::size_t k) { return DiscreteDist(std::vector<double>(k, 1.0 / static_cast<double>(k))); }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  const std::vector<double>& probs() const { return probs_; }
  operator std::span<const double>() const { return probs_; }

  bool operator==(const DiscreteDist&) const = default;

 private:
  std::vector<double> probs_;
};

// Row-major R x S joint table with unit mass.
class JointDist {
 public:
  JointDist(std::size_t rows, std::size_t cols, std::vector<double> table)
      : rows_(rows), cols_(cols), table_(std::move(table)) {
    if (rows_ == 0 || cols_ == 0 || table_.size() != rows_ * cols_) {
      throw std::invalid_argument("JointDist: table shape mismatch");
    }
    validate_distribution(table_, "JointDist");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t s) const { return table_[r * cols_ + s]; }
  std::span<const double> flat() const { return table_; }

  std::vector<double> row_marginal() const {
    std::vector<double> m(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t s = 0; s < cols_; ++s) m[r] += (*this)(r, s);
    return m;
  }

  std::vector<double> col_marginal() const {
    std::vector<double> m(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t s = 0; s < cols_; ++s) m[s] += (*this)(r, s);
    return m;
  }

 private:
  std::size_t rows_, cols_;
  std::vector<double> table_;
};

// T stochastic passes x C classes; each row a distribution.
class ProbMatrix {
 public:
  ProbMatrix(std::size_t passes, std::size_t classes, std::vector<double> values)
      : passes_(passes), classes_(classes), values_(std::move(values)) {
    if (passes_ == 0 || classes_ == 0 || values_.size() != passes_ * classes_) {
      throw std::invalid_argument("ProbMatrix: shape mismatch");
    }
    for (std::size_t t = 0; t < passes_; ++t) validate_distribution(row(t), "ProbMatrix row");
  }

  explicit ProbMatrix(const std::vector<std::vector<double>>& rows)
      : ProbMatrix(rows.size(), rows.empty() ? 0 : rows.front().size(), flatten(rows)) {}

  std::size_t passes() const { return passes_; }
  std::size_t classes() const { return classes_; }
  std::span<const double> row(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * classes_, classes_);
  }

  // Predictive distribution: the column mean over passes.
  std::vector<double> mean_row() const {
    std::vector<double> mean(classes_, 0.0);
    for (std::size_t t = 0; t < passes_; ++t)
      for (std::size_t c = 0; c < classes_; ++c) mean[c] += values_[t * classes_ + c];
    for (auto& m : mean) m /= static_cast<double>(passes_);
    return mean;
  }

 private:
  static std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (!rows.empty() && r.size() != rows.front().size()) {
        throw std::invalid_argument("ProbMatrix: ragged rows");
      }
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return flat;
  }

  std::size_t passes_, classes_;
  std::vector<double> values_;
};

namespace detail {
inline double entropy_unchecked(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) h -= xlogx(x);
  return std::max(h, 0.0);
}
}  // namespace detail

inline double entropy(std::span<const double> p) {
  validate_distribution(p);
  return detail::entropy_unchecked(p);
}

inline double kl(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl: length mismatch");
  validate_distribution(p, "kl(p)");
  validate_distribution(q, "kl(q)");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < kZeroProb) continue;
    if (q[i] < kZeroProb) {
      throw std::domain_error("kl: p is not absolutely continuous with respect to q");
    }
    d += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(d, 0.0);
}

inline double mutual_information(const JointDist& joint) {
  const auto rm = joint.row_marginal();
  const auto cm = joint.col_marginal();
  double mi = 0.0;
  for (std::size_t r = 0; r < joint.rows(); ++r) {
    for (std::size_t s = 0; s < joint.cols(); ++s) {
      const double j = joint(r, s);
      if (j < kZeroProb) continue;
      mi += j * std::log(j / (rm[r] * cm[s]));
    }
  }
  return std::max(mi, 0.0);
}

using LogDensity = std::function<double(double)>;

// Draws from some real-valued density, with a note on where they came from.
struct SampleSet {
  std::vector<double> values;
  std::string source;
};

// -(1/M) sum log p(sample_i): the sample-based entropy estimate.
inline double mc_entropy(std::span<const double> samples, const LogDensity& log_density) {
  if (samples.empty()) throw std::invalid_argument("mc_entropy: need at least one sample");
  double total = 0.0;
  for (double y : samples) {
    if (!std::isfinite(y)) throw std::invalid_argument("mc_entropy: non-finite sample");
    const double lp = log_density(y);
    if (!std::isfinite(lp)) throw std::domain_error("mc_entropy: non-finite log-density at a sample");
    total += lp;
  }
  return -total / static_cast<double>(samples.size());
}

// H[mean row] - mean_t H[row_t], clamped into [0, H[mean row]].
inline double bald(const ProbMatrix& m) {
  bool identical = true;
  for (std::size_t t = 1; t < m.passes() && identical; ++t) {
    identical = std::equal(m.row(t).begin(), m.row(t).end(), m.row(0).begin());
  }
  if (identical) return 0.0;
  const double marginal = detail::entropy_unchecked(m.mean_row());
  double expected = 0.0;
  for (std::size_t t = 0; t < m.passes(); ++t) expected += detail::entropy_unchecked(m.row(t));
  expected /= static_cast<double>(m.passes());
  return std::clamp(marginal - expected, 0.0, marginal);
}

inline double gaussian_log_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

inline double gaussian_entropy(double variance) {
  return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * variance);
}

inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -INFINITY;
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

// exp-normalize a vector of log weights.
inline DiscreteDist softmax(std::span<const double> logits) {
  const double lse = log_sum_exp(logits);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - lse);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return DiscreteDist(std::move(p));
}

}  // namespace infoplan
