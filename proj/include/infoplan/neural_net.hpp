#pragma once

// A small text classifier with hand-written backprop:
//
//   frozen embedding -> 1D conv (valid, ReLU) -> global max pool -> dropout
//   -> dense (ReLU) -> dropout -> dense -> softmax
//
// Dropout after pooling and after the hidden layer uses inverted scaling, so
// MC-dropout inference reuses the deterministic conv features and only
// resamples masks in the head.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "infoplan/corpus.hpp"
#include "infoplan/info_measures.hpp"
#include "infoplan/random.hpp"
#include "infoplan/text_format.hpp"

namespace infoplan::nn {

inline constexpr std::uint32_t kPadToken = 0;
inline constexpr std::uint32_t kUnknownToken = 1;
inline constexpr double kMaxEmbeddingNorm = 100.0;

struct NetConfig {
  std::size_t vocab_size = 0;  // including the pad and unknown ids
  std::size_t embed_dim = 50;
  std::size_t conv_filters = 32;
  std::size_t kernel_size = 5;
  std::size_t hidden_dim = 64;
  std::size_t n_classes = 2;
  double dropout_rate = 0.5;
  std::size_t max_seq_len = 32;

  void validate() const {
    if (vocab_size < 1 || embed_dim < 1 || conv_filters < 1 || kernel_size < 1 || hidden_dim < 1 || n_classes < 1 ||
        max_seq_len < 1) {
      throw std::invalid_argument("NetConfig: all dimensions must be >= 1");
    }
    if (kernel_size > max_seq_len) throw std::invalid_argument("NetConfig: kernel wider than the sequence");
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw std::invalid_argument("NetConfig: dropout rate must be in [0,1)");
  }

  std::size_t positions() const { return max_seq_len - kernel_size + 1; }
  bool operator==(const NetConfig&) const = default;
};

// Row-major dense tensor with a name, used for every parameter block.
struct Tensor {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(values).subspan(r * cols, cols); }
  bool operator==(const Tensor&) const = default;
};

struct NetParams {
  Tensor embedding;  // vocab_size x embed_dim, frozen
  Tensor conv_w;     // conv_filters x (kernel_size * embed_dim), tap-major
  Tensor conv_b;     // 1 x conv_filters
  Tensor hidden_w;   // hidden_dim x conv_filters
  Tensor hidden_b;   // 1 x hidden_dim
  Tensor out_w;      // n_classes x hidden_dim
  Tensor out_b;      // 1 x n_classes

  // Trainable blocks, in a fixed order shared by gradients and the optimizer.
  std::vector<Tensor*> trainable() { return {&conv_w, &conv_b, &hidden_w, &hidden_b, &out_w, &out_b}; }
  std::vector<const Tensor*> trainable() const { return {&conv_w, &conv_b, &hidden_w, &hidden_b, &out_w, &out_b}; }

  bool operator==(const NetParams&) const = default;
};

inline void check_embedding(const Tensor& emb, const NetConfig& cfg) {
  if (emb.rows != cfg.vocab_size || emb.cols != cfg.embed_dim) throw std::invalid_argument("embedding shape mismatch");
  for (std::size_t r = 0; r < emb.rows; ++r) {
    double sq = 0.0;
    for (double v : emb.row(r)) {
      if (!std::isfinite(v)) throw std::invalid_argument("embedding: non-finite entry");
      sq += v * v;
    }
    if (std::sqrt(sq) > kMaxEmbeddingNorm) throw std::invalid_argument("embedding: row norm exceeds bound");
  }
}

inline Tensor random_embedding(const NetConfig& cfg, std::uint64_t seed) {
  Tensor emb(cfg.vocab_size, cfg.embed_dim);
  Rng rng(derive_seed(seed, 0xe3b));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.embed_dim));
  for (std::size_t r = 1; r < cfg.vocab_size; ++r)
    for (std::size_t e = 0; e < cfg.embed_dim; ++e) emb(r, e) = scale * rng.normal();
  return emb;
}

// He-style init for the trainable layers.
inline NetParams init_params(const NetConfig& cfg, std::uint64_t seed, std::optional<Tensor> embedding = std::nullopt) {
  cfg.validate();
  NetParams p;
  p.embedding = embedding ? std::move(*embedding) : random_embedding(cfg, seed);
  check_embedding(p.embedding, cfg);
  Rng rng(derive_seed(seed, 0x1417));
  auto fill = [&](Tensor& t, std::size_t rows, std::size_t cols, double fan_in, double gain) {
    t = Tensor(rows, cols);
    const double sd = std::sqrt(gain / fan_in);
    for (auto& v : t.values) v = sd * rng.normal();
  };
  const double conv_fan = static_cast<double>(cfg.kernel_size * cfg.embed_dim);
  fill(p.conv_w, cfg.conv_filters, cfg.kernel_size * cfg.embed_dim, conv_fan, 2.0);
  p.conv_b = Tensor(1, cfg.conv_filters);
  // small positive bias keeps all-padding windows off the ReLU kink at 0
  std::fill(p.conv_b.values.begin(), p.conv_b.values.end(), 0.01);
  fill(p.hidden_w, cfg.hidden_dim, cfg.conv_filters, static_cast<double>(cfg.conv_filters), 2.0);
  p.hidden_b = Tensor(1, cfg.hidden_dim);
  fill(p.out_w, cfg.n_classes, cfg.hidden_dim, static_cast<double>(cfg.hidden_dim), 1.0);
  p.out_b = Tensor(1, cfg.n_classes);
  return p;
}

// Maps vocabulary words to ids 2.. and encodes token sequences.
class TextEncoder {
 public:
  explicit TextEncoder(const Vocabulary& vocab) : vocab_(vocab) {}
  std::size_t vocab_size() const { return vocab_.size() + 2; }
  const Vocabulary& vocabulary() const { return vocab_; }

  std::vector<std::uint32_t> encode(std::span<const std::string> tokens, std::size_t max_len) const {
    std::vector<std::uint32_t> ids;
    for (const auto& t : tokens) {
      if (ids.size() == max_len) break;
      auto j = vocab_.find(t);
      ids.push_back(j ? static_cast<std::uint32_t>(*j + 2) : kUnknownToken);
    }
    return ids;
  }

 private:
  Vocabulary vocab_;
};

// Plain-text embedding table: each line is a word followed by exactly
// embed_dim decimals. Vocabulary words missing from the file, and the
// unknown id, get seeded random rows; the pad row is zero.
inline Tensor load_embeddings(std::istream& in, const TextEncoder& encoder, std::size_t embed_dim, std::uint64_t seed,
                              std::size_t* matched = nullptr) {
  NetConfig shape;
  shape.vocab_size = encoder.vocab_size();
  shape.embed_dim = embed_dim;
  Tensor emb = random_embedding(shape, seed);
  std::string line;
  std::size_t line_no = 0, hits = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (fields.size() != embed_dim + 1) {
      throw std::runtime_error("embedding line " + std::to_string(line_no) + ": expected a word and " +
                               std::to_string(embed_dim) + " values");
    }
    auto j = encoder.vocabulary().find(std::string(fields[0]));
    if (!j) continue;
    ++hits;
    for (std::size_t e = 0; e < embed_dim; ++e) {
      try {
        emb(*j + 2, e) = parse_double(fields[e + 1]);
      } catch (const std::invalid_argument& ex) {
        throw std::runtime_error("embedding line " + std::to_string(line_no) + ": " + ex.what());
      }
    }
  }
  if (matched) *matched = hits;
  check_embedding(emb, shape);
  return emb;
}

// Optional dropout mask seed; nullopt means deterministic inference.
using DropoutMode = std::optional<std::uint64_t>;

namespace detail {

struct Features {
  std::vector<double> pooled;        // conv_filters
  std::vector<std::size_t> argmax;   // winning position per filter
  std::vector<std::uint32_t> padded; // max_seq_len ids
};

struct HeadTrace {
  std::vector<double> mask1, dropped, hidden_pre, hidden, mask2, hidden_dropped, logits;
  std::vector<double> probs;
};

inline std::vector<std::uint32_t> pad_sequence(const NetConfig& cfg, std::span<const std::uint32_t> ids) {
  std::vector<std::uint32_t> padded(cfg.max_seq_len, kPadToken);
  const std::size_t n = std::min(ids.size(), cfg.max_seq_len);
  for (std::size_t i = 0; i < n; ++i) {
    if (ids[i] >= cfg.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                              std::to_string(cfg.vocab_size));
    }
    padded[i] = ids[i];
  }
  return padded;
}

inline Features conv_features(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids) {
  Features f;
  f.padded = pad_sequence(cfg, ids);
  const std::size_t F = cfg.conv_filters, W = cfg.kernel_size, E = cfg.embed_dim, P = cfg.positions();
  // window buffer: W*E inputs for one position
  std::vector<double> window(W * E);
  f.pooled.assign(F, 0.0);
  f.argmax.assign(F, 0);
  std::vector<double> best(F, -INFINITY);
  for (std::size_t pos = 0; pos < P; ++pos) {
    for (std::size_t w = 0; w < W; ++w) {
      const auto r = p.embedding.row(f.padded[pos + w]);
      std::copy(r.begin(), r.end(), window.begin() + static_cast<std::ptrdiff_t>(w * E));
    }
    for (std::size_t k = 0; k < F; ++k) {
      const double* wk = &p.conv_w.values[k * W * E];
      double a = p.conv_b.values[k];
      for (std::size_t i = 0; i < W * E; ++i) a += wk[i] * window[i];
      if (a > best[k]) {
        best[k] = a;
        f.argmax[k] = pos;
      }
    }
  }
  for (std::size_t k = 0; k < F; ++k) f.pooled[k] = std::max(best[k], 0.0);
  return f;
}

inline std::vector<double> dropout_mask(std::size_t n, double rate, Rng* rng) {
  std::vector<double> mask(n, 1.0);
  if (!rng || rate == 0.0) return mask;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = rng->uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

inline HeadTrace head(const NetParams& p, const NetConfig& cfg, std::span<const double> pooled, Rng* rng) {
  HeadTrace h;
  const std::size_t F = cfg.conv_filters, H = cfg.hidden_dim, C = cfg.n_classes;
  h.mask1 = dropout_mask(F, cfg.dropout_rate, rng);
  h.dropped.resize(F);
  for (std::size_t k = 0; k < F; ++k) h.dropped[k] = pooled[k] * h.mask1[k];
  h.hidden_pre.resize(H);
  h.hidden.resize(H);
  for (std::size_t j = 0; j < H; ++j) {
    double a = p.hidden_b.values[j];
    const double* wj = &p.hidden_w.values[j * F];
    for (std::size_t k = 0; k < F; ++k) a += wj[k] * h.dropped[k];
    h.hidden_pre[j] = a;
    h.hidden[j] = std::max(a, 0.0);
  }
  h.mask2 = dropout_mask(H, cfg.dropout_rate, rng);
  h.hidden_dropped.resize(H);
  for (std::size_t j = 0; j < H; ++j) h.hidden_dropped[j] = h.hidden[j] * h.mask2[j];
  h.logits.resize(C);
  for (std::size_t c = 0; c < C; ++c) {
    double a = p.out_b.values[c];
    const double* wc = &p.out_w.values[c * H];
    for (std::size_t j = 0; j < H; ++j) a += wc[j] * h.hidden_dropped[j];
    h.logits[c] = a;
  }
  h.probs = softmax(h.logits).probs();
  return h;
}

// Gradient buffers mirror NetParams::trainable().
struct Gradients {
  std::vector<Tensor> blocks;
  explicit Gradients(const NetParams& p) {
    for (const Tensor* t : p.trainable()) blocks.emplace_back(t->rows, t->cols);
  }
  void zero() {
    for (auto& b : blocks) std::fill(b.values.begin(), b.values.end(), 0.0);
  }
};

// Accumulates d(cross-entropy)/d(params) for one example into g, scaled by
// `weight`; returns the example's loss.
inline double backprop(const NetParams& p, const NetConfig& cfg, const Features& f, const HeadTrace& h, std::size_t label,
                       double weight, Gradients& g) {
  const std::size_t F = cfg.conv_filters, H = cfg.hidden_dim, C = cfg.n_classes, W = cfg.kernel_size,
                    E = cfg.embed_dim;
  auto& g_conv_w = g.blocks[0];
  auto& g_conv_b = g.blocks[1];
  auto& g_hidden_w = g.blocks[2];
  auto& g_hidden_b = g.blocks[3];
  auto& g_out_w = g.blocks[4];
  auto& g_out_b = g.blocks[5];

  std::vector<double> d_logits(C);
  for (std::size_t c = 0; c < C; ++c) d_logits[c] = weight * (h.probs[c] - (c == label ? 1.0 : 0.0));
  std::vector<double> d_hidden(H, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    g_out_b.values[c] += d_logits[c];
    for (std::size_t j = 0; j < H; ++j) {
      g_out_w.values[c * H + j] += d_logits[c] * h.hidden_dropped[j];
      d_hidden[j] += d_logits[c] * p.out_w.values[c * H + j];
    }
  }
  std::vector<double> d_dropped(F, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double dz = h.hidden_pre[j] > 0.0 ? d_hidden[j] * h.mask2[j] : 0.0;
    if (dz == 0.0) continue;
    g_hidden_b.values[j] += dz;
    for (std::size_t k = 0; k < F; ++k) {
      g_hidden_w.values[j * F + k] += dz * h.dropped[k];
      d_dropped[k] += dz * p.hidden_w.values[j * F + k];
    }
  }
  for (std::size_t k = 0; k < F; ++k) {
    if (f.pooled[k] <= 0.0) continue;  // relu(max) inactive
    const double d = d_dropped[k] * h.mask1[k];
    if (d == 0.0) continue;
    g_conv_b.values[k] += d;
    const std::size_t pos = f.argmax[k];
    for (std::size_t w = 0; w < W; ++w) {
      const auto r = p.embedding.row(f.padded[pos + w]);
      double* gw = &g_conv_w.values[k * W * E + w * E];
      for (std::size_t e = 0; e < E; ++e) gw[e] += d * r[e];
    }
  }
  return -std::log(std::max(h.probs[label], 1e-300));
}

}  // namespace detail

inline DiscreteDist forward(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids,
                            DropoutMode dropout = std::nullopt) {
  const auto f = detail::conv_features(p, cfg, ids);
  if (!dropout) return DiscreteDist(detail::head(p, cfg, f.pooled, nullptr).probs);
  Rng rng(derive_seed(*dropout, 0xd20));
  return DiscreteDist(detail::head(p, cfg, f.pooled, &rng).probs);
}

// Pooled conv features, exposed for inspection and tests.
inline std::vector<double> pooled_features(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids) {
  return detail::conv_features(p, cfg, ids).pooled;
}

struct Example {
  std::vector<std::uint32_t> ids;
  std::size_t label = 0;
};

struct TrainConfig {
  int epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::uint64_t seed = 0;
};

// Mean cross-entropy with dropout off.
inline double loss(const NetParams& p, const NetConfig& cfg, std::span<const Example> data) {
  double total = 0.0;
  for (const auto& ex : data) total -= std::log(std::max(forward(p, cfg, ex.ids)[ex.label], 1e-300));
  return total / static_cast<double>(data.size());
}

// Seeded mini-batch SGD with momentum on mean cross-entropy plus
// (weight_decay / 2) * ||weights||^2 (biases excluded). Dropout is active
// during training; the embedding is never touched.
inline NetParams train(NetParams params, const NetConfig& cfg, const TrainConfig& tc, std::span<const Example> data,
                       std::vector<double>* epoch_losses = nullptr) {
  if (data.empty()) throw std::invalid_argument("nn::train: no training data");
  if (tc.batch_size == 0 || !(tc.learning_rate > 0.0) || tc.weight_decay < 0.0 || tc.epochs < 0) {
    throw std::invalid_argument("nn::train: invalid training configuration");
  }
  for (const auto& ex : data)
    if (ex.label >= cfg.n_classes) throw std::invalid_argument("nn::train: label out of range");
  detail::Gradients grad(params), velocity(params);
  Rng rng(derive_seed(tc.seed, 0x7a1));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::vector<bool> decayed{true, false, true, false, true, false};

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      const double weight = 1.0 / static_cast<double>(end - start);
      grad.zero();
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = data[order[b]];
        const auto f = detail::conv_features(params, cfg, ex.ids);
        Rng mask_rng(rng.bits());
        const auto h = detail::head(params, cfg, f.pooled, &mask_rng);
        epoch_loss += detail::backprop(params, cfg, f, h, ex.label, weight, grad);
      }
      auto blocks = params.trainable();
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        auto& values = blocks[i]->values;
        auto& vel = velocity.blocks[i].values;
        const auto& g = grad.blocks[i].values;
        for (std::size_t k = 0; k < values.size(); ++k) {
          const double gk = g[k] + (decayed[i] ? tc.weight_decay * values[k] : 0.0);
          vel[k] = tc.momentum * vel[k] - tc.learning_rate * gk;
          values[k] += vel[k];
        }
      }
    }
    if (epoch_losses) epoch_losses->push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return params;
}

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
};

// Central finite differences of the dropout-off loss on `n_params` randomly
// chosen trainable parameters. Relative error is |a - n| / max(|a| + |n|, 1e-8).
inline GradCheckResult grad_check(const NetParams& params, const NetConfig& cfg, const Example& ex, double epsilon,
                                  std::size_t n_params = 200, std::uint64_t seed = 0) {
  detail::Gradients analytic(params);
  const auto f = detail::conv_features(params, cfg, ex.ids);
  const auto h = detail::head(params, cfg, f.pooled, nullptr);
  detail::backprop(params, cfg, f, h, ex.label, 1.0, analytic);

  NetParams probe = params;
  auto blocks = probe.trainable();
  std::size_t total = 0;
  for (auto* b : blocks) total += b->values.size();
  Rng rng(derive_seed(seed, 0x6c));
  const std::vector<Example> one{ex};
  GradCheckResult out;
  for (std::size_t i = 0; i < n_params; ++i) {
    std::size_t flat = rng.below(total), bi = 0;
    while (flat >= blocks[bi]->values.size()) flat -= blocks[bi++]->values.size();
    double& w = blocks[bi]->values[flat];
    const double saved = w;
    w = saved + epsilon;
    const double up = loss(probe, cfg, one);
    w = saved - epsilon;
    const double down = loss(probe, cfg, one);
    w = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = analytic.blocks[bi].values[flat];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-8);
    out.max_relative_error = std::max(out.max_relative_error, rel);
    ++out.checked;
  }
  return out;
}

// T passes with independent seeded masks; the conv features are computed once.
inline ProbMatrix mc_predict(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids, std::size_t T,
                             std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("nn::mc_predict: need T >= 1");
  const auto f = detail::conv_features(p, cfg, ids);
  std::vector<double> values;
  values.reserve(T * cfg.n_classes);
  for (std::size_t t = 0; t < T; ++t) {
    Rng rng(derive_seed(derive_seed(seed, t), 0xd20));
    const auto h = detail::head(p, cfg, f.pooled, &rng);
    values.insert(values.end(), h.probs.begin(), h.probs.end());
  }
  return ProbMatrix(T, cfg.n_classes, std::move(values));
}

inline double acquire_entropy(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids, std::size_t T,
                              std::uint64_t seed) {
  return entropy(mc_predict(p, cfg, ids, T, seed).mean_row());
}

inline double acquire_bald(const NetParams& p, const NetConfig& cfg, std::span<const std::uint32_t> ids, std::size_t T,
                           std::uint64_t seed) {
  return bald(mc_predict(p, cfg, ids, T, seed));
}

// Checkpoint:
//   infoplan-cnn v1
//   config <vocab_size> <embed_dim> <conv_filters> <kernel_size> <hidden_dim> <n_classes> <dropout_rate> <max_seq_len>
//   tensor <name> <rows> <cols>, then one line of values per row
inline void write_checkpoint(std::ostream& out, const NetParams& p, const NetConfig& cfg) {
  out << "infoplan-cnn v1\n";
  out << "config " << cfg.vocab_size << ' ' << cfg.embed_dim << ' ' << cfg.conv_filters << ' ' << cfg.kernel_size << ' '
      << cfg.hidden_dim << ' ' << cfg.n_classes << ' ' << format_double(cfg.dropout_rate) << ' ' << cfg.max_seq_len
      << '\n';
  const std::pair<const char*, const Tensor*> blocks[] = {{"embedding", &p.embedding}, {"conv_w", &p.conv_w},
                                                          {"conv_b", &p.conv_b},       {"hidden_w", &p.hidden_w},
                                                          {"hidden_b", &p.hidden_b},   {"out_w", &p.out_w},
                                                          {"out_b", &p.out_b}};
  for (auto [name, t] : blocks) {
    out << "tensor " << name << ' ' << t->rows << ' ' << t->cols << '\n';
    for (std::size_t r = 0; r < t->rows; ++r) out << join_doubles(t->row(r)) << '\n';
  }
}

inline std::pair<NetParams, NetConfig> read_checkpoint(std::istream& in) {
  LineReader r(in);
  auto header = r.next();
  if (header.size() != 2 || header[0] != "infoplan-cnn" || header[1] != "v1") {
    throw std::runtime_error("not an infoplan CNN checkpoint");
  }
  auto c = r.expect("config");
  if (c.size() != 8) throw std::runtime_error("checkpoint: bad config line");
  NetConfig cfg;
  cfg.vocab_size = parse_uint(c[0]);
  cfg.embed_dim = parse_uint(c[1]);
  cfg.conv_filters = parse_uint(c[2]);
  cfg.kernel_size = parse_uint(c[3]);
  cfg.hidden_dim = parse_uint(c[4]);
  cfg.n_classes = parse_uint(c[5]);
  cfg.dropout_rate = parse_double(c[6]);
  cfg.max_seq_len = parse_uint(c[7]);
  cfg.validate();
  NetParams p;
  auto read_tensor = [&](const char* name, Tensor& t, std::size_t rows, std::size_t cols) {
    auto f = r.expect("tensor");
    if (f.size() != 3 || f[0] != name || parse_uint(f[1]) != rows || parse_uint(f[2]) != cols) {
      throw std::runtime_error(std::string("checkpoint: bad header for tensor ") + name);
    }
    t = Tensor(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      auto vals = r.next();
      if (vals.size() != cols) throw std::runtime_error(std::string("checkpoint: bad row in tensor ") + name);
      for (std::size_t j = 0; j < cols; ++j) t(i, j) = parse_double(vals[j]);
    }
  };
  read_tensor("embedding", p.embedding, cfg.vocab_size, cfg.embed_dim);
  read_tensor("conv_w", p.conv_w, cfg.conv_filters, cfg.kernel_size * cfg.embed_dim);
  read_tensor("conv_b", p.conv_b, 1, cfg.conv_filters);
  read_tensor("hidden_w", p.hidden_w, cfg.hidden_dim, cfg.conv_filters);
  read_tensor("hidden_b", p.hidden_b, 1, cfg.hidden_dim);
  read_tensor("out_w", p.out_w, cfg.n_classes, cfg.hidden_dim);
  read_tensor("out_b", p.out_b, 1, cfg.n_classes);
  check_embedding(p.embedding, cfg);
  return {std::move(p), cfg};
}

inline std::string checkpoint_text(const NetParams& p, const NetConfig& cfg) {
  std::ostringstream out;
  write_checkpoint(out, p, cfg);
  return out.str();
}

}  // namespace infoplan::nn
