#pragma once

// Seeded synthetic corpora used by the benchmarks and the `synth` CLI
// command: a planted-word classification corpus, corpora drawn from the
// supervised LDA generative process, and a graded-sentiment sentence corpus
// with a matching clustered embedding table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "infoplan/corpus.hpp"
#include "infoplan/random.hpp"

namespace infoplan::synthetic {

inline std::string doc_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "doc%05zu", i);
  return buf;
}

inline std::string numbered(const char* prefix, std::size_t i, int width = 3) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

// --- planted-word classification corpus -----------------------------------

struct PlantedConfig {
  std::size_t docs = 1000;
  std::size_t vocab = 200;
  std::size_t classes = 4;
  std::size_t anchors = 10;           // strong class-indicative words ("planted")
  std::size_t subtopics = 25;         // per class; each owns its own cue words
  std::size_t cues_per_subtopic = 1;
  double subtopic_decay = 0.88;       // subtopic s is chosen with weight decay^s
  double anchor_rate = 0.15;          // p(anchor present | its class)
  double cue_rate = 0.9;              // p(cue present | its subtopic)
  double leak_rate = 0.0005;          // p(indicative word present | elsewhere)
  double background_max = 0.20;       // Zipf-scaled presence rate of filler words
  std::uint64_t seed = 0;
};

struct PlantedCorpus {
  std::vector<Document> docs;
  std::vector<std::string> anchors;  // the planted words, anchor i indicates class i % classes
  std::vector<std::string> words;    // the full generating vocabulary
};

// Each class is a skewed mixture of subtopics: one common, the rest rare.
// A random sample of labels mostly repeats the common subtopic, while the
// rare subtopics' cue words stay unseen until documents carrying them are
// labelled.
inline PlantedCorpus planted_corpus(const PlantedConfig& cfg) {
  const std::size_t n_cues = cfg.classes * cfg.subtopics * cfg.cues_per_subtopic;
  if (cfg.classes < 2 || cfg.subtopics < 1 || cfg.vocab <= cfg.anchors + n_cues) {
    throw std::invalid_argument("planted_corpus: vocabulary too small for the planted structure");
  }
  Rng rng(derive_seed(cfg.seed, 0x91a7));
  PlantedCorpus out;
  for (std::size_t i = 0; i < cfg.anchors; ++i) {
    out.anchors.push_back(numbered("anchor", i, 2));
    out.words.push_back(out.anchors.back());
  }
  const std::size_t first_cue = out.words.size();
  for (std::size_t c = 0; c < cfg.classes; ++c)
    for (std::size_t t = 0; t < cfg.subtopics; ++t)
      for (std::size_t i = 0; i < cfg.cues_per_subtopic; ++i)
        out.words.push_back("cue" + std::to_string(c) + "s" + std::to_string(t) + numbered("x", i, 2));
  const std::size_t first_filler = out.words.size();
  std::vector<double> filler_rate;
  for (std::size_t i = 0; out.words.size() < cfg.vocab; ++i) {
    out.words.push_back(numbered("filler", i));
    filler_rate.push_back(cfg.background_max / std::sqrt(1.0 + static_cast<double>(i)));
  }
  std::vector<double> subtopic_weight(cfg.subtopics);
  for (std::size_t t = 0; t < cfg.subtopics; ++t) subtopic_weight[t] = std::pow(cfg.subtopic_decay, static_cast<double>(t));

  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const std::size_t y = rng.below(cfg.classes);
    const std::size_t topic = rng.categorical(subtopic_weight);
    const std::size_t own_block = first_cue + (y * cfg.subtopics + topic) * cfg.cues_per_subtopic;
    std::vector<std::string> tokens;
    for (std::size_t j = 0; j < out.words.size(); ++j) {
      double p;
      if (j < first_cue) {
        p = j % cfg.classes == y ? cfg.anchor_rate : cfg.leak_rate;
      } else if (j < first_filler) {
        p = (j >= own_block && j < own_block + cfg.cues_per_subtopic) ? cfg.cue_rate : cfg.leak_rate;
      } else {
        p = filler_rate[j - first_filler];
      }
      if (rng.bernoulli(p)) {
        const std::size_t reps = 1 + rng.below(2);
        for (std::size_t r = 0; r < reps; ++r) tokens.push_back(out.words[j]);
      }
    }
    if (tokens.empty()) tokens.push_back(out.words.back());
    rng.shuffle(tokens);
    out.docs.push_back(Document::make(doc_id(d), join_words(tokens), static_cast<int>(y)));
  }
  return out;
}

// --- supervised LDA generative corpus --------------------------------------

struct SldaGenConfig {
  std::size_t docs = 100;
  std::size_t topics = 2;
  std::size_t words_per_topic = 20;  // each topic owns a block of the vocabulary
  double block_mass = 0.9;           // beta_k mass on its own block
  double doc_alpha = 1.0;            // Dirichlet concentration for theta_d
  std::size_t min_len = 40;
  std::size_t max_len = 60;
  std::vector<double> weights = {2.0, -2.0};
  double noise_var = 0.25;
  std::uint64_t seed = 0;
};

struct SldaGenCorpus {
  std::vector<Document> docs;
  std::vector<std::string> words;
  std::vector<std::vector<double>> beta;  // topics x words
  std::vector<std::vector<double>> zbar;  // realized topic histograms
  std::vector<double> weights;
};

inline SldaGenCorpus slda_corpus(const SldaGenConfig& cfg) {
  if (cfg.weights.size() != cfg.topics) throw std::invalid_argument("slda_corpus: need one weight per topic");
  if (cfg.min_len == 0 || cfg.max_len < cfg.min_len) throw std::invalid_argument("slda_corpus: bad length range");
  Rng rng(derive_seed(cfg.seed, 0x51d9));
  SldaGenCorpus out;
  out.weights = cfg.weights;
  const std::size_t K = cfg.topics, V = K * cfg.words_per_topic;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t i = 0; i < cfg.words_per_topic; ++i)
      out.words.push_back("topic" + std::to_string(k) + numbered("w", i, 2));
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<double> b(V, (1.0 - cfg.block_mass) / static_cast<double>(V - cfg.words_per_topic));
    // within-block weights are themselves Dirichlet so words differ in frequency
    const auto inner = rng.dirichlet(cfg.words_per_topic, 2.0);
    for (std::size_t i = 0; i < cfg.words_per_topic; ++i) b[k * cfg.words_per_topic + i] = cfg.block_mass * inner[i];
    if (K == 1) std::fill(b.begin(), b.end(), 1.0 / static_cast<double>(V));
    out.beta.push_back(std::move(b));
  }
  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const auto theta = rng.dirichlet(K, cfg.doc_alpha);
    const std::size_t len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    std::vector<double> hist(K, 0.0);
    std::vector<std::string> tokens;
    for (std::size_t n = 0; n < len; ++n) {
      const auto k = rng.categorical(theta);
      hist[k] += 1.0;
      tokens.push_back(out.words[rng.categorical(out.beta[k])]);
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      hist[k] /= static_cast<double>(len);
      mean += cfg.weights[k] * hist[k];
    }
    const double y = rng.normal(mean, std::sqrt(cfg.noise_var));
    out.docs.push_back(Document::make(doc_id(d), join_words(tokens), std::nullopt, y));
    out.zbar.push_back(std::move(hist));
  }
  return out;
}

// --- graded sentiment sentences ---------------------------------------------

struct SentimentConfig {
  std::size_t docs = 2000;
  std::size_t classes = 5;
  std::size_t cues_per_class = 24;
  std::size_t fillers = 150;
  std::size_t min_len = 8;
  std::size_t max_len = 16;
  double neighbour_rate = 0.0;  // chance a cue comes from an adjacent grade
  double cue_zipf = 0.5;        // cue i of a subcluster is used with weight (1 + i)^-cue_zipf
  // Cues of a grade split into subclusters placed away from the grade
  // centroid; a doc picks subcluster s with weight subcluster_decay^s.
  std::size_t subclusters = 6;
  double subcluster_decay = 0.5;
  double subcluster_spread = 2.0;
  std::size_t embed_dim = 16;
  std::uint64_t seed = 0;
};

struct SentimentCorpus {
  std::vector<Document> docs;
  std::vector<std::string> words;
  std::vector<std::vector<double>> embeddings;  // one row per entry of words

  // Plain-text embedding table: word followed by embed_dim decimals.
  std::string embedding_text() const;
};

inline SentimentCorpus sentiment_corpus(const SentimentConfig& cfg) {
  if (cfg.classes < 2 || cfg.subclusters == 0 || cfg.cues_per_class < cfg.subclusters || cfg.min_len == 0 || cfg.max_len < cfg.min_len) {
    throw std::invalid_argument("sentiment_corpus: bad configuration");
  }
  Rng rng(derive_seed(cfg.seed, 0x5e47));
  SentimentCorpus out;
  const std::size_t E = cfg.embed_dim;
  // Grade centroids lie on a line segment so adjacent grades sit close
  // together, plus an orthogonal random offset per grade.
  std::vector<double> axis(E), centroid_noise;
  for (auto& a : axis) a = rng.normal();
  const double axis_norm = std::sqrt(std::inner_product(axis.begin(), axis.end(), axis.begin(), 0.0));
  for (auto& a : axis) a /= axis_norm;
  std::vector<std::vector<double>> centroids(cfg.classes, std::vector<double>(E));
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double pos = 2.0 * static_cast<double>(c) / static_cast<double>(cfg.classes - 1) - 1.0;
    for (std::size_t e = 0; e < E; ++e) centroids[c][e] = 1.5 * pos * axis[e] + 0.5 * rng.normal() / std::sqrt(double(E));
  }
  const std::size_t S = cfg.subclusters;
  // cue_ids[c * S + s] lists the cues of grade c in subcluster s
  std::vector<std::vector<std::size_t>> cue_ids(cfg.classes * S);
  std::vector<std::vector<double>> cue_weights(cfg.classes * S);
  std::vector<double> sub_weights;
  for (std::size_t s = 0; s < S; ++s) sub_weights.push_back(std::pow(cfg.subcluster_decay, double(s)));
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::vector<std::vector<double>> centres(S, centroids[c]);
    if (S > 1)
      for (auto& ctr : centres)
        for (auto& v : ctr) v += cfg.subcluster_spread * rng.normal() / std::sqrt(double(E));
    for (std::size_t i = 0; i < cfg.cues_per_class; ++i) {
      const std::size_t s = i % S;
      cue_ids[c * S + s].push_back(out.words.size());
      cue_weights[c * S + s].push_back(std::pow(1.0 + static_cast<double>(i / S), -cfg.cue_zipf));
      out.words.push_back("grade" + std::to_string(c) + numbered("v", i, 2));
      std::vector<double> row(E);
      for (std::size_t e = 0; e < E; ++e) row[e] = centres[s][e] + 0.6 * rng.normal() / std::sqrt(double(E));
      out.embeddings.push_back(std::move(row));
    }
  }
  std::vector<double> filler_weights;
  const std::size_t first_filler = out.words.size();
  for (std::size_t i = 0; i < cfg.fillers; ++i) {
    out.words.push_back(numbered("plain", i));
    filler_weights.push_back(1.0 / std::sqrt(1.0 + static_cast<double>(i)));
    std::vector<double> row(E);
    for (auto& v : row) v = rng.normal() / std::sqrt(double(E));
    out.embeddings.push_back(std::move(row));
  }
  for (std::size_t d = 0; d < cfg.docs; ++d) {
    const auto y = rng.below(cfg.classes);
    const std::size_t len = cfg.min_len + rng.below(cfg.max_len - cfg.min_len + 1);
    const std::size_t n_cues = 1 + rng.below(2);
    const std::size_t sub = S > 1 ? rng.categorical(sub_weights) : 0;
    std::vector<std::string> tokens;
    for (std::size_t i = 0; i < n_cues; ++i) {
      std::size_t c = y;
      if (rng.bernoulli(cfg.neighbour_rate)) {
        if (y == 0) c = 1;
        else if (y + 1 == cfg.classes) c = y - 1;
        else c = rng.bernoulli(0.5) ? y - 1 : y + 1;
      }
      tokens.push_back(out.words[cue_ids[c * S + sub][rng.categorical(cue_weights[c * S + sub])]]);
    }
    while (tokens.size() < len) tokens.push_back(out.words[first_filler + rng.categorical(filler_weights)]);
    rng.shuffle(tokens);
    out.docs.push_back(Document::make(doc_id(d), join_words(tokens), static_cast<int>(y)));
  }
  return out;
}

inline std::string SentimentCorpus::embedding_text() const {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < words.size(); ++i) {
    out += words[i];
    for (double v : embeddings[i]) {
      std::snprintf(buf, sizeof(buf), " %.6f", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace infoplan::synthetic
