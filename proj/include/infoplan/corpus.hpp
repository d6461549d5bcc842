#pragma once

// Text ingestion: tokenization, vocabulary construction, bag-of-words
// vectorization, corpus files and seeded train/pool/holdout splits.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "infoplan/random.hpp"

namespace infoplan {

// Lowercase, split on runs of non-alphanumeric bytes, drop tokens shorter
// than two characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.size() >= 2) tokens.push_back(current);
    current.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isalnum(u)) {
      current.push_back(static_cast<char>(std::tolower(u)));
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

struct Document {
  std::string id;
  std::string text;
  std::optional<int> label;
  std::optional<double> score;
  std::vector<std::string> tokens;

  static Document make(std::string id, std::string text, std::optional<int> label = std::nullopt,
                       std::optional<double> score = std::nullopt) {
    Document d{std::move(id), std::move(text), label, score, {}};
    d.tokens = tokenize(d.text);
    return d;
  }
};

using StopwordSet = std::unordered_set<std::string>;

inline const std::vector<std::string>& default_stopword_list() {
  static const std::vector<std::string> words = {
      "a",       "about",   "above",     "after",      "again",    "against", "all",    "am",
      "an",      "and",     "any",       "are",        "as",       "at",      "be",     "because",
      "been",    "before",  "being",     "below",      "between",  "both",    "but",    "by",
      "can",     "could",   "did",       "do",         "does",     "doing",   "down",   "during",
      "each",    "few",     "for",       "from",       "further",  "had",     "has",    "have",
      "having",  "he",      "her",       "here",       "hers",     "herself", "him",    "himself",
      "his",     "how",     "i",         "if",         "in",       "into",    "is",     "it",
      "its",     "itself",  "just",      "me",         "more",     "most",    "my",     "myself",
      "no",      "nor",     "not",       "now",        "of",       "off",     "on",     "once",
      "only",    "or",      "other",     "our",        "ours",     "ourselves", "out",  "over",
      "own",     "same",    "she",       "should",     "so",       "some",    "such",   "than",
      "that",    "the",     "their",     "theirs",     "them",     "themselves", "then", "there",
      "these",   "they",    "this",      "those",      "through",  "to",      "too",    "under",
      "until",   "up",      "very",      "was",        "we",       "were",    "what",   "when",
      "where",   "which",   "while",     "who",        "whom",     "why",     "will",   "with",
      "would",   "you",     "your",      "yours",      "yourself", "yourselves"};
  return words;
}

inline StopwordSet default_stopwords() {
  const auto& list = default_stopword_list();
  return StopwordSet(list.begin(), list.end());
}

// Plain text, one lowercase word per line; blank lines ignored.
inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open stopword file: " + path);
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> words, int min_df, StopwordSet stopwords)
      : words_(std::move(words)), min_df_(min_df), stopwords_(std::move(stopwords)) {
    for (std::size_t j = 0; j < words_.size(); ++j) {
      if (!index_.emplace(words_[j], j).second) {
        throw std::invalid_argument("Vocabulary: duplicate word '" + words_[j] + "'");
      }
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t j) const { return words_.at(j); }
  int min_df() const { return min_df_; }
  const StopwordSet& stopwords() const { return stopwords_; }

  std::optional<std::size_t> find(const std::string& word) const {
    auto it = index_.find(word);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
  int min_df_ = 1;
  StopwordSet stopwords_;
};

// Words ordered by descending document frequency, ties lexicographic.
inline Vocabulary build_vocabulary(std::span<const Document> docs, int min_df, const StopwordSet& stopwords) {
  if (min_df < 1) throw std::invalid_argument("build_vocabulary: min_df must be >= 1");
  std::map<std::string, int> df;
  for (const auto& doc : docs) {
    std::set<std::string_view> seen(doc.tokens.begin(), doc.tokens.end());
    for (auto token : seen) {
      if (!stopwords.contains(std::string(token))) ++df[std::string(token)];
    }
  }
  std::vector<std::pair<std::string, int>> kept;
  for (auto& [word, count] : df) {
    if (count >= min_df) kept.emplace_back(word, count);
  }
  if (kept.empty()) throw std::invalid_argument("build_vocabulary: no term survives the filters");
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> words;
  words.reserve(kept.size());
  for (auto& [word, count] : kept) words.push_back(word);
  return Vocabulary(std::move(words), min_df, stopwords);
}

enum class BowMode { count, binary };

struct BowEntry {
  std::uint32_t word;
  std::uint32_t count;
  bool operator==(const BowEntry&) const = default;
};

// Sparse document-by-word matrix; each row sorted by word index with no
// stored zeros.
class BowMatrix {
 public:
  BowMatrix() = default;
  BowMatrix(std::size_t cols, BowMode mode, std::vector<std::vector<BowEntry>> rows)
      : cols_(cols), mode_(mode), rows_(std::move(rows)) {
    for (const auto& row : rows_) {
      for (std::size_t k = 0; k < row.size(); ++k) {
        if (row[k].word >= cols_) throw std::invalid_argument("BowMatrix: word index out of range");
        if (row[k].count == 0) throw std::invalid_argument("BowMatrix: stored zero entry");
        if (mode_ == BowMode::binary && row[k].count != 1) {
          throw std::invalid_argument("BowMatrix: binary matrix with count != 1");
        }
        if (k > 0 && row[k - 1].word >= row[k].word) {
          throw std::invalid_argument("BowMatrix: row entries must be strictly increasing");
        }
      }
    }
  }

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return cols_; }
  BowMode mode() const { return mode_; }
  std::span<const BowEntry> row(std::size_t i) const { return rows_.at(i); }

  std::uint32_t at(std::size_t i, std::size_t j) const {
    const auto& r = rows_.at(i);
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const BowEntry& e, std::size_t w) { return e.word < w; });
    return (it != r.end() && it->word == j) ? it->count : 0;
  }

  // Dense 0/1 presence vector of length cols().
  std::vector<std::uint8_t> binary_row(std::size_t i) const {
    std::vector<std::uint8_t> dense(cols_, 0);
    for (const auto& e : rows_.at(i)) dense[e.word] = 1;
    return dense;
  }

  std::uint32_t row_total(std::size_t i) const {
    std::uint32_t total = 0;
    for (const auto& e : rows_.at(i)) total += e.count;
    return total;
  }

  BowMatrix to_binary() const {
    auto rows = rows_;
    for (auto& r : rows)
      for (auto& e : r) e.count = 1;
    return BowMatrix(cols_, BowMode::binary, std::move(rows));
  }

  bool operator==(const BowMatrix&) const = default;

 private:
  std::size_t cols_ = 0;
  BowMode mode_ = BowMode::count;
  std::vector<std::vector<BowEntry>> rows_;
};

inline BowMatrix vectorize(std::span<const Document> docs, const Vocabulary& vocab, BowMode mode) {
  if (vocab.empty()) throw std::invalid_argument("vectorize: empty vocabulary");
  std::vector<std::vector<BowEntry>> rows;
  rows.reserve(docs.size());
  for (const auto& doc : docs) {
    std::map<std::uint32_t, std::uint32_t> counts;
    for (const auto& token : doc.tokens) {
      if (auto j = vocab.find(token)) ++counts[static_cast<std::uint32_t>(*j)];
    }
    std::vector<BowEntry> row;
    row.reserve(counts.size());
    for (auto [word, count] : counts) row.push_back({word, mode == BowMode::binary ? 1u : count});
    rows.push_back(std::move(row));
  }
  return BowMatrix(vocab.size(), mode, std::move(rows));
}

struct SplitSizes {
  std::size_t train = 0;
  std::size_t pool = 0;
  std::size_t holdout = 0;
};

struct DataSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> pool_ids;
  std::vector<std::string> holdout_ids;
  std::uint64_t seed = 0;

  bool operator==(const DataSplit&) const = default;
};

// Seeded shuffle, then contiguous train | pool | holdout assignment.
inline DataSplit split(std::span<const Document> corpus, SplitSizes sizes, std::uint64_t seed) {
  const std::size_t requested = sizes.train + sizes.pool + sizes.holdout;
  if (requested > corpus.size()) {
    throw std::invalid_argument("split: requested " + std::to_string(requested) + " documents from a corpus of " +
                                std::to_string(corpus.size()));
  }
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x5b1d));
  rng.shuffle(order);
  DataSplit out;
  out.seed = seed;
  std::size_t pos = 0;
  auto take = [&](std::vector<std::string>& dst, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) dst.push_back(corpus[order[pos++]].id);
  };
  take(out.train_ids, sizes.train);
  take(out.pool_ids, sizes.pool);
  take(out.holdout_ids, sizes.holdout);
  return out;
}

class CorpusFormatError : public std::runtime_error {
 public:
  CorpusFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("corpus line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Parses one JSON object per line: {"id": str, "text": str, "label": int?, "score": number?}.
inline std::vector<Document> parse_corpus(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw CorpusFormatError(line_no, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) throw CorpusFormatError(line_no, "record is not an object");
    if (!record.contains("id") || !record["id"].is_string()) throw CorpusFormatError(line_no, "missing string field 'id'");
    if (!record.contains("text") || !record["text"].is_string())
      throw CorpusFormatError(line_no, "missing string field 'text'");
    std::optional<int> label;
    std::optional<double> score;
    if (record.contains("label") && !record["label"].is_null()) {
      if (!record["label"].is_number_integer() || record["label"].get<long long>() < 0)
        throw CorpusFormatError(line_no, "'label' must be a nonnegative integer");
      label = record["label"].get<int>();
    }
    if (record.contains("score") && !record["score"].is_null()) {
      if (!record["score"].is_number()) throw CorpusFormatError(line_no, "'score' must be a number");
      score = record["score"].get<double>();
    }
    auto id = record["id"].get<std::string>();
    if (!ids.insert(id).second) throw CorpusFormatError(line_no, "duplicate id '" + id + "'");
    docs.push_back(Document::make(std::move(id), record["text"].get<std::string>(), label, score));
  }
  return docs;
}

inline std::vector<Document> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file: " + path);
  return parse_corpus(in);
}

inline std::string format_corpus_record(const Document& doc) {
  nlohmann::ordered_json record;
  record["id"] = doc.id;
  record["text"] = doc.text;
  if (doc.label) record["label"] = *doc.label;
  if (doc.score) record["score"] = *doc.score;
  return record.dump();
}

inline void save_corpus(const std::string& path, std::span<const Document> docs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  for (const auto& doc : docs) out << format_corpus_record(doc) << '\n';
}

}  // namespace infoplan
