#pragma once

// HTTP front end for human-labelled active-learning sessions. Each session
// wraps a planner::TrialRunner; the annotator plays the oracle.
//
// On disk (under data_dir):
//   corpora/<name>.jsonl        ingested corpus
//   corpora/<name>.meta.json    class names
//   sessions/<id>/session.json  creation request, normalised
//   sessions/<id>/events.jsonl  one line per accepted label submission
//   sessions/<id>/snapshot.json summary, current batch and curve
//   sessions/<id>/checkpoint.txt latest model
// The event log is appended and synced before the response goes out;
// restart replays it through a fresh TrialRunner.

#include <unistd.h>

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

// Eigen (via planner) must come before httplib: <resolv.h> defines a _res
// macro that collides with Eigen parameter names.
#include "infoplan/corpus.hpp"
#include "infoplan/planner.hpp"

#include <httplib.h>
#include <json.hpp>

namespace infoplan::service {

using nlohmann::json;
namespace fs = std::filesystem;

class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

inline ApiError bad_request(std::string code, const std::string& msg) { return {400, std::move(code), msg}; }
inline ApiError not_found(std::string code, const std::string& msg) { return {404, std::move(code), msg}; }
inline ApiError conflict(std::string code, const std::string& msg) { return {409, std::move(code), msg}; }

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void sync_file(const fs::path& p, const std::string& data, const char* mode) {
  std::FILE* f = std::fopen(p.c_str(), mode);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  const bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size() && std::fflush(f) == 0 &&
                  ::fsync(::fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw std::runtime_error("write failed: " + p.string());
}

// write to a sibling temp file, then rename over the target
inline void write_atomic(const fs::path& p, const std::string& data) {
  const fs::path tmp = p.string() + ".tmp";
  sync_file(tmp, data, "wb");
  fs::rename(tmp, p);
}

inline void append_line(const fs::path& p, const std::string& line) { sync_file(p, line + "\n", "ab"); }

inline bool valid_name(const std::string& s) {
  if (s.empty() || s.size() > 64) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  return s[0] != '.';
}

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

template <class T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw bad_request("invalid_parameter", std::string("'") + key + "' has the wrong type");
  }
}

inline std::size_t get_count(const json& obj, const char* key, std::size_t fallback) {
  if (!obj.contains(key) || obj[key].is_null()) return fallback;
  const auto& v = obj[key];
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw bad_request("invalid_parameter", std::string("'") + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace detail

// Model options by key, as accepted in a session request and by the CLI.
inline planner::ModelOptions parse_model_options(const json& j) {
  using detail::read_file;
  planner::ModelOptions o;
  if (j.is_null()) return o;
  if (!j.is_object()) throw bad_request("invalid_parameter", "'options' must be an object");
  using Setter = std::function<void(const json&)>;
  auto real = [](double& dst) -> Setter { return [&dst](const json& v) { dst = v.get<double>(); }; };
  auto count = [](std::size_t& dst) -> Setter {
    return [&dst](const json& v) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw std::invalid_argument("expected a count");
      dst = v.get<std::size_t>();
    };
  };
  auto integer = [](int& dst) -> Setter {
    return [&dst](const json& v) {
      if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
      dst = v.get<int>();
    };
  };
  const std::map<std::string, Setter> setters = {
      {"nb_alpha", real(o.nb_alpha)},
      {"slda_topics", count(o.slda_hyper.topics)},
      {"slda_alpha", real(o.slda_hyper.alpha)},
      {"slda_eta", real(o.slda_hyper.eta)},
      {"slda_sigma2", real(o.slda_hyper.sigma2)},
      {"slda_w_prior_var", real(o.slda_hyper.w_prior_var)},
      {"slda_sweeps", integer(o.slda_sampler.sweeps)},
      {"slda_burn_in", integer(o.slda_sampler.burn_in)},
      {"slda_thin", integer(o.slda_sampler.thin)},
      {"slda_inner_sweeps", integer(o.slda_score.inner_sweeps)},
      {"slda_components", count(o.slda_score.components)},
      {"slda_draws", count(o.slda_score.draws)},
      {"slda_score_budget", count(o.slda_score_budget)},
      {"nn_embed_dim", count(o.nn_embed_dim)},
      {"nn_conv_filters", count(o.nn_conv_filters)},
      {"nn_kernel_size", count(o.nn_kernel_size)},
      {"nn_hidden_dim", count(o.nn_hidden_dim)},
      {"nn_dropout", real(o.nn_dropout)},
      {"nn_mc_passes", count(o.nn_mc_passes)},
      {"nn_epochs", integer(o.nn_train.epochs)},
      {"nn_batch_size", count(o.nn_train.batch_size)},
      {"nn_learning_rate", real(o.nn_train.learning_rate)},
      {"nn_momentum", real(o.nn_train.momentum)},
      {"nn_weight_decay", real(o.nn_train.weight_decay)},
      {"nn_embedding_seed", [&o](const json& v) { o.nn_embedding_seed = v.get<std::uint64_t>(); }},
      {"nn_embedding_file", [&o](const json& v) { o.nn_embedding_text = read_file(v.get<std::string>()); }},
  };
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw bad_request("unknown_option", "unknown model option '" + key + "'");
    try {
      it->second(value);
    } catch (const std::exception& e) {
      throw bad_request("invalid_parameter", "option '" + key + "': " + e.what());
    }
  }
  return o;
}

struct ServiceConfig {
  fs::path data_dir;
};

// Session parameters as persisted in session.json.
struct SessionSpec {
  std::string id;
  std::string corpus;
  planner::ModelKind model = planner::ModelKind::naive_bayes;
  planner::AcquisitionKind acquisition = planner::AcquisitionKind::entropy;
  std::size_t k = 10;
  int rounds = 10;
  std::uint64_t seed = 0;
  SplitSizes split;
  std::size_t max_seq_len = 32;
  json options = json::object();
  std::string created_at;

  json to_json() const {
    return {{"id", id},
            {"corpus", corpus},
            {"model", planner::to_string(model)},
            {"acquisition", planner::to_string(acquisition)},
            {"k", k},
            {"rounds", rounds},
            {"seed", seed},
            {"split", {{"train", split.train}, {"pool", split.pool}, {"holdout", split.holdout}}},
            {"max_seq_len", max_seq_len},
            {"options", options},
            {"created_at", created_at}};
  }
};

class Session {
 public:
  Session(SessionSpec spec, std::shared_ptr<const planner::Dataset> data, std::vector<std::string> class_names,
          fs::path dir)
      : spec_(std::move(spec)), data_(std::move(data)), class_names_(std::move(class_names)), dir_(std::move(dir)) {
    planner::TrialConfig tc;
    tc.model = spec_.model;
    tc.acquisition = spec_.acquisition;
    tc.k = spec_.k;
    tc.rounds = spec_.rounds;
    tc.seed = spec_.seed;
    tc.options = parse_model_options(spec_.options);
    const auto sp = split(data_->docs(), spec_.split, spec_.seed);
    for (const auto& id : sp.holdout_ids) {
      const auto t = data_->truth(data_->row_of(id));
      if (planner::task_of(spec_.model) == planner::Task::classification ? !t.label : !t.score) {
        throw bad_request("holdout_unlabelled", "holdout document '" + id + "' has no ground truth");
      }
    }
    try {
      runner_.emplace(*data_, sp, tc);
    } catch (const std::invalid_argument& e) {
      throw bad_request("invalid_parameter", e.what());
    }
    updated_at_ = spec_.created_at;
    refresh_batch();
  }

  const SessionSpec& spec() const { return spec_; }
  std::mutex& mutation_lock() { return mutate_; }

  // Re-apply one logged submission. Returns false if it does not fit.
  bool replay(const json& event) {
    if (event.value("round", -1) != runner_->state().round || runner_->done()) return false;
    std::vector<std::pair<std::string, planner::Target>> answers;
    for (const auto& a : event.at("answers")) answers.emplace_back(a.at(0).get<std::string>(), target_of(a.at(1)));
    if (answers.size() != batch_.size()) return false;
    for (std::size_t i = 0; i < answers.size(); ++i)
      if (answers[i].first != batch_[i].id) return false;
    runner_->commit(answers);
    updated_at_ = event.value("at", updated_at_);
    refresh_batch();
    return true;
  }

  // Validates a submission body against the current batch; the answers come
  // back in batch order. Throws ApiError without touching any state.
  std::vector<std::pair<std::string, planner::Target>> validate(const json& body) const {
    if (runner_->done()) throw conflict("session_complete", "session " + spec_.id + " is complete");
    if (!body.is_object() || !body.contains("round") || !body["round"].is_number_integer()) {
      throw bad_request("invalid_parameter", "submission needs an integer 'round'");
    }
    if (body["round"].get<long long>() != runner_->state().round) {
      throw conflict("stale_round", "submission is for round " + std::to_string(body["round"].get<long long>()) +
                                        " but the session is at round " + std::to_string(runner_->state().round));
    }
    const bool regression = task() == planner::Task::regression;
    const char* key = regression ? "scores" : "labels";
    if (!body.contains(key) || !body[key].is_object()) {
      throw bad_request("invalid_parameter", std::string("submission needs a '") + key + "' object");
    }
    const json& given = body[key];
    std::map<std::string, const BatchEntry*> in_batch;
    for (const auto& b : batch_) in_batch.emplace(b.id, &b);
    for (const auto& [id, value] : given.items()) {
      if (!in_batch.count(id)) throw bad_request("unknown_document", "'" + id + "' is not in the current batch");
      if (regression) {
        if (!value.is_number() || !std::isfinite(value.get<double>())) {
          throw bad_request("invalid_score", "score for '" + id + "' must be a finite number");
        }
      } else {
        if (!value.is_number_integer()) throw bad_request("invalid_label", "label for '" + id + "' must be an integer");
        const auto c = value.get<long long>();
        if (c < 0 || static_cast<std::size_t>(c) >= data_->n_classes()) {
          throw bad_request("label_out_of_range", "label " + std::to_string(c) + " for '" + id + "' is out of range");
        }
      }
    }
    std::vector<std::pair<std::string, planner::Target>> answers;
    for (const auto& b : batch_) {
      if (!given.contains(b.id)) {
        throw bad_request("incomplete_submission", "every batch item needs a label; '" + b.id + "' is missing");
      }
      answers.emplace_back(b.id, target_of(given[b.id]));
    }
    return answers;
  }

  json event_for(const std::vector<std::pair<std::string, planner::Target>>& answers, const std::string& at) const {
    json arr = json::array();
    for (const auto& [id, t] : answers) arr.push_back({id, t.label ? json(*t.label) : json(*t.score)});
    return {{"type", "labels"}, {"round", runner_->state().round}, {"answers", arr}, {"at", at}};
  }

  void apply(const std::vector<std::pair<std::string, planner::Target>>& answers, const std::string& at) {
    set_status("training");
    runner_->commit(answers);
    updated_at_ = at;
    refresh_batch();
  }

  void persist() const {
    json snap = {{"session", summary()}, {"queries", queries()}, {"metrics", metrics()}};
    detail::write_atomic(dir_ / "snapshot.json", snap.dump(2) + "\n");
    detail::write_atomic(dir_ / "checkpoint.txt", runner_->model().checkpoint());
  }

  // Published views; safe to read while a mutation is in progress.
  json summary() const {
    std::lock_guard lk(pub_);
    return summary_;
  }
  json queries() const {
    std::lock_guard lk(pub_);
    return queries_;
  }
  json metrics() const {
    std::lock_guard lk(pub_);
    return metrics_;
  }
  std::string status() const {
    std::lock_guard lk(pub_);
    return summary_.at("status").get<std::string>();
  }

 private:
  struct BatchEntry {
    std::string id;
  };

  planner::Task task() const { return planner::task_of(spec_.model); }

  planner::Target target_of(const json& v) const {
    planner::Target t;
    if (task() == planner::Task::regression) t.score = v.get<double>();
    else t.label = v.get<int>();
    return t;
  }

  void set_status(const std::string& s) {
    std::lock_guard lk(pub_);
    summary_["status"] = s;
  }

  json point_json(const planner::CurvePoint& p) const {
    return {{"model", planner::to_string(spec_.model)},
            {"acquisition", planner::to_string(spec_.acquisition)},
            {"trial", 0},
            {"round", p.round},
            {"n_labelled", p.n_labelled},
            {"metric_name", p.metric_name},
            {"metric_value", detail::finite_or_null(p.metric_value)},
            {"mean_entropy", detail::finite_or_null(p.mean_entropy)},
            {"seed", spec_.seed}};
  }

  void refresh_batch() {
    const auto& st = runner_->state();
    batch_.clear();
    json q = nullptr;
    if (!runner_->done()) {
      const auto items = runner_->propose();
      json arr = json::array();
      for (const auto& it : items) {
        batch_.push_back({it.id});
        json item = {{"id", it.id},
                     {"text", data_->doc(data_->row_of(it.id)).text},
                     {"score", detail::finite_or_null(it.score)},
                     {"posterior", it.prediction.posterior},
                     {"entropy", detail::finite_or_null(it.prediction.entropy)}};
        if (task() == planner::Task::regression) item["predicted_mean"] = it.prediction.mean;
        arr.push_back(std::move(item));
      }
      q = {{"session", spec_.id}, {"round", st.round}, {"items", std::move(arr)}};
    }
    json pts = json::array();
    for (const auto& p : runner_->curve()) pts.push_back(point_json(p));
    json s = spec_.to_json();
    s.erase("options");
    s["status"] = runner_->done() ? "complete" : "awaiting_labels";
    s["task"] = task() == planner::Task::classification ? "classification" : "regression";
    s["round"] = st.round;
    s["class_names"] = class_names_;
    s["n_labelled"] = st.labelled.size();
    s["n_pool"] = st.pool.size();
    s["n_holdout"] = st.holdout.size();
    s["updated_at"] = updated_at_;
    s["checkpoint"] = "checkpoint.txt";
    s["latest"] = pts.back();
    const auto trunc = runner_->truncation();
    s["truncated"] = trunc ? json(*trunc) : json(nullptr);
    std::lock_guard lk(pub_);
    summary_ = std::move(s);
    queries_ = std::move(q);
    metrics_ = {{"session", spec_.id}, {"points", std::move(pts)}};
  }

  SessionSpec spec_;
  std::shared_ptr<const planner::Dataset> data_;
  std::vector<std::string> class_names_;
  fs::path dir_;
  std::optional<planner::TrialRunner> runner_;
  std::vector<BatchEntry> batch_;
  std::string updated_at_;

  std::mutex mutate_;
  mutable std::mutex pub_;
  json summary_, queries_, metrics_;
};

class Service {
 public:
  explicit Service(ServiceConfig cfg) : cfg_(std::move(cfg)) {
    fs::create_directories(corpora_dir());
    fs::create_directories(sessions_dir());
    load_sessions();
  }

  // --- corpora --------------------------------------------------------------

  json list_corpora() const {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(corpora_dir()))
      if (e.path().extension() == ".jsonl") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    json arr = json::array();
    for (const auto& n : names) arr.push_back(corpus_info(n));
    return {{"corpora", arr}};
  }

  // Body: {"name": str, "content": jsonl text} or {"name": str, "path": file}.
  // Optional "class_names": [str].
  json ingest_corpus(const json& body) {
    if (!body.is_object()) throw bad_request("invalid_parameter", "body must be an object");
    const auto name = detail::get_or<std::string>(body, "name", "");
    if (!detail::valid_name(name)) throw bad_request("invalid_parameter", "corpus name must match [A-Za-z0-9_.-]+");
    std::string content;
    if (body.contains("content")) {
      content = detail::get_or<std::string>(body, "content", "");
    } else if (body.contains("path")) {
      try {
        content = detail::read_file(detail::get_or<std::string>(body, "path", ""));
      } catch (const std::runtime_error& e) {
        throw bad_request("unreadable_corpus", e.what());
      }
    } else {
      throw bad_request("invalid_parameter", "give the corpus as 'content' or 'path'");
    }
    std::vector<Document> docs;
    try {
      std::istringstream in(content);
      docs = parse_corpus(in);
    } catch (const CorpusFormatError& e) {
      throw bad_request("corpus_format", e.what());
    }
    if (docs.empty()) throw bad_request("corpus_format", "corpus has no documents");
    std::size_t classes = 0;
    for (const auto& d : docs)
      if (d.label) classes = std::max(classes, static_cast<std::size_t>(*d.label) + 1);
    json names = json::array();
    if (body.contains("class_names")) {
      if (!body["class_names"].is_array()) throw bad_request("invalid_parameter", "'class_names' must be a list");
      for (const auto& n : body["class_names"]) {
        if (!n.is_string()) throw bad_request("invalid_parameter", "class names must be strings");
        names.push_back(n);
      }
      if (names.size() < classes) throw bad_request("invalid_parameter", "fewer class names than labels in the corpus");
    } else {
      for (std::size_t c = 0; c < classes; ++c) names.push_back(std::to_string(c));
    }
    {
      std::lock_guard lk(corpus_mu_);
      const auto path = corpora_dir() / (name + ".jsonl");
      if (fs::exists(path)) throw conflict("corpus_exists", "corpus '" + name + "' already exists");
      detail::write_atomic(corpora_dir() / (name + ".meta.json"), json{{"class_names", names}}.dump() + "\n");
      std::ostringstream out;
      for (const auto& d : docs) out << format_corpus_record(d) << '\n';
      detail::write_atomic(path, out.str());
    }
    return corpus_info(name);
  }

  // --- sessions -------------------------------------------------------------

  json create_session(const json& body) {
    if (!body.is_object()) throw bad_request("invalid_parameter", "body must be an object");
    SessionSpec spec;
    spec.corpus = detail::get_or<std::string>(body, "corpus", "");
    if (!detail::valid_name(spec.corpus) || !fs::exists(corpora_dir() / (spec.corpus + ".jsonl"))) {
      throw not_found("unknown_corpus", "no corpus named '" + spec.corpus + "'");
    }
    try {
      spec.model = planner::parse_model(detail::get_or<std::string>(body, "model", "nb"));
      spec.acquisition = planner::parse_acquisition(detail::get_or<std::string>(body, "acquisition", "entropy"));
      planner::check_supported(spec.model, spec.acquisition);
    } catch (const std::invalid_argument& e) {
      throw bad_request("invalid_parameter", e.what());
    }
    spec.k = detail::get_count(body, "k", 10);
    if (spec.k == 0) throw bad_request("invalid_parameter", "k must be at least 1");
    const auto rounds = detail::get_count(body, "rounds", 10);
    if (rounds == 0 || rounds > 100000) throw bad_request("invalid_parameter", "rounds must be in [1, 100000]");
    spec.rounds = static_cast<int>(rounds);
    spec.seed = detail::get_or<std::uint64_t>(body, "seed", 0);
    spec.max_seq_len = detail::get_count(body, "max_seq_len", 32);
    if (spec.max_seq_len == 0) throw bad_request("invalid_parameter", "max_seq_len must be at least 1");
    spec.options = body.value("options", json::object());
    parse_model_options(spec.options);  // reject bad options before any work
    const auto data = dataset(spec.corpus, spec.max_seq_len);
    const std::size_t n = data->size();
    const json split_j = body.value("split", json::object());
    if (!split_j.is_object()) throw bad_request("invalid_parameter", "'split' must be an object");
    spec.split.train = detail::get_count(split_j, "train", std::max<std::size_t>(1, n / 10));
    spec.split.holdout = detail::get_count(split_j, "holdout", std::max<std::size_t>(1, n / 5));
    const std::size_t used = spec.split.train + spec.split.holdout;
    spec.split.pool = detail::get_count(split_j, "pool", used < n ? n - used : 0);
    if (spec.split.train + spec.split.pool + spec.split.holdout > n) {
      throw bad_request("invalid_parameter", "split asks for more documents than the corpus has");
    }
    spec.created_at = detail::utc_now();

    std::unique_lock create_lk(create_mu_);
    spec.id = next_id();
    const auto dir = sessions_dir() / spec.id;
    auto session = std::make_shared<Session>(spec, data, class_names(spec.corpus), dir);
    fs::create_directories(dir);
    detail::write_atomic(dir / "session.json", spec.to_json().dump(2) + "\n");
    detail::write_atomic(dir / "events.jsonl", "");
    session->persist();
    {
      std::unique_lock lk(sessions_mu_);
      sessions_.emplace(spec.id, session);
    }
    return session->summary();
  }

  json get_session(const std::string& id) const { return find(id)->summary(); }

  json get_queries(const std::string& id) const {
    const auto s = find(id);
    const auto status = s->status();
    if (status != "awaiting_labels") throw conflict("wrong_status", "session " + id + " is " + status);
    return s->queries();
  }

  json get_metrics(const std::string& id) const { return find(id)->metrics(); }

  json submit_labels(const std::string& id, const json& body) {
    const auto s = find(id);
    std::unique_lock lk(s->mutation_lock(), std::try_to_lock);
    if (!lk.owns_lock()) throw conflict("busy", "session " + id + " is already processing a submission");
    const auto answers = s->validate(body);
    const auto at = detail::utc_now();
    detail::append_line(sessions_dir() / id / "events.jsonl", s->event_for(answers, at).dump());
    s->apply(answers, at);
    s->persist();
    const auto m = s->metrics();
    return {{"session", s->summary()}, {"metrics", m["points"].back()}, {"queries", s->queries()}};
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lk(sessions_mu_);
    std::vector<std::string> out;
    for (const auto& [k, v] : sessions_) out.push_back(k);
    return out;
  }

 private:
  fs::path corpora_dir() const { return cfg_.data_dir / "corpora"; }
  fs::path sessions_dir() const { return cfg_.data_dir / "sessions"; }

  json corpus_info(const std::string& name) const {
    const auto data = dataset(name, 32);
    std::size_t labelled = 0, scored = 0;
    for (const auto& d : data->docs()) {
      labelled += d.label.has_value();
      scored += d.score.has_value();
    }
    return {{"name", name},
            {"documents", data->size()},
            {"labelled", labelled},
            {"scored", scored},
            {"classes", data->n_classes()},
            {"class_names", class_names(name)}};
  }

  std::vector<std::string> class_names(const std::string& corpus) const {
    const auto meta = corpora_dir() / (corpus + ".meta.json");
    if (!fs::exists(meta)) return {};
    return json::parse(detail::read_file(meta)).at("class_names").get<std::vector<std::string>>();
  }

  std::shared_ptr<const planner::Dataset> dataset(const std::string& corpus, std::size_t max_seq_len) const {
    const auto key = corpus + "#" + std::to_string(max_seq_len);
    std::lock_guard lk(corpus_mu_);
    auto it = datasets_.find(key);
    if (it != datasets_.end()) return it->second;
    planner::DatasetOptions opt;
    opt.max_seq_len = max_seq_len;
    const auto names = class_names(corpus);
    auto docs = load_corpus((corpora_dir() / (corpus + ".jsonl")).string());
    auto data = std::make_shared<const planner::Dataset>(std::move(docs), opt);
    // declared class names can exceed the labels actually present
    if (names.size() > data->n_classes()) {
      opt.n_classes = names.size();
      data = std::make_shared<const planner::Dataset>(data->docs(), opt);
    }
    datasets_.emplace(key, data);
    return data;
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lk(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw not_found("unknown_session", "no session '" + id + "'");
    return it->second;
  }

  std::string next_id() {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%04llu", static_cast<unsigned long long>(++last_id_));
    return buf;
  }

  void load_sessions() {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(sessions_dir()))
      if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
      const auto j = json::parse(detail::read_file(dir / "session.json"));
      SessionSpec spec;
      spec.id = j.at("id").get<std::string>();
      spec.corpus = j.at("corpus").get<std::string>();
      spec.model = planner::parse_model(j.at("model").get<std::string>());
      spec.acquisition = planner::parse_acquisition(j.at("acquisition").get<std::string>());
      spec.k = j.at("k").get<std::size_t>();
      spec.rounds = j.at("rounds").get<int>();
      spec.seed = j.at("seed").get<std::uint64_t>();
      const auto& sj = j.at("split");
      spec.split = {sj.at("train").get<std::size_t>(), sj.at("pool").get<std::size_t>(),
                    sj.at("holdout").get<std::size_t>()};
      spec.max_seq_len = j.at("max_seq_len").get<std::size_t>();
      spec.options = j.at("options");
      spec.created_at = j.at("created_at").get<std::string>();
      auto session = std::make_shared<Session>(spec, dataset(spec.corpus, spec.max_seq_len), class_names(spec.corpus), dir);
      replay_events(*session, dir / "events.jsonl");
      session->persist();
      if (spec.id.size() > 1 && spec.id[0] == 's') last_id_ = std::max<std::uint64_t>(last_id_, std::stoull(spec.id.substr(1)));
      sessions_.emplace(spec.id, std::move(session));
    }
  }

  static void replay_events(Session& s, const fs::path& log) {
    if (!fs::exists(log)) return;
    const std::string text = detail::read_file(log);
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;  // a torn final write; its response never went out
      lines.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
    if (pos < text.size()) detail::write_atomic(log, text.substr(0, pos));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto ev = json::parse(lines[i]);
      if (!s.replay(ev)) {
        throw std::runtime_error(log.string() + ": event " + std::to_string(i + 1) + " does not match the replayed batch");
      }
    }
  }

  ServiceConfig cfg_;
  mutable std::mutex corpus_mu_;
  mutable std::map<std::string, std::shared_ptr<const planner::Dataset>> datasets_;
  mutable std::shared_mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex create_mu_;
  std::uint64_t last_id_ = 0;
};

// --- HTTP -------------------------------------------------------------------

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  send_json(res, status, {{"error_code", code}, {"message", msg}});
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, f(req));
    } catch (const ApiError& e) {
      send_error(res, e.status(), e.code(), e.what());
    } catch (const json::parse_error& e) {
      send_error(res, 400, "invalid_json", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal_error", e.what());
    }
  };
}

inline json body_of(const httplib::Request& req) { return req.body.empty() ? json::object() : json::parse(req.body); }

}  // namespace detail

// Registers the API routes. static_dir, if given, is served at "/".
inline void mount(httplib::Server& srv, Service& svc, const std::optional<fs::path>& static_dir = std::nullopt) {
  using detail::guarded;
  using Req = httplib::Request;
  srv.Get("/corpora", guarded([&svc](const Req&) { return svc.list_corpora(); }));
  srv.Post("/corpora", guarded([&svc](const Req& r) { return svc.ingest_corpus(detail::body_of(r)); }));
  srv.Post("/sessions", guarded([&svc](const Req& r) { return svc.create_session(detail::body_of(r)); }));
  srv.Get(R"(/sessions/([^/]+))", guarded([&svc](const Req& r) { return svc.get_session(r.matches[1]); }));
  srv.Get(R"(/sessions/([^/]+)/queries)", guarded([&svc](const Req& r) { return svc.get_queries(r.matches[1]); }));
  srv.Get(R"(/sessions/([^/]+)/metrics)", guarded([&svc](const Req& r) { return svc.get_metrics(r.matches[1]); }));
  srv.Post(R"(/sessions/([^/]+)/labels)",
           guarded([&svc](const Req& r) { return svc.submit_labels(r.matches[1], detail::body_of(r)); }));
  if (static_dir) srv.set_mount_point("/", static_dir->string());
}

}  // namespace infoplan::service
