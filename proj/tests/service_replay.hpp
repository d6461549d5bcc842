#pragma once

// Drives an annotation session over real HTTP with ground-truth answers,
// restarting the service part way, and compares the learning curve with an
// offline planner::run_trial using the same seed. Shared by the unit tests
// and the acceptance binary.

#include <stdlib.h>

#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "infoplan/annotation_service.hpp"
#include "infoplan/synthetic.hpp"

namespace infoplan::replay {

using service::json;
namespace fs = std::filesystem;

inline fs::path make_temp_dir(const std::string& tag) {
  std::string tmpl = (fs::temp_directory_path() / ("infoplan-" + tag + "-XXXXXX")).string();
  if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
  return tmpl;
}

// A service instance listening on an ephemeral loopback port.
class LiveServer {
 public:
  explicit LiveServer(const fs::path& dir) : svc_(service::ServiceConfig{dir}) {
    service::mount(srv_, svc_);
    port_ = srv_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("could not bind a loopback port");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
  }
  ~LiveServer() {
    srv_.stop();
    thread_.join();
  }
  LiveServer(const LiveServer&) = delete;
  LiveServer& operator=(const LiveServer&) = delete;

  int port() const { return port_; }
  service::Service& service() { return svc_; }

 private:
  service::Service svc_;
  httplib::Server srv_;
  int port_ = 0;
  std::thread thread_;
};

struct HttpReply {
  int status = 0;
  json body;
};

inline HttpReply call(int port, const std::string& method, const std::string& path, const json& body = nullptr) {
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(300, 0);
  httplib::Result r = method == "GET" ? cli.Get(path) : cli.Post(path, body.is_null() ? "" : body.dump(), "application/json");
  if (!r) throw std::runtime_error(method + " " + path + ": transport error " + httplib::to_string(r.error()));
  HttpReply out;
  out.status = r->status;
  out.body = r->body.empty() ? json() : json::parse(r->body);
  return out;
}

inline std::string corpus_jsonl(const std::vector<Document>& docs) {
  std::ostringstream out;
  for (const auto& d : docs) out << format_corpus_record(d) << '\n';
  return out.str();
}

struct ReplayReport {
  bool equal = false;
  bool restart_consistent = false;  // payloads identical across the restart
  std::size_t points = 0;
  std::size_t rounds_before_restart = 0;
  std::string detail;
};

// request: body for POST /sessions (corpus name is filled in).
inline ReplayReport run_http_replay(const fs::path& dir, const std::vector<Document>& docs, json request,
                                    std::size_t restart_after) {
  ReplayReport rep;
  request["corpus"] = "replay";
  std::string sid;
  std::map<std::string, Document> by_id;
  for (const auto& d : docs) by_id.emplace(d.id, d);
  const bool regression = planner::task_of(planner::parse_model(request.value("model", "nb"))) == planner::Task::regression;

  auto answer_round = [&](int port) -> bool {
    const auto q = call(port, "GET", "/sessions/" + sid + "/queries");
    if (q.status != 200) return false;
    json answers = json::object();
    for (const auto& item : q.body["items"]) {
      const auto& d = by_id.at(item["id"].get<std::string>());
      answers[d.id] = regression ? json(*d.score) : json(*d.label);
    }
    const auto r = call(port, "POST", "/sessions/" + sid + "/labels",
                        {{"round", q.body["round"]}, {regression ? "scores" : "labels", answers}});
    if (r.status != 200) throw std::runtime_error("label submission failed: " + r.body.dump());
    return true;
  };

  json before_summary, before_queries, before_metrics;
  {
    LiveServer live(dir);
    const auto ing = call(live.port(), "POST", "/corpora", {{"name", "replay"}, {"content", corpus_jsonl(docs)}});
    if (ing.status != 200) throw std::runtime_error("ingest failed: " + ing.body.dump());
    const auto created = call(live.port(), "POST", "/sessions", request);
    if (created.status != 200) throw std::runtime_error("create failed: " + created.body.dump());
    sid = created.body["id"].get<std::string>();
    while (rep.rounds_before_restart < restart_after && answer_round(live.port())) ++rep.rounds_before_restart;
    before_summary = call(live.port(), "GET", "/sessions/" + sid).body;
    before_queries = call(live.port(), "GET", "/sessions/" + sid + "/queries").body;
    before_metrics = call(live.port(), "GET", "/sessions/" + sid + "/metrics").body;
  }
  json metrics;
  {
    LiveServer live(dir);
    const auto s = call(live.port(), "GET", "/sessions/" + sid).body;
    const auto q = call(live.port(), "GET", "/sessions/" + sid + "/queries").body;
    const auto m = call(live.port(), "GET", "/sessions/" + sid + "/metrics").body;
    rep.restart_consistent = s == before_summary && q == before_queries && m == before_metrics;
    while (answer_round(live.port())) {
    }
    metrics = call(live.port(), "GET", "/sessions/" + sid + "/metrics").body;
  }

  // offline reference
  planner::DatasetOptions dop;
  dop.max_seq_len = request.value("max_seq_len", std::size_t{32});
  const planner::Dataset data(docs, dop);
  planner::TrialConfig tc;
  tc.model = planner::parse_model(request.value("model", "nb"));
  tc.acquisition = planner::parse_acquisition(request.value("acquisition", "entropy"));
  tc.k = request.at("k").get<std::size_t>();
  tc.rounds = request.at("rounds").get<int>();
  tc.seed = request.value("seed", std::uint64_t{0});
  tc.options = service::parse_model_options(request.value("options", json::object()));
  const auto& sj = request.at("split");
  const SplitSizes sizes{sj.at("train").get<std::size_t>(), sj.at("pool").get<std::size_t>(),
                         sj.at("holdout").get<std::size_t>()};
  planner::SimulatedOracle oracle(data);
  const auto ref = planner::run_trial(data, split(data.docs(), sizes, tc.seed), tc, oracle);

  const auto& pts = metrics["points"];
  rep.points = pts.size();
  if (pts.size() != ref.curve.size()) {
    rep.detail = "curve length " + std::to_string(pts.size()) + " vs " + std::to_string(ref.curve.size());
    return rep;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    const auto& c = ref.curve[i];
    const bool same = p["round"].get<int>() == c.round && p["n_labelled"].get<std::size_t>() == c.n_labelled &&
                      p["metric_name"].get<std::string>() == c.metric_name &&
                      p["metric_value"].get<double>() == c.metric_value &&
                      p["mean_entropy"].get<double>() == c.mean_entropy;
    if (!same) {
      rep.detail = "round " + std::to_string(i) + ": service " + p.dump() + " vs planner " +
                   format_double(c.metric_value) + "/" + format_double(c.mean_entropy);
      return rep;
    }
  }
  rep.equal = true;
  return rep;
}

}  // namespace infoplan::replay
