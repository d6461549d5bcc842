// infoplan: run active-learning experiments, summarise them, generate
// synthetic corpora and serve annotation sessions.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "infoplan/annotation_service.hpp"
#include "infoplan/report.hpp"
#include "infoplan/synthetic.hpp"

#include <CLI11.hpp>

namespace fs = std::filesystem;
using namespace infoplan;
using service::json;

namespace {

// "key=value" -> json object entry; numbers stay numbers.
json parse_settings(const std::vector<std::string>& items) {
  json out = json::object();
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value, got '" + item + "'");
    const auto key = item.substr(0, eq), value = item.substr(eq + 1);
    try {
      out[key] = json::parse(value);
      if (!out[key].is_number()) out[key] = value;
    } catch (const json::parse_error&) {
      out[key] = value;
    }
  }
  return out;
}

struct RunArgs {
  std::string model, corpus, out;
  std::vector<std::string> acq;
  std::size_t k = 10, train = 0, pool = 0, holdout = 0, max_seq_len = 32;
  int rounds = 10, trials = 10, min_df = 1;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::string> settings;
  std::string embeddings;
};

int cmd_run(const RunArgs& a) {
  const auto kind = planner::parse_model(a.model);
  planner::DatasetOptions dop;
  dop.min_df = a.min_df;
  dop.max_seq_len = a.max_seq_len;
  const planner::Dataset data(load_corpus(a.corpus), dop);
  planner::ExperimentConfig ec;
  ec.model = kind;
  ec.acquisitions.clear();
  std::vector<std::string> acq = a.acq;
  if (acq.empty()) acq = kind == planner::ModelKind::slda ? std::vector<std::string>{"random", "entropy"}
                                                          : std::vector<std::string>{"random", "entropy", "mi"};
  for (const auto& s : acq) ec.acquisitions.push_back(planner::parse_acquisition(s));
  const std::size_t n = data.size();
  ec.split.train = a.train ? a.train : std::max<std::size_t>(1, n / 10);
  ec.split.holdout = a.holdout ? a.holdout : std::max<std::size_t>(1, n / 5);
  const std::size_t used = ec.split.train + ec.split.holdout;
  ec.split.pool = a.pool ? a.pool : (used < n ? n - used : 0);
  ec.k = a.k;
  ec.rounds = a.rounds;
  ec.trials = a.trials;
  ec.base_seed = a.seed;
  ec.threads = a.threads;
  json settings = parse_settings(a.settings);
  if (!a.embeddings.empty()) settings["nn_embedding_file"] = a.embeddings;
  ec.options = service::parse_model_options(settings);

  std::cerr << "running " << planner::to_string(kind) << " on " << n << " documents (split " << ec.split.train << "/"
            << ec.split.pool << "/" << ec.split.holdout << ", k=" << ec.k << ", " << ec.rounds << " rounds, "
            << ec.trials << " trials)\n";
  const auto res = planner::run_experiment(data, ec);
  fs::create_directories(a.out);
  {
    std::ofstream csv(fs::path(a.out) / "curves.csv", std::ios::binary);
    planner::write_csv(csv, res);
    if (!csv) throw std::runtime_error("could not write curves.csv");
  }
  json meta = {{"model", planner::to_string(kind)},
               {"acquisitions", acq},
               {"corpus", a.corpus},
               {"split", {{"train", ec.split.train}, {"pool", ec.split.pool}, {"holdout", ec.split.holdout}}},
               {"k", ec.k},
               {"rounds", ec.rounds},
               {"trials", ec.trials},
               {"seed", ec.base_seed},
               {"options", settings}};
  std::ofstream(fs::path(a.out) / "run.json") << meta.dump(2) << '\n';
  for (const auto& [acq_kind, pts] : res.aggregate) {
    const auto& last = pts.back();
    std::cout << planner::to_string(acq_kind) << ": final " << res.trials[0].curve.back().metric_name << " "
              << report::fixed(last.metric_mean) << " +- " << report::fixed(last.metric_std) << ", entropy "
              << report::fixed(last.entropy_mean) << '\n';
  }
  std::cout << "wrote " << (fs::path(a.out) / "curves.csv").string() << '\n';
  return 0;
}

int cmd_report(const std::string& in_dir, std::string out_dir) {
  if (out_dir.empty()) out_dir = in_dir;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in_dir))
    if (e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .csv files in " + in_dir);
  report::CurveGroups groups;
  for (const auto& f : files) {
    std::ifstream in(f);
    report::read_curve_csv(in, groups, f.string());
  }
  const auto tables = report::render_tables(groups);
  std::cout << tables;
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "report.txt") << tables;
  std::set<std::string> models;
  for (const auto& [key, t] : groups.trials) models.insert(key.first);
  for (const auto& m : models) {
    std::ofstream(fs::path(out_dir) / (m + "_metric.svg")) << report::render_svg(groups, m, false);
    std::ofstream(fs::path(out_dir) / (m + "_entropy.svg")) << report::render_svg(groups, m, true);
  }
  std::cerr << "wrote report.txt and " << 2 * models.size() << " plots to " << out_dir << '\n';
  return 0;
}

struct SynthArgs {
  std::string kind = "planted", out, embeddings;
  std::size_t docs = 0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& a) {
  std::vector<Document> docs;
  if (a.kind == "planted") {
    synthetic::PlantedConfig c;
    c.seed = a.seed;
    if (a.docs) c.docs = a.docs;
    docs = synthetic::planted_corpus(c).docs;
  } else if (a.kind == "sentiment") {
    synthetic::SentimentConfig c;
    c.seed = a.seed;
    if (a.docs) c.docs = a.docs;
    const auto corpus = synthetic::sentiment_corpus(c);
    docs = corpus.docs;
    if (!a.embeddings.empty()) std::ofstream(a.embeddings) << corpus.embedding_text();
  } else if (a.kind == "slda") {
    synthetic::SldaGenConfig c;
    c.seed = a.seed;
    if (a.docs) c.docs = a.docs;
    docs = synthetic::slda_corpus(c).docs;
  } else {
    throw CLI::ValidationError("--kind", "expected planted, sentiment or slda");
  }
  if (!a.embeddings.empty() && a.kind != "sentiment") std::cerr << "note: --embeddings only applies to sentiment\n";
  save_corpus(a.out, docs);
  std::cerr << "wrote " << docs.size() << " documents to " << a.out << '\n';
  return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& data_dir, const std::string& host, int port, const std::string& static_dir) {
  service::Service svc(service::ServiceConfig{data_dir});
  httplib::Server srv;
  service::mount(srv, svc, static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
  g_server = &srv;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "serving " << data_dir << " on http://" << host << ":" << port << " (" << svc.session_ids().size()
            << " sessions restored)\n";
  if (!srv.listen(host, port)) {
    std::cerr << "error: could not listen on " << host << ":" << port << '\n';
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pool-based active learning for text"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run repeated active-learning trials and write curves.csv");
  run_cmd->add_option("--model", run.model, "nb | slda | nn")->required();
  run_cmd->add_option("--acq", run.acq, "acquisition kinds: random, entropy, mi (repeat or comma-separate)")
      ->delimiter(',');
  run_cmd->add_option("--corpus", run.corpus, "JSONL corpus")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--k", run.k, "documents queried per round")->check(CLI::PositiveNumber)->capture_default_str();
  run_cmd->add_option("--rounds", run.rounds, "query rounds")->check(CLI::PositiveNumber)->capture_default_str();
  run_cmd->add_option("--trials", run.trials, "repetitions")->check(CLI::PositiveNumber)->capture_default_str();
  run_cmd->add_option("--seed", run.seed, "base seed; trial t uses seed + t")->capture_default_str();
  run_cmd->add_option("--out", run.out, "output directory")->required();
  run_cmd->add_option("--train", run.train, "initial labelled documents (default 10%)");
  run_cmd->add_option("--pool", run.pool, "pool documents (default: the rest)");
  run_cmd->add_option("--holdout", run.holdout, "holdout documents (default 20%)");
  run_cmd->add_option("--threads", run.threads, "worker threads")->capture_default_str();
  run_cmd->add_option("--min-df", run.min_df, "minimum document frequency")->capture_default_str();
  run_cmd->add_option("--max-seq-len", run.max_seq_len, "token limit for the neural model")->capture_default_str();
  run_cmd->add_option("--set", run.settings, "model option key=value, e.g. nn_epochs=30 or slda_topics=2");
  run_cmd->add_option("--embeddings", run.embeddings, "word embedding file for the neural model")
      ->check(CLI::ExistingFile);

  std::string report_in, report_out;
  auto* report_cmd = app.add_subcommand("report", "aggregate curve CSVs into tables and SVG plots");
  report_cmd->add_option("--in", report_in, "directory holding curve CSVs")->required()->check(CLI::ExistingDirectory);
  report_cmd->add_option("--out", report_out, "output directory (default: --in)");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic corpus");
  synth_cmd->add_option("--kind", synth.kind, "planted | sentiment | slda")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "JSONL output path")->required();
  synth_cmd->add_option("--docs", synth.docs, "number of documents");
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("--embeddings", synth.embeddings, "also write the sentiment embedding file here");

  std::string data_dir = "infoplan-data", host = "127.0.0.1", static_dir;
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "serve annotation sessions over HTTP");
  serve_cmd->add_option("--data", data_dir, "state directory")->capture_default_str();
  serve_cmd->add_option("--host", host, "bind address")->capture_default_str();
  serve_cmd->add_option("--port", port, "port")->capture_default_str();
  serve_cmd->add_option("--static", static_dir, "directory of static files served at /")->check(CLI::ExistingDirectory);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return cmd_run(run);
    if (*report_cmd) return cmd_report(report_in, report_out);
    if (*synth_cmd) return cmd_synth(synth);
    if (*serve_cmd) return cmd_serve(data_dir, host, port, static_dir);
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const service::ApiError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
