#pragma once

// Reads curve CSVs back, aggregates them per (model, acquisition) and
// renders text tables and small SVG line plots.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "infoplan/planner.hpp"
#include "infoplan/text_format.hpp"

namespace infoplan::report {

using GroupKey = std::pair<std::string, std::string>;  // model, acquisition

struct CurveGroups {
  std::map<GroupKey, std::map<long long, planner::TrialResult>> trials;  // by trial index
  std::map<GroupKey, std::string> metric_name;

  std::map<GroupKey, std::vector<planner::AggregatePoint>> aggregate() const {
    std::map<GroupKey, std::vector<planner::AggregatePoint>> out;
    for (const auto& [key, by_trial] : trials) {
      std::vector<const planner::TrialResult*> ptrs;
      for (const auto& [t, res] : by_trial) ptrs.push_back(&res);
      out[key] = planner::aggregate_curves(ptrs);
    }
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Appends the rows of one curve CSV. Rounds must arrive in order per trial.
inline void read_curve_csv(std::istream& in, CurveGroups& groups, const std::string& source = "csv") {
  std::string line;
  const bool has_header = static_cast<bool>(std::getline(in, line));
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (!has_header || line != planner::kCsvHeader) throw std::runtime_error(source + ": missing or unexpected header");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = source + ":" + std::to_string(line_no);
    if (f.size() != 9) throw std::runtime_error(where + ": expected 9 fields, found " + std::to_string(f.size()));
    try {
      const GroupKey key{f[0], f[1]};
      auto& trial = groups.trials[key][parse_int(f[2])];
      planner::CurvePoint p;
      p.round = static_cast<int>(parse_int(f[3]));
      p.n_labelled = static_cast<std::size_t>(parse_uint(f[4]));
      p.metric_name = f[5];
      p.metric_value = parse_double(f[6]);
      p.mean_entropy = parse_double(f[7]);
      trial.seed = parse_uint(f[8]);
      if (p.round != static_cast<int>(trial.curve.size())) throw std::runtime_error("round out of order");
      auto [it, fresh] = groups.metric_name.emplace(key, p.metric_name);
      if (!fresh && it->second != p.metric_name) throw std::runtime_error("mixed metric names in one group");
      trial.curve.push_back(p);
    } catch (const std::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
}

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s.insert(0, w - s.size(), ' ');
  return s;
}

inline std::string fixed(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// One block per group: round, mean labelled, metric mean/std, entropy mean/std.
inline std::string render_tables(const CurveGroups& groups) {
  std::ostringstream out;
  for (const auto& [key, pts] : groups.aggregate()) {
    const auto& name = groups.metric_name.at(key);
    out << key.first << " / " << key.second << "  (" << groups.trials.at(key).size() << " trials)\n";
    out << pad("round", 6) << pad("labelled", 10) << pad(name, 10) << pad("std", 9) << pad("entropy", 10)
        << pad("std", 9) << '\n';
    for (const auto& p : pts) {
      out << pad(std::to_string(p.round), 6) << pad(fixed(p.n_labelled, 1), 10) << pad(fixed(p.metric_mean), 10)
          << pad(fixed(p.metric_std), 9) << pad(fixed(p.entropy_mean), 10) << pad(fixed(p.entropy_std), 9) << '\n';
    }
    out << '\n';
  }
  return out.str();
}

// Line plot of mean metric (or mean entropy) against labelled count, one
// line per acquisition kind of the given model.
inline std::string render_svg(const CurveGroups& groups, const std::string& model, bool entropy) {
  const auto agg = groups.aggregate();
  const double W = 560, H = 360, L = 60, R = 130, T = 30, B = 45;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  std::string metric = "metric";
  for (const auto& [key, pts] : agg) {
    if (key.first != model) continue;
    metric = groups.metric_name.at(key);
    for (const auto& p : pts) {
      const double y = entropy ? p.entropy_mean : p.metric_mean;
      xmin = std::min(xmin, p.n_labelled);
      xmax = std::max(xmax, p.n_labelled);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) throw std::invalid_argument("render_svg: no curves for model '" + model + "'");
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1e-3;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"18\">" << model << ": " << (entropy ? "mean holdout entropy" : metric) << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0, x = xmin + (xmax - xmin) * i / 4.0;
    out << "<text x=\"" << L - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << fixed(y, 3) << "</text>\n";
    out << "<text x=\"" << sx(x) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fixed(x, 0) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\" text-anchor=\"middle\">labelled documents</text>\n";
  int c = 0;
  for (const auto& [key, pts] : agg) {
    if (key.first != model) continue;
    const char* col = colours[c % 5];
    out << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) out << sx(p.n_labelled) << ',' << sy(entropy ? p.entropy_mean : p.metric_mean) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (c + 1) << "\" fill=\"" << col << "\">" << key.second
        << "</text>\n";
    ++c;
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace infoplan::report
