// src/eval/report.cpp

// Copyright 2026  The spkd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "spkd/errors.hpp"
#include "spkd/eval.hpp"

namespace spkd::eval {

namespace {

struct RunData {
  std::string id;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  MetricList eval;
};

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

RunData ReadRun(const std::filesystem::path& dir) {
  RunData run;
  const std::filesystem::path clean = dir.lexically_normal();
  run.id = clean.has_filename() ? clean.filename().string()
                                : clean.parent_path().filename().string();
  const std::filesystem::path metrics = dir / "metrics.csv";
  std::ifstream in(metrics);
  if (!in) throw IoError("missing metrics file " + metrics.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(metrics.string() + " is empty");
  run.columns = SplitCsv(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = SplitCsv(line);
    if (cells.size() != run.columns.size()) {
      throw FormatError(metrics.string() + ": ragged row");
    }
    run.rows.push_back(std::move(cells));
  }
  if (std::filesystem::exists(dir / "eval.csv")) run.eval = ReadMetricList(dir / "eval.csv");
  return run;
}

// Summary metrics of a training log: row count and last value of every loss
// column.
MetricList Summarize(const RunData& run) {
  MetricList m;
  m.emplace_back("steps", static_cast<double>(run.rows.size()));
  if (run.rows.empty()) return m;
  for (std::size_t c = 0; c < run.columns.size(); ++c) {
    const std::string& col = run.columns[c];
    if (col == "step" || col == "stage" || col == "seed") continue;
    m.emplace_back("final_" + col, std::stod(run.rows.back()[c]));
  }
  return m;
}

void WriteSvg(const std::vector<RunData>& runs, const std::string& column,
              const std::filesystem::path& file) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  struct Series {
    std::string id;
    std::vector<std::pair<double, double>> pts;
  };
  std::vector<Series> series;
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const RunData& r : runs) {
    auto it = std::find(r.columns.begin(), r.columns.end(), column);
    if (it == r.columns.end()) continue;
    const auto c = static_cast<std::size_t>(it - r.columns.begin());
    Series s{r.id, {}};
    for (const auto& row : r.rows) {
      const double x = std::stod(row[0]), y = std::stod(row[c]);
      if (!std::isfinite(y)) continue;
      s.pts.emplace_back(x, y);
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
    series.push_back(std::move(s));
  }
  if (series.empty() || !std::isfinite(x0)) return;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double w = 640, h = 400, pad = 50;
  std::ofstream out(file, std::ios::trunc);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << pad << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
      << column << " (" << Num(y0) << " .. " << Num(y1) << ")</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % 8];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& [x, y] : series[i].pts) {
      out << pad + (x - x0) / (x1 - x0) * (w - 2 * pad) << ','
          << h - pad - (y - y0) / (y1 - y0) * (h - 2 * pad) << ' ';
    }
    out << "\"/>\n<text x=\"" << w - 160 << "\" y=\"" << 40 + 16 * i
        << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << color << "\">"
        << series[i].id << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace

void WriteReport(const std::vector<std::filesystem::path>& run_dirs,
                 const std::filesystem::path& out_dir, bool svg) {
  if (run_dirs.empty()) throw ConfigError("report needs at least one run directory");
  std::vector<RunData> runs;
  for (const auto& d : run_dirs) runs.push_back(ReadRun(d));
  std::stable_sort(runs.begin(), runs.end(),
                   [](const RunData& a, const RunData& b) { return a.id < b.id; });

  std::filesystem::create_directories(out_dir);
  std::ofstream cmp(out_dir / "comparison.csv", std::ios::trunc);
  std::ofstream curves(out_dir / "training_curves.csv", std::ios::trunc);
  std::ofstream summary(out_dir / "summary.txt", std::ios::trunc);
  if (!cmp || !curves || !summary) throw IoError("cannot write report in " + out_dir.string());

  cmp << "run_id,metric,value\n";
  std::vector<std::string> columns = runs.front().columns;
  curves << "run_id";
  for (const auto& c : columns) curves << ',' << c;
  curves << '\n';
  for (const RunData& r : runs) {
    MetricList all = Summarize(r);
    all.insert(all.end(), r.eval.begin(), r.eval.end());
    summary << r.id << '\n';
    for (const auto& [name, v] : all) {
      cmp << r.id << ',' << name << ',' << Num(v) << '\n';
      summary << "  " << name << " = " << Num(v) << '\n';
    }
    if (r.columns != columns) {
      throw FormatError("run " + r.id + " has a different metrics schema");
    }
    for (const auto& row : r.rows) {
      curves << r.id;
      for (const auto& cell : row) curves << ',' << cell;
      curves << '\n';
    }
  }
  if (svg) {
    for (const auto& c : columns) {
      if (c == "step" || c == "stage" || c == "seed") continue;
      WriteSvg(runs, c, out_dir / (c + ".svg"));
    }
  }
}

}  // namespace spkd::eval
