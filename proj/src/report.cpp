#include <fstream>
#include <ostream>
#include <stdexcept>

#include "matchlab/experiments.hpp"

namespace matchlab {

using json = nlohmann::ordered_json;

void write_deciles_csv(std::ostream& out, const ExperimentReport& report) {
  out << "metric,decile,mean,min,max,count\n";
  for (const auto& d : report.deciles)
    out << d.metric << ',' << d.decile + 1 << ',' << d.mean << ',' << d.min << ',' << d.max << ','
        << d.count << '\n';
}

void write_runs_csv(std::ostream& out, const ExperimentReport& report) {
  out << "run,seed,metric,decile,value\n";
  for (const auto& r : report.runs) {
    for (const auto& [k, v] : r.scalars) out << r.run << ',' << r.seed << ',' << k << ",," << v << '\n';
    for (const auto& [k, row] : r.deciles)
      for (std::size_t d = 0; d < row.size(); ++d)
        out << r.run << ',' << r.seed << ',' << k << ',' << d + 1 << ',' << row[d] << '\n';
  }
}

void write_histograms_csv(std::ostream& out, const ExperimentReport& report) {
  out << "histogram,bin_lo,bin_hi,count\n";
  for (const auto& [name, h] : report.histograms) {
    out << name << ",-inf," << h.lo << ',' << h.underflow << '\n';
    for (std::size_t b = 0; b < h.counts.size(); ++b)
      out << name << ',' << h.lo + h.width * static_cast<double>(b) << ','
          << h.lo + h.width * static_cast<double>(b + 1) << ',' << h.counts[b] << '\n';
    out << name << ',' << h.lo + h.width * static_cast<double>(h.counts.size()) << ",inf,"
        << h.overflow << '\n';
  }
}

json report_to_json(const ExperimentReport& report) {
  json j;
  j["experiment"] = report.experiment;
  j["config"] = report.config;
  j["summary"] = report.summary;
  j["audit_failures"] = report.audit_failures;
  j["warnings"] = report.warnings;
  json deciles = json::array();
  for (const auto& d : report.deciles)
    deciles.push_back({{"metric", d.metric},
                       {"decile", d.decile + 1},
                       {"mean", d.mean},
                       {"min", d.min},
                       {"max", d.max},
                       {"count", d.count}});
  j["deciles"] = deciles;
  json runs = json::array();
  for (const auto& r : report.runs) {
    json jr;
    jr["run"] = r.run;
    jr["seed"] = r.seed;
    jr["scalars"] = r.scalars;
    jr["deciles"] = r.deciles;
    runs.push_back(jr);
  }
  j["runs"] = runs;
  json hist = json::object();
  for (const auto& [name, h] : report.histograms)
    hist[name] = {{"lo", h.lo},
                  {"width", h.width},
                  {"counts", h.counts},
                  {"underflow", h.underflow},
                  {"overflow", h.overflow}};
  j["histograms"] = hist;
  return j;
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

}  // namespace

std::vector<std::string> save_report(const ExperimentReport& report, const std::string& prefix,
                                     const std::string& format) {
  if (format != "csv" && format != "json") throw std::invalid_argument("format must be csv or json");
  std::vector<std::string> paths;
  if (format == "csv") {
    auto write = [&](const std::string& suffix, auto&& fn) {
      const std::string path = prefix + suffix;
      auto f = open_out(path);
      fn(f, report);
      if (!f) throw std::runtime_error("failed writing " + path);
      paths.push_back(path);
    };
    write("_deciles.csv", write_deciles_csv);
    write("_runs.csv", write_runs_csv);
    if (!report.histograms.empty()) write("_hist.csv", write_histograms_csv);
  }
  // The JSON file always carries the effective configuration and summary.
  const std::string path = prefix + ".json";
  auto f = open_out(path);
  f << report_to_json(report).dump(2) << '\n';
  if (!f) throw std::runtime_error("failed writing " + path);
  paths.push_back(path);
  return paths;
}

void write_edges_csv(std::ostream& out, const EdgeSet& edges) {
  out << "left_index,right_index\n";
  for (const auto& [i, j] : edges.edges()) out << i << ',' << j << '\n';
}

json edge_summary_json(const Market& market, const EdgeSet& edges) {
  json j;
  j["edges"] = edges.size();
  for (Side s : {Side::kLeft, Side::kRight}) {
    const std::size_t n = market.size(s);
    const auto deg = edges.degrees(s);
    std::vector<double> sum(10, 0.0), cnt(10, 0.0);
    std::size_t isolated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t d = decile_of(market.rank_of(s, i), n);
      sum[d] += static_cast<double>(deg[i]);
      cnt[d] += 1.0;
      isolated += deg[i] == 0;
    }
    std::vector<double> mean(10, 0.0);
    for (std::size_t d = 0; d < 10; ++d) mean[d] = cnt[d] > 0 ? sum[d] / cnt[d] : 0.0;
    j[to_string(s)] = {{"mean_degree_by_decile", mean}, {"isolated", isolated}};
  }
  return j;
}

}  // namespace matchlab
