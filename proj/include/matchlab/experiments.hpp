#ifndef MATCHLAB_EXPERIMENTS_HPP_
#define MATCHLAB_EXPERIMENTS_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "matchlab/analysis.hpp"
#include "matchlab/market.hpp"

namespace matchlab {

struct ExperimentConfig {
  std::string id;
  MarketParams market;  // market.seed is the base seed of the whole experiment
  std::size_t runs = 20;
  std::size_t jobs = 1;

  // Acceptable-edge thresholds (left side proposes). Agents rated below
  // sigma accept every edge.
  double L_left = 0.12;
  double L_right = 0.12;
  double sigma_left = 0.02;
  double sigma_right = 0.02;

  // Grid searched by the minimal-L experiment.
  double grid_lo = 0.01;
  double grid_hi = 0.5;
  double grid_step = 0.01;

  InterviewParams interview{0.19, 0.60, 0.60};

  // Loss scaling and lower bound.
  double c = 1.0;
  std::vector<std::size_t> ns{500, 4000};
  std::size_t max_h = 4;
  std::size_t exceedance_n = 2000;
  double lower_bound_L = 0.0;  // 0 selects (1/8)(ln n / n)^(1/3)

  // Agents in the bottom fraction of ranks are excluded from headline means.
  double bottom_fraction = 0.2;
  // Loss statistics skip agents whose aligned partner is rated below this.
  double bottom_rating = 0.2;

  // Truncation experiment: "truncated", "selected" or "full".
  std::string edge_mode = "truncated";
  double nu = 0.5;   // sigma_right = nu / n^(1/3)
  double eta = 2.0;  // sigma_left = eta / n^(1/3)
  double t_left = 0.0;   // > 0 overrides the derived value
  double t_right = 0.0;
  double k = 15.0;

  nlohmann::ordered_json to_json() const;
};

struct DecileSummary {
  std::string metric;
  std::size_t decile = 0;  // 0 = top 10% by public rank
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
};

struct RunRecord {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<double>> deciles;  // per-run decile means
};

struct Histogram {
  double lo = 0.0;
  double width = 1.0;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  Histogram() = default;
  Histogram(double lo_, double hi, std::size_t bins);
  void add(double v);
};

struct ExperimentReport {
  std::string experiment;
  nlohmann::ordered_json config;
  std::vector<RunRecord> runs;
  std::vector<DecileSummary> deciles;
  std::map<std::string, Histogram> histograms;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  std::vector<std::string> warnings;
  std::size_t audit_failures = 0;  // matchings with blocking pairs on their own edge set

  const DecileSummary* find(const std::string& metric, std::size_t decile) const;
};

/// Decile of a zero-based rank among n agents; decile sizes differ by <= 1.
inline std::size_t decile_of(std::size_t rank, std::size_t n) { return rank * 10 / n; }

/// Seed of run `run` derived from the experiment's base seed.
std::uint64_t run_seed(const ExperimentConfig& config, std::size_t run);

ExperimentReport exp_edge_counts(const ExperimentConfig& config);

struct MinLResult {
  double L = 0.0;
  bool found = false;
  ExperimentReport report;
};
MinLResult exp_min_L(const ExperimentConfig& config);
std::vector<double> min_L_grid(const ExperimentConfig& config);

ExperimentReport exp_unique_partners(const ExperimentConfig& config);
ExperimentReport exp_interview(const ExperimentConfig& config);
ExperimentReport exp_loss_scaling(const ExperimentConfig& config);
ExperimentReport exp_lower_bound(const ExperimentConfig& config);
ExperimentReport exp_truncation(const ExperimentConfig& config);

const std::vector<std::string>& experiment_ids();
/// Dispatches on config.id; throws std::invalid_argument for unknown ids.
ExperimentReport run_experiment(const ExperimentConfig& config);

// Report files: <prefix>_deciles.csv, <prefix>_runs.csv, <prefix>_hist.csv
// (when histograms exist) and <prefix>.json. Returns the written paths.
std::vector<std::string> save_report(const ExperimentReport& report, const std::string& prefix,
                                     const std::string& format);
nlohmann::ordered_json report_to_json(const ExperimentReport& report);
void write_deciles_csv(std::ostream& out, const ExperimentReport& report);
void write_runs_csv(std::ostream& out, const ExperimentReport& report);
void write_histograms_csv(std::ostream& out, const ExperimentReport& report);

// Edge-set exports.
void write_edges_csv(std::ostream& out, const EdgeSet& edges);
nlohmann::ordered_json edge_summary_json(const Market& market, const EdgeSet& edges);

}  // namespace matchlab

#endif  // MATCHLAB_EXPERIMENTS_HPP_
