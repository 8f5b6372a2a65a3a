#include "matchlab/experiments.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "matchlab/matching.hpp"
#include "matchlab/rng.hpp"

namespace matchlab {

using json = nlohmann::ordered_json;

json ExperimentConfig::to_json() const {
  json j;
  j["id"] = id;
  j["n_left"] = market.n_left;
  j["n_right"] = market.n_right;
  j["cap_left"] = market.cap_left;
  j["cap_right"] = market.cap_right;
  j["lambda"] = market.lambda;
  j["seed"] = market.seed;
  j["scale_many_to_one_ratings"] = market.scale_many_to_one_ratings;
  j["runs"] = runs;
  j["jobs"] = jobs;
  j["L_left"] = L_left;
  j["L_right"] = L_right;
  j["sigma_left"] = sigma_left;
  j["sigma_right"] = sigma_right;
  j["grid"] = {grid_lo, grid_hi, grid_step};
  j["p"] = interview.p;
  j["q_left"] = interview.q_left;
  j["q_right"] = interview.q_right;
  j["c"] = c;
  j["ns"] = ns;
  j["max_h"] = max_h;
  j["exceedance_n"] = exceedance_n;
  j["lower_bound_L"] = lower_bound_L;
  j["bottom_fraction"] = bottom_fraction;
  j["bottom_rating"] = bottom_rating;
  j["edge_mode"] = edge_mode;
  j["nu"] = nu;
  j["eta"] = eta;
  j["t_left"] = t_left;
  j["t_right"] = t_right;
  j["k"] = k;
  return j;
}

Histogram::Histogram(double lo_, double hi, std::size_t bins)
    : lo(lo_), width((hi - lo_) / static_cast<double>(bins)), counts(bins, 0) {}

void Histogram::add(double v) {
  if (v < lo) {
    ++underflow;
    return;
  }
  const auto b = static_cast<std::size_t>((v - lo) / width);
  if (b >= counts.size()) {
    ++overflow;
    return;
  }
  ++counts[b];
}

const DecileSummary* ExperimentReport::find(const std::string& metric, std::size_t decile) const {
  for (const auto& d : deciles)
    if (d.metric == metric && d.decile == decile) return &d;
  return nullptr;
}

std::uint64_t run_seed(const ExperimentConfig& config, std::size_t run) {
  return derive_seed(config.market.seed, run);
}

namespace {

// Pooled per-decile statistics for several metrics.
class DecileTable {
 public:
  void add(const std::string& metric, std::size_t decile, double v) {
    Cell& c = cells_[metric][decile];
    c.sum += v;
    c.min = std::min(c.min, v);
    c.max = std::max(c.max, v);
    ++c.count;
  }
  void merge(const DecileTable& o) {
    for (const auto& [metric, row] : o.cells_)
      for (std::size_t d = 0; d < 10; ++d) {
        Cell& c = cells_[metric][d];
        c.sum += row[d].sum;
        c.min = std::min(c.min, row[d].min);
        c.max = std::max(c.max, row[d].max);
        c.count += row[d].count;
      }
  }
  std::map<std::string, std::vector<double>> means() const {
    std::map<std::string, std::vector<double>> out;
    for (const auto& [metric, row] : cells_) {
      auto& v = out[metric];
      for (const auto& c : row) v.push_back(c.count ? c.sum / static_cast<double>(c.count) : 0.0);
    }
    return out;
  }
  std::vector<DecileSummary> summaries() const {
    std::vector<DecileSummary> out;
    for (const auto& [metric, row] : cells_)
      for (std::size_t d = 0; d < 10; ++d) {
        const Cell& c = row[d];
        if (!c.count) continue;
        out.push_back({metric, d, c.sum / static_cast<double>(c.count), c.min, c.max, c.count});
      }
    return out;
  }

 private:
  struct Cell {
    double sum = 0.0;
    double min = std::numeric_limits<double>::infinity();
    double max = -std::numeric_limits<double>::infinity();
    std::size_t count = 0;
  };
  std::map<std::string, std::array<Cell, 10>> cells_;
};

struct RunOutput {
  RunRecord record;
  DecileTable table;
  std::map<std::string, Histogram> histograms;
  std::vector<std::string> warnings;
  std::size_t audit_failures = 0;
};

// Runs f(0..count-1) on up to `jobs` threads; results keep run order.
template <class R, class F>
std::vector<R> parallel_runs(std::size_t count, std::size_t jobs, F&& f) {
  std::vector<R> out(count);
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          out[i] = f(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
  return out;
}

ExperimentReport collect(const ExperimentConfig& config, const std::string& name,
                         std::vector<RunOutput> outputs) {
  ExperimentReport report;
  report.experiment = name;
  report.config = config.to_json();
  report.config["id"] = name;
  if (!config.market.n_left || !config.market.n_right) return report;
  DecileTable table;
  for (auto& o : outputs) {
    table.merge(o.table);
    for (auto& [key, h] : o.histograms) {
      auto it = report.histograms.find(key);
      if (it == report.histograms.end()) {
        report.histograms.emplace(key, h);
        continue;
      }
      for (std::size_t b = 0; b < h.counts.size(); ++b) it->second.counts[b] += h.counts[b];
      it->second.underflow += h.underflow;
      it->second.overflow += h.overflow;
    }
    for (auto& w : o.warnings) report.warnings.push_back(std::move(w));
    report.audit_failures += o.audit_failures;
    o.record.deciles = o.table.means();
    report.runs.push_back(std::move(o.record));
  }
  report.deciles = table.summaries();
  if (report.audit_failures)
    report.warnings.push_back(std::to_string(report.audit_failures) +
                              " matchings failed the blocking-pair audit");
  return report;
}

MarketParams params_for_run(const ExperimentConfig& config, std::size_t run) {
  MarketParams p = config.market;
  p.seed = run_seed(config, run);
  return p;
}

std::size_t audit(const Market& market, const EdgeSet& edges, const Matching& m) {
  return verify_stability(market, edges, m).empty() ? 0 : 1;
}

std::size_t top_count(std::size_t n, double bottom_fraction) {
  return static_cast<std::size_t>(std::llround((1.0 - bottom_fraction) * static_cast<double>(n)));
}

double mean_of(const std::vector<RunRecord>& runs, const std::string& key) {
  double s = 0.0;
  std::size_t c = 0;
  for (const auto& r : runs) {
    auto it = r.scalars.find(key);
    if (it == r.scalars.end()) continue;
    s += it->second;
    ++c;
  }
  return c ? s / static_cast<double>(c) : 0.0;
}

double min_of(const std::vector<RunRecord>& runs, const std::string& key) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& r : runs)
    if (auto it = r.scalars.find(key); it != r.scalars.end()) m = std::min(m, it->second);
  return m;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

bool all_slots_filled(const Market& market, const Matching& m) {
  const std::size_t slots = std::min(market.size(Side::kLeft) * market.capacity(Side::kLeft),
                                     market.size(Side::kRight) * market.capacity(Side::kRight));
  return m.pair_count() == slots;
}

void check_capacity_balance(const Market& market, RunOutput& out) {
  if (!market.capacities_balanced())
    out.warnings.push_back("run " + std::to_string(out.record.run) +
                           ": total capacities differ between the sides");
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentReport exp_edge_counts(const ExperimentConfig& config) {
  auto outputs = parallel_runs<RunOutput>(config.runs, config.jobs, [&](std::size_t r) {
    RunOutput out;
    out.record.run = r;
    out.record.seed = run_seed(config, r);
    const Market market = generate_market(params_for_run(config, r));
    check_capacity_balance(market, out);
    const EdgeSet edges = acceptable_edges(market, config.L_left, config.L_right,
                                           config.sigma_left, config.sigma_right);
    const Matching m = run_da(market, Side::kLeft, edges);
    out.audit_failures += audit(market, edges, m);

    const std::size_t n = market.size(Side::kLeft);
    const std::size_t top = top_count(n, config.bottom_fraction);
    const auto degree = edges.degrees(Side::kLeft);
    double top_list = 0.0, top_props = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t rank = market.rank_of(Side::kLeft, i);
      const std::size_t d = decile_of(rank, n);
      out.table.add("list_length", d, static_cast<double>(degree[i]));
      out.table.add("proposals", d, static_cast<double>(m.proposals_left[i]));
      out.table.add("unmatched", d, m.is_matched(Side::kLeft, i) ? 0.0 : 1.0);
      if (rank < top) {
        top_list += static_cast<double>(degree[i]);
        top_props += static_cast<double>(m.proposals_left[i]);
      }
    }
    auto& s = out.record.scalars;
    s["edges"] = static_cast<double>(edges.size());
    s["unmatched_left"] = static_cast<double>(m.unmatched(Side::kLeft).size());
    s["unmatched_right"] = static_cast<double>(m.unmatched(Side::kRight).size());
    s["all_matched"] = all_slots_filled(market, m) ? 1.0 : 0.0;
    s["top_mean_list_length"] = top ? top_list / static_cast<double>(top) : 0.0;
    s["top_mean_proposals"] = top ? top_props / static_cast<double>(top) : 0.0;
    return out;
  });
  ExperimentReport report = collect(config, "edge-counts", std::move(outputs));
  auto& s = report.summary;
  s["top_mean_list_length"] = mean_of(report.runs, "top_mean_list_length");
  s["top_mean_proposals"] = mean_of(report.runs, "top_mean_proposals");
  s["runs_all_matched"] = mean_of(report.runs, "all_matched") * static_cast<double>(report.runs.size());
  s["mean_unmatched_left"] = mean_of(report.runs, "unmatched_left");
  s["audit_failures"] = report.audit_failures;
  return report;
}

// ---------------------------------------------------------------------------

std::vector<double> min_L_grid(const ExperimentConfig& config) {
  if (!(config.grid_step > 0.0) || config.grid_hi < config.grid_lo)
    throw std::invalid_argument("invalid L grid");
  std::vector<double> grid;
  for (std::size_t k = 0;; ++k) {
    const double v = std::round((config.grid_lo + static_cast<double>(k) * config.grid_step) * 1e9) / 1e9;
    if (v > config.grid_hi + 1e-12) break;
    grid.push_back(v);
  }
  return grid;
}

MinLResult exp_min_L(const ExperimentConfig& config) {
  const auto grid = min_L_grid(config);
  auto matches_all = [&](const Market& market, double L) {
    const EdgeSet edges = acceptable_edges(market, L, L, config.sigma_left, config.sigma_right);
    return all_slots_filled(market, run_da(market, Side::kLeft, edges));
  };

  // Raise the candidate until each run in turn is fully matched, then confirm
  // every run at the final candidate; repeat if some run no longer passes.
  std::size_t idx = 0;
  std::vector<double> first_pass(config.runs, 0.0);
  for (std::size_t r = 0; r < config.runs && idx < grid.size(); ++r) {
    const Market market = generate_market(params_for_run(config, r));
    while (idx < grid.size() && !matches_all(market, grid[idx])) ++idx;
    if (idx < grid.size()) first_pass[r] = grid[idx];
  }
  while (idx < grid.size()) {
    const auto ok = parallel_runs<int>(config.runs, config.jobs, [&](std::size_t r) {
      return matches_all(generate_market(params_for_run(config, r)), grid[idx]) ? 1 : 0;
    });
    if (std::all_of(ok.begin(), ok.end(), [](int v) { return v == 1; })) break;
    ++idx;
  }

  MinLResult result;
  result.found = idx < grid.size();
  result.L = result.found ? grid[idx] : grid.back();

  std::vector<RunOutput> outputs(config.runs);
  for (std::size_t r = 0; r < config.runs; ++r) {
    outputs[r].record.run = r;
    outputs[r].record.seed = run_seed(config, r);
    outputs[r].record.scalars["first_passing_L"] = first_pass[r];
  }
  result.report = collect(config, "min-L", std::move(outputs));
  auto& s = result.report.summary;
  s["min_L"] = result.L;
  s["found"] = result.found;
  s["grid_points"] = grid.size();
  if (result.found && idx > 0) {
    const auto ok = parallel_runs<int>(config.runs, config.jobs, [&](std::size_t r) {
      return matches_all(generate_market(params_for_run(config, r)), grid[idx - 1]) ? 1 : 0;
    });
    s["previous_L"] = grid[idx - 1];
    s["fails_at_previous_L"] = std::any_of(ok.begin(), ok.end(), [](int v) { return v == 0; });
  }
  if (!result.found) result.report.warnings.push_back("no grid value matched every agent in every run");
  return result;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_unique_partners(const ExperimentConfig& config) {
  if (config.market.cap_left != 1 || config.market.cap_right != 1)
    throw std::invalid_argument("unique-partners needs a one-to-one market");
  auto outputs = parallel_runs<RunOutput>(config.runs, config.jobs, [&](std::size_t r) {
    RunOutput out;
    out.record.run = r;
    out.record.seed = run_seed(config, r);
    const Market market = generate_market(params_for_run(config, r));
    check_capacity_balance(market, out);
    const EdgeSet edges = EdgeSet::complete(market);
    const auto [lo, ro] = extreme_matchings(market, edges);
    out.audit_failures += audit(market, edges, lo) + audit(market, edges, ro);
    if (lo.unmatched(Side::kLeft) != ro.unmatched(Side::kLeft) ||
        lo.unmatched(Side::kRight) != ro.unmatched(Side::kRight))
      out.warnings.push_back("run " + std::to_string(r) + ": unmatched sets differ");
    const AgentSets multi = multi_stable_agents(lo, ro);

    for (Side s : {Side::kLeft, Side::kRight}) {
      const std::size_t n = market.size(s);
      std::vector<std::uint8_t> flag(n, 0);
      for (std::size_t i : (s == Side::kLeft ? multi.left : multi.right)) flag[i] = 1;
      const std::size_t top = top_count(n, 0.1);
      std::size_t top_multi = 0, bottom_multi = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t rank = market.rank_of(s, i);
        out.table.add(std::string("multi_") + to_string(s), decile_of(rank, n), flag[i]);
        if (rank < top) top_multi += flag[i];
        else bottom_multi += flag[i];
      }
      const std::string side = to_string(s);
      out.record.scalars["multi_" + side] = static_cast<double>(top_multi + bottom_multi);
      out.record.scalars["top90_fraction_" + side] =
          top ? static_cast<double>(top_multi) / static_cast<double>(top) : 0.0;
      out.record.scalars["bottom10_fraction_" + side] =
          n > top ? static_cast<double>(bottom_multi) / static_cast<double>(n - top) : 0.0;
    }
    return out;
  });
  ExperimentReport report = collect(config, "unique-partners", std::move(outputs));
  auto& s = report.summary;
  for (const char* side : {"left", "right"}) {
    s[std::string("mean_multi_") + side] = mean_of(report.runs, std::string("multi_") + side);
    s[std::string("top90_fraction_") + side] = mean_of(report.runs, std::string("top90_fraction_") + side);
    s[std::string("bottom10_fraction_") + side] =
        mean_of(report.runs, std::string("bottom10_fraction_") + side);
  }
  s["audit_failures"] = report.audit_failures;
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_interview(const ExperimentConfig& config) {
  auto outputs = parallel_runs<RunOutput>(config.runs, config.jobs, [&](std::size_t r) {
    RunOutput out;
    out.record.run = r;
    out.record.seed = run_seed(config, r);
    out.histograms.emplace("utility_difference", Histogram(-0.2, 1.0, 60));
    const Market market = generate_market(params_for_run(config, r));
    check_capacity_balance(market, out);
    const EdgeSet edges = interview_edges(market, config.interview);
    const EdgeSet full = EdgeSet::complete(market);
    const Matching m = run_da(market, Side::kLeft, edges);
    const Matching best = run_da(market, Side::kLeft, full);
    out.audit_failures += audit(market, edges, m) + audit(market, full, best);

    const std::size_t n = market.size(Side::kLeft);
    std::size_t unmatched = 0, unmatched_bottom2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t d = decile_of(market.rank_of(Side::kLeft, i), n);
      const bool matched = m.is_matched(Side::kLeft, i);
      out.table.add("unmatched", d, matched ? 0.0 : 1.0);
      out.table.add("edges", d, static_cast<double>(edges.degree(Side::kLeft, i)));
      if (!matched) {
        ++unmatched;
        if (d >= 8) ++unmatched_bottom2;
        continue;
      }
      if (best.is_matched(Side::kLeft, i)) {
        const double diff = market.utility(Side::kLeft, i, best.partners_left[i].front()) -
                            market.utility(Side::kLeft, i, m.partners_left[i].front());
        out.histograms.at("utility_difference").add(diff);
        out.table.add("utility_difference", d, diff);
      }
    }
    double company_edges = 0.0;
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j)
      company_edges += static_cast<double>(edges.degree(Side::kRight, j));
    auto& s = out.record.scalars;
    s["unmatched_workers"] = static_cast<double>(unmatched);
    s["unmatched_fraction"] = static_cast<double>(unmatched) / static_cast<double>(n);
    s["unmatched_bottom2"] = static_cast<double>(unmatched_bottom2);
    s["mean_edges_per_worker"] = static_cast<double>(edges.size()) / static_cast<double>(n);
    s["mean_edges_per_company"] = company_edges / static_cast<double>(market.size(Side::kRight));
    return out;
  });
  ExperimentReport report = collect(config, "interview", std::move(outputs));
  double unmatched = 0.0, bottom2 = 0.0;
  for (const auto& r : report.runs) {
    unmatched += r.scalars.at("unmatched_workers");
    bottom2 += r.scalars.at("unmatched_bottom2");
  }
  auto& s = report.summary;
  s["mean_unmatched_fraction"] = mean_of(report.runs, "unmatched_fraction");
  s["bottom2_share_of_unmatched"] = unmatched > 0 ? bottom2 / unmatched : 0.0;
  s["mean_edges_per_worker"] = mean_of(report.runs, "mean_edges_per_worker");
  s["mean_edges_per_company"] = mean_of(report.runs, "mean_edges_per_company");
  s["audit_failures"] = report.audit_failures;
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_loss_scaling(const ExperimentConfig& config) {
  if (config.ns.empty()) throw std::invalid_argument("loss-scaling needs at least one n");
  std::vector<std::size_t> ns = config.ns;
  if (std::find(ns.begin(), ns.end(), config.exceedance_n) == ns.end() && config.exceedance_n > 0)
    ns.push_back(config.exceedance_n);
  const std::size_t total = ns.size() * config.runs;

  auto outputs = parallel_runs<RunOutput>(total, config.jobs, [&](std::size_t k) {
    const std::size_t n = ns[k / config.runs];
    const std::size_t r = k % config.runs;
    RunOutput out;
    out.record.run = k;
    MarketParams p = config.market;
    p.n_left = p.n_right = n;
    p.cap_left = p.cap_right = 1;
    p.seed = derive_seed(derive_seed(config.market.seed, n), r);
    out.record.seed = p.seed;
    const Market market = generate_market(p);
    const LossParams theory = theoretical_L(n, config.c, market.model());
    const EdgeSet full = EdgeSet::complete(market);
    auto& s = out.record.scalars;
    s["n"] = static_cast<double>(n);
    s["L_bar"] = theory.L_bar;

    double overall_max = -std::numeric_limits<double>::infinity();
    for (Side proposing : {Side::kLeft, Side::kRight}) {
      const Matching m = run_da(market, proposing, full);
      out.audit_failures += audit(market, full, m);
      const LossReport lr = loss_report(market, m, config.bottom_rating);
      std::vector<double> losses;
      for (Side side : {Side::kLeft, Side::kRight})
        for (const auto& a : lr.side(side))
          if (!a.bottom_zone && a.loss) losses.push_back(*a.loss);
      const double mx = losses.empty() ? 0.0 : *std::max_element(losses.begin(), losses.end());
      overall_max = std::max(overall_max, mx);
      const std::string tag = proposing == Side::kLeft ? "left_proposing" : "right_proposing";
      s["max_loss_" + tag] = mx;
      s["median_loss_" + tag] = quantile(losses, 0.5);
      s["q90_loss_" + tag] = quantile(losses, 0.9);
      if (proposing == Side::kLeft) {
        for (std::size_t h = 0; h <= config.max_h; ++h) {
          const double threshold = theory.L_bar / std::pow(2.0, static_cast<double>(h));
          const auto count = std::count_if(losses.begin(), losses.end(),
                                           [&](double l) { return l > threshold; });
          s["exceed_h" + std::to_string(h)] = static_cast<double>(count);
        }
      }
    }
    s["max_loss"] = overall_max;
    return out;
  });
  ExperimentReport report = collect(config, "loss-scaling", std::move(outputs));

  json per_n = json::array();
  std::vector<double> log_n, log_med;
  for (std::size_t a = 0; a < ns.size(); ++a) {
    std::vector<double> maxima;
    std::vector<double> exceed(config.max_h + 1, 0.0);
    for (std::size_t r = 0; r < config.runs; ++r) {
      const auto& sc = report.runs[a * config.runs + r].scalars;
      maxima.push_back(sc.at("max_loss"));
      for (std::size_t h = 0; h <= config.max_h; ++h) exceed[h] += sc.at("exceed_h" + std::to_string(h));
    }
    for (auto& e : exceed) e /= static_cast<double>(config.runs);
    const double med = median(maxima);
    json row;
    row["n"] = ns[a];
    row["median_max_loss"] = med;
    row["L_bar"] = report.runs[a * config.runs].scalars.at("L_bar");
    row["mean_exceedance_by_h"] = exceed;
    per_n.push_back(row);
    if (a < config.ns.size() && med > 0.0) {
      log_n.push_back(std::log(static_cast<double>(ns[a])));
      log_med.push_back(std::log(med));
    }
  }
  auto& s = report.summary;
  s["per_n"] = per_n;
  if (config.ns.size() >= 2) {
    const double first = per_n[0]["median_max_loss"].get<double>();
    const double last = per_n[config.ns.size() - 1]["median_max_loss"].get<double>();
    s["ratio_first_to_last"] = last > 0.0 ? first / last : 0.0;
  }
  if (log_n.size() >= 2) {
    const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / static_cast<double>(log_n.size());
    const double my = std::accumulate(log_med.begin(), log_med.end(), 0.0) / static_cast<double>(log_med.size());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      num += (log_n[i] - mx) * (log_med[i] - my);
      den += (log_n[i] - mx) * (log_n[i] - mx);
    }
    s["fitted_exponent"] = den > 0.0 ? num / den : 0.0;
  }
  s["audit_failures"] = report.audit_failures;
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_lower_bound(const ExperimentConfig& config) {
  if (config.market.cap_left != 1 || config.market.cap_right != 1)
    throw std::invalid_argument("lower-bound needs a one-to-one market");
  const std::size_t n = std::min(config.market.n_left, config.market.n_right);
  const double L = config.lower_bound_L > 0.0 ? config.lower_bound_L : lower_bound_L(n);
  const double sigma = 1.5 * L;
  auto outputs = parallel_runs<RunOutput>(config.runs, config.jobs, [&](std::size_t r) {
    RunOutput out;
    out.record.run = r;
    out.record.seed = run_seed(config, r);
    const Market market = generate_market(params_for_run(config, r));
    const EdgeSet edges = acceptable_edges(market, L, L, sigma, sigma);
    const std::size_t size = max_bipartite_matching(edges);
    std::size_t isolated = 0;
    for (Side s : {Side::kLeft, Side::kRight})
      for (std::size_t d : edges.degrees(s)) isolated += d == 0;
    auto& s = out.record.scalars;
    s["max_matching"] = static_cast<double>(size);
    s["no_perfect_matching"] = size < n ? 1.0 : 0.0;
    s["isolated_agents"] = static_cast<double>(isolated);
    s["edges"] = static_cast<double>(edges.size());
    return out;
  });
  ExperimentReport report = collect(config, "lower-bound", std::move(outputs));
  auto& s = report.summary;
  s["L"] = L;
  s["sigma"] = sigma;
  s["no_perfect_matching_frequency"] = mean_of(report.runs, "no_perfect_matching");
  s["theory_floor"] = 0.25 * std::pow(static_cast<double>(n), -0.125);
  s["mean_isolated_agents"] = mean_of(report.runs, "isolated_agents");
  s["mean_edges"] = mean_of(report.runs, "edges");
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport exp_truncation(const ExperimentConfig& config) {
  const std::string& mode = config.edge_mode;
  if (mode != "truncated" && mode != "selected" && mode != "full")
    throw std::invalid_argument("edge mode must be truncated, selected or full");
  const std::size_t n = config.market.n_left;
  const double cube = std::cbrt(static_cast<double>(n));
  const LossParams theory = theoretical_L(std::max<std::size_t>(n, 2), config.c,
                                          UtilityModel::linear(config.market.lambda));
  const double shift = truncation_shift(theory);
  const double t_left = config.t_left > 0.0 ? config.t_left : std::max(1.0, shift / (config.eta / cube));
  const double t_right = config.t_right > 0.0 ? config.t_right : std::max(1.0, shift / (config.nu / cube));

  auto outputs = parallel_runs<RunOutput>(config.runs, config.jobs, [&](std::size_t r) {
    RunOutput out;
    out.record.run = r;
    out.record.seed = run_seed(config, r);
    const Market market = generate_market(params_for_run(config, r));
    check_capacity_balance(market, out);
    EdgeSet edges;
    std::optional<SelectedSetParams> selected;
    if (mode == "truncated") {
      edges = truncated_edges(market, theory, t_left, t_right);
    } else if (mode == "selected") {
      selected.emplace(config.k, market.size(Side::kRight));
      edges = selected_edges(market, *selected);
    } else {
      edges = EdgeSet::complete(market);
    }
    const Matching m = run_da(market, Side::kLeft, edges);
    out.audit_failures += audit(market, edges, m);

    const std::size_t nl = market.size(Side::kLeft);
    const auto degree_left = edges.degrees(Side::kLeft);
    const auto degree_right = edges.degrees(Side::kRight);
    double bottom_props = 0.0, top_props = 0.0, bottom_n = 0.0, top_n = 0.0;
    for (std::size_t i = 0; i < nl; ++i) {
      const std::size_t d = decile_of(market.rank_of(Side::kLeft, i), nl);
      out.table.add("proposals", d, static_cast<double>(m.proposals_left[i]));
      out.table.add("list_length", d, static_cast<double>(degree_left[i]));
      out.table.add("unmatched", d, m.is_matched(Side::kLeft, i) ? 0.0 : 1.0);
      if (market.rating(Side::kLeft, i) < shift) {
        bottom_props += static_cast<double>(m.proposals_left[i]);
        bottom_n += 1.0;
      } else {
        top_props += static_cast<double>(m.proposals_left[i]);
        top_n += 1.0;
      }
    }
    auto& s = out.record.scalars;
    const std::size_t slots = std::min(nl * market.capacity(Side::kLeft),
                                       market.size(Side::kRight) * market.capacity(Side::kRight));
    s["match_rate"] = static_cast<double>(m.pair_count()) / static_cast<double>(slots);
    s["mean_proposals_bottom"] = bottom_n > 0 ? bottom_props / bottom_n : 0.0;
    s["mean_proposals_top"] = top_n > 0 ? top_props / top_n : 0.0;
    s["max_proposals"] = static_cast<double>(
        *std::max_element(m.proposals_left.begin(), m.proposals_left.end()));
    s["edges"] = static_cast<double>(edges.size());

    if (mode == "truncated") {
      // Realised losses against each agent's own threshold.
      double worst_ratio = 0.0;
      std::size_t violations = 0;
      for (Side side : {Side::kLeft, Side::kRight}) {
        const double t_max = side == Side::kLeft ? t_left : t_right;
        for (std::size_t i = 0; i < market.size(side); ++i) {
          const auto a = market.aligned_agent(side, i);
          if (!a || !m.is_matched(side, i)) continue;
          const double thr = truncation_threshold(market, side, market.rating(other(side), *a), theory, t_max);
          const double b = *benchmark(market, side, i);
          for (std::size_t j : m.partners(side, i)) {
            const double loss = b - market.utility(side, i, j);
            if (thr > 0.0) worst_ratio = std::max(worst_ratio, loss / thr);
            violations += loss > thr + 1e-12;
          }
        }
      }
      s["max_loss_to_threshold"] = worst_ratio;
      s["threshold_violations"] = static_cast<double>(violations);
    }
    if (selected) {
      const double sg = selected->sigma();
      double sum = 0.0, cnt = 0.0;
      for (Side side : {Side::kLeft, Side::kRight}) {
        const auto& deg = side == Side::kLeft ? degree_left : degree_right;
        for (std::size_t i = 0; i < market.size(side); ++i) {
          const double x = market.rating(side, i);
          if (x < 2.0 * sg || x > 1.0 - 2.0 * sg) continue;
          sum += static_cast<double>(deg[i]);
          cnt += 1.0;
        }
      }
      s["mid_mean_degree"] = cnt > 0 ? sum / cnt : 0.0;
      s["sigma"] = sg;
    }
    return out;
  });
  ExperimentReport report = collect(config, "truncation", std::move(outputs));
  auto& s = report.summary;
  s["edge_mode"] = mode;
  s["mean_match_rate"] = mean_of(report.runs, "match_rate");
  s["min_match_rate"] = min_of(report.runs, "match_rate");
  s["mean_proposals_bottom"] = mean_of(report.runs, "mean_proposals_bottom");
  s["mean_proposals_top"] = mean_of(report.runs, "mean_proposals_top");
  s["rating_shift"] = shift;
  if (mode == "truncated") {
    s["t_left"] = t_left;
    s["t_right"] = t_right;
    s["threshold_violations"] = mean_of(report.runs, "threshold_violations") *
                                static_cast<double>(report.runs.size());
  }
  if (mode == "selected") s["mid_mean_degree"] = mean_of(report.runs, "mid_mean_degree");
  s["audit_failures"] = report.audit_failures;
  return report;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& experiment_ids() {
  static const std::vector<std::string> ids{"edge-counts",  "min-L",       "unique-partners",
                                            "interview",    "loss-scaling", "lower-bound",
                                            "truncation"};
  return ids;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.runs == 0) throw std::invalid_argument("runs must be at least 1");
  const std::string& id = config.id;
  if (id == "edge-counts") return exp_edge_counts(config);
  if (id == "min-L") return exp_min_L(config).report;
  if (id == "unique-partners") return exp_unique_partners(config);
  if (id == "interview") return exp_interview(config);
  if (id == "loss-scaling") return exp_loss_scaling(config);
  if (id == "lower-bound") return exp_lower_bound(config);
  if (id == "truncation") return exp_truncation(config);
  throw std::invalid_argument("unknown experiment id: " + id);
}

}  // namespace matchlab
