#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "matchlab/experiments.hpp"
#include "matchlab/matching.hpp"
#include "oracles.hpp"

using namespace matchlab;

namespace {

ExperimentConfig small(const std::string& id, std::size_t n, std::size_t runs) {
  ExperimentConfig c;
  c.id = id;
  c.market.n_left = c.market.n_right = n;
  c.market.lambda = 0.8;
  c.market.seed = 42;
  c.runs = runs;
  return c;
}

std::string dump(const ExperimentReport& r) { return report_to_json(r).dump(); }

}  // namespace

TEST_CASE("run seeds are distinct and deterministic") {
  ExperimentConfig c = small("edge-counts", 10, 1);
  std::set<std::uint64_t> seen;
  for (std::size_t r = 0; r < 1000; ++r) {
    CHECK(run_seed(c, r) == run_seed(c, r));
    seen.insert(run_seed(c, r));
  }
  CHECK(seen.size() == 1000);
}

TEST_CASE("decile partition covers every rank once with sizes within 1") {
  for (std::size_t n : {10u, 17u, 250u, 999u, 2000u}) {
    std::vector<std::size_t> size(10, 0);
    for (std::size_t k = 0; k < n; ++k) {
      REQUIRE(decile_of(k, n) < 10);
      ++size[decile_of(k, n)];
    }
    const auto [lo, hi] = std::minmax_element(size.begin(), size.end());
    CHECK(*hi - *lo <= 1);
    std::size_t total = 0;
    for (auto s : size) total += s;
    CHECK(total == n);
  }
  const auto r = exp_edge_counts(small("edge-counts", 1000, 2));
  for (std::size_t d = 0; d < 10; ++d) CHECK(r.find("list_length", d)->count == 200);
}

TEST_CASE("reports are reproducible and independent of the job count") {
  ExperimentConfig c = small("edge-counts", 300, 6);
  const auto a = run_experiment(c);
  const auto b = run_experiment(c);
  c.jobs = 3;
  const auto d = run_experiment(c);
  CHECK(dump(a) != "");
  CHECK(report_to_json(a)["runs"] == report_to_json(d)["runs"]);
  CHECK(report_to_json(a)["deciles"] == report_to_json(d)["deciles"]);
  CHECK(dump(a) == dump(b));
  CHECK(a.audit_failures == 0);
}

TEST_CASE("edge counts match an independent recount") {
  ExperimentConfig c = small("edge-counts", 200, 1);
  const auto r = exp_edge_counts(c);
  MarketParams p = c.market;
  p.seed = run_seed(c, 0);
  const Market m = generate_market(p);
  const EdgeSet e = acceptable_edges(m, c.L_left, c.L_right, c.sigma_left, c.sigma_right);
  const Matching mt = run_da(m, Side::kLeft, e);
  double sum = 0.0, props = 0.0;
  for (std::size_t i = 0; i < 200; ++i) {
    if (m.rank_of(Side::kLeft, i) >= 160) continue;
    sum += static_cast<double>(e.degree(Side::kLeft, i));
    props += static_cast<double>(mt.proposals_left[i]);
  }
  CHECK(r.runs[0].scalars.at("top_mean_list_length") == doctest::Approx(sum / 160.0));
  CHECK(r.runs[0].scalars.at("top_mean_proposals") == doctest::Approx(props / 160.0));
}

TEST_CASE("minimal L is a grid point that works and whose predecessor fails") {
  ExperimentConfig c = small("min-L", 300, 5);
  const auto res = exp_min_L(c);
  REQUIRE(res.found);
  const auto grid = min_L_grid(c);
  const auto it = std::find(grid.begin(), grid.end(), res.L);
  REQUIRE(it != grid.end());
  auto all_matched = [&](double L) {
    for (std::size_t r = 0; r < c.runs; ++r) {
      MarketParams p = c.market;
      p.seed = run_seed(c, r);
      const Market m = generate_market(p);
      const auto mt = run_da(m, Side::kLeft, acceptable_edges(m, L, L, c.sigma_left, c.sigma_right));
      if (mt.pair_count() != 300) return false;
    }
    return true;
  };
  CHECK(all_matched(res.L));
  if (it != grid.begin()) {
    CHECK_FALSE(all_matched(*(it - 1)));
    CHECK(res.report.summary["fails_at_previous_L"].get<bool>());
  }

  ExperimentConfig one = c;
  one.grid_lo = one.grid_hi = 1.0;
  CHECK(exp_min_L(one).L == 1.0);
  CHECK(exp_min_L(one).found);

  ExperimentConfig none = c;
  none.grid_lo = 0.0;
  none.grid_hi = 0.0;
  none.sigma_left = none.sigma_right = 0.0;
  const auto miss = exp_min_L(none);
  CHECK_FALSE(miss.found);
  CHECK(miss.L == 0.0);
}

TEST_CASE("unique partners") {
  const auto r = exp_unique_partners(small("unique-partners", 300, 3));
  CHECK(r.audit_failures == 0);
  CHECK(r.warnings.empty());
  double total = 0.0;
  for (std::size_t d = 0; d < 10; ++d) total += r.find("multi_right", d)->mean * 30.0 * 3.0;
  double from_runs = 0.0;
  for (const auto& run : r.runs) from_runs += run.scalars.at("multi_right");
  CHECK(total == doctest::Approx(from_runs));

  ExperimentConfig m2o = small("unique-partners", 300, 1);
  m2o.market.cap_right = 2;
  CHECK_THROWS_AS(exp_unique_partners(m2o), std::invalid_argument);
}

TEST_CASE("interview with a complete edge set leaves nobody unmatched") {
  ExperimentConfig c;
  c.id = "interview";
  c.market.n_left = 400;
  c.market.n_right = 50;
  c.market.cap_right = 8;
  c.market.seed = 3;
  c.runs = 2;
  c.interview = {1.0, 0.0, 0.0};
  const auto r = exp_interview(c);
  CHECK(r.summary["mean_unmatched_fraction"].get<double>() == 0.0);
  CHECK(r.summary["mean_edges_per_worker"].get<double>() == doctest::Approx(50.0));
  // Same DA on the same edges: every utility difference is zero.
  const auto& h = r.histograms.at("utility_difference");
  std::size_t total = h.underflow + h.overflow;
  for (auto k : h.counts) total += k;
  CHECK(total == 800);
}

TEST_CASE("loss scaling records consistent statistics") {
  ExperimentConfig c = small("loss-scaling", 100, 3);
  c.market.lambda = 0.5;
  c.ns = {100, 300};
  c.exceedance_n = 200;
  const auto r = exp_loss_scaling(c);
  CHECK(r.runs.size() == 9);
  CHECK(r.audit_failures == 0);
  for (const auto& run : r.runs) {
    CHECK(run.scalars.at("max_loss") >= run.scalars.at("median_loss_left_proposing"));
    for (std::size_t h = 1; h <= c.max_h; ++h)
      CHECK(run.scalars.at("exceed_h" + std::to_string(h)) >=
            run.scalars.at("exceed_h" + std::to_string(h - 1)));
  }
  CHECK(r.summary.contains("ratio_first_to_last"));
}

TEST_CASE("lower bound probe agrees with exhaustive search on small markets") {
  for (std::size_t n = 2; n <= 8; ++n) {
    ExperimentConfig c = small("lower-bound", n, 12);
    c.market.lambda = 0.5;
    c.lower_bound_L = 0.1;
    const auto r = exp_lower_bound(c);
    for (std::size_t run = 0; run < c.runs; ++run) {
      MarketParams p = c.market;
      p.seed = run_seed(c, run);
      const Market m = generate_market(p);
      const EdgeSet e = acceptable_edges(m, 0.1, 0.1, 0.15, 0.15);
      const bool perfect = oracle::exhaustive_max_matching(e) == n;
      CHECK((r.runs[run].scalars.at("no_perfect_matching") == 1.0) == !perfect);
    }
  }
  ExperimentConfig c = small("lower-bound", 200, 3);
  c.lower_bound_L = 1.0;
  CHECK(exp_lower_bound(c).summary["no_perfect_matching_frequency"].get<double>() == 0.0);
}

TEST_CASE("truncation modes") {
  ExperimentConfig c = small("truncation", 300, 2);
  c.edge_mode = "full";
  CHECK(exp_truncation(c).summary["min_match_rate"].get<double>() == 1.0);
  c.edge_mode = "truncated";
  c.t_left = c.t_right = 50.0;
  const auto r = exp_truncation(c);
  CHECK(r.summary["min_match_rate"].get<double>() == 1.0);
  CHECK(r.summary["threshold_violations"].get<double>() == 0.0);
  c.edge_mode = "selected";
  c.market.n_left = c.market.n_right = 1000;
  const auto s = exp_truncation(c);
  CHECK(s.audit_failures == 0);
  CHECK(s.summary["mid_mean_degree"].get<double>() > 10.0);
  c.edge_mode = "bogus";
  CHECK_THROWS_AS(exp_truncation(c), std::invalid_argument);
}

TEST_CASE("dispatch and report files") {
  ExperimentConfig c = small("no-such-experiment", 50, 1);
  CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
  c.id = "edge-counts";
  c.runs = 0;
  CHECK_THROWS_AS(run_experiment(c), std::invalid_argument);
  c.runs = 2;
  const auto r = run_experiment(c);

  const auto dir = std::filesystem::temp_directory_path() / "matchlab_report_test";
  std::filesystem::create_directories(dir);
  const auto paths = save_report(r, (dir / "ec").string(), "csv");
  CHECK(paths.size() == 3);
  for (const auto& p : paths) CHECK(std::filesystem::file_size(p) > 0);
  std::ifstream f(paths[0]);
  std::string header;
  std::getline(f, header);
  CHECK(header == "metric,decile,mean,min,max,count");
  const auto j = nlohmann::json::parse(std::ifstream(dir / "ec.json"));
  CHECK(j["config"]["seed"] == 42);
  CHECK(j["config"]["runs"] == 2);
  CHECK(save_report(r, (dir / "ec2").string(), "json").size() == 1);
  CHECK_THROWS_AS(save_report(r, (dir / "ec3").string(), "xml"), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("edge exports") {
  MarketParams p;
  p.n_left = p.n_right = 20;
  p.seed = 1;
  const Market m = generate_market(p);
  const EdgeSet e = acceptable_edges(m, 0.2, 0.2, 0.0, 0.0);
  std::ostringstream out;
  write_edges_csv(out, e);
  const std::string s = out.str();
  CHECK(static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')) == e.size() + 1);
  const auto j = edge_summary_json(m, e);
  CHECK(j["edges"] == e.size());
  CHECK(j["left"]["mean_degree_by_decile"].size() == 10);
}
