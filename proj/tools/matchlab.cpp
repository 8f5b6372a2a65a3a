#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "matchlab/analysis.hpp"
#include "matchlab/experiments.hpp"
#include "matchlab/market.hpp"
#include "matchlab/matching.hpp"

using namespace matchlab;
using json = nlohmann::ordered_json;

namespace {

struct Options {
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
  std::size_t jobs = 1;
  std::string market_file;

  std::size_t n = 0, nl = 0, nr = 0, nw = 0, nc = 0, d = 1;
  double lambda = 0.8;
  bool scale_ratings = false;

  std::string experiment;
  std::size_t runs = 20;
  double L = 0.12, L_left = 0.12, L_right = 0.12;
  double sigma = 0.02, sigma_left = 0.02, sigma_right = 0.02;
  double p = 0.19, q = 0.60, q_left = 0.60, q_right = 0.60;
  double k = 15.0;
  double t = 1.0, t_left = 1.0, t_right = 1.0;
  double c = 1.0;
  double grid_lo = 0.01, grid_hi = 0.5, grid_step = 0.01;
  std::vector<std::size_t> ns{500, 4000};
  std::size_t max_h = 4, exceedance_n = 2000;
  double lower_L = 0.0;
  double bottom_fraction = 0.2, bottom_rating = 0.2;
  double nu = 0.5, eta = 2.0;
  std::string propose_side = "left";
  std::string edges = "full";
};

// Flags given on the command line or through the config file.
class Given {
 public:
  explicit Given(CLI::App* app) : app_(app) {}
  bool operator()(const std::string& flag) const { return app_->count(flag) > 0; }

 private:
  CLI::App* app_;
};

void add_common(CLI::App* app, Options& o) {
  app->add_option("--seed", o.seed, "Base seed (default: $MATCHLAB_SEED, else drawn and echoed)")
      ->envname("MATCHLAB_SEED");
  app->add_option("--out", o.out, "Output file or prefix");
  app->add_option("--format", o.format, "Report format")->check(CLI::IsMember({"csv", "json"}));
  app->add_option("--jobs", o.jobs, "Concurrent runs")->check(CLI::Range(1, 256));
}

void add_market(CLI::App* app, Options& o) {
  app->add_option("--n", o.n, "Agents per side of a one-to-one market")->check(CLI::Range(1, 20000));
  app->add_option("--nl", o.nl, "Left-side agents")->check(CLI::Range(1, 20000));
  app->add_option("--nr", o.nr, "Right-side agents")->check(CLI::Range(1, 20000));
  app->add_option("--nw", o.nw, "Workers (left side, capacity 1)")->check(CLI::Range(1, 20000));
  app->add_option("--nc", o.nc, "Companies (right side)")->check(CLI::Range(1, 20000));
  app->add_option("--d", o.d, "Company capacity")->check(CLI::Range(1, 1000));
  app->add_option("--lambda", o.lambda, "Weight of the public rating")->check(CLI::Range(0.0, 1.0));
  app->add_flag("--scale-ratings", o.scale_ratings,
                "Shift rating ranges of unbalanced many-to-one markets");
}

void add_thresholds(CLI::App* app, Options& o) {
  app->add_option("--L", o.L, "Loss threshold for both sides")->check(CLI::Range(0.0, 2.0));
  app->add_option("--L-left", o.L_left, "Left-side loss threshold")->check(CLI::Range(0.0, 2.0));
  app->add_option("--L-right", o.L_right, "Right-side loss threshold")->check(CLI::Range(0.0, 2.0));
  app->add_option("--sigma", o.sigma, "Bottom-zone rating cutoff for both sides")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--sigma-left", o.sigma_left, "Left bottom-zone cutoff")->check(CLI::Range(0.0, 1.0));
  app->add_option("--sigma-right", o.sigma_right, "Right bottom-zone cutoff")->check(CLI::Range(0.0, 1.0));
  app->add_option("--p", o.p, "Interview rating window")->check(CLI::Range(0.0, 1.0));
  app->add_option("--q", o.q, "Interview score cutoff for both sides")->check(CLI::Range(0.0, 1.0));
  app->add_option("--q-left", o.q_left, "Left interview score cutoff")->check(CLI::Range(0.0, 1.0));
  app->add_option("--q-right", o.q_right, "Right interview score cutoff")->check(CLI::Range(0.0, 1.0));
  app->add_option("--k", o.k, "Target interviews per agent")->check(CLI::Range(1.0, 1000.0));
  app->add_option("--t", o.t, "Truncation factor for both sides")->check(CLI::Range(1.0, 100.0));
  app->add_option("--t-left", o.t_left, "Left truncation factor")->check(CLI::Range(1.0, 100.0));
  app->add_option("--t-right", o.t_right, "Right truncation factor")->check(CLI::Range(1.0, 100.0));
  app->add_option("--c", o.c, "Failure exponent in the loss bound")->check(CLI::Range(0.01, 100.0));
}

MarketParams market_params(const Options& o, const Given& given, MarketParams base) {
  if (given("--n")) {
    base.n_left = base.n_right = o.n;
    base.cap_left = base.cap_right = 1;
  }
  if (given("--nw")) {
    base.n_left = o.nw;
    base.cap_left = 1;
  }
  if (given("--nl")) base.n_left = o.nl;
  if (given("--nc")) base.n_right = o.nc;
  if (given("--nr")) base.n_right = o.nr;
  if (given("--d")) {
    base.cap_right = o.d;
    if (!given("--nc") && !given("--nr")) base.n_right = std::max<std::size_t>(1, base.n_left / o.d);
  }
  if (given("--lambda")) base.lambda = o.lambda;
  if (given("--scale-ratings")) base.scale_many_to_one_ratings = o.scale_ratings;
  if (!(base.lambda > 0.0 && base.lambda < 1.0))
    throw std::invalid_argument("--lambda must lie strictly between 0 and 1");
  base.seed = o.seed;
  return base;
}

json market_json(const MarketParams& p) {
  return {{"n_left", p.n_left},       {"n_right", p.n_right}, {"cap_left", p.cap_left},
          {"cap_right", p.cap_right}, {"lambda", p.lambda},   {"seed", p.seed},
          {"scale_many_to_one_ratings", p.scale_many_to_one_ratings}};
}

MarketParams one_to_one(std::size_t n, double lambda) {
  MarketParams p;
  p.n_left = p.n_right = n;
  p.lambda = lambda;
  return p;
}

double pick(const Given& given, const std::string& side_flag, double side_value,
            const std::string& both_flag, double both_value, double fallback) {
  if (given(side_flag)) return side_value;
  if (given(both_flag)) return both_value;
  return fallback;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  return f;
}

void finish(std::ofstream& f, const std::string& path) {
  f.close();
  if (!f) throw std::runtime_error("failed writing " + path);
  std::cout << "wrote " << path << '\n';
}

// Edge set selected by --edges on a given market.
EdgeSet build_edges(const Market& market, const Options& o, const Given& given, json& meta) {
  const std::string& mode = o.edges;
  meta["edges"] = mode;
  if (mode == "full") return EdgeSet::complete(market);
  if (mode == "acceptable") {
    const double Ll = pick(given, "--L-left", o.L_left, "--L", o.L, 0.12);
    const double Lr = pick(given, "--L-right", o.L_right, "--L", o.L, 0.12);
    const double sl = pick(given, "--sigma-left", o.sigma_left, "--sigma", o.sigma, 0.02);
    const double sr = pick(given, "--sigma-right", o.sigma_right, "--sigma", o.sigma, 0.02);
    meta["L_left"] = Ll;
    meta["L_right"] = Lr;
    meta["sigma_left"] = sl;
    meta["sigma_right"] = sr;
    return acceptable_edges(market, Ll, Lr, sl, sr);
  }
  if (mode == "viable") return viable_edges(market, EdgeSet::complete(market));
  if (mode == "interview") {
    InterviewParams ip{o.p, pick(given, "--q-left", o.q_left, "--q", o.q, 0.60),
                       pick(given, "--q-right", o.q_right, "--q", o.q, 0.60)};
    meta["p"] = ip.p;
    meta["q_left"] = ip.q_left;
    meta["q_right"] = ip.q_right;
    return interview_edges(market, ip);
  }
  if (mode == "selected") {
    meta["k"] = o.k;
    return selected_edges(market, SelectedSetParams(o.k, market.size(Side::kRight)));
  }
  // truncated
  const LossParams lp = theoretical_L(std::max<std::size_t>(2, market.size(Side::kLeft)), o.c, market.model());
  const double tl = pick(given, "--t-left", o.t_left, "--t", o.t, 1.0);
  const double tr = pick(given, "--t-right", o.t_right, "--t", o.t, 1.0);
  meta["c"] = o.c;
  meta["L_bar"] = lp.L_bar;
  meta["t_left"] = tl;
  meta["t_right"] = tr;
  return truncated_edges(market, lp, tl, tr);
}

Market obtain_market(const Options& o, const Given& given, json& meta) {
  if (!o.market_file.empty()) {
    meta["market_file"] = o.market_file;
    Market m = load_market(o.market_file);
    MarketParams p;
    p.n_left = m.size(Side::kLeft);
    p.n_right = m.size(Side::kRight);
    p.cap_left = m.capacity(Side::kLeft);
    p.cap_right = m.capacity(Side::kRight);
    p.lambda = m.model().lambda();
    p.seed = m.seed();
    meta["market"] = market_json(p);
    return m;
  }
  const MarketParams p = market_params(o, given, one_to_one(100, 0.8));
  meta["market"] = market_json(p);
  return generate_market(p);
}

int cmd_generate(const Options& o, const Given& given) {
  const MarketParams p = market_params(o, given, one_to_one(100, 0.8));
  const Market market = generate_market(p);
  const std::string path = o.out.empty() ? "market.bin" : o.out;
  save_market(path, market);
  std::cout << "wrote " << path << '\n';
  const std::string meta_path = path + ".json";
  auto f = open_out(meta_path);
  f << json{{"command", "generate"}, {"market", market_json(p)}}.dump(2) << '\n';
  finish(f, meta_path);
  if (o.format == "csv") {
    const std::string csv = path + ".ratings.csv";
    auto g = open_out(csv);
    g << "side,agent,rating,public_rank\n";
    for (Side s : {Side::kLeft, Side::kRight})
      for (std::size_t i = 0; i < market.size(s); ++i)
        g << to_string(s) << ',' << i << ',' << market.rating(s, i) << ','
          << market.rank_of(s, i) + 1 << '\n';
    finish(g, csv);
  }
  return 0;
}

int cmd_run(const Options& o, const Given& given) {
  json meta;
  meta["command"] = "run";
  const Market market = obtain_market(o, given, meta);
  const EdgeSet edges = build_edges(market, o, given, meta);
  const Side proposing = o.propose_side == "right" ? Side::kRight : Side::kLeft;
  meta["propose_side"] = o.propose_side;
  const Matching m = run_da(market, proposing, edges);
  const auto blocking = verify_stability(market, edges, m);
  const LossReport losses = loss_report(market, m, o.bottom_rating);

  json summary;
  summary["pairs"] = m.pair_count();
  summary["unmatched_left"] = m.unmatched(Side::kLeft).size();
  summary["unmatched_right"] = m.unmatched(Side::kRight).size();
  summary["edges"] = edges.size();
  summary["blocking_pairs"] = blocking.size();
  double max_loss = 0.0;
  for (Side s : {Side::kLeft, Side::kRight})
    for (const auto& a : losses.side(s))
      if (!a.bottom_zone && a.loss) max_loss = std::max(max_loss, *a.loss);
  summary["max_non_bottom_loss"] = max_loss;
  meta["bottom_rating"] = o.bottom_rating;
  meta["summary"] = summary;
  std::cout << "audit: " << blocking.size() << " blocking pairs\n";

  const std::string prefix = o.out.empty() ? "run" : o.out;
  if (o.format == "csv") {
    auto f = open_out(prefix + "_matching.csv");
    write_matching_csv(f, market, m);
    finish(f, prefix + "_matching.csv");
    auto g = open_out(prefix + "_loss.csv");
    write_loss_csv(g, losses);
    finish(g, prefix + "_loss.csv");
  } else {
    json pairs = json::array();
    for (const auto& [i, j] : m.pairs()) pairs.push_back({i, j});
    meta["pairs"] = pairs;
  }
  auto h = open_out(prefix + ".json");
  h << meta.dump(2) << '\n';
  finish(h, prefix + ".json");
  return blocking.empty() ? 0 : 2;
}

int cmd_edges(const Options& o, const Given& given) {
  json meta;
  meta["command"] = "edges";
  const Market market = obtain_market(o, given, meta);
  const EdgeSet edges = build_edges(market, o, given, meta);
  meta["summary"] = edge_summary_json(market, edges);
  const std::string prefix = o.out.empty() ? "edges" : o.out;
  if (o.format == "csv") {
    auto f = open_out(prefix + "_edges.csv");
    write_edges_csv(f, edges);
    finish(f, prefix + "_edges.csv");
  }
  auto g = open_out(prefix + ".json");
  g << meta.dump(2) << '\n';
  finish(g, prefix + ".json");
  return 0;
}

ExperimentConfig preset(const std::string& id) {
  ExperimentConfig c;
  c.id = id;
  if (id == "interview") {
    c.market.n_left = 2000;
    c.market.n_right = 250;
    c.market.cap_right = 8;
    c.market.lambda = 0.8;
  } else if (id == "loss-scaling") {
    c.market = one_to_one(500, 0.5);
  } else if (id == "lower-bound") {
    c.market = one_to_one(2000, 0.5);
    c.runs = 200;
  } else {
    c.market = one_to_one(2000, 0.8);
  }
  return c;
}

int cmd_experiment(const Options& o, const Given& given) {
  ExperimentConfig c = preset(o.experiment);
  c.market = market_params(o, given, c.market);
  if (given("--runs")) c.runs = o.runs;
  c.jobs = o.jobs;
  c.L_left = pick(given, "--L-left", o.L_left, "--L", o.L, c.L_left);
  c.L_right = pick(given, "--L-right", o.L_right, "--L", o.L, c.L_right);
  c.sigma_left = pick(given, "--sigma-left", o.sigma_left, "--sigma", o.sigma, c.sigma_left);
  c.sigma_right = pick(given, "--sigma-right", o.sigma_right, "--sigma", o.sigma, c.sigma_right);
  if (given("--p")) c.interview.p = o.p;
  c.interview.q_left = pick(given, "--q-left", o.q_left, "--q", o.q, c.interview.q_left);
  c.interview.q_right = pick(given, "--q-right", o.q_right, "--q", o.q, c.interview.q_right);
  if (given("--k")) c.k = o.k;
  c.t_left = pick(given, "--t-left", o.t_left, "--t", o.t, c.t_left);
  c.t_right = pick(given, "--t-right", o.t_right, "--t", o.t, c.t_right);
  if (given("--c")) c.c = o.c;
  if (given("--grid-lo")) c.grid_lo = o.grid_lo;
  if (given("--grid-hi")) c.grid_hi = o.grid_hi;
  if (given("--grid-step")) c.grid_step = o.grid_step;
  if (given("--ns")) c.ns = o.ns;
  if (given("--max-h")) c.max_h = o.max_h;
  if (given("--exceedance-n")) c.exceedance_n = o.exceedance_n;
  if (given("--lower-L")) c.lower_bound_L = o.lower_L;
  if (given("--bottom-fraction")) c.bottom_fraction = o.bottom_fraction;
  if (given("--bottom-rating")) c.bottom_rating = o.bottom_rating;
  if (given("--edges")) c.edge_mode = o.edges;
  if (given("--nu")) c.nu = o.nu;
  if (given("--eta")) c.eta = o.eta;
  if (c.grid_hi < c.grid_lo) throw std::invalid_argument("--grid-hi must be at least --grid-lo");

  const ExperimentReport report = run_experiment(c);
  const std::string prefix = o.out.empty() ? c.id : o.out;
  for (const auto& path : save_report(report, prefix, o.format)) std::cout << "wrote " << path << '\n';
  std::cout << report.summary.dump() << '\n';
  for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
  return report.audit_failures == 0 ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stable matching markets with short preference lists"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML/INI file; keys go under a [generate], [run], [edges] or [experiment] section");
  Options o;

  auto* gen = app.add_subcommand("generate", "Write a random market to a binary file");
  add_common(gen, o);
  add_market(gen, o);

  auto* run = app.add_subcommand("run", "Run deferred acceptance on one market");
  auto* edges = app.add_subcommand("edges", "Export an edge set of one market");
  for (auto* sub : {run, edges}) {
    add_common(sub, o);
    add_market(sub, o);
    add_thresholds(sub, o);
    sub->add_option("--market", o.market_file, "Market file written by generate")
        ->check(CLI::ExistingFile);
    sub->add_option("--edges", o.edges, "Edge set")
        ->check(CLI::IsMember({"full", "acceptable", "viable", "interview", "selected", "truncated"}));
  }
  run->add_option("--propose-side", o.propose_side, "Proposing side")
      ->check(CLI::IsMember({"left", "right"}));
  run->add_option("--bottom-rating", o.bottom_rating,
                  "Agents whose aligned partner is rated below this are excluded from max loss")
      ->check(CLI::Range(0.0, 1.0));

  auto* exp = app.add_subcommand("experiment", "Run a Monte Carlo experiment suite");
  exp->add_option("id", o.experiment, "Experiment id")
      ->required()
      ->check(CLI::IsMember(experiment_ids()));
  add_common(exp, o);
  add_market(exp, o);
  add_thresholds(exp, o);
  exp->add_option("--runs", o.runs, "Markets per configuration")->check(CLI::Range(1, 100000));
  exp->add_option("--grid-lo", o.grid_lo, "Smallest L tried by min-L")->check(CLI::Range(0.0, 2.0));
  exp->add_option("--grid-hi", o.grid_hi, "Largest L tried by min-L")->check(CLI::Range(0.0, 2.0));
  exp->add_option("--grid-step", o.grid_step, "Step of the min-L grid")->check(CLI::Range(1e-4, 1.0));
  exp->add_option("--ns", o.ns, "Market sizes for loss-scaling")->check(CLI::Range(2, 20000));
  exp->add_option("--max-h", o.max_h, "Largest h in the L/2^h exceedance sweep")->check(CLI::Range(0, 20));
  exp->add_option("--exceedance-n", o.exceedance_n, "Market size of the exceedance sweep (0 skips)")
      ->check(CLI::Range(0, 20000));
  exp->add_option("--lower-L", o.lower_L, "L for lower-bound (0 uses the theoretical value)")
      ->check(CLI::Range(0.0, 2.0));
  exp->add_option("--bottom-fraction", o.bottom_fraction, "Share of lowest ranks left out of headline means")
      ->check(CLI::Range(0.0, 0.9));
  exp->add_option("--bottom-rating", o.bottom_rating, "Aligned-rating cutoff of loss statistics")
      ->check(CLI::Range(0.0, 1.0));
  exp->add_option("--edges", o.edges, "Edge set of the truncation experiment")
      ->check(CLI::IsMember({"truncated", "selected", "full"}));
  exp->add_option("--nu", o.nu, "Right bottom zone sigma = nu / n^(1/3)")->check(CLI::Range(0.01, 100.0));
  exp->add_option("--eta", o.eta, "Left bottom zone sigma = eta / n^(1/3)")->check(CLI::Range(0.01, 100.0));

  // --config is a root option; accept it anywhere on the line.
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t k = 0; k + 1 < args.size(); ++k) {
    if (args[k] != "--config") continue;
    const std::string file = args[k + 1];
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(k), args.begin() + static_cast<std::ptrdiff_t>(k) + 2);
    args.insert(args.begin(), {"--config", file});
    break;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  CLI::App* active = app.get_subcommands().front();
  if (active->count("--seed") == 0) {
    o.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
    std::cerr << "seed: " << o.seed << " (drawn)\n";
  } else {
    std::cerr << "seed: " << o.seed << '\n';
  }
  const Given given(active);
  try {
    if (active == gen) return cmd_generate(o, given);
    if (active == run) return cmd_run(o, given);
    if (active == edges) return cmd_edges(o, given);
    return cmd_experiment(o, given);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
