#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "matchlab/analysis.hpp"
#include "matchlab/market.hpp"
#include "matchlab/matching.hpp"

using namespace matchlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("matchlab_cli_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int cli(const TempDir& dir, const std::string& args, const std::string& env = "") {
  const std::string cmd = "cd '" + dir.path.string() + "' && " + env + " '" MATCHLAB_CLI "' " + args +
                          " > out.txt 2> err.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

// Left partner per left agent from a matching CSV (-1 when unmatched).
std::vector<long> left_partners(const fs::path& csv) {
  std::ifstream f(csv);
  std::string line;
  std::getline(f, line);
  std::vector<long> out;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string side, agent, rank, partners;
    std::getline(ss, side, ',');
    std::getline(ss, agent, ',');
    std::getline(ss, rank, ',');
    std::getline(ss, partners, ',');
    if (side != "left") continue;
    out.push_back(partners.empty() ? -1 : std::stol(partners));
  }
  return out;
}

}  // namespace

TEST_CASE("generate is deterministic and round-trips") {
  TempDir d;
  REQUIRE(cli(d, "generate --n 100 --lambda 0.8 --seed 7 --out a.bin") == 0);
  REQUIRE(cli(d, "generate --n 100 --lambda 0.8 --seed 7 --out b.bin") == 0);
  CHECK(slurp(d.path / "a.bin") == slurp(d.path / "b.bin"));
  MarketParams p;
  p.n_left = p.n_right = 100;
  p.lambda = 0.8;
  p.seed = 7;
  CHECK(load_market((d.path / "a.bin").string()) == generate_market(p));

  REQUIRE(cli(d, "generate --nw 2000 --nc 250 --d 8 --seed 1 --out m.bin") == 0);
  const Market m = load_market((d.path / "m.bin").string());
  CHECK(m.size(Side::kLeft) == 2000);
  CHECK(m.size(Side::kRight) == 250);
  CHECK(m.capacity(Side::kRight) == 8);
}

TEST_CASE("a missing seed is drawn and echoed") {
  TempDir d;
  REQUIRE(cli(d, "generate --n 5 --out a.bin", "env -u MATCHLAB_SEED") == 0);
  CHECK(slurp(d.path / "err.txt").find("(drawn)") != std::string::npos);
  const auto meta = nlohmann::json::parse(slurp(d.path / "a.bin.json"));
  const std::uint64_t seed = meta["market"]["seed"];
  REQUIRE(cli(d, "generate --n 5 --out b.bin --seed " + std::to_string(seed)) == 0);
  CHECK(slurp(d.path / "a.bin") == slurp(d.path / "b.bin"));

  REQUIRE(cli(d, "generate --n 5 --out c.bin", "MATCHLAB_SEED=" + std::to_string(seed)) == 0);
  CHECK(slurp(d.path / "a.bin") == slurp(d.path / "c.bin"));
}

TEST_CASE("invalid flags exit nonzero") {
  TempDir d;
  CHECK(cli(d, "generate --n 0 --seed 1") != 0);
  CHECK(cli(d, "generate --n 10 --lambda 1.5 --seed 1") != 0);
  CHECK(cli(d, "generate --n 10 --lambda 1 --seed 1") != 0);
  CHECK(cli(d, "run --market missing.bin --seed 1") != 0);
  CHECK(cli(d, "experiment no-such-thing --seed 1") != 0);
  CHECK(cli(d, "run --n 10 --edges bogus --seed 1") != 0);
}

TEST_CASE("help lists flag ranges") {
  TempDir d;
  cli(d, "experiment --help");
  const std::string help = slurp(d.path / "out.txt");
  for (const char* flag : {"--runs", "--L", "--sigma", "--p", "--q", "--k", "--t", "--c", "--lambda",
                           "--grid-step", "--jobs", "--seed", "--format"})
    CHECK(help.find(flag) != std::string::npos);
  CHECK(help.find("[0 - 1]") != std::string::npos);
}

TEST_CASE("run writes a stable matching and agrees across sides") {
  TempDir d;
  REQUIRE(cli(d, "generate --n 10 --seed 3 --out m.bin") == 0);
  REQUIRE(cli(d, "run --market m.bin --out r --seed 3") == 0);
  CHECK(slurp(d.path / "out.txt").find("audit: 0 blocking pairs") != std::string::npos);

  REQUIRE(cli(d, "generate --n 300 --seed 4 --out big.bin") == 0);
  REQUIRE(cli(d, "run --market big.bin --out left --seed 4") == 0);
  REQUIRE(cli(d, "run --market big.bin --out right --propose-side right --seed 4") == 0);
  const auto l = left_partners(d.path / "left_matching.csv");
  const auto r = left_partners(d.path / "right_matching.csv");
  const Market m = load_market((d.path / "big.bin").string());
  const auto multi = multi_stable_agents(m, EdgeSet::complete(m));
  std::vector<std::size_t> differ;
  for (std::size_t i = 0; i < l.size(); ++i)
    if (l[i] != r[i]) differ.push_back(i);
  CHECK(differ == multi.left);

  REQUIRE(cli(d, "run --market big.bin --out acc --edges acceptable --L 0.12 --seed 4") == 0);
  const auto meta = nlohmann::json::parse(slurp(d.path / "acc.json"));
  if (meta["summary"]["unmatched_left"] == 0) CHECK(left_partners(d.path / "acc_matching.csv") == l);
}

TEST_CASE("config file values sit between defaults and flags") {
  TempDir d;
  std::ofstream(d.path / "cfg.toml") << "[experiment]\nruns = 2\nn = 120\nL = 0.3\n";
  REQUIRE(cli(d, "experiment edge-counts --config cfg.toml --seed 1 --out a") == 0);
  auto j = nlohmann::json::parse(slurp(d.path / "a.json"));
  CHECK(j["config"]["runs"] == 2);
  CHECK(j["config"]["n_left"] == 120);
  CHECK(j["config"]["L_left"] == 0.3);
  CHECK(j["config"]["lambda"] == 0.8);

  REQUIRE(cli(d, "experiment edge-counts --config cfg.toml --runs 3 --seed 1 --out b") == 0);
  j = nlohmann::json::parse(slurp(d.path / "b.json"));
  CHECK(j["config"]["runs"] == 3);
  CHECK(j["config"]["n_left"] == 120);
}

TEST_CASE("experiment reports are byte-identical for the same seed") {
  TempDir d;
  REQUIRE(cli(d, "experiment unique-partners --n 200 --runs 3 --seed 9 --out a") == 0);
  REQUIRE(cli(d, "experiment unique-partners --n 200 --runs 3 --seed 9 --jobs 2 --out b") == 0);
  CHECK(slurp(d.path / "a_deciles.csv") == slurp(d.path / "b_deciles.csv"));
  CHECK(slurp(d.path / "a_runs.csv") == slurp(d.path / "b_runs.csv"));
  REQUIRE(cli(d, "experiment interview --nw 400 --nc 50 --d 8 --runs 2 --seed 9 --out i --format json") == 0);
  CHECK(fs::exists(d.path / "i.json"));
  CHECK_FALSE(fs::exists(d.path / "i_deciles.csv"));
  REQUIRE(cli(d, "edges --n 50 --edges interview --p 0.3 --q 0.5 --seed 2 --out e") == 0);
  CHECK(fs::exists(d.path / "e_edges.csv"));
}
