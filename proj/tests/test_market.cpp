#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "matchlab/market.hpp"
#include "matchlab/rng.hpp"
#include "oracles.hpp"

using namespace matchlab;

namespace {

MarketParams square(std::size_t n, double lambda, std::uint64_t seed) {
  MarketParams p;
  p.n_left = p.n_right = n;
  p.lambda = lambda;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("linear utility evaluates lambda r + (1 - lambda) s") {
  CHECK(utility(UtilityModel::linear(0.5), 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(utility(UtilityModel::linear(0.8), 0.5, 0.25) == doctest::Approx(0.45));
  const auto m = UtilityModel::linear(0.8);
  CHECK(m.mu() == doctest::Approx(0.8));
  CHECK(m.rho() == doctest::Approx(4.0));
  CHECK_THROWS_AS(UtilityModel::linear(0.0), std::invalid_argument);
  CHECK_THROWS_AS(UtilityModel::linear(1.0), std::invalid_argument);
}

TEST_CASE("monotonicity on a 50x50 grid") {
  for (double lambda : {0.2, 0.5, 0.67, 0.8}) CHECK(spot_check_monotone(UtilityModel::linear(lambda)));

  const auto f = [](double r, double s) { return std::sqrt(r + 0.01) + 0.5 * s * s + 0.1 * s; };
  const auto custom = UtilityModel::custom("sqrt", f, f, 0.2, 5.0);
  CHECK(spot_check_monotone(custom));

  // Independent finite-difference sign check of the same grid.
  for (int a = 0; a < 50; ++a)
    for (int b = 0; b < 49; ++b) {
      const double x = a / 49.0, y = b / 49.0, h = 1.0 / 49.0;
      CHECK(custom.value(Side::kLeft, x, y + h) > custom.value(Side::kLeft, x, y));
      CHECK(custom.value(Side::kLeft, y + h, x) > custom.value(Side::kLeft, y, x));
    }

  const auto flat = UtilityModel::custom("flat", [](double, double s) { return s; },
                                         [](double, double s) { return s; }, 1.0, 1.0);
  CHECK_FALSE(spot_check_monotone(flat));
}

TEST_CASE("minimal market") {
  const Market m = generate_market(square(1, 0.5, 3));
  CHECK(m.size(Side::kLeft) == 1);
  CHECK(m.rating(Side::kLeft, 0) >= 0.0);
  CHECK(m.rating(Side::kLeft, 0) <= 1.0);
  CHECK(m.score(Side::kRight, 0, 0) >= 0.0);
  CHECK(m.score(Side::kRight, 0, 0) <= 1.0);
  CHECK_THROWS_AS(generate_market(square(0, 0.5, 3)), std::invalid_argument);
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  const Market a = generate_market(square(300, 0.8, 11));
  const Market b = generate_market(square(300, 0.8, 11));
  const Market c = generate_market(square(300, 0.8, 12));
  CHECK(a == b);
  CHECK_FALSE(a == c);
}

TEST_CASE("score streams are keyed, not ordered") {
  const MarketParams p = square(40, 0.8, 99);
  const Market m = generate_market(p);
  // Reading the stream in reverse order reproduces the same entries.
  for (std::size_t i = 40; i-- > 0;)
    for (std::size_t j = 40; j-- > 0;) {
      CHECK(m.score(Side::kLeft, i, j) == keyed_uniform(p.seed, Stream::kScoreLeft, i, j));
      CHECK(m.score(Side::kRight, j, i) == keyed_uniform(p.seed, Stream::kScoreRight, j, i));
    }
  // A larger market shares its top-left block with a smaller one.
  const Market big = generate_market(square(60, 0.8, 99));
  CHECK(big.score(Side::kLeft, 17, 23) == m.score(Side::kLeft, 17, 23));
}

TEST_CASE("marginals are uniform (KS < 0.01 over 1e5 draws)") {
  std::vector<double> scores, ratings;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    scores.push_back(keyed_uniform(5, Stream::kScoreLeft, i / 317, i % 317));
    ratings.push_back(keyed_uniform(5, Stream::kRatingRight, i));
  }
  CHECK(oracle::ks_uniform(scores) < 0.01);
  CHECK(oracle::ks_uniform(ratings) < 0.01);

  const Market m = generate_market(square(320, 0.5, 8));
  std::vector<double> s(m.score_matrix(Side::kLeft).begin(), m.score_matrix(Side::kLeft).end());
  CHECK(oracle::ks_uniform(s) < 0.01);
}

TEST_CASE("rank_order sorts descending with index tie-break") {
  std::vector<double> r{0.2, 0.9, 0.5};
  CHECK(rank_order(r) == std::vector<std::size_t>{1, 2, 0});
  std::vector<double> t{0.5, 0.5};
  CHECK(rank_order(t) == std::vector<std::size_t>{0, 1});

  const Market m = generate_market(square(1000, 0.5, 4));
  const auto& order = m.ranking(Side::kLeft);
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) inverse[order[k]] = k;
  for (std::size_t i = 0; i < order.size(); ++i) {
    CHECK(order[inverse[i]] == i);
    CHECK(m.rank_of(Side::kLeft, i) == inverse[i]);
  }
  for (std::size_t k = 1; k < order.size(); ++k)
    CHECK(m.rating(Side::kLeft, order[k - 1]) >= m.rating(Side::kLeft, order[k]));
}

TEST_CASE("aligned partners") {
  CHECK(aligned_partner(7, 1, 1, 10) == 7u);
  CHECK(aligned_partner(3, 8, 1, 2000) == 24u);
  CHECK(aligned_partner(17, 1, 8, 250) == 3u);
  CHECK(aligned_partner(11, 1, 1, 10) == std::nullopt);
  CHECK(aligned_partner(2001, 1, 8, 250) == std::nullopt);

  MarketParams p;
  p.n_left = 2000;
  p.n_right = 250;
  p.cap_right = 8;
  p.seed = 5;
  const Market m = generate_market(p);
  CHECK(m.size(Side::kRight) * m.capacity(Side::kRight) == 2000);
  CHECK(m.capacities_balanced());
  const std::size_t company = m.ranking(Side::kRight)[2];
  CHECK(m.aligned_agent(Side::kRight, company) == m.ranking(Side::kLeft)[23]);
}

TEST_CASE("rating ranges of unbalanced markets") {
  MarketParams p;
  p.n_left = 120;
  p.n_right = 100;
  p.seed = 2;
  const auto [l, r] = rating_ranges(p);
  CHECK(l.lo == 0.0);
  CHECK(l.hi == doctest::Approx(1.2));
  CHECK(r.lo == doctest::Approx(0.2));
  CHECK(r.hi == doctest::Approx(1.2));
  const Market m = generate_market(p);
  for (std::size_t i = 0; i < 120; ++i) CHECK(m.rating(Side::kLeft, i) <= 1.2);
  for (std::size_t j = 0; j < 100; ++j) CHECK(m.rating(Side::kRight, j) >= 0.2);

  MarketParams q;
  q.n_left = 2000;
  q.n_right = 200;
  q.cap_right = 8;
  const auto [ql, qr] = rating_ranges(q);
  CHECK(ql.hi == 1.0);
  CHECK(qr.lo == 0.0);
  q.scale_many_to_one_ratings = true;
  CHECK(rating_ranges(q).first.hi == doctest::Approx(1.25));
}

TEST_CASE("market dumps round-trip bit-exactly") {
  MarketParams p = square(37, 0.67, 1234);
  p.n_right = 41;
  const Market m = generate_market(p);
  std::stringstream buf;
  write_market(buf, m);
  const Market back = read_market(buf);
  CHECK(back == m);

  std::stringstream again;
  write_market(again, back);
  std::stringstream first;
  write_market(first, m);
  CHECK(again.str() == first.str());

  std::stringstream broken(first.str().substr(0, 100));
  CHECK_THROWS(read_market(broken));
}
