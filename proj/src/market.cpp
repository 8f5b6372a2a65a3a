#include "matchlab/market.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "matchlab/rng.hpp"

namespace matchlab {

const char* to_string(Side s) { return s == Side::kLeft ? "left" : "right"; }

UtilityModel UtilityModel::linear(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0))
    throw std::invalid_argument("lambda must lie in (0, 1)");
  UtilityModel m;
  m.kind_ = Kind::kLinear;
  m.name_ = "linear";
  m.lambda_ = lambda;
  m.mu_ = lambda;
  m.rho_ = lambda / (1.0 - lambda);
  return m;
}

UtilityModel UtilityModel::custom(std::string name, Function left, Function right,
                                  double rho, double mu) {
  if (!left || !right) throw std::invalid_argument("custom utility needs two functions");
  if (!(rho > 0.0) || !(mu > 0.0))
    throw std::invalid_argument("derivative bounds must be positive");
  UtilityModel m;
  m.kind_ = Kind::kCustom;
  m.name_ = std::move(name);
  m.lambda_ = 0.0;
  m.rho_ = rho;
  m.mu_ = mu;
  m.left_ = std::move(left);
  m.right_ = std::move(right);
  return m;
}

double UtilityModel::custom_value(Side valuer, double rating, double score) const {
  const Function& f = valuer == Side::kLeft ? left_ : right_;
  if (rating < 0.0) return f(0.0, score) + mu_ * rating;
  return f(rating, score);
}

double utility(const UtilityModel& model, double rating, double score) {
  return model.value(Side::kLeft, rating, score);
}

bool spot_check_monotone(const UtilityModel& model, double rating_max,
                         std::size_t grid) {
  if (grid < 2) return true;
  const double dr = rating_max / static_cast<double>(grid - 1);
  const double ds = 1.0 / static_cast<double>(grid - 1);
  for (Side side : {Side::kLeft, Side::kRight}) {
    for (std::size_t a = 0; a < grid; ++a) {
      for (std::size_t b = 0; b < grid; ++b) {
        const double r = a * dr, s = b * ds;
        const double u = model.value(side, r, s);
        if (a + 1 < grid && !(model.value(side, r + dr, s) > u)) return false;
        if (b + 1 < grid && !(model.value(side, r, s + ds) > u)) return false;
      }
    }
  }
  return true;
}

std::vector<std::size_t> rank_order(std::span<const double> ratings) {
  std::vector<std::size_t> idx(ratings.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return ratings[a] > ratings[b];
  });
  return idx;
}

std::optional<std::size_t> aligned_partner(std::size_t rank, std::size_t own_cap,
                                           std::size_t other_cap,
                                           std::size_t other_size) {
  if (rank == 0 || other_cap == 0) return std::nullopt;
  const std::size_t r = (own_cap * rank + other_cap - 1) / other_cap;
  if (r == 0 || r > other_size) return std::nullopt;
  return r;
}

Market::Market(std::size_t n_left, std::size_t n_right, std::size_t cap_left,
               std::size_t cap_right, UtilityModel model, std::uint64_t seed,
               std::vector<double> ratings_left, std::vector<double> ratings_right,
               std::vector<double> scores_left, std::vector<double> scores_right)
    : n_left_(n_left),
      n_right_(n_right),
      cap_left_(cap_left),
      cap_right_(cap_right),
      model_(std::move(model)),
      seed_(seed),
      ratings_left_(std::move(ratings_left)),
      ratings_right_(std::move(ratings_right)),
      scores_left_(std::move(scores_left)),
      scores_right_(std::move(scores_right)) {
  if (n_left_ == 0 || n_right_ == 0) throw std::invalid_argument("market side is empty");
  if (cap_left_ == 0 || cap_right_ == 0) throw std::invalid_argument("capacity must be >= 1");
  if (ratings_left_.size() != n_left_ || ratings_right_.size() != n_right_ ||
      scores_left_.size() != n_left_ * n_right_ ||
      scores_right_.size() != n_left_ * n_right_)
    throw std::invalid_argument("market arrays do not match the declared sizes");
  order_left_ = rank_order(ratings_left_);
  order_right_ = rank_order(ratings_right_);
  rank_left_.resize(n_left_);
  rank_right_.resize(n_right_);
  for (std::size_t k = 0; k < n_left_; ++k) rank_left_[order_left_[k]] = k;
  for (std::size_t k = 0; k < n_right_; ++k) rank_right_[order_right_[k]] = k;
}

std::optional<std::size_t> Market::aligned_agent(Side s, std::size_t i) const {
  const auto r = aligned_partner(rank_of(s, i) + 1, capacity(s), capacity(other(s)),
                                 size(other(s)));
  if (!r) return std::nullopt;
  return ranking(other(s))[*r - 1];
}

bool Market::operator==(const Market& o) const {
  return n_left_ == o.n_left_ && n_right_ == o.n_right_ && cap_left_ == o.cap_left_ &&
         cap_right_ == o.cap_right_ && seed_ == o.seed_ &&
         model_.kind() == o.model_.kind() && model_.lambda() == o.model_.lambda() &&
         ratings_left_ == o.ratings_left_ && ratings_right_ == o.ratings_right_ &&
         scores_left_ == o.scores_left_ && scores_right_ == o.scores_right_;
}

std::pair<RatingRange, RatingRange> rating_ranges(const MarketParams& p) {
  RatingRange left{0.0, 1.0}, right{0.0, 1.0};
  const bool one_to_one = p.cap_left == 1 && p.cap_right == 1;
  if (!one_to_one && !p.scale_many_to_one_ratings) return {left, right};
  const std::size_t slots_left = p.n_left * p.cap_left;
  const std::size_t slots_right = p.n_right * p.cap_right;
  if (slots_left == slots_right) return {left, right};
  const double hi = static_cast<double>(std::max(slots_left, slots_right)) /
                    static_cast<double>(std::min(slots_left, slots_right));
  const RatingRange long_side{0.0, hi}, short_side{hi - 1.0, hi};
  if (slots_left > slots_right) return {long_side, short_side};
  return {short_side, long_side};
}

Market generate_market(const MarketParams& params) {
  return generate_market(params, UtilityModel::linear(params.lambda));
}

Market generate_market(const MarketParams& p, UtilityModel model) {
  if (p.n_left == 0 || p.n_right == 0) throw std::invalid_argument("market side is empty");
  if (p.cap_left == 0 || p.cap_right == 0) throw std::invalid_argument("capacity must be >= 1");
  const auto [range_left, range_right] = rating_ranges(p);
  auto draw_ratings = [&](std::size_t n, RatingRange range, Stream stream) {
    std::vector<double> r(n);
    const double width = range.hi - range.lo;
    for (std::size_t i = 0; i < n; ++i)
      r[i] = range.lo + width * keyed_uniform(p.seed, stream, i);
    return r;
  };
  auto draw_scores = [&](std::size_t rows, std::size_t cols, Stream stream) {
    std::vector<double> s(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        s[i * cols + j] = keyed_uniform(p.seed, stream, i, j);
    return s;
  };
  return Market(p.n_left, p.n_right, p.cap_left, p.cap_right, std::move(model), p.seed,
                draw_ratings(p.n_left, range_left, Stream::kRatingLeft),
                draw_ratings(p.n_right, range_right, Stream::kRatingRight),
                draw_scores(p.n_left, p.n_right, Stream::kScoreLeft),
                draw_scores(p.n_right, p.n_left, Stream::kScoreRight));
}

namespace {

constexpr char kMagic[8] = {'M', 'L', 'A', 'B', 'M', 'K', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "market dumps assume a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
void put_f64(std::ostream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }
void put_vec(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw std::runtime_error("truncated market dump");
  return v;
}
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }
std::vector<double> get_vec(std::istream& in, std::size_t expected) {
  if (get_u64(in) != expected) throw std::runtime_error("market dump size mismatch");
  std::vector<double> v(expected);
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(expected * sizeof(double))))
    throw std::runtime_error("truncated market dump");
  return v;
}

}  // namespace

void write_market(std::ostream& out, const Market& m) {
  if (m.model().kind() != UtilityModel::Kind::kLinear)
    throw std::invalid_argument("only linear-model markets can be serialized");
  out.write(kMagic, sizeof kMagic);
  put_u64(out, m.size(Side::kLeft));
  put_u64(out, m.size(Side::kRight));
  put_u64(out, m.capacity(Side::kLeft));
  put_u64(out, m.capacity(Side::kRight));
  put_u64(out, 0);  // model id: linear
  put_f64(out, m.model().lambda());
  put_u64(out, m.seed());
  auto as_vec = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
  put_vec(out, as_vec(m.ratings(Side::kLeft)));
  put_vec(out, as_vec(m.ratings(Side::kRight)));
  put_vec(out, as_vec(m.score_matrix(Side::kLeft)));
  put_vec(out, as_vec(m.score_matrix(Side::kRight)));
  if (!out) throw std::runtime_error("failed writing market dump");
}

Market read_market(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof magic) != 0)
    throw std::runtime_error("not a market dump");
  const std::size_t nl = get_u64(in), nr = get_u64(in);
  const std::size_t cl = get_u64(in), cr = get_u64(in);
  if (get_u64(in) != 0) throw std::runtime_error("unknown utility model id");
  const double lambda = get_f64(in);
  const std::uint64_t seed = get_u64(in);
  auto rl = get_vec(in, nl);
  auto rr = get_vec(in, nr);
  auto sl = get_vec(in, nl * nr);
  auto sr = get_vec(in, nl * nr);
  return Market(nl, nr, cl, cr, UtilityModel::linear(lambda), seed, std::move(rl),
                std::move(rr), std::move(sl), std::move(sr));
}

void save_market(const std::string& path, const Market& market) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_market(out, market);
}

Market load_market(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_market(in);
}

}  // namespace matchlab
