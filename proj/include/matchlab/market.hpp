#ifndef MATCHLAB_MARKET_HPP_
#define MATCHLAB_MARKET_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace matchlab {

// The left side is the default proposing side (women in the one-to-one
// market, workers in the many-to-one market); the right side receives.
enum class Side { kLeft, kRight };

constexpr Side other(Side s) { return s == Side::kLeft ? Side::kRight : Side::kLeft; }
const char* to_string(Side s);

/// Strictly increasing utility in (partner rating, own private score).
///
/// The linear separable model evaluates lambda * rating + (1 - lambda) *
/// score on both sides. Custom models take one callable per valuing side and
/// declare their derivative bounds: rho bounds d/dr over d/ds from below and
/// mu bounds d/dr from above. Ratings below zero (needed for truncation
/// thresholds) extend the function linearly with slope mu in the rating.
class UtilityModel {
 public:
  using Function = std::function<double(double rating, double score)>;
  enum class Kind { kLinear, kCustom };

  static UtilityModel linear(double lambda);
  static UtilityModel custom(std::string name, Function left, Function right,
                             double rho, double mu);

  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  double lambda() const { return lambda_; }
  double rho() const { return rho_; }
  double mu() const { return mu_; }

  /// Utility an agent on side `valuer` draws from a partner with the given
  /// public rating when its private score for that partner is `score`.
  double value(Side valuer, double rating, double score) const {
    if (kind_ == Kind::kLinear) return lambda_ * rating + (1.0 - lambda_) * score;
    return custom_value(valuer, rating, score);
  }

 private:
  UtilityModel() = default;
  double custom_value(Side valuer, double rating, double score) const;

  Kind kind_ = Kind::kLinear;
  std::string name_;
  double lambda_ = 0.5;
  double rho_ = 1.0;
  double mu_ = 0.5;
  Function left_;
  Function right_;
};

/// Utility of the left side's function; the single-function view of a model.
double utility(const UtilityModel& model, double rating, double score);

/// Checks strict monotonicity of both utility functions on a grid x grid
/// sample of [0, rating_max] x [0, 1]. Returns false on the first violation.
bool spot_check_monotone(const UtilityModel& model, double rating_max = 1.0,
                         std::size_t grid = 50);

struct MarketParams {
  std::size_t n_left = 1;
  std::size_t n_right = 1;
  std::size_t cap_left = 1;
  std::size_t cap_right = 1;
  double lambda = 0.8;
  std::uint64_t seed = 0;
  // Shift the rating ranges of unbalanced markets so the long side spans
  // [0, p/n] and the short side [p/n - 1, p/n], p and n being the slot totals.
  // One-to-one unbalanced markets always use it; many-to-one only on request.
  bool scale_many_to_one_ratings = false;
};

/// Immutable market instance: public ratings, dense private-score matrices
/// and capacities for both sides.
class Market {
 public:
  Market(std::size_t n_left, std::size_t n_right, std::size_t cap_left,
         std::size_t cap_right, UtilityModel model, std::uint64_t seed,
         std::vector<double> ratings_left, std::vector<double> ratings_right,
         std::vector<double> scores_left, std::vector<double> scores_right);

  std::size_t size(Side s) const { return s == Side::kLeft ? n_left_ : n_right_; }
  std::size_t capacity(Side s) const { return s == Side::kLeft ? cap_left_ : cap_right_; }
  const UtilityModel& model() const { return model_; }
  std::uint64_t seed() const { return seed_; }

  double rating(Side s, std::size_t i) const { return ratings(s)[i]; }
  std::span<const double> ratings(Side s) const {
    return s == Side::kLeft ? std::span<const double>(ratings_left_)
                            : std::span<const double>(ratings_right_);
  }
  /// Private score agent `i` on side `s` holds for agent `j` on the other side.
  double score(Side s, std::size_t i, std::size_t j) const {
    return s == Side::kLeft ? scores_left_[i * n_right_ + j]
                            : scores_right_[i * n_left_ + j];
  }
  std::span<const double> score_matrix(Side s) const {
    return s == Side::kLeft ? std::span<const double>(scores_left_)
                            : std::span<const double>(scores_right_);
  }
  double utility(Side s, std::size_t i, std::size_t j) const {
    return model_.value(s, rating(other(s), j), score(s, i, j));
  }

  /// Agent indices in descending rating order; position k holds rank k + 1.
  const std::vector<std::size_t>& ranking(Side s) const {
    return s == Side::kLeft ? order_left_ : order_right_;
  }
  /// Zero-based rank of agent i.
  std::size_t rank_of(Side s, std::size_t i) const {
    return s == Side::kLeft ? rank_left_[i] : rank_right_[i];
  }
  /// Agent on the other side aligned with agent i, if any.
  std::optional<std::size_t> aligned_agent(Side s, std::size_t i) const;

  bool capacities_balanced() const {
    return n_left_ * cap_left_ == n_right_ * cap_right_;
  }

  bool operator==(const Market& o) const;

 private:
  std::size_t n_left_;
  std::size_t n_right_;
  std::size_t cap_left_;
  std::size_t cap_right_;
  UtilityModel model_;
  std::uint64_t seed_;
  std::vector<double> ratings_left_;
  std::vector<double> ratings_right_;
  std::vector<double> scores_left_;   // n_left x n_right, row-major
  std::vector<double> scores_right_;  // n_right x n_left, row-major
  std::vector<std::size_t> order_left_, order_right_;
  std::vector<std::size_t> rank_left_, rank_right_;
};

struct RatingRange {
  double lo;
  double hi;
};

/// Rating ranges per side for the given sizes and capacities.
std::pair<RatingRange, RatingRange> rating_ranges(const MarketParams& p);

Market generate_market(const MarketParams& params);
Market generate_market(const MarketParams& params, UtilityModel model);

/// Indices sorted by descending rating, ties broken by lower index.
std::vector<std::size_t> rank_order(std::span<const double> ratings);

/// One-based rank of the aligned partner of a rank-`rank` agent whose side has
/// capacity own_cap, or nullopt when it would exceed other_size.
std::optional<std::size_t> aligned_partner(std::size_t rank, std::size_t own_cap,
                                           std::size_t other_cap,
                                           std::size_t other_size);

// Binary dump; round-trips linear-model markets bit-exactly.
void write_market(std::ostream& out, const Market& market);
Market read_market(std::istream& in);
void save_market(const std::string& path, const Market& market);
Market load_market(const std::string& path);

}  // namespace matchlab

#endif  // MATCHLAB_MARKET_HPP_
