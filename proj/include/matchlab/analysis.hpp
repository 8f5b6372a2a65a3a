#ifndef MATCHLAB_ANALYSIS_HPP_
#define MATCHLAB_ANALYSIS_HPP_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "matchlab/edge_set.hpp"
#include "matchlab/market.hpp"
#include "matchlab/matching.hpp"

namespace matchlab {

// Loss bound and its companion analysis parameters. For a model with
// derivative bounds (rho, mu):
//   L_bar     = [128 (c + 2) mu^3 ln n / (rho^2 n)]^(1/3)
//   alpha     = L_bar / (4 mu),  beta = gamma = alpha * rho
//   sigma_bar = 3 alpha = 3 L_bar / (4 mu)
// lambda = 1/2 reduces to L_bar = (16 (c + 2) ln n / n)^(1/3), alpha = L_bar / 2.
struct LossParams {
  double c = 1.0;
  double L_bar = 0.0;
  double sigma_bar = 0.0;
  double t = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double mu = 0.5;
  double rho = 1.0;
};

LossParams theoretical_L(std::size_t n, double c, const UtilityModel& model);

/// L = (1/8) (ln n / n)^(1/3), the loss level below which perfect matchings
/// on acceptable edges start to disappear.
double lower_bound_L(std::size_t n);

/// value(aligned partner's rating, 1) for agent i on `side`; nullopt when the
/// agent has no aligned partner.
std::optional<double> benchmark(const Market& market, Side side, std::size_t agent);

struct AgentLoss {
  std::size_t agent = 0;
  std::size_t rank = 0;  // one-based
  std::optional<double> benchmark;
  std::optional<double> achieved;  // worst partner's utility
  std::optional<double> loss;      // benchmark - achieved; negative is a gain
  std::optional<double> aligned_rating;
  std::size_t unfilled = 0;  // empty slots
  bool bottom_zone = false;
};

struct LossReport {
  std::vector<AgentLoss> left;
  std::vector<AgentLoss> right;
  const std::vector<AgentLoss>& side(Side s) const { return s == Side::kLeft ? left : right; }
};

/// Per-agent losses. Agents whose aligned partner is rated below
/// params.sigma_bar (or absent) are flagged bottom-zone.
LossReport loss_report(const Market& market, const Matching& matching, const LossParams& params);
LossReport loss_report(const Market& market, const Matching& matching, double bottom_rating);

// CSV: side,agent,rank,benchmark,achieved,loss,sign,bottom_zone,matched,unfilled
void write_loss_csv(std::ostream& out, const LossReport& report);

/// Edges side-acceptable to both endpoints: an agent accepts an edge if its
/// loss on it is at most L for its side, or if its own rating is below the
/// side's sigma, or if it has no aligned partner.
EdgeSet acceptable_edges(const Market& market, double L_left, double L_right, double sigma_left,
                         double sigma_right);

/// Edges both endpoints weakly prefer to their partners in their own
/// pessimal stable matching of `edges`.
EdgeSet viable_edges(const Market& market, const EdgeSet& edges);

struct RatingInterval {
  double lo;
  double hi;
  bool contains(double r) const { return r >= lo && r <= hi; }
};

/// [r - 4 alpha, r + 5 alpha] around the agent's aligned partner's rating r.
RatingInterval cone_bounds(const Market& market, const LossParams& params, Side side,
                           std::size_t agent);

struct InterviewParams {
  double p = 1.0;        // rating window half-width
  double q_left = 0.0;   // left agents' private-score cutoff
  double q_right = 0.0;  // right agents' private-score cutoff
};

/// Edges with |rating gap| <= p whose private scores both exceed the cutoffs.
EdgeSet interview_edges(const Market& market, const InterviewParams& params);

/// Pair-selection probabilities for the constant-proposals construction.
///
/// sigma = (k/n)^(1/3) / 2. The shape is the piecewise weight
///   k/(4 sigma^2)                                      x or y in [sigma, 1 - sigma]
///   k/(4 sigma^2) + k (sigma - x)(sigma - y)/(2 sigma^2)        both below sigma
///   k/(4 sigma^2) + k (x + sigma - 1)(y + sigma - 1)/(2 sigma^2) both above 1 - sigma
/// and zero when |x - y| > 2 sigma or either rating leaves [0, 1]. It is
/// scaled by sigma / n so that an agent in the middle of the range has k
/// selected edges in expectation.
class SelectedSetParams {
 public:
  SelectedSetParams(double k, std::size_t n);

  double k() const { return k_; }
  std::size_t n() const { return n_; }
  double sigma() const { return sigma_; }

  double weight(double x, double y) const;
  double probability(double x, double y) const { return weight(x, y) * scale_; }
  double max_probability() const;

 private:
  double k_;
  std::size_t n_;
  double sigma_;
  double scale_;
};

/// Keeps edge (i, j) iff both directional scores are at least 1 - sqrt(p)
/// where p is the pair's selection probability, so each in-cone edge survives
/// with probability exactly p. Throws if some probability exceeds 1.
EdgeSet selected_edges(const Market& market, const SelectedSetParams& params);

/// Rating shift behind the truncation thresholds: L_bar / mu, i.e. 4 alpha.
double truncation_shift(const LossParams& params);

/// Threshold L_t = value(r, 1) - value(r - shift * t^2, 1) for an agent whose
/// aligned partner has rating r, with t = clamp(shift / r, 1, t_max).
double truncation_threshold(const Market& market, Side side, double aligned_rating,
                            const LossParams& params, double t_max);

/// Removes every edge whose loss exceeds either endpoint's truncation threshold.
EdgeSet truncated_edges(const Market& market, const LossParams& params, double t_left,
                        double t_right);

}  // namespace matchlab

#endif  // MATCHLAB_ANALYSIS_HPP_
