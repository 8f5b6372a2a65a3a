#include "matchlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace matchlab {

LossParams theoretical_L(std::size_t n, double c, const UtilityModel& model) {
  if (n < 2) throw std::invalid_argument("theoretical_L needs n >= 2");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  LossParams p;
  p.c = c;
  p.mu = model.mu();
  p.rho = model.rho();
  const double nn = static_cast<double>(n);
  p.L_bar = std::cbrt(128.0 * (c + 2.0) * std::pow(p.mu, 3) * std::log(nn) /
                      (p.rho * p.rho * nn));
  p.alpha = p.L_bar / (4.0 * p.mu);
  p.beta = p.alpha * p.rho;
  p.gamma = p.alpha * p.rho;
  p.sigma_bar = 3.0 * p.L_bar / (4.0 * p.mu);
  return p;
}

double lower_bound_L(std::size_t n) {
  const double nn = static_cast<double>(n);
  return std::cbrt(std::log(nn) / nn) / 8.0;
}

std::optional<double> benchmark(const Market& market, Side side, std::size_t agent) {
  const auto a = market.aligned_agent(side, agent);
  if (!a) return std::nullopt;
  return market.model().value(side, market.rating(other(side), *a), 1.0);
}

LossReport loss_report(const Market& market, const Matching& matching,
                       const LossParams& params) {
  return loss_report(market, matching, params.sigma_bar);
}

LossReport loss_report(const Market& market, const Matching& matching, double bottom_rating) {
  LossReport report;
  for (Side s : {Side::kLeft, Side::kRight}) {
    auto& out = s == Side::kLeft ? report.left : report.right;
    out.resize(market.size(s));
    for (std::size_t i = 0; i < market.size(s); ++i) {
      AgentLoss& a = out[i];
      a.agent = i;
      a.rank = market.rank_of(s, i) + 1;
      if (const auto al = market.aligned_agent(s, i)) a.aligned_rating = market.rating(other(s), *al);
      a.benchmark = benchmark(market, s, i);
      a.bottom_zone = !a.aligned_rating || *a.aligned_rating < bottom_rating;
      const auto& partners = matching.partners(s, i);
      a.unfilled = market.capacity(s) - std::min(market.capacity(s), partners.size());
      if (!partners.empty()) {
        double worst = std::numeric_limits<double>::infinity();
        for (std::size_t j : partners) worst = std::min(worst, market.utility(s, i, j));
        a.achieved = worst;
        if (a.benchmark) a.loss = *a.benchmark - worst;
      }
    }
  }
  return report;
}

void write_loss_csv(std::ostream& out, const LossReport& report) {
  out << "side,agent,rank,benchmark,achieved,loss,sign,bottom_zone,matched,unfilled\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) out << *v;
  };
  for (Side s : {Side::kLeft, Side::kRight}) {
    for (const auto& a : report.side(s)) {
      out << to_string(s) << ',' << a.agent << ',' << a.rank << ',';
      opt(a.benchmark);
      out << ',';
      opt(a.achieved);
      out << ',';
      opt(a.loss);
      out << ',' << (!a.loss ? "none" : (*a.loss < 0 ? "gain" : "loss")) << ','
          << (a.bottom_zone ? 1 : 0) << ',' << (a.achieved ? 1 : 0) << ',' << a.unfilled << '\n';
    }
  }
}

namespace {

// Per-agent acceptance threshold on utility: edges worth at least this are
// side-acceptable. -inf accepts everything.
std::vector<double> acceptance_floor(const Market& market, Side s, double L, double sigma) {
  std::vector<double> floor(market.size(s), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < market.size(s); ++i) {
    if (market.rating(s, i) < sigma) continue;
    if (const auto b = benchmark(market, s, i)) floor[i] = *b - L;
  }
  return floor;
}

}  // namespace

EdgeSet acceptable_edges(const Market& market, double L_left, double L_right, double sigma_left,
                         double sigma_right) {
  const auto fl = acceptance_floor(market, Side::kLeft, L_left, sigma_left);
  const auto fr = acceptance_floor(market, Side::kRight, L_right, sigma_right);
  EdgeSet e = EdgeSet::empty(market);
  for (std::size_t i = 0; i < market.size(Side::kLeft); ++i)
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j)
      if (market.utility(Side::kLeft, i, j) >= fl[i] &&
          market.utility(Side::kRight, j, i) >= fr[j])
        e.insert(i, j);
  return e;
}

EdgeSet viable_edges(const Market& market, const EdgeSet& edges) {
  // The left side's pessimal matching comes from right-proposing DA and vice versa.
  const Matching left_pessimal = run_da(market, Side::kRight, edges);
  const Matching right_pessimal = run_da(market, Side::kLeft, edges);

  auto worst = [&](const Matching& m, Side s, std::size_t i) -> std::optional<std::pair<double, std::size_t>> {
    const auto& p = m.partners(s, i);
    if (p.size() < market.capacity(s)) return std::nullopt;
    std::pair<double, std::size_t> w{std::numeric_limits<double>::infinity(), 0};
    bool first = true;
    for (std::size_t j : p) {
      const double u = market.utility(s, i, j);
      if (first || prefers(w.first, w.second, u, j)) w = {u, j};
      first = false;
    }
    return w;
  };
  std::vector<std::optional<std::pair<double, std::size_t>>> wl(market.size(Side::kLeft)),
      wr(market.size(Side::kRight));
  for (std::size_t i = 0; i < wl.size(); ++i) wl[i] = worst(left_pessimal, Side::kLeft, i);
  for (std::size_t j = 0; j < wr.size(); ++j) wr[j] = worst(right_pessimal, Side::kRight, j);

  EdgeSet out = EdgeSet::empty(market);
  for (const auto& [i, j] : edges.edges()) {
    const bool left_ok = !wl[i] || !prefers(wl[i]->first, wl[i]->second,
                                            market.utility(Side::kLeft, i, j), j);
    const bool right_ok = !wr[j] || !prefers(wr[j]->first, wr[j]->second,
                                             market.utility(Side::kRight, j, i), i);
    if (left_ok && right_ok) out.insert(i, j);
  }
  return out;
}

RatingInterval cone_bounds(const Market& market, const LossParams& params, Side side,
                           std::size_t agent) {
  const auto a = market.aligned_agent(side, agent);
  if (!a) throw std::invalid_argument("agent has no aligned partner");
  const double r = market.rating(other(side), *a);
  return {r - 4.0 * params.alpha, r + 5.0 * params.alpha};
}

EdgeSet interview_edges(const Market& market, const InterviewParams& params) {
  if (params.p < 0.0 || params.p > 1.0 || params.q_left < 0.0 || params.q_left > 1.0 ||
      params.q_right < 0.0 || params.q_right > 1.0)
    throw std::invalid_argument("interview parameters must lie in [0, 1]");
  EdgeSet e = EdgeSet::empty(market);
  for (std::size_t i = 0; i < market.size(Side::kLeft); ++i) {
    const double ri = market.rating(Side::kLeft, i);
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j) {
      if (std::abs(ri - market.rating(Side::kRight, j)) > params.p) continue;
      if (market.score(Side::kLeft, i, j) > params.q_left &&
          market.score(Side::kRight, j, i) > params.q_right)
        e.insert(i, j);
    }
  }
  return e;
}

SelectedSetParams::SelectedSetParams(double k, std::size_t n) : k_(k), n_(n) {
  if (!(k >= 1.0)) throw std::invalid_argument("k must be at least 1");
  if (n == 0) throw std::invalid_argument("n must be positive");
  sigma_ = 0.5 * std::cbrt(k / static_cast<double>(n));
  if (sigma_ > 0.5) throw std::invalid_argument("n too small for k: sigma exceeds 1/2");
  scale_ = sigma_ / static_cast<double>(n);
}

double SelectedSetParams::weight(double x, double y) const {
  if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) return 0.0;
  if (std::abs(x - y) > 2.0 * sigma_) return 0.0;
  const double s2 = sigma_ * sigma_;
  const double base = k_ / (4.0 * s2);
  const auto mid = [&](double v) { return v >= sigma_ && v <= 1.0 - sigma_; };
  if (mid(x) || mid(y)) return base;
  if (x < sigma_ && y < sigma_) return base + k_ * (sigma_ - x) * (sigma_ - y) / (2.0 * s2);
  if (x > 1.0 - sigma_ && y > 1.0 - sigma_)
    return base + k_ * (x + sigma_ - 1.0) * (y + sigma_ - 1.0) / (2.0 * s2);
  // One rating below sigma, the other above 1 - sigma: only reachable when the
  // cone spans the whole range.
  return base;
}

double SelectedSetParams::max_probability() const {
  // The corner terms peak at x = y = 0 (or 1) with value k/2.
  return (k_ / (4.0 * sigma_ * sigma_) + k_ / 2.0) * scale_;
}

EdgeSet selected_edges(const Market& market, const SelectedSetParams& params) {
  if (params.max_probability() > 1.0)
    throw std::invalid_argument("selection probability exceeds 1; k/n too large");
  EdgeSet e = EdgeSet::empty(market);
  for (std::size_t i = 0; i < market.size(Side::kLeft); ++i) {
    const double x = market.rating(Side::kLeft, i);
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j) {
      const double p = params.probability(x, market.rating(Side::kRight, j));
      if (p <= 0.0) continue;
      const double cutoff = 1.0 - std::sqrt(p);
      if (market.score(Side::kLeft, i, j) >= cutoff && market.score(Side::kRight, j, i) >= cutoff)
        e.insert(i, j);
    }
  }
  return e;
}

double truncation_shift(const LossParams& params) { return params.L_bar / params.mu; }

double truncation_threshold(const Market& market, Side side, double aligned_rating,
                            const LossParams& params, double t_max) {
  const double shift = truncation_shift(params);
  double t = t_max;
  if (aligned_rating > 0.0) t = std::clamp(shift / aligned_rating, 1.0, std::max(1.0, t_max));
  const auto& model = market.model();
  return model.value(side, aligned_rating, 1.0) -
         model.value(side, aligned_rating - shift * t * t, 1.0);
}

EdgeSet truncated_edges(const Market& market, const LossParams& params, double t_left,
                        double t_right) {
  if (t_left < 1.0 || t_right < 1.0) throw std::invalid_argument("t must be at least 1");
  auto floors = [&](Side s, double t_max) {
    std::vector<double> f(market.size(s), -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < f.size(); ++i) {
      const auto a = market.aligned_agent(s, i);
      if (!a) continue;
      const double r = market.rating(other(s), *a);
      f[i] = *benchmark(market, s, i) - truncation_threshold(market, s, r, params, t_max);
    }
    return f;
  };
  const auto fl = floors(Side::kLeft, t_left);
  const auto fr = floors(Side::kRight, t_right);
  EdgeSet e = EdgeSet::empty(market);
  for (std::size_t i = 0; i < market.size(Side::kLeft); ++i)
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j)
      if (market.utility(Side::kLeft, i, j) >= fl[i] &&
          market.utility(Side::kRight, j, i) >= fr[j])
        e.insert(i, j);
  return e;
}

}  // namespace matchlab
