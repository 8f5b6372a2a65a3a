#include "matchlab/matching.hpp"

#include <algorithm>
#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "matchlab/rng.hpp"

namespace matchlab {

bool Matching::contains(std::size_t i, std::size_t j) const {
  const auto& p = partners_left[i];
  return std::find(p.begin(), p.end(), j) != p.end();
}

void Matching::add(std::size_t i, std::size_t j) {
  partners_left[i].push_back(j);
  partners_right[j].push_back(i);
}

std::vector<std::size_t> Matching::unmatched(Side s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(s); ++i)
    if (!is_matched(s, i)) out.push_back(i);
  return out;
}

std::size_t Matching::pair_count() const {
  std::size_t n = 0;
  for (const auto& p : partners_left) n += p.size();
  return n;
}

std::vector<std::pair<std::size_t, std::size_t>> Matching::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < partners_left.size(); ++i)
    for (std::size_t j : partners_left[i]) out.emplace_back(i, j);
  std::sort(out.begin(), out.end());
  return out;
}

bool Matching::same_assignment(const Matching& o) const {
  auto norm = [](std::vector<std::vector<std::size_t>> v) {
    for (auto& p : v) std::sort(p.begin(), p.end());
    return v;
  };
  return norm(partners_left) == norm(o.partners_left) &&
         norm(partners_right) == norm(o.partners_right);
}

std::vector<std::vector<std::uint32_t>> preference_lists(const Market& market, Side side,
                                                         const EdgeSet& edges) {
  const std::size_t n = market.size(side), m = market.size(other(side));
  std::vector<std::vector<std::uint32_t>> lists(n);
  std::vector<std::pair<double, std::uint32_t>> buf;
  for (std::size_t i = 0; i < n; ++i) {
    buf.clear();
    for (std::size_t j = 0; j < m; ++j)
      if (edges.contains(side, i, j))
        buf.emplace_back(market.utility(side, i, j), static_cast<std::uint32_t>(j));
    std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) {
      return prefers(a.first, a.second, b.first, b.second);
    });
    lists[i].reserve(buf.size());
    for (const auto& e : buf) lists[i].push_back(e.second);
  }
  return lists;
}

namespace {

using Candidate = std::pair<double, std::uint32_t>;

bool better(const Candidate& a, const Candidate& b) {
  return prefers(a.first, a.second, b.first, b.second);
}

// Walks one proposer's preference list best-first without sorting the whole
// row: each refill rescans the row for the next chunk below the last
// candidate handed out, doubling the chunk size every time.
class PreferenceCursor {
 public:
  std::optional<std::uint32_t> next(const Market& market, Side side, const EdgeSet& edges,
                                    std::size_t agent, std::vector<Candidate>& scratch) {
    if (pos_ == buf_.size()) {
      if (exhausted_) return std::nullopt;
      refill(market, side, edges, agent, scratch);
      if (buf_.empty()) return std::nullopt;
    }
    return buf_[pos_++].second;
  }

 private:
  void refill(const Market& market, Side side, const EdgeSet& edges, std::size_t agent,
              std::vector<Candidate>& scratch) {
    scratch.clear();
    const std::size_t m = market.size(other(side));
    for (std::size_t j = 0; j < m; ++j) {
      if (!edges.contains(side, agent, j)) continue;
      Candidate c{market.utility(side, agent, j), static_cast<std::uint32_t>(j)};
      if (has_last_ && !better(last_, c)) continue;
      scratch.push_back(c);
    }
    if (scratch.size() > chunk_) {
      std::nth_element(scratch.begin(), scratch.begin() + chunk_, scratch.end(), better);
      scratch.resize(chunk_);
    } else {
      exhausted_ = true;
    }
    std::sort(scratch.begin(), scratch.end(), better);
    buf_.assign(scratch.begin(), scratch.end());
    pos_ = 0;
    if (!buf_.empty()) {
      last_ = buf_.back();
      has_last_ = true;
    }
    chunk_ *= 2;
  }

  std::vector<Candidate> buf_;
  std::size_t pos_ = 0;
  std::size_t chunk_ = 32;
  bool exhausted_ = false;
  bool has_last_ = false;
  Candidate last_{};
};

}  // namespace

Matching run_da(const Market& market, Side proposing, const EdgeSet& edges,
                const DaOptions& options) {
  const Side receiving = other(proposing);
  const std::size_t n_prop = market.size(proposing), n_recv = market.size(receiving);
  const std::size_t cap_prop = market.capacity(proposing);
  const std::size_t cap_recv = market.capacity(receiving);
  if (edges.n_left() != market.size(Side::kLeft) || edges.n_right() != market.size(Side::kRight))
    throw std::invalid_argument("edge set does not match market");

  std::vector<PreferenceCursor> cursors(n_prop);
  std::vector<std::size_t> free_slots(n_prop, cap_prop);
  std::vector<std::size_t> proposals(n_prop, 0);
  std::vector<std::vector<Candidate>> held(n_recv);  // (receiver utility, proposer)
  std::vector<Candidate> scratch;

  std::vector<std::size_t> pool(n_prop);
  for (std::size_t i = 0; i < n_prop; ++i) pool[i] = n_prop - 1 - i;
  std::vector<std::uint8_t> in_pool(n_prop, 1);
  std::optional<KeyedEngine> engine;
  if (options.shuffle_seed) engine.emplace(*options.shuffle_seed, Stream::kShuffle);

  while (!pool.empty()) {
    std::size_t pick = pool.size() - 1;
    if (engine) pick = static_cast<std::size_t>((*engine)() % pool.size());
    const std::size_t p = pool[pick];
    pool[pick] = pool.back();
    pool.pop_back();
    in_pool[p] = 0;

    while (free_slots[p] > 0) {
      const auto next = cursors[p].next(market, proposing, edges, p, scratch);
      if (!next) break;
      const std::size_t j = *next;
      ++proposals[p];
      const Candidate offer{market.utility(receiving, j, p), static_cast<std::uint32_t>(p)};
      auto& h = held[j];
      if (h.size() < cap_recv) {
        h.push_back(offer);
        --free_slots[p];
        continue;
      }
      auto worst = std::max_element(h.begin(), h.end(), better);  // least preferred
      if (!better(offer, *worst)) continue;  // rejected
      const std::size_t bumped = worst->second;
      *worst = offer;
      --free_slots[p];
      ++free_slots[bumped];
      if (!in_pool[bumped]) {
        pool.push_back(bumped);
        in_pool[bumped] = 1;
      }
    }
  }

  Matching m(market.size(Side::kLeft), market.size(Side::kRight));
  for (std::size_t j = 0; j < n_recv; ++j) {
    for (const auto& c : held[j]) {
      if (proposing == Side::kLeft) m.add(c.second, j);
      else m.add(j, c.second);
    }
  }
  for (auto& p : m.partners_left) std::sort(p.begin(), p.end());
  for (auto& p : m.partners_right) std::sort(p.begin(), p.end());
  (proposing == Side::kLeft ? m.proposals_left : m.proposals_right) = std::move(proposals);
  return m;
}

EdgeSet double_cut_edges(const Market& market, Side proposing, const CutSpec& cut) {
  if (!cut.target && !cut.rating_floor)
    throw std::invalid_argument("cut needs a target or a rating floor");
  const Side receiving = other(proposing);
  if (cut.target && *cut.target >= market.size(receiving))
    throw std::out_of_range("cut target out of range");
  const double floor_rating = cut.rating_floor.value_or(0.0);
  const bool has_floor = cut.rating_floor.has_value();
  const auto full = EdgeSet::complete(market);
  const auto lists = preference_lists(market, proposing, full);
  EdgeSet out = EdgeSet::empty(market);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const double floor_utility = market.model().value(proposing, floor_rating, 1.0);
    for (std::uint32_t j : lists[i]) {
      if (has_floor && market.utility(proposing, i, j) < floor_utility) break;
      if (proposing == Side::kLeft) out.insert(i, j);
      else out.insert(j, i);
      if (cut.target && j == *cut.target) break;
    }
  }
  return out;
}

Matching run_double_cut_da(const Market& market, Side proposing, const CutSpec& cut) {
  return run_da(market, proposing, double_cut_edges(market, proposing, cut));
}

std::pair<Matching, Matching> extreme_matchings(const Market& market, const EdgeSet& edges) {
  return {run_da(market, Side::kLeft, edges), run_da(market, Side::kRight, edges)};
}

AgentSets multi_stable_agents(const Matching& a, const Matching& b) {
  AgentSets out;
  auto differs = [](std::vector<std::size_t> x, std::vector<std::size_t> y) {
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    return x != y;
  };
  for (std::size_t i = 0; i < a.size(Side::kLeft); ++i)
    if (differs(a.partners_left[i], b.partners_left[i])) out.left.push_back(i);
  for (std::size_t j = 0; j < a.size(Side::kRight); ++j)
    if (differs(a.partners_right[j], b.partners_right[j])) out.right.push_back(j);
  return out;
}

AgentSets multi_stable_agents(const Market& market, const EdgeSet& edges) {
  const auto [lo, ro] = extreme_matchings(market, edges);
  return multi_stable_agents(lo, ro);
}

std::optional<double> worst_partner_utility(const Market& market, const Matching& m, Side side,
                                            std::size_t i) {
  const auto& p = m.partners(side, i);
  if (p.size() < market.capacity(side)) return std::nullopt;
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t j : p) worst = std::min(worst, market.utility(side, i, j));
  return worst;
}

namespace {

// Worst held partner per agent as (utility, index); free slots map to nullopt.
std::vector<std::optional<Candidate>> worst_partners(const Market& market, const Matching& m,
                                                     Side side) {
  std::vector<std::optional<Candidate>> out(market.size(side));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& p = m.partners(side, i);
    if (p.size() < market.capacity(side)) continue;
    Candidate w{};
    bool first = true;
    for (std::size_t j : p) {
      Candidate c{market.utility(side, i, j), static_cast<std::uint32_t>(j)};
      if (first || better(w, c)) w = c;
      first = false;
    }
    out[i] = w;
  }
  return out;
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> verify_stability(const Market& market,
                                                                  const EdgeSet& edges,
                                                                  const Matching& matching) {
  const auto wl = worst_partners(market, matching, Side::kLeft);
  const auto wr = worst_partners(market, matching, Side::kRight);
  std::vector<std::pair<std::size_t, std::size_t>> blocking;
  for (std::size_t i = 0; i < market.size(Side::kLeft); ++i) {
    for (std::size_t j = 0; j < market.size(Side::kRight); ++j) {
      if (!edges.contains(i, j) || matching.contains(i, j)) continue;
      if (wl[i] && !better({market.utility(Side::kLeft, i, j), static_cast<std::uint32_t>(j)},
                           *wl[i]))
        continue;
      if (wr[j] && !better({market.utility(Side::kRight, j, i), static_cast<std::uint32_t>(i)},
                           *wr[j]))
        continue;
      blocking.emplace_back(i, j);
    }
  }
  return blocking;
}

std::vector<Matching> brute_force_stable_set(const Market& market, const EdgeSet& edges) {
  const std::size_t nl = market.size(Side::kLeft), nr = market.size(Side::kRight);
  if (market.capacity(Side::kLeft) != 1 || market.capacity(Side::kRight) != 1)
    throw std::invalid_argument("brute force needs a one-to-one market");
  if (nl > 8 || nr > 8) throw std::invalid_argument("brute force is limited to 8 agents a side");

  std::vector<std::vector<double>> ul(nl, std::vector<double>(nr));
  std::vector<std::vector<double>> ur(nr, std::vector<double>(nl));
  for (std::size_t i = 0; i < nl; ++i)
    for (std::size_t j = 0; j < nr; ++j) {
      ul[i][j] = market.utility(Side::kLeft, i, j);
      ur[j][i] = market.utility(Side::kRight, j, i);
    }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> mate_l(nl, kNone), mate_r(nr, kNone);
  std::vector<Matching> stable;

  auto is_stable = [&]() {
    for (std::size_t i = 0; i < nl; ++i)
      for (std::size_t j = 0; j < nr; ++j) {
        if (!edges.contains(i, j) || mate_l[i] == j) continue;
        const bool l_wants = mate_l[i] == kNone || prefers(ul[i][j], j, ul[i][mate_l[i]], mate_l[i]);
        const bool r_wants = mate_r[j] == kNone || prefers(ur[j][i], i, ur[j][mate_r[j]], mate_r[j]);
        if (l_wants && r_wants) return false;
      }
    return true;
  };

  auto recurse = [&](auto&& self, std::size_t i) -> void {
    if (i == nl) {
      if (!is_stable()) return;
      Matching m(nl, nr);
      for (std::size_t a = 0; a < nl; ++a)
        if (mate_l[a] != kNone) m.add(a, mate_l[a]);
      stable.push_back(std::move(m));
      return;
    }
    self(self, i + 1);
    for (std::size_t j = 0; j < nr; ++j) {
      if (mate_r[j] != kNone || !edges.contains(i, j)) continue;
      mate_l[i] = j;
      mate_r[j] = i;
      self(self, i + 1);
      mate_l[i] = kNone;
      mate_r[j] = kNone;
    }
  };
  recurse(recurse, 0);
  return stable;
}

std::size_t max_bipartite_matching(const EdgeSet& edges) {
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  const std::size_t nl = edges.n_left(), nr = edges.n_right();
  Graph g(nl + nr);
  for (const auto& [i, j] : edges.edges()) boost::add_edge(i, nl + j, g);
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(nl + nr);
  boost::edmonds_maximum_cardinality_matching(g, &mate[0]);
  return boost::matching_size(g, &mate[0]);
}

void write_matching_csv(std::ostream& out, const Market& market, const Matching& m) {
  out << "side,agent_index,public_rank,partner_indices,proposals_made,matched_flag\n";
  for (Side s : {Side::kLeft, Side::kRight}) {
    for (std::size_t i = 0; i < market.size(s); ++i) {
      out << to_string(s) << ',' << i << ',' << market.rank_of(s, i) + 1 << ',';
      const auto& p = m.partners(s, i);
      for (std::size_t k = 0; k < p.size(); ++k) out << (k ? ";" : "") << p[k];
      out << ',' << m.proposals(s)[i] << ',' << (p.empty() ? 0 : 1) << '\n';
    }
  }
}

}  // namespace matchlab
