#ifndef MATCHLAB_MATCHING_HPP_
#define MATCHLAB_MATCHING_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include "matchlab/edge_set.hpp"
#include "matchlab/market.hpp"

namespace matchlab {

// Capacitated assignment. An agent with no partners is unmatched.
struct Matching {
  std::vector<std::vector<std::size_t>> partners_left;
  std::vector<std::vector<std::size_t>> partners_right;
  // Proposals issued by each agent during the run that built the matching;
  // zero on the receiving side.
  std::vector<std::size_t> proposals_left;
  std::vector<std::size_t> proposals_right;

  Matching() = default;
  Matching(std::size_t n_left, std::size_t n_right)
      : partners_left(n_left), partners_right(n_right),
        proposals_left(n_left, 0), proposals_right(n_right, 0) {}

  std::size_t size(Side s) const {
    return s == Side::kLeft ? partners_left.size() : partners_right.size();
  }
  const std::vector<std::size_t>& partners(Side s, std::size_t i) const {
    return s == Side::kLeft ? partners_left[i] : partners_right[i];
  }
  const std::vector<std::size_t>& proposals(Side s) const {
    return s == Side::kLeft ? proposals_left : proposals_right;
  }
  bool is_matched(Side s, std::size_t i) const { return !partners(s, i).empty(); }
  bool contains(std::size_t i, std::size_t j) const;
  void add(std::size_t i, std::size_t j);

  std::vector<std::size_t> unmatched(Side s) const;
  std::size_t pair_count() const;
  std::vector<std::pair<std::size_t, std::size_t>> pairs() const;

  // Compares assignments only; proposal counters are ignored.
  bool same_assignment(const Matching& o) const;
};

/// Preference test with the library-wide tie rule: higher utility wins, equal
/// utilities go to the lower index.
inline bool prefers(double u_a, std::size_t a, double u_b, std::size_t b) {
  return u_a > u_b || (u_a == u_b && a < b);
}

/// Each agent's allowed partners on `side`, best first.
std::vector<std::vector<std::uint32_t>> preference_lists(const Market& market, Side side,
                                                         const EdgeSet& edges);

struct DaOptions {
  // Process free proposers in a random order drawn from this seed instead of
  // the default stack order. The result must not depend on it.
  std::optional<std::uint64_t> shuffle_seed;
};

/// Proposer-optimal stable matching of the sub-market induced by `edges`.
Matching run_da(const Market& market, Side proposing, const EdgeSet& edges,
                const DaOptions& options = {});

struct CutSpec {
  std::optional<std::size_t> target;  // receiver index
  std::optional<double> rating_floor;
};

/// Edge set left after every proposer stops at the target (inclusive) or at
/// the first edge worth less than value(floor, 1), whichever comes first.
EdgeSet double_cut_edges(const Market& market, Side proposing, const CutSpec& cut);
Matching run_double_cut_da(const Market& market, Side proposing, const CutSpec& cut);

/// (left-optimal, right-optimal) stable matchings.
std::pair<Matching, Matching> extreme_matchings(const Market& market, const EdgeSet& edges);

struct AgentSets {
  std::vector<std::size_t> left;
  std::vector<std::size_t> right;
};

/// Agents whose partner sets differ between the two extreme matchings.
AgentSets multi_stable_agents(const Market& market, const EdgeSet& edges);
AgentSets multi_stable_agents(const Matching& left_optimal, const Matching& right_optimal);

/// Every edge of `edges` that blocks `matching`, as (left, right) pairs.
std::vector<std::pair<std::size_t, std::size_t>> verify_stability(const Market& market,
                                                                  const EdgeSet& edges,
                                                                  const Matching& matching);

/// All stable matchings of a one-to-one market with at most 8 agents a side.
std::vector<Matching> brute_force_stable_set(const Market& market, const EdgeSet& edges);

/// Size of a maximum-cardinality matching of the bipartite graph `edges`.
std::size_t max_bipartite_matching(const EdgeSet& edges);

/// Utility `side`'s agent i draws from its worst partner, or nullopt when it
/// has a free slot.
std::optional<double> worst_partner_utility(const Market& market, const Matching& m, Side side,
                                            std::size_t i);

// CSV with columns side,agent_index,public_rank,partner_indices,proposals_made,matched_flag
void write_matching_csv(std::ostream& out, const Market& market, const Matching& m);

}  // namespace matchlab

#endif  // MATCHLAB_MATCHING_HPP_
