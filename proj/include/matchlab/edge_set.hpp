#ifndef MATCHLAB_EDGE_SET_HPP_
#define MATCHLAB_EDGE_SET_HPP_

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "matchlab/market.hpp"

namespace matchlab {

// Subset of the complete bipartite graph between the two sides, stored as a
// dense bitmap indexed (left, right).
class EdgeSet {
 public:
  EdgeSet() = default;
  EdgeSet(std::size_t n_left, std::size_t n_right)
      : n_left_(n_left), n_right_(n_right), bits_(n_left * n_right, 0) {}

  static EdgeSet complete(std::size_t n_left, std::size_t n_right);
  static EdgeSet complete(const Market& m) {
    return complete(m.size(Side::kLeft), m.size(Side::kRight));
  }
  static EdgeSet empty(const Market& m) {
    return EdgeSet(m.size(Side::kLeft), m.size(Side::kRight));
  }

  std::size_t n_left() const { return n_left_; }
  std::size_t n_right() const { return n_right_; }
  std::size_t size() const { return count_; }

  bool contains(std::size_t i, std::size_t j) const { return bits_[i * n_right_ + j] != 0; }
  /// Membership with the endpoints given from `side`'s point of view.
  bool contains(Side side, std::size_t agent, std::size_t partner) const {
    return side == Side::kLeft ? contains(agent, partner) : contains(partner, agent);
  }
  void insert(std::size_t i, std::size_t j) {
    auto& b = bits_[i * n_right_ + j];
    count_ += b == 0;
    b = 1;
  }
  void erase(std::size_t i, std::size_t j) {
    auto& b = bits_[i * n_right_ + j];
    count_ -= b != 0;
    b = 0;
  }

  std::size_t degree(Side side, std::size_t agent) const;
  std::vector<std::size_t> degrees(Side side) const;
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  bool is_subset_of(const EdgeSet& other) const;
  EdgeSet intersect(const EdgeSet& other) const;

  bool operator==(const EdgeSet& o) const {
    return n_left_ == o.n_left_ && n_right_ == o.n_right_ && bits_ == o.bits_;
  }

 private:
  std::size_t n_left_ = 0;
  std::size_t n_right_ = 0;
  std::size_t count_ = 0;
  std::vector<std::uint8_t> bits_;
};

}  // namespace matchlab

#endif  // MATCHLAB_EDGE_SET_HPP_
