#include "matchlab/edge_set.hpp"

#include <algorithm>
#include <stdexcept>

namespace matchlab {

EdgeSet EdgeSet::complete(std::size_t n_left, std::size_t n_right) {
  EdgeSet e(n_left, n_right);
  std::fill(e.bits_.begin(), e.bits_.end(), std::uint8_t{1});
  e.count_ = n_left * n_right;
  return e;
}

std::size_t EdgeSet::degree(Side side, std::size_t agent) const {
  std::size_t d = 0;
  if (side == Side::kLeft) {
    for (std::size_t j = 0; j < n_right_; ++j) d += contains(agent, j);
  } else {
    for (std::size_t i = 0; i < n_left_; ++i) d += contains(i, agent);
  }
  return d;
}

std::vector<std::size_t> EdgeSet::degrees(Side side) const {
  std::vector<std::size_t> d(side == Side::kLeft ? n_left_ : n_right_, 0);
  for (std::size_t i = 0; i < n_left_; ++i)
    for (std::size_t j = 0; j < n_right_; ++j)
      if (contains(i, j)) ++d[side == Side::kLeft ? i : j];
  return d;
}

std::vector<std::pair<std::size_t, std::size_t>> EdgeSet::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(count_);
  for (std::size_t i = 0; i < n_left_; ++i)
    for (std::size_t j = 0; j < n_right_; ++j)
      if (contains(i, j)) out.emplace_back(i, j);
  return out;
}

bool EdgeSet::is_subset_of(const EdgeSet& other) const {
  if (n_left_ != other.n_left_ || n_right_ != other.n_right_) return false;
  for (std::size_t k = 0; k < bits_.size(); ++k)
    if (bits_[k] && !other.bits_[k]) return false;
  return true;
}

EdgeSet EdgeSet::intersect(const EdgeSet& other) const {
  if (n_left_ != other.n_left_ || n_right_ != other.n_right_)
    throw std::invalid_argument("edge sets over different markets");
  EdgeSet e(n_left_, n_right_);
  for (std::size_t k = 0; k < bits_.size(); ++k) {
    e.bits_[k] = bits_[k] & other.bits_[k];
    e.count_ += e.bits_[k];
  }
  return e;
}

}  // namespace matchlab
