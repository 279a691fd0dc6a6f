#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "searchlight/errors.hpp"
#include "searchlight/space.hpp"

namespace searchlight {

/// A snapshot of effort: per-cell effort (discrete) or effort density (grid).
/// Cost equals effort, so total() is the sum of effort times cell volume.
class Allocation {
 public:
  Allocation(SearchSpace space, std::vector<double> effort)
      : space_(std::move(space)), effort_(std::move(effort)) {
    if (effort_.size() != space_.size()) {
      throw ValidationError("allocation has " + std::to_string(effort_.size()) + " entries for " +
                            std::to_string(space_.size()) + " cells");
    }
    double sum = 0.0;
    for (double e : effort_) {
      if (!(e >= 0.0) || !std::isfinite(e)) throw ValidationError("allocation effort must be finite and >= 0");
      sum += e;
    }
    total_ = sum * space_.cell_volume();
  }

  static Allocation zero(const SearchSpace& space) {
    return Allocation(space, std::vector<double>(space.size(), 0.0));
  }

  const SearchSpace& space() const noexcept { return space_; }
  std::span<const double> effort() const noexcept { return effort_; }
  double operator[](std::size_t i) const { return effort_[i]; }
  std::size_t size() const noexcept { return effort_.size(); }

  /// C[f]: total effort spent.
  double total() const noexcept { return total_; }

 private:
  SearchSpace space_;
  std::vector<double> effort_;
  double total_ = 0.0;
};

}  // namespace searchlight
