#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>

#include "searchlight/errors.hpp"

namespace searchlight {

using Point = std::array<double, 2>;

/// One cell of a search space. For discrete spaces `coord[0]` holds the
/// 1-based cell label; for grids it holds the cell centre.
struct Site {
  std::size_t index = 0;
  Point coord{0.0, 0.0};
};

/// The possibility area: either m labelled cells or a uniform 1-D/2-D grid.
///
/// Grid cells are enumerated row-major with the first axis varying fastest:
/// index = iy * nx + ix. Every iteration in the library follows this order,
/// so summations (and therefore CSV output) are reproducible bit for bit.
class SearchSpace {
 public:
  enum class Kind { discrete, grid };

  static SearchSpace discrete(std::size_t cells) {
    if (cells == 0) throw ValidationError("discrete space needs at least one cell");
    SearchSpace s;
    s.kind_ = Kind::discrete;
    s.counts_ = {cells, 1};
    return s;
  }

  static SearchSpace grid_1d(double lower, double upper, double resolution) {
    return make_grid(1, {lower, 0.0}, {upper, 0.0}, resolution);
  }

  static SearchSpace grid_2d(Point lower, Point upper, double resolution) {
    return make_grid(2, lower, upper, resolution);
  }

  /// Square grid [-e, e]^2 with an odd cell count per axis, so the origin is a
  /// cell centre; e is the smallest multiple of h/2 covering half_extent.
  static SearchSpace centered_grid_2d(double half_extent, double resolution) {
    if (!(half_extent > 0.0) || !(resolution > 0.0)) {
      throw ValidationError("centred grid needs positive extent and resolution");
    }
    const double half_cells = std::ceil(half_extent / resolution - 0.5 - 1e-9);
    const double e = (half_cells + 0.5) * resolution;
    return make_grid(2, {-e, -e}, {e, e}, resolution);
  }

  Kind kind() const noexcept { return kind_; }
  bool is_grid() const noexcept { return kind_ == Kind::grid; }
  int dimension() const noexcept { return dimension_; }
  std::size_t size() const noexcept { return counts_[0] * counts_[1]; }
  std::size_t count(int axis) const { return counts_.at(static_cast<std::size_t>(axis)); }
  double resolution() const noexcept { return resolution_; }
  Point lower() const noexcept { return lower_; }
  Point upper() const noexcept { return upper_; }

  /// Area (2-D), length (1-D) or 1 (discrete) of one cell.
  double cell_volume() const noexcept {
    if (!is_grid()) return 1.0;
    return dimension_ == 1 ? resolution_ : resolution_ * resolution_;
  }

  Point center(std::size_t index) const {
    if (!is_grid()) return {static_cast<double>(index + 1), 0.0};
    const std::size_t ix = index % counts_[0];
    const std::size_t iy = index / counts_[0];
    Point p{lower_[0] + (static_cast<double>(ix) + 0.5) * resolution_, 0.0};
    if (dimension_ == 2) p[1] = lower_[1] + (static_cast<double>(iy) + 0.5) * resolution_;
    return p;
  }

  Site site(std::size_t index) const { return Site{index, center(index)}; }

  /// Cell containing p. Points on an interior cell edge belong to the upper
  /// cell; the outer upper boundary belongs to the last cell.
  std::optional<std::size_t> locate(Point p) const {
    if (!is_grid()) return std::nullopt;
    std::size_t idx[2] = {0, 0};
    for (int a = 0; a < dimension_; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      if (!(p[ua] >= lower_[ua] && p[ua] <= upper_[ua])) return std::nullopt;
      auto i = static_cast<std::size_t>(std::floor((p[ua] - lower_[ua]) / resolution_));
      if (i >= counts_[ua]) i = counts_[ua] - 1;
      idx[a] = i;
    }
    return idx[1] * counts_[0] + idx[0];
  }

  /// Cell with the given 1-based label (discrete spaces only).
  std::optional<std::size_t> cell(std::size_t label) const {
    if (is_grid() || label == 0 || label > size()) return std::nullopt;
    return label - 1;
  }

  std::string describe() const {
    if (!is_grid()) return "discrete(" + std::to_string(size()) + ")";
    std::string s = "grid" + std::to_string(dimension_) + "d(" + std::to_string(counts_[0]);
    if (dimension_ == 2) s += "x" + std::to_string(counts_[1]);
    return s + ")";
  }

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;

 private:
  static SearchSpace make_grid(int dimension, Point lower, Point upper, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("grid resolution must be positive");
    SearchSpace s;
    s.kind_ = Kind::grid;
    s.dimension_ = dimension;
    s.resolution_ = h;
    s.lower_ = lower;
    s.upper_ = upper;
    for (int a = 0; a < dimension; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      const double span = upper[ua] - lower[ua];
      if (!(span > 0.0) || !std::isfinite(span)) {
        throw ValidationError("grid bounds must be strictly ordered on every axis");
      }
      const double cells = std::round(span / h);
      if (cells < 1.0 || std::abs(cells * h - span) > 1e-9 * span) {
        throw ValidationError("grid resolution must tile the bounds exactly");
      }
      if (cells > 1e8) throw ValidationError("grid has too many cells");
      s.counts_[ua] = static_cast<std::size_t>(cells);
    }
    return s;
  }

  Kind kind_ = Kind::discrete;
  int dimension_ = 0;
  std::array<std::size_t, 2> counts_{1, 1};
  double resolution_ = 0.0;
  Point lower_{0.0, 0.0};
  Point upper_{0.0, 0.0};
};

/// The actual target location x0.
class GroundTruth {
 public:
  /// Discrete truth, given by its 1-based cell label.
  static GroundTruth cell(const SearchSpace& space, std::size_t label) {
    const auto idx = space.cell(label);
    if (!idx) throw ValidationError("true cell " + std::to_string(label) + " is outside the space");
    return GroundTruth(*idx, space.center(*idx));
  }

  static GroundTruth point(const SearchSpace& space, Point p) {
    const auto idx = space.locate(p);
    if (!idx) throw ValidationError("true location lies outside the search space");
    return GroundTruth(*idx, p);
  }

  std::size_t index() const noexcept { return index_; }
  Point location() const noexcept { return location_; }

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;

 private:
  GroundTruth(std::size_t index, Point location) : index_(index), location_(location) {}

  std::size_t index_;
  Point location_;
};

}  // namespace searchlight
