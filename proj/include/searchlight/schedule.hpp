#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "searchlight/errors.hpp"

namespace searchlight {

/// Cumulative effort E(t) available by time t.
class EffortSchedule {
 public:
  enum class Kind { linear, affine, table };

  static EffortSchedule linear(double rate) { return affine_impl(Kind::linear, 0.0, rate); }

  static EffortSchedule affine(double offset, double rate) {
    if (!(offset >= 0.0)) throw ValidationError("effort offset must be non-negative");
    return affine_impl(Kind::affine, offset, rate);
  }

  /// Piecewise-linear through (t, E) samples; the first sample must be at
  /// t = 0. Beyond the last sample the final segment's slope is continued.
  static EffortSchedule table(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw ValidationError("effort table needs at least two points");
    if (points.front().first != 0.0) throw ValidationError("effort table must start at t = 0");
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (!(points[i].second >= 0.0)) throw ValidationError("effort table values must be non-negative");
      if (i > 0) {
        if (!(points[i].first > points[i - 1].first)) throw ValidationError("effort table times must increase");
        if (points[i].second < points[i - 1].second) throw ValidationError("effort table must be nondecreasing");
      }
    }
    if (!(points[0].second > 0.0 || points[1].second > 0.0)) {
      throw ValidationError("effort must be positive for t > 0");
    }
    EffortSchedule s;
    s.kind_ = Kind::table;
    s.points_ = std::move(points);
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  double offset() const noexcept { return offset_; }
  double rate() const noexcept { return rate_; }
  const std::vector<std::pair<double, double>>& points() const noexcept { return points_; }

  double operator()(double t) const {
    if (t < 0.0) throw ValidationError("effort schedule is defined for t >= 0");
    if (kind_ != Kind::table) return offset_ + rate_ * t;
    auto it = std::upper_bound(points_.begin(), points_.end(), t,
                               [](double v, const auto& p) { return v < p.first; });
    std::size_t hi = static_cast<std::size_t>(it - points_.begin());
    if (hi >= points_.size()) hi = points_.size() - 1;
    const auto& a = points_[hi - 1];
    const auto& b = points_[hi];
    const double w = (t - a.first) / (b.first - a.first);
    return std::max(a.second, a.second + w * (b.second - a.second));
  }

  std::string describe() const {
    std::ostringstream out;
    switch (kind_) {
      case Kind::linear: out << "linear(rate=" << rate_ << ")"; break;
      case Kind::affine: out << "affine(offset=" << offset_ << ", rate=" << rate_ << ")"; break;
      case Kind::table: out << "table(" << points_.size() << " points)"; break;
    }
    return out.str();
  }

  friend bool operator==(const EffortSchedule&, const EffortSchedule&) = default;

 private:
  static EffortSchedule affine_impl(Kind kind, double offset, double rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("effort rate must be positive");
    EffortSchedule s;
    s.kind_ = kind;
    s.offset_ = offset;
    s.rate_ = rate;
    return s;
  }

  Kind kind_ = Kind::linear;
  double offset_ = 0.0;
  double rate_ = 1.0;
  std::vector<std::pair<double, double>> points_;
};

}  // namespace searchlight
