#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "searchlight/config.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"
#include "searchlight/space.hpp"

namespace searchlight {

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
  std::vector<std::string> notes;

  void fail(std::string message) {
    ok = false;
    violations.push_back(std::move(message));
  }
};

namespace detail {

/// Up to `count` cells spread evenly over the enumeration order.
inline std::vector<std::size_t> sample_cells(const SearchSpace& space, std::size_t count = 16) {
  std::vector<std::size_t> cells;
  const std::size_t n = space.size();
  const std::size_t k = std::min(n, count);
  for (std::size_t i = 0; i < k; ++i) cells.push_back(k == 1 ? 0 : i * (n - 1) / (k - 1));
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  return cells;
}

inline void check_detection(const SearchSpace& space, const DetectionModel& det, const Tolerances& tol,
                            ValidationReport& report) {
  constexpr std::array<double, 7> efforts{0.0, 0.05, 0.25, 0.5, 1.0, 2.0, 5.0};
  for (std::size_t cell : sample_cells(space)) {
    const Site x = space.site(cell);
    const auto where = [&](double y) {
      std::ostringstream s;
      s << " at cell " << cell << ", y=" << y;
      return s.str();
    };
    if (det.value(x, 0.0) != 0.0) report.fail("detection d(x, 0) ≠ 0" + where(0.0));
    double prev_value = -1.0;
    double prev_deriv = std::numeric_limits<double>::infinity();
    for (double y : efforts) {
      const double v = det.value(x, y);
      const double g = det.deriv(x, y);
      if (!(v >= 0.0 && v <= 1.0)) report.fail("detection value outside [0, 1]" + where(y));
      if (v < prev_value) report.fail("detection value decreases in effort" + where(y));
      if (!(g > 0.0)) report.fail("detection derivative not positive" + where(y));
      if (!(g < prev_deriv)) report.fail("detection derivative not strictly decreasing" + where(y));
      if (g > 0.0) {
        const double back = det.deriv_inverse(x, g);
        if (std::abs(back - y) > tol.inverse_identity * std::max(1.0, y)) {
          report.fail("derivative inverse does not undo the derivative" + where(y));
        }
      }
      if (det.is_exponential() && y > 0.0) {
        // Differencing the miss probability avoids cancellation near d = 1.
        const double step = 1e-4 * std::min(1.0, y);
        const double fd = (det.miss(x, y - step) - det.miss(x, y + step)) / (2.0 * step);
        if (std::abs(fd - g) > 1e-6 * g) report.fail("detection derivative disagrees with finite difference" + where(y));
      }
      prev_value = v;
      prev_deriv = g;
    }
  }
}

inline void check_schedule(const EffortSchedule& schedule, ValidationReport& report) {
  if (!(schedule(0.0) >= 0.0)) report.fail("effort schedule E(0) < 0");
  double prev = schedule(0.0);
  for (double t : {1e-6, 1e-3, 0.1, 1.0, 10.0, 100.0, 1000.0}) {
    const double e = schedule(t);
    if (!(e > 0.0)) report.fail("effort schedule is not positive at t=" + std::to_string(t));
    if (e < prev) report.fail("effort schedule decreases before t=" + std::to_string(t));
    prev = e;
  }
  if (schedule.kind() == EffortSchedule::Kind::table) {
    for (const auto& [t, e] : schedule.points()) {
      if (e < 0.0) report.fail("effort table has a negative value at t=" + std::to_string(t));
    }
  }
}

}  // namespace detail

/// Checks the invariants of a scenario's parts without throwing. Detection
/// and schedule properties are spot-checked on sampled cells and efforts.
inline ValidationReport validate(const SearchSpace& space, const Prior& prior, const DetectionModel& det,
                                 const EffortSchedule& schedule, const Tolerances& tol = {}) {
  ValidationReport report;
  try {
    const auto target = TargetDistribution::discretize(prior, space, tol);
    if (target.renormalized()) {
      std::ostringstream note;
      note.precision(12);
      note << "prior renormalized on the grid: quadrature mass " << target.raw_mass() << ", truncated mass "
           << target.truncated_mass();
      report.notes.push_back(note.str());
    }
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) report.fail(v);
  }
  try {
    detail::check_detection(space, det, tol, report);
  } catch (const Error& e) {
    report.fail(std::string("detection check failed: ") + e.what());
  }
  try {
    detail::check_schedule(schedule, report);
  } catch (const Error& e) {
    report.fail(std::string("schedule check failed: ") + e.what());
  }
  return report;
}

}  // namespace searchlight
