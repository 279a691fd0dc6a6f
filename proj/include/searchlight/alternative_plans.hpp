#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numbers>
#include <numeric>
#include <utility>
#include <vector>

#include "searchlight/allocation.hpp"
#include "searchlight/allocator.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"

namespace searchlight {

/// Two-cell plan that splits E evenly up to `shift`, then puts (E + shift)/2 on
/// cell 1 and (E - shift)/2 on cell 2.
inline SearchPlan two_cell_offset_plan(const SearchSpace& space, const EffortSchedule& schedule, double shift) {
  if (space.is_grid() || space.size() != 2) throw ValidationError("two_cell_offset plan needs a 2-cell discrete space");
  if (!(shift >= 0.0) || !std::isfinite(shift)) throw ValidationError("two_cell_offset shift must be >= 0");
  SearchPlan::Parametric p;
  p.family = "two_cell_offset";
  p.parameters["shift"] = shift;
  auto first = [schedule, shift](double t) {
    const double e = schedule(t);
    return e <= shift ? 0.5 * e : 0.5 * (e + shift);
  };
  p.generate = [space, schedule, first](double t) {
    const double e = schedule(t);
    const double a = first(t);
    return Allocation(space, {a, std::max(0.0, e - a)});
  };
  p.point = [schedule, first](double t, std::size_t cell) {
    const double a = first(t);
    return cell == 0 ? a : std::max(0.0, schedule(t) - a);
  };
  return SearchPlan::parametric(space, std::move(p), schedule);
}

/// Plan that stays feasible while starving the centre: density
/// min(e^{-t}, E/area) on the disc r <= R(t), R^2 = 2 sigma^2 H sqrt(t),
/// H = sqrt(rate / (pi sigma^2)), then density 1 on the cells just outside it,
/// nearest first, until the budget E(t) is spent. Budget left when every ring
/// cell is full is spread evenly over the ring.
inline SearchPlan counterexample_ring_plan(const SearchSpace& space, const EffortSchedule& schedule, double sigma) {
  if (!space.is_grid() || space.dimension() != 2) throw ValidationError("counterexample_ring plan needs a 2-D grid");
  if (!(sigma > 0.0)) throw ValidationError("counterexample_ring sigma must be positive");
  if (!(schedule.rate() > 0.0)) throw ValidationError("counterexample_ring needs a schedule with positive rate");
  const double h_coef = std::sqrt(schedule.rate() / (std::numbers::pi * sigma * sigma));
  auto order = std::make_shared<std::vector<std::size_t>>(space.size());
  auto radius2 = std::make_shared<std::vector<double>>(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const Point c = space.center(i);
    (*radius2)[i] = c[0] * c[0] + c[1] * c[1];
  }
  std::iota(order->begin(), order->end(), std::size_t{0});
  std::stable_sort(order->begin(), order->end(),
                   [&](std::size_t a, std::size_t b) { return (*radius2)[a] < (*radius2)[b]; });
  const double vol = space.cell_volume();
  SearchPlan::Parametric p;
  p.family = "counterexample_ring";
  p.parameters["sigma"] = sigma;
  p.generate = [=](double t) {
    std::vector<double> e(space.size(), 0.0);
    double budget = schedule(t);
    if (budget <= 0.0) return Allocation(space, std::move(e));
    const double r2 = 2.0 * sigma * sigma * h_coef * std::sqrt(t);
    std::size_t inner = 0;
    while (inner < order->size() && (*radius2)[(*order)[inner]] <= r2) ++inner;
    const double inner_area = static_cast<double>(inner) * vol;
    const double inner_density = inner == 0 ? 0.0 : std::min(std::exp(-t), budget / inner_area);
    for (std::size_t k = 0; k < inner; ++k) e[(*order)[k]] = inner_density;
    budget -= inner_density * inner_area;
    std::size_t k = inner;
    for (; k < order->size() && budget > 0.0; ++k) {
      const double take = std::min(1.0, budget / vol);
      e[(*order)[k]] = take;
      budget -= take * vol;
    }
    if (budget > 0.0 && order->size() > inner) {
      const double extra = budget / (static_cast<double>(order->size() - inner) * vol);
      for (std::size_t j = inner; j < order->size(); ++j) e[(*order)[j]] += extra;
    }
    return Allocation(space, std::move(e));
  };
  return SearchPlan::parametric(space, std::move(p), schedule);
}

}  // namespace searchlight
