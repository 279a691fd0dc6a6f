#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "searchlight/allocator.hpp"
#include "searchlight/config.hpp"
#include "searchlight/evaluator.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"

namespace searchlight {

namespace detail {

inline void check_weights(std::span<const double> weights, std::size_t expected, double tol) {
  if (weights.size() != expected || expected == 0) throw ValidationError("need exactly one weight per component");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > tol) {
    std::ostringstream msg;
    msg << "weights sum to " << sum << " ≠ 1";
    throw ValidationError(msg.str());
  }
}

}  // namespace detail

/// Composite target distribution sum_i w_i pi_i. A weight of exactly 1 returns
/// that component unchanged.
inline Prior mixture_prior(std::vector<Prior> components, std::vector<double> weights,
                           const Tolerances& tol = {}) {
  detail::check_weights(weights, components.size(), tol.mixture_weights);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 1.0) return components[i];
  }
  return Prior(Mixture{std::move(components), std::move(weights)});
}

/// Single Gaussian with the mixture's second moment: sigma^2 = sum_i w_i sigma_i^2.
/// Not the mixture itself, which is not Gaussian.
inline Gaussian2D moment_matched_gaussian(std::span<const Prior> components, std::span<const double> weights,
                                          const Tolerances& tol = {}) {
  detail::check_weights(weights, components.size(), tol.mixture_weights);
  double var = 0.0;
  for (std::size_t i = 0; i < components.size(); ++i) {
    const auto* g = components[i].get_if<Gaussian2D>();
    if (!g) throw ValidationError("moment matching needs zero-mean circular Gaussian components");
    var += weights[i] * g->sigma * g->sigma;
  }
  return Gaussian2D{std::sqrt(var)};
}

/// phi_c = sum_i w_i phi_i. Parametric inputs give a parametric plan; any
/// sampled input puts the result on the union of the sample grids, with each
/// plan linearly interpolated there.
inline SearchPlan composite_plan(std::vector<SearchPlan> plans, std::vector<double> weights,
                                 const Tolerances& tol = {}) {
  detail::check_weights(weights, plans.size(), tol.mixture_weights);
  const SearchSpace space = plans.front().space();
  const auto schedule = plans.front().schedule();
  for (const auto& p : plans) {
    if (!(p.space() == space)) throw ValidationError("composite plan components use different spaces");
    if (p.schedule() != schedule) throw ValidationError("composite plan components follow different schedules");
  }
  const bool any_sampled = std::any_of(plans.begin(), plans.end(), [](const auto& p) { return p.is_sampled(); });
  if (!any_sampled) {
    auto shared = std::make_shared<const std::pair<std::vector<SearchPlan>, std::vector<double>>>(plans, weights);
    SearchPlan::Parametric body;
    body.family = "composite";
    for (std::size_t i = 0; i < weights.size(); ++i) body.parameters["w" + std::to_string(i + 1)] = weights[i];
    body.generate = [shared, space](double t) {
      std::vector<double> mixed(space.size(), 0.0);
      for (std::size_t k = 0; k < shared->first.size(); ++k) {
        const Allocation a = shared->first[k].at(t);
        const double w = shared->second[k];
        for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += w * a[i];
      }
      return Allocation(space, std::move(mixed));
    };
    body.point = [shared](double t, std::size_t cell) {
      double v = 0.0;
      for (std::size_t k = 0; k < shared->first.size(); ++k) {
        v += shared->second[k] * shared->first[k].effort_at(t, cell);
      }
      return v;
    };
    return SearchPlan::parametric(space, std::move(body), schedule);
  }
  double start = -std::numeric_limits<double>::infinity();
  double end = std::numeric_limits<double>::infinity();
  std::vector<double> grid;
  for (const auto& p : plans) {
    if (const auto* s = p.samples()) {
      start = std::max(start, s->t_grid.front());
      end = std::min(end, s->t_grid.back());
      grid.insert(grid.end(), s->t_grid.begin(), s->t_grid.end());
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::erase_if(grid, [&](double t) { return t < start || t > end; });
  if (grid.empty()) throw ValidationError("composite plan components share no sampled time range");
  std::vector<Allocation> allocations;
  allocations.reserve(grid.size());
  for (double t : grid) {
    std::vector<double> mixed(space.size(), 0.0);
    for (std::size_t k = 0; k < plans.size(); ++k) {
      const Allocation a = plans[k].at(t);
      for (std::size_t i = 0; i < mixed.size(); ++i) mixed[i] += weights[k] * a[i];
    }
    allocations.emplace_back(space, std::move(mixed));
  }
  return SearchPlan::sampled(std::move(grid), std::move(allocations), schedule);
}

enum class CompositeMode {
  exact_mixture,   // composite prior is the true mixture
  moment_matched,  // composite prior is the moment-matched Gaussian
};

/// Two ways to search under inconsistent priors: phi* optimal for the
/// composite prior, and phi_c, the weighted combination of per-component
/// optimal plans. Subjective curves use the composite prior.
struct StrategyComparison {
  DetectionCurve optimal_subjective;
  DetectionCurve optimal_true;
  DetectionCurve composite_subjective;
  DetectionCurve composite_true;
  std::vector<double> true_difference;  // P#[phi_c] - P#[phi*]
  Prior composite_prior;
};

inline StrategyComparison compare_strategies(const std::vector<Prior>& components, const std::vector<double>& weights,
                                             const SearchSpace& space, const DetectionModel& det,
                                             const EffortSchedule& schedule, const GroundTruth& truth,
                                             std::span<const double> t_grid,
                                             CompositeMode mode = CompositeMode::exact_mixture,
                                             const Tolerances& tol = {}) {
  detail::check_weights(weights, components.size(), tol.mixture_weights);
  Prior composite = mode == CompositeMode::moment_matched
                        ? Prior(moment_matched_gaussian(components, weights, tol))
                        : mixture_prior(components, weights, tol);
  const auto composite_target = TargetDistribution::discretize(composite, space, tol);
  const SearchPlan optimal = uniformly_optimal_plan(composite_target, det, schedule, tol);
  std::vector<SearchPlan> parts;
  parts.reserve(components.size());
  for (const auto& c : components) {
    parts.push_back(uniformly_optimal_plan(TargetDistribution::discretize(c, space, tol), det, schedule, tol));
  }
  const SearchPlan combined = composite_plan(std::move(parts), weights, tol);
  auto [opt_subj, opt_true] = detection_curves(optimal, composite_target, truth, det, t_grid);
  auto [comp_subj, comp_true] = detection_curves(combined, composite_target, truth, det, t_grid);
  std::vector<double> diff(t_grid.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = comp_true.values[k] - opt_true.values[k];
  return StrategyComparison{std::move(opt_subj), std::move(opt_true), std::move(comp_subj),
                            std::move(comp_true), std::move(diff), std::move(composite)};
}

}  // namespace searchlight
