#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "searchlight/allocation.hpp"
#include "searchlight/config.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"

namespace searchlight {

/// Result of one water-filling solve for budget K.
struct LagrangeSolution {
  double lambda_star = 0.0;
  Allocation allocation;
  double kkt_spread = 0.0;       // max over funded cells of |q_x(phi(x)) - lambda*|
  double kkt_violation = 0.0;    // max over unfunded cells of q_x(0) - lambda*, floored at 0
  double budget_residual = 0.0;  // C[phi] - K
  int iterations = 0;
};

/// Which algebraic route evaluates q_x^{-1} and Q.
enum class SolveRoute {
  automatic,  // sorted prefix sums for exponential detection, generic otherwise
  generic,    // per-cell inverse of the detection derivative
};

/// q_x(y) = pi(x) * dd/dy(x, y).
inline double marginal_rate(const TargetDistribution& target, const DetectionModel& det, std::size_t cell,
                            double y) {
  if (!(y >= 0.0)) throw ValidationError("marginal rate needs effort y >= 0");
  if (cell >= target.size()) throw ValidationError("cell index outside the search space");
  const double pi = target.density(cell);
  if (pi == 0.0) return 0.0;
  return pi * det.deriv(target.space().site(cell), y);
}

/// q_x^{-1}(lambda), clamped to 0 when lambda > q_x(0).
inline double marginal_rate_inverse(const TargetDistribution& target, const DetectionModel& det,
                                    std::size_t cell, double lambda) {
  if (!(lambda > 0.0)) throw ValidationError("marginal rate inverse needs lambda > 0");
  if (cell >= target.size()) throw ValidationError("cell index outside the search space");
  const double pi = target.density(cell);
  if (pi == 0.0) return 0.0;
  const Site site = target.space().site(cell);
  if (lambda >= pi * det.deriv(site, 0.0)) return 0.0;
  return det.deriv_inverse(site, lambda / pi);
}

/// Equalises q_x(phi(x)) across funded cells for a given budget.
///
/// Q(lambda) is strictly decreasing on (0, max_x q_x(0)), so the multiplier
/// is found by bisection on log(lambda), with the lower end of the bracket
/// found by doubling the step down from log(max_x q_x(0)).
///
/// With exponential detection, q_x^{-1}(lambda) = max(0, (k_x - log lambda) / alpha_x)
/// where k_x = log(pi(x) alpha(x)). Sorting cells by k_x once makes
/// Q(lambda) = A_j (k_max - log lambda) + B_j for prefix sums A, B over the
/// j funded cells, so each bisection step costs O(log m).
class WaterFiller {
 public:
  WaterFiller(TargetDistribution target, DetectionModel det, SolveRoute route = SolveRoute::automatic,
              Tolerances tol = {})
      : target_(std::move(target)), det_(std::move(det)), tol_(tol) {
    fast_ = route == SolveRoute::automatic && det_.is_exponential();
    const std::size_t m = target_.size();
    const SearchSpace& space = target_.space();
    log_q0_.assign(m, -std::numeric_limits<double>::infinity());
    log_density_.assign(m, -std::numeric_limits<double>::infinity());
    if (fast_) inv_rate_.assign(m, 0.0);
    bool any = false;
    for (std::size_t i = 0; i < m; ++i) {
      const double pi = target_.density(i);
      if (!(pi > 0.0)) continue;
      any = true;
      const Site site = space.site(i);
      log_density_[i] = std::log(pi);
      const double d0 = det_.deriv(site, 0.0);
      if (!(d0 > 0.0) || !std::isfinite(d0)) throw ValidationError("detection derivative at zero effort must be positive");
      log_q0_[i] = log_density_[i] + std::log(d0);
      if (fast_) inv_rate_[i] = 1.0 / det_.rate(site);
    }
    if (!any) throw ValidationError("prior is degenerate: no cell carries probability");
    log_q0_max_ = *std::max_element(log_q0_.begin(), log_q0_.end());
    if (fast_) build_table();
  }

  const TargetDistribution& target() const noexcept { return target_; }
  const DetectionModel& detection() const noexcept { return det_; }
  bool uses_fast_path() const noexcept { return fast_; }

  /// max_x q_x(0); Q vanishes at and above this level.
  double max_marginal_rate() const { return std::exp(log_q0_max_); }

  /// Q(lambda) = total effort spent when every cell is filled to level lambda.
  double aggregate(double lambda) const {
    if (!(lambda > 0.0)) throw ValidationError("aggregate allocation needs lambda > 0");
    return aggregate_log(std::log(lambda));
  }

  double aggregate_log(double log_lambda) const {
    if (fast_) {
      const std::size_t j = funded_count(log_lambda);
      if (j == 0) return 0.0;
      return std::max(0.0, prefix_weight_[j] * (log_q0_max_ - log_lambda) + prefix_key_[j]);
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < log_q0_.size(); ++i) sum += effort(i, log_lambda);
    return sum * target_.space().cell_volume();
  }

  /// q_x^{-1}(exp(log_lambda)).
  double effort(std::size_t cell, double log_lambda) const {
    if (!(log_lambda < log_q0_[cell])) return 0.0;
    if (fast_) return (log_q0_[cell] - log_lambda) * inv_rate_[cell];
    const double slope = std::exp(log_lambda - log_density_[cell]);
    return det_.deriv_inverse(target_.space().site(cell), slope);
  }

  std::vector<double> efforts(double log_lambda) const {
    std::vector<double> out(log_q0_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = effort(i, log_lambda);
    return out;
  }

  struct Multiplier {
    double log_lambda;
    int iterations;
  };

  /// log(lambda*) with Q(lambda*) = budget. Budget 0 gives log(max_x q_x(0)).
  Multiplier solve_multiplier(double budget) const {
    if (!(budget >= 0.0) || !std::isfinite(budget)) throw ValidationError("budget must be finite and >= 0");
    if (budget == 0.0) return {log_q0_max_, 0};
    double hi = log_q0_max_;
    double step = 1.0;
    double lo = hi - step;
    while (aggregate_log(lo) < budget) {
      step *= 2.0;
      lo = hi - step;
      if (step > 1e7) throw ConvergenceError(diagnose("no bracket for budget", budget, lo, hi, 0));
    }
    int it = 0;
    double best = lo;
    double best_gap = std::abs(aggregate_log(lo) - budget);
    while (it < tol_.max_bisection) {
      ++it;
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double q = aggregate_log(mid);
      const double gap = std::abs(q - budget);
      if (gap < best_gap) {
        best = mid;
        best_gap = gap;
      }
      if (gap <= tol_.lambda_solve * budget) return {mid, it};
      if (q > budget) lo = mid;
      else hi = mid;
    }
    if (best_gap <= tol_.budget * std::max(1.0, budget)) return {best, it};
    throw ConvergenceError(diagnose("bisection did not converge", budget, lo, hi, it));
  }

  LagrangeSolution solve(double budget) const {
    const Multiplier mult = solve_multiplier(budget);
    Allocation alloc(target_.space(), efforts(mult.log_lambda));
    const double lambda = std::exp(mult.log_lambda);
    LagrangeSolution sol{lambda, alloc, 0.0, 0.0, alloc.total() - budget, mult.iterations};
    const SearchSpace& space = target_.space();
    for (std::size_t i = 0; i < alloc.size(); ++i) {
      if (!std::isfinite(log_q0_[i])) continue;
      if (alloc[i] > 0.0) {
        const double q = target_.density(i) * det_.deriv(space.site(i), alloc[i]);
        sol.kkt_spread = std::max(sol.kkt_spread, std::abs(q - lambda));
      } else {
        sol.kkt_violation = std::max(sol.kkt_violation, std::exp(log_q0_[i]) - lambda);
      }
    }
    return sol;
  }

 private:
  std::size_t funded_count(double log_lambda) const {
    auto it = std::partition_point(sorted_keys_.begin(), sorted_keys_.end(),
                                   [&](double k) { return k > log_lambda; });
    return static_cast<std::size_t>(it - sorted_keys_.begin());
  }

  void build_table() {
    std::vector<std::size_t> order;
    order.reserve(log_q0_.size());
    for (std::size_t i = 0; i < log_q0_.size(); ++i) {
      if (std::isfinite(log_q0_[i])) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return log_q0_[a] > log_q0_[b]; });
    const double vol = target_.space().cell_volume();
    sorted_keys_.resize(order.size());
    prefix_weight_.assign(order.size() + 1, 0.0);
    prefix_key_.assign(order.size() + 1, 0.0);
    for (std::size_t j = 0; j < order.size(); ++j) {
      const std::size_t i = order[j];
      const double w = vol * inv_rate_[i];
      sorted_keys_[j] = log_q0_[i];
      prefix_weight_[j + 1] = prefix_weight_[j] + w;
      prefix_key_[j + 1] = prefix_key_[j] + w * (log_q0_[i] - log_q0_max_);
    }
  }

  std::string diagnose(const char* what, double budget, double lo, double hi, int it) const {
    std::ostringstream out;
    out.precision(17);
    out << what << ": K=" << budget << " bracket log(lambda) in [" << lo << ", " << hi << "] Q=["
        << aggregate_log(lo) << ", " << aggregate_log(hi) << "] after " << it << " iterations";
    return out.str();
  }

  TargetDistribution target_;
  DetectionModel det_;
  Tolerances tol_;
  bool fast_ = false;
  std::vector<double> log_q0_;
  std::vector<double> log_density_;
  std::vector<double> inv_rate_;
  double log_q0_max_ = 0.0;
  std::vector<double> sorted_keys_;
  std::vector<double> prefix_weight_;
  std::vector<double> prefix_key_;
};

/// Q(lambda), summed (discrete) or integrated by midpoint rule (grid).
inline double aggregate_allocation(const TargetDistribution& target, const DetectionModel& det, double lambda,
                                   SolveRoute route = SolveRoute::automatic) {
  return WaterFiller(target, det, route).aggregate(lambda);
}

inline LagrangeSolution solve_lambda(const TargetDistribution& target, const DetectionModel& det, double budget,
                                     const Tolerances& tol = {}, SolveRoute route = SolveRoute::automatic) {
  return WaterFiller(target, det, route, tol).solve(budget);
}

inline Allocation optimal_allocation(const TargetDistribution& target, const DetectionModel& det, double budget,
                                     const Tolerances& tol = {}, SolveRoute route = SolveRoute::automatic) {
  return solve_lambda(target, det, budget, tol, route).allocation;
}

/// Uniformly optimal plan phi*(x, t) = q_x^{-1}(Q^{-1}(E(t))) as a callable.
inline SearchPlan uniformly_optimal_plan(const TargetDistribution& target, const DetectionModel& det,
                                         const EffortSchedule& schedule, const Tolerances& tol = {},
                                         SolveRoute route = SolveRoute::automatic) {
  auto filler = std::make_shared<const WaterFiller>(target, det, route, tol);
  SearchPlan::Parametric p;
  p.family = "optimal";
  p.generate = [filler, schedule](double t) {
    const auto mult = filler->solve_multiplier(schedule(t));
    return Allocation(filler->target().space(), filler->efforts(mult.log_lambda));
  };
  p.point = [filler, schedule](double t, std::size_t cell) {
    return filler->effort(cell, filler->solve_multiplier(schedule(t)).log_lambda);
  };
  return SearchPlan::parametric(target.space(), std::move(p), schedule);
}

/// Uniformly optimal plan sampled on t_grid (strictly increasing, from 0).
inline SearchPlan optimal_plan(const TargetDistribution& target, const DetectionModel& det,
                               const EffortSchedule& schedule, std::span<const double> t_grid,
                               const Tolerances& tol = {}) {
  if (t_grid.empty() || t_grid.front() != 0.0) throw ValidationError("plan time grid must start at t = 0");
  const WaterFiller filler(target, det, SolveRoute::automatic, tol);
  std::vector<Allocation> allocations;
  allocations.reserve(t_grid.size());
  for (double t : t_grid) {
    try {
      allocations.push_back(filler.solve(schedule(t)).allocation);
    } catch (const ConvergenceError& e) {
      std::ostringstream msg;
      msg << "at t=" << t << ": " << e.what();
      throw ConvergenceError(msg.str());
    }
  }
  return SearchPlan::sampled(std::vector<double>(t_grid.begin(), t_grid.end()), std::move(allocations), schedule);
}

/// All available effort on the true location (density E(t)/volume on grids).
inline SearchPlan clairvoyant_plan(const GroundTruth& truth, const SearchSpace& space,
                                   const EffortSchedule& schedule) {
  if (truth.index() >= space.size()) throw ValidationError("true location lies outside the search space");
  const std::size_t x0 = truth.index();
  const double vol = space.cell_volume();
  SearchPlan::Parametric p;
  p.family = "clairvoyant";
  p.generate = [space, schedule, x0, vol](double t) {
    std::vector<double> e(space.size(), 0.0);
    e[x0] = schedule(t) / vol;
    return Allocation(space, std::move(e));
  };
  p.point = [schedule, x0, vol](double t, std::size_t cell) { return cell == x0 ? schedule(t) / vol : 0.0; };
  return SearchPlan::parametric(space, std::move(p), schedule);
}

}  // namespace searchlight
