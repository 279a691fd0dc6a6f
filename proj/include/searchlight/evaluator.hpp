#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <thread>
#include <utility>
#include <vector>

#include "searchlight/allocation.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/schedule.hpp"

namespace searchlight {

namespace detail {

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads. Each
/// index writes its own output slot, so results do not depend on scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline void require_same_space(const SearchSpace& a, const SearchSpace& b) {
  if (!(a == b)) throw ValidationError("allocation and prior live on different search spaces");
}

}  // namespace detail

/// 1 - P[f], accumulated directly so small miss probabilities keep precision.
inline double subjective_miss_prob(const TargetDistribution& prior, const DetectionModel& det,
                                   const Allocation& alloc) {
  detail::require_same_space(prior.space(), alloc.space());
  const SearchSpace& space = prior.space();
  double miss = 0.0;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    const double m = prior.mass(i);
    if (m == 0.0) continue;
    miss += m * det.miss(space.site(i), alloc[i]);
  }
  return std::clamp(miss, 0.0, 1.0);
}

/// P[f] = sum_x d(x, f(x)) pi(x), midpoint quadrature on grids.
inline double subjective_detection_prob(const TargetDistribution& prior, const DetectionModel& det,
                                        const Allocation& alloc) {
  detail::require_same_space(prior.space(), alloc.space());
  const SearchSpace& space = prior.space();
  double p = 0.0;
  for (std::size_t i = 0; i < alloc.size(); ++i) {
    const double m = prior.mass(i);
    if (m == 0.0) continue;
    p += m * det.value(space.site(i), alloc[i]);
  }
  return std::clamp(p, 0.0, 1.0);
}

/// P#[f] = d(x0, f(x0)); on grids f(x0) is the density of the cell holding x0.
inline double true_detection_prob(const GroundTruth& truth, const DetectionModel& det, const Allocation& alloc) {
  if (truth.index() >= alloc.size()) throw ValidationError("true location lies outside the search space");
  return det.value(alloc.space().site(truth.index()), alloc[truth.index()]);
}

enum class CurveKind { subjective, true_location };

struct DetectionCurve {
  std::vector<double> t;
  std::vector<double> values;
  CurveKind kind = CurveKind::subjective;
};

inline std::vector<double> uniform_time_grid(double start, double end, std::size_t samples) {
  if (samples < 2 || !(end > start)) throw ValidationError("time grid needs end > start and >= 2 samples");
  std::vector<double> t(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    t[i] = start + (end - start) * static_cast<double>(i) / static_cast<double>(samples - 1);
  }
  return t;
}

inline DetectionCurve subjective_curve(const SearchPlan& plan, const TargetDistribution& prior,
                                       const DetectionModel& det, std::span<const double> t_grid) {
  DetectionCurve c{{t_grid.begin(), t_grid.end()}, std::vector<double>(t_grid.size()), CurveKind::subjective};
  detail::parallel_for(t_grid.size(), [&](std::size_t k) {
    c.values[k] = subjective_detection_prob(prior, det, plan.at(t_grid[k]));
  });
  return c;
}

inline DetectionCurve true_curve(const SearchPlan& plan, const GroundTruth& truth, const DetectionModel& det,
                                 std::span<const double> t_grid) {
  DetectionCurve c{{t_grid.begin(), t_grid.end()}, std::vector<double>(t_grid.size()), CurveKind::true_location};
  const Site x0 = plan.space().site(truth.index());
  detail::parallel_for(t_grid.size(), [&](std::size_t k) {
    c.values[k] = det.value(x0, plan.effort_at(t_grid[k], truth.index()));
  });
  return c;
}

/// Subjective and true detection curves of one plan on a shared time grid.
inline std::pair<DetectionCurve, DetectionCurve> detection_curves(const SearchPlan& plan,
                                                                  const TargetDistribution& prior,
                                                                  const GroundTruth& truth,
                                                                  const DetectionModel& det,
                                                                  std::span<const double> t_grid) {
  detail::require_same_space(prior.space(), plan.space());
  return {subjective_curve(plan, prior, det, t_grid), true_curve(plan, truth, det, t_grid)};
}

/// How the improper integral of 1 - P(t) over [0, inf) is truncated.
struct HorizonPolicy {
  double initial_horizon = 1.0;
  double decay_threshold = 1e-8;       // integrate up to the first doubling where 1 - P falls below this
  double divergence_threshold = 1e-3;  // 1 - P still above this at the hard cap => divergent
  double hard_cap = 1e4;
  double abs_tolerance = 1e-10;
  int max_depth = 48;
};

struct MeanTime {
  double value = 0.0;  // +inf when divergent
  bool divergent = false;
  double horizon = 0.0;
  double tail = 0.0;
  double miss_at_horizon = 0.0;
  std::size_t evaluations = 0;
};

namespace detail {

class AdaptiveSimpson {
 public:
  AdaptiveSimpson(const std::function<double(double)>& f, int max_depth) : f_(f), max_depth_(max_depth) {}

  double integrate(double a, double b, double tol) {
    const double fa = eval(a);
    const double fb = eval(b);
    const double m = 0.5 * (a + b);
    const double fm = eval(m);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return refine(a, b, fa, fm, fb, whole, tol, 0);
  }

  std::size_t evaluations() const noexcept { return evaluations_; }

 private:
  double eval(double t) {
    ++evaluations_;
    return f_(t);
  }

  double refine(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = eval(lm);
    const double frm = eval(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth >= max_depth_ || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1) +
           refine(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1);
  }

  const std::function<double(double)>& f_;
  int max_depth_;
  std::size_t evaluations_ = 0;
};

/// Integral of miss(t) over [0, inf): adaptive Simpson on [0, T] plus an
/// exponential tail A exp(-b t) fitted to miss(T/10) and miss(T).
inline MeanTime integrate_miss(const std::function<double(double)>& miss, const HorizonPolicy& policy) {
  MeanTime out;
  std::size_t probes = 0;
  double horizon = policy.initial_horizon;
  double at_horizon = miss(horizon);
  ++probes;
  while (at_horizon >= policy.decay_threshold && horizon < policy.hard_cap) {
    horizon = std::min(2.0 * horizon, policy.hard_cap);
    at_horizon = miss(horizon);
    ++probes;
  }
  out.horizon = horizon;
  out.miss_at_horizon = at_horizon;
  if (at_horizon >= policy.divergence_threshold) {
    out.divergent = true;
    out.value = std::numeric_limits<double>::infinity();
    out.evaluations = probes;
    return out;
  }
  // Geometric panels resolve the sqrt(t)-type behaviour near t = 0.
  AdaptiveSimpson simpson(miss, policy.max_depth);
  constexpr int kPanels = 20;
  double total = 0.0;
  double lo = 0.0;
  for (int k = kPanels; k >= 0; --k) {
    const double hi = horizon / std::ldexp(1.0, k);
    total += simpson.integrate(lo, hi, policy.abs_tolerance / (kPanels + 1));
    lo = hi;
  }
  const double early = miss(horizon / 10.0);
  ++probes;
  if (at_horizon > 0.0 && early > at_horizon) {
    const double rate = std::log(early / at_horizon) / (0.9 * horizon);
    out.tail = at_horizon / rate;
  }
  out.value = total + out.tail;
  out.evaluations = probes + simpson.evaluations();
  return out;
}

}  // namespace detail

/// mu = integral of (1 - P[phi(., t)]) dt.
inline MeanTime mean_time_subjective(const SearchPlan& plan, const TargetDistribution& prior,
                                     const DetectionModel& det, const HorizonPolicy& policy = {}) {
  detail::require_same_space(prior.space(), plan.space());
  const std::function<double(double)> miss = [&](double t) {
    return subjective_miss_prob(prior, det, plan.at(t));
  };
  return detail::integrate_miss(miss, policy);
}

/// mu# = integral of (1 - P#[phi(., t)]) dt.
inline MeanTime mean_time_true(const SearchPlan& plan, const GroundTruth& truth, const DetectionModel& det,
                               const HorizonPolicy& policy = {}) {
  const Site x0 = plan.space().site(truth.index());
  const std::function<double(double)> miss = [&](double t) {
    return det.miss(x0, plan.effort_at(t, truth.index()));
  };
  return detail::integrate_miss(miss, policy);
}

struct FeasibilityReport {
  bool feasible = true;
  double max_residual = 0.0;  // max |C[phi(., t)] - E(t)|
  double worst_t = 0.0;
  std::size_t samples = 0;
};

/// Checks C[phi(., t)] = E(t) at every sample: the plan's own grid when it is
/// sampled, otherwise t_grid.
inline FeasibilityReport feasibility_check(const SearchPlan& plan, const EffortSchedule& schedule,
                                           std::span<const double> t_grid = {}, double tol = 1e-9) {
  std::vector<double> times;
  if (const auto* s = plan.samples()) times = s->t_grid;
  else times.assign(t_grid.begin(), t_grid.end());
  if (times.empty()) throw ValidationError("feasibility check needs time samples");
  FeasibilityReport r;
  r.samples = times.size();
  for (double t : times) {
    const double budget = schedule(t);
    const double residual = std::abs(plan.at(t).total() - budget);
    if (residual > r.max_residual) {
      r.max_residual = residual;
      r.worst_t = t;
    }
    if (residual > tol * std::max(1.0, budget)) r.feasible = false;
  }
  return r;
}

}  // namespace searchlight
