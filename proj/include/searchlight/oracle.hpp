#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "searchlight/allocation.hpp"
#include "searchlight/detection.hpp"
#include "searchlight/errors.hpp"
#include "searchlight/evaluator.hpp"
#include "searchlight/plan.hpp"
#include "searchlight/prior.hpp"
#include "searchlight/space.hpp"

namespace searchlight {

/// Exhaustive search over {f >= 0, sum f = K} on a lattice of spacing `step`
/// (the last cell takes the remainder). Ties keep the lexicographically
/// smallest allocation.
inline Allocation brute_force_allocation(const TargetDistribution& target, const DetectionModel& det, double budget,
                                         double step) {
  const SearchSpace& space = target.space();
  if (space.is_grid()) throw ValidationError("brute force needs a discrete space");
  const std::size_t m = space.size();
  if (m > 4) throw ValidationError("brute force is limited to m <= 4 cells");
  if (!(step > 0.0)) throw ValidationError("brute force step must be positive");
  if (!(budget >= 0.0) || !std::isfinite(budget)) throw ValidationError("budget must be finite and >= 0");
  if (budget == 0.0 || m == 1) {
    std::vector<double> e(m, 0.0);
    e[m - 1] = budget;
    return Allocation(space, std::move(e));
  }
  const auto levels = static_cast<std::size_t>(std::floor(budget / step + 1e-9));
  // table[i][k] = pi(i) d(i, k * step)
  std::vector<std::vector<double>> table(m - 1, std::vector<double>(levels + 1));
  for (std::size_t i = 0; i + 1 < m; ++i) {
    for (std::size_t k = 0; k <= levels; ++k) {
      table[i][k] = target.mass(i) * det.value(space.site(i), static_cast<double>(k) * step);
    }
  }
  const Site last = space.site(m - 1);
  const double last_mass = target.mass(m - 1);
  std::vector<std::size_t> idx(m - 1, 0);
  std::vector<std::size_t> best_idx(m - 1, 0);
  double best = -1.0;
  // Depth-first in lexicographic order; strict improvement keeps the first tie.
  const std::function<void(std::size_t, std::size_t, double)> visit = [&](std::size_t depth, std::size_t used,
                                                                          double partial) {
    if (depth + 1 == m) {
      const double rest = std::max(0.0, budget - static_cast<double>(used) * step);
      const double value = partial + last_mass * det.value(last, rest);
      if (value > best) {
        best = value;
        best_idx = idx;
      }
      return;
    }
    for (std::size_t k = 0; used + k <= levels; ++k) {
      idx[depth] = k;
      visit(depth + 1, used + k, partial + table[depth][k]);
    }
  };
  visit(0, 0, 0.0);
  std::vector<double> e(m, 0.0);
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < m; ++i) {
    e[i] = static_cast<double>(best_idx[i]) * step;
    used += best_idx[i];
  }
  e[m - 1] = std::max(0.0, budget - static_cast<double>(used) * step);
  return Allocation(space, std::move(e));
}

struct McEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  std::uint64_t hits = 0;
  std::uint64_t seed = 0;
  std::string generator = "mt19937_64";
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from the top 53 bits, independent of the
/// standard library's distribution implementation.
inline double uniform53(std::mt19937_64& gen) { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

inline constexpr std::uint64_t kMcBlock = 1u << 16;

/// Runs `trial` over n draws split into fixed-size blocks, each seeded from
/// (seed, block index), so the result does not depend on the worker count.
inline McEstimate run_blocks(std::uint64_t n, std::uint64_t seed,
                             const std::function<bool(std::mt19937_64&)>& trial) {
  if (n == 0) throw ValidationError("Monte Carlo needs n >= 1");
  const std::uint64_t blocks = (n + kMcBlock - 1) / kMcBlock;
  std::vector<std::uint64_t> hits(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    std::mt19937_64 gen(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(b) + 1)));
    const std::uint64_t begin = b * kMcBlock;
    const std::uint64_t end = std::min(n, begin + kMcBlock);
    std::uint64_t h = 0;
    for (std::uint64_t i = begin; i < end; ++i) h += trial(gen) ? 1 : 0;
    hits[b] = h;
  });
  McEstimate out;
  for (auto h : hits) out.hits += h;
  out.n = n;
  out.seed = seed;
  out.estimate = static_cast<double>(out.hits) / static_cast<double>(n);
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / static_cast<double>(n));
  return out;
}

}  // namespace detail

/// Estimates P[phi(., t)]: each trial draws x0 from the prior, then detects
/// with probability d(x0, phi(x0, t)).
inline McEstimate monte_carlo_detection(const TargetDistribution& prior, const DetectionModel& det,
                                        const SearchPlan& plan, double t, std::uint64_t n, std::uint64_t seed) {
  detail::require_same_space(prior.space(), plan.space());
  const Allocation alloc = plan.at(t);
  const SearchSpace& space = prior.space();
  std::vector<double> cdf(space.size());
  std::vector<double> detect(space.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    acc += prior.mass(i);
    cdf[i] = acc;
    detect[i] = det.value(space.site(i), alloc[i]);
  }
  for (double& c : cdf) c /= acc;
  return detail::run_blocks(n, seed, [&](std::mt19937_64& gen) {
    const double u = detail::uniform53(gen);
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t cell = it == cdf.end() ? cdf.size() - 1 : static_cast<std::size_t>(it - cdf.begin());
    return detail::uniform53(gen) < detect[cell];
  });
}

/// Estimates P#[phi(., t)] with the target fixed at x0.
inline McEstimate monte_carlo_detection(const GroundTruth& truth, const DetectionModel& det, const SearchPlan& plan,
                                        double t, std::uint64_t n, std::uint64_t seed) {
  const double p = det.value(plan.space().site(truth.index()), plan.effort_at(t, truth.index()));
  return detail::run_blocks(n, seed, [&](std::mt19937_64& gen) { return detail::uniform53(gen) < p; });
}

/// Closed-form values of a registered scenario at time t.
struct ReferenceValues {
  double effort = 0.0;        // E(t)
  std::optional<double> subjective;      // P of the scenario's plan
  std::optional<double> true_prob;       // P# of the scenario's plan
  std::optional<double> alt_subjective;  // P of the scenario's alternative plan
  std::optional<double> alt_true;        // P# of the alternative plan
  std::map<std::string, double> named;   // allocations and coefficients
};

namespace detail {

struct ReferenceEntry {
  std::map<std::string, double> defaults;
  std::function<ReferenceValues(double, const std::map<std::string, double>&)> eval;
};

/// Optimal effort on cell 1 of a two-cell problem with d = 1 - exp(-c y).
inline double two_cell_first(double p, double c, double e) {
  return std::clamp(0.5 * (e + std::log(p / (1.0 - p)) / c), 0.0, e);
}

inline double effort_of(const std::map<std::string, double>& q, double t) {
  return q.at("offset") + q.at("rate") * t;
}

/// Q(lambda) for the uniform-interval remark, c = lambda (b - a):
/// integral over [max(a, c), b] of (ln x - ln c)/x dx.
inline double interval_q(double a, double b, double c) {
  const double lo = std::max(a, c);
  if (lo >= b) return 0.0;
  const double lb = std::log(b), ll = std::log(lo), lc = std::log(c);
  return 0.5 * (lb * lb - ll * ll) - lc * (lb - ll);
}

/// Inverse of interval_q by bisection on log c; returns c = lambda (b - a).
inline double interval_q_inverse(double a, double b, double budget) {
  if (budget <= 0.0) return b;
  double hi = std::log(b);
  double lo = hi - 1.0;
  while (interval_q(a, b, std::exp(lo)) < budget) lo = hi - 2.0 * (hi - lo);
  for (int i = 0; i < 300; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (interval_q(a, b, std::exp(mid)) > budget) lo = mid;
    else hi = mid;
    if (hi - lo < 1e-15) break;
  }
  return std::exp(0.5 * (lo + hi));
}

inline const std::map<std::string, ReferenceEntry>& reference_registry() {
  static const std::map<std::string, ReferenceEntry> registry = [] {
    std::map<std::string, ReferenceEntry> r;
    r["example1"] = {{{"offset", 0.0}, {"rate", 1.0}}, [](double t, const auto& q) {
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       v.subjective = v.true_prob = -std::expm1(-v.effort / 2.0);
                       v.named["phi(1)"] = v.named["phi(2)"] = v.effort / 2.0;
                       return v;
                     }};
    r["example2"] = {{{"offset", 0.0}, {"rate", 1.0}, {"radius", 1.0}}, [](double t, const auto& q) {
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       const double area = std::numbers::pi * q.at("radius") * q.at("radius");
                       v.subjective = v.true_prob = -std::expm1(-v.effort / area);
                       v.named["density"] = v.effort / area;
                       return v;
                     }};
    r["example3"] = {{{"offset", 0.0}, {"rate", 1.0}, {"p", 2.0 / 3.0}}, [](double t, const auto& q) {
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       const double p = q.at("p");
                       const double f1 = two_cell_first(p, 1.0, v.effort);
                       v.subjective = 1.0 - p * std::exp(-f1) - (1.0 - p) * std::exp(-(v.effort - f1));
                       v.true_prob = -std::expm1(-f1);
                       v.named["phi(1)"] = f1;
                       v.named["phi(2)"] = v.effort - f1;
                       return v;
                     }};
    r["example5"] = {{{"offset", std::log(4.0)}, {"rate", 1.0}}, [](double t, const auto& q) {
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       const double e = std::exp(-v.effort / 2.0);
                       v.subjective = 1.0 - 2.0 * std::numbers::sqrt2 / 3.0 * e;
                       v.true_prob = 1.0 - std::numbers::sqrt2 / 2.0 * e;
                       // The alternative splits evenly while E <= ln 4.
                       const bool split = v.effort <= std::log(4.0);
                       v.alt_subjective = 1.0 - e;
                       v.alt_true = split ? 1.0 - e : 1.0 - 0.5 * e;
                       v.named["phi*(1)"] = 0.5 * (v.effort + std::log(2.0));
                       v.named["phi(1)"] = split ? 0.5 * v.effort : 0.5 * (v.effort + std::log(4.0));
                       return v;
                     }};
    r["theorem3_remark"] = {{{"offset", 0.0}, {"rate", 1.0}, {"x0", 1.0}}, [](double t, const auto& q) {
                              ReferenceValues v;
                              v.effort = effort_of(q, t);
                              const double e = v.effort;
                              // Interior solution; valid once cell 2 is funded, E >= ln(2)/2.
                              if (e < std::log(2.0) / 2.0) {
                                v.named["phi(1)"] = 0.0;
                                v.named["phi(2)"] = e;
                              } else {
                                v.named["phi(1)"] = (2.0 * e - std::log(2.0)) / 3.0;
                                v.named["phi(2)"] = (e + std::log(2.0)) / 3.0;
                              }
                              const double m1 = std::exp(-v.named["phi(1)"]);
                              const double m2 = std::exp(-2.0 * v.named["phi(2)"]);
                              v.subjective = 1.0 - 0.5 * m1 - 0.5 * m2;
                              v.true_prob = q.at("x0") == 1.0 ? 1.0 - m1 : 1.0 - m2;
                              return v;
                            }};
    r["theorem4_remark"] = {{{"offset", 0.0}, {"rate", 1.0}, {"a", 1.0}, {"b", 3.0}, {"x0", 2.0}},
                            [](double t, const auto& q) {
                              ReferenceValues v;
                              v.effort = effort_of(q, t);
                              const double a = q.at("a"), b = q.at("b"), x0 = q.at("x0");
                              const double c = interval_q_inverse(a, b, v.effort);
                              const double lo = std::max(a, c);
                              v.subjective = lo >= b ? 0.0 : ((b - lo) - c * std::log(b / lo)) / (b - a);
                              v.true_prob = x0 > c ? 1.0 - c / x0 : 0.0;
                              v.named["lambda"] = c / (b - a);
                              v.named["phi(x0)"] = x0 > c ? std::log(x0 / c) / x0 : 0.0;
                              return v;
                            }};
    const auto gaussian = [](double t, const std::map<std::string, double>& q) {
      ReferenceValues v;
      v.effort = effort_of(q, t);
      const double sigma = q.at("sigma");
      const double u = std::sqrt(v.effort / (std::numbers::pi * sigma * sigma));  // H sqrt(t)
      v.subjective = 1.0 - (1.0 + u) * std::exp(-u);
      v.true_prob = -std::expm1(-u);
      v.named["phi(x0)"] = u;
      v.named["R^2"] = 2.0 * sigma * sigma * u;
      return v;
    };
    r["example4"] = {{{"offset", 0.0}, {"rate", 1.0}, {"sigma", 2.0}}, gaussian};
    r["example6"] = {{{"offset", 0.0}, {"rate", 1.0}, {"sigma", 2.0}}, [gaussian](double t, const auto& q) {
                       if (q.at("sigma") != 2.0) throw ValidationError("example6 reference is stated for sigma = 2");
                       ReferenceValues v = gaussian(t, q);
                       const double s = std::sqrt(v.effort / std::numbers::pi);
                       v.alt_subjective = 1.0 - 4.0 / 3.0 * std::exp(-s / 4.0) + 1.0 / 3.0 * std::exp(-s);
                       v.alt_true = -std::expm1(-s);
                       v.named["phi_alt(x0)"] = s;
                       return v;
                     }};
    r["example7"] = {{{"offset", 15.318},
                      {"rate", 1.0},
                      {"c", 0.3},
                      {"p1", 0.99},
                      {"p2", 0.17},
                      {"w", 0.75}},
                     [](double t, const auto& q) {
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       const double c = q.at("c"), p1 = q.at("p1"), p2 = q.at("p2"), w = q.at("w");
                       const double e = v.effort;
                       const double p = w * p1 + (1.0 - w) * p2;
                       const double star = two_cell_first(p, c, e);
                       const double comp = w * two_cell_first(p1, c, e) + (1.0 - w) * two_cell_first(p2, c, e);
                       const auto subj = [&](double f1) {
                         return 1.0 - p * std::exp(-c * f1) - (1.0 - p) * std::exp(-c * (e - f1));
                       };
                       v.subjective = subj(star);
                       v.true_prob = -std::expm1(-c * star);
                       v.alt_subjective = subj(comp);
                       v.alt_true = -std::expm1(-c * comp);
                       v.named["p"] = p;
                       v.named["phi*(1)"] = star;
                       v.named["phi_c(1)"] = comp;
                       v.named["coef_optimal"] = std::sqrt((1.0 - p) / p);
                       v.named["coef_composite"] =
                           std::pow((1.0 - p1) / p1, w / 2.0) * std::pow((1.0 - p2) / p2, (1.0 - w) / 2.0);
                       return v;
                     }};
    r["example8"] = {{{"offset", 0.0}, {"rate", 1.0}, {"sigma1", 2.0}, {"sigma2", 0.5}, {"w", 0.5}},
                     [](double t, const auto& q) {
                       // Composite prior taken as the moment-matched Gaussian.
                       ReferenceValues v;
                       v.effort = effort_of(q, t);
                       const double s1 = q.at("sigma1"), s2 = q.at("sigma2"), w = q.at("w");
                       const double sigma = std::sqrt(w * s1 * s1 + (1.0 - w) * s2 * s2);
                       const double root = std::sqrt(v.effort / std::numbers::pi);
                       const double k_opt = 1.0 / sigma;
                       const double k_comp = w / s1 + (1.0 - w) / s2;
                       v.subjective = 1.0 - (1.0 + k_opt * root) * std::exp(-k_opt * root);
                       v.true_prob = -std::expm1(-k_opt * root);
                       v.alt_true = -std::expm1(-k_comp * root);
                       v.named["sigma"] = sigma;
                       v.named["coef_optimal"] = k_opt;
                       v.named["coef_composite"] = k_comp;
                       return v;
                     }};
    r["counterexample6"] = {{{"offset", 0.0}, {"rate", 1.0}}, [](double t, const auto& q) {
                              ReferenceValues v;
                              v.effort = effort_of(q, t);
                              v.true_prob = -std::expm1(-std::exp(-t));
                              v.named["phi(x0)"] = std::exp(-t);
                              return v;
                            }};
    return r;
  }();
  return registry;
}

}  // namespace detail

inline std::vector<std::string> reference_ids() {
  std::vector<std::string> ids;
  for (const auto& [id, entry] : detail::reference_registry()) ids.push_back(id);
  return ids;
}

inline std::map<std::string, double> reference_defaults(const std::string& id) {
  const auto& reg = detail::reference_registry();
  auto it = reg.find(id);
  if (it == reg.end()) throw ValidationError("unknown reference scenario '" + id + "'");
  return it->second.defaults;
}

/// Evaluates the registered closed-form formulas of `id` at time t, with
/// E(t) = offset + rate t. `params` overrides registered defaults; unknown
/// parameter names are rejected.
inline ReferenceValues closed_form_reference(const std::string& id, double t,
                                             const std::map<std::string, double>& params = {}) {
  const auto& reg = detail::reference_registry();
  auto it = reg.find(id);
  if (it == reg.end()) throw ValidationError("unknown reference scenario '" + id + "'");
  auto merged = it->second.defaults;
  for (const auto& [k, val] : params) {
    if (!merged.contains(k)) throw ValidationError("reference '" + id + "' has no parameter '" + k + "'");
    merged[k] = val;
  }
  return it->second.eval(t, merged);
}

}  // namespace searchlight
