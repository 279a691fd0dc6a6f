#pragma once

#include <cstddef>

namespace searchlight {

/// Numerical tolerances shared by every module. Scenario files may override
/// individual fields; everything else reads these defaults.
struct Tolerances {
  double prior_mass = 1e-9;          // |total probability - 1|
  double mixture_weights = 1e-12;    // |sum of mixture weights - 1|
  double budget = 1e-9;              // budget residual, relative to max(1, K)
  double kkt = 1e-8;                 // marginal-rate spread, relative to lambda*
  double lambda_solve = 1e-12;       // |Q(lambda) - K| / K at convergence
  int max_bisection = 200;
  double inverse_identity = 1e-9;    // deriv_inverse(deriv(y)) == y spot checks
  double feasibility = 1e-9;         // plan totals vs E(t), relative to max(1, E)
  double truncation_sigmas = 6.0;    // k in the k*sigma truncation of Gaussian priors
};

}  // namespace searchlight
