#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "searchlight/oracle.hpp"
#include "searchlight/searchlight.hpp"

using namespace searchlight;

namespace {

DetectionModel rates_by_cell(std::vector<double> rates) {
  return DetectionModel::exponential([rates](const Site& s) { return rates.at(s.index); }, "per-cell rates");
}

struct Instance {
  TargetDistribution target;
  DetectionModel det;
  std::vector<double> pi;
  std::vector<double> alpha;
};

Instance random_instance(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> size(1, 50);
  std::uniform_real_distribution<double> rate(0.1, 5.0);
  std::uniform_real_distribution<double> weight(0.0, 1.0);
  const std::size_t m = size(gen);
  std::vector<double> pi(m), alpha(m);
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    pi[i] = weight(gen);
    sum += pi[i];
    alpha[i] = rate(gen);
  }
  for (double& p : pi) p /= sum;
  return {TargetDistribution::discretize(DiscretePmf{pi}, SearchSpace::discrete(m)), rates_by_cell(alpha), pi, alpha};
}

// Exponential water level: phi(x) = max(0, ln(pi alpha / lambda) / alpha).
double water_level_effort(double pi, double alpha, double lambda) {
  return std::max(0.0, std::log(pi * alpha / lambda) / alpha);
}

}  // namespace

TEST(Allocator, TwoCellUniformSplitsEvenly) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.5, 0.5}}, SearchSpace::discrete(2));
  const auto a = optimal_allocation(t, DetectionModel::exponential(1.0), 3.0);
  EXPECT_NEAR(a[0], 1.5, 1e-12);
  EXPECT_NEAR(a[1], 1.5, 1e-12);
}

TEST(Allocator, BiasedTwoCellClosedForm) {
  // Equal marginal rates p e^{-y1} = (1-p) e^{-y2} with y1 + y2 = E.
  const double p = 2.0 / 3.0;
  const double e = std::log(4.0);
  const auto t = TargetDistribution::discretize(DiscretePmf{{p, 1.0 - p}}, SearchSpace::discrete(2));
  const auto a = optimal_allocation(t, DetectionModel::exponential(1.0), e);
  const double y1 = 0.5 * (e + std::log(p / (1.0 - p)));
  EXPECT_NEAR(a[0], y1, 1e-10);
  EXPECT_NEAR(a[1], e - y1, 1e-10);
  EXPECT_NEAR(a[0], 1.039721, 1e-6);
  EXPECT_NEAR(a[1], 0.346574, 1e-6);
}

TEST(Allocator, BelowThresholdOnlyTheLikelyCellIsSearched) {
  const double p = 2.0 / 3.0;
  const auto t = TargetDistribution::discretize(DiscretePmf{{p, 1.0 - p}}, SearchSpace::discrete(2));
  // Cell 2 is first funded once E exceeds ln(p/(1-p)) = ln 2.
  const auto a = optimal_allocation(t, DetectionModel::exponential(1.0), 0.5);
  EXPECT_NEAR(a[0], 0.5, 1e-12);
  EXPECT_EQ(a[1], 0.0);
}

TEST(Allocator, NonHomogeneousTwoCellRemark) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.5, 0.5}}, SearchSpace::discrete(2));
  const auto det = rates_by_cell({1.0, 2.0});
  for (double e : {0.5, 1.0, 3.0, 10.0}) {
    const auto a = optimal_allocation(t, det, e);
    // 0.5 e^{-y1} = e^{-2 y2}, y1 + y2 = E.
    EXPECT_NEAR(a[0], (2.0 * e - std::log(2.0)) / 3.0, 1e-10) << "E=" << e;
    EXPECT_NEAR(a[1], (e + std::log(2.0)) / 3.0, 1e-10) << "E=" << e;
  }
  const auto a = optimal_allocation(t, det, 1.0);
  EXPECT_NEAR(a[0], 0.435617, 1e-6);
  EXPECT_NEAR(a[1], 0.564383, 1e-6);
}

TEST(Allocator, ClampedAggregateAndZeroBudget) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.5, 0.5}}, SearchSpace::discrete(2));
  const auto det = rates_by_cell({1.0, 2.0});
  // q_1(0) = 1/2 < 2^{-2/3} < q_2(0) = 1, so only cell 2 contributes.
  const double lambda = std::pow(2.0, -2.0 / 3.0);
  EXPECT_NEAR(aggregate_allocation(t, det, lambda), std::log(2.0) / 3.0, 1e-14);
  EXPECT_NEAR(aggregate_allocation(t, det, lambda, SolveRoute::generic), std::log(2.0) / 3.0, 1e-12);
  const auto s = solve_lambda(t, det, 0.0);
  EXPECT_NEAR(s.lambda_star, 1.0, 1e-12);
  EXPECT_EQ(s.allocation.total(), 0.0);
}

TEST(Allocator, MarginalRateAndInverse) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.25, 0.75}}, SearchSpace::discrete(2));
  const auto det = DetectionModel::exponential(2.0);
  EXPECT_NEAR(marginal_rate(t, det, 1, 0.5), 0.75 * 2.0 * std::exp(-1.0), 1e-15);
  EXPECT_NEAR(marginal_rate_inverse(t, det, 1, 0.75 * 2.0 * std::exp(-1.0)), 0.5, 1e-12);
  EXPECT_EQ(marginal_rate_inverse(t, det, 0, 0.6), 0.0);
  EXPECT_THROW(marginal_rate(t, det, 2, 0.0), ValidationError);
  EXPECT_THROW(marginal_rate_inverse(t, det, 0, 0.0), ValidationError);
}

TEST(Allocator, RejectsInvalidBudget) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.5, 0.5}}, SearchSpace::discrete(2));
  EXPECT_THROW(solve_lambda(t, DetectionModel::exponential(1.0), -1.0), ValidationError);
  EXPECT_THROW(solve_lambda(t, DetectionModel::exponential(1.0), std::nan("")), ValidationError);
}

TEST(Allocator, SaturatingDetectionMatchesScaledExponential) {
  // c (1 - e^{-y}) with a common ceiling has the same optimiser as 1 - e^{-y}.
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.2, 0.3, 0.5}}, SearchSpace::discrete(3));
  const auto a = optimal_allocation(t, DetectionModel::saturating(0.5, 1.0), 2.0);
  const auto b = optimal_allocation(t, DetectionModel::exponential(1.0), 2.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(AllocatorProperties, RandomInstancesSatisfyOptimality) {
  std::mt19937_64 gen(20240601);
  std::uniform_real_distribution<double> budget(0.0, 40.0);
  const Tolerances tol;
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = random_instance(gen);
    const double k1 = budget(gen);
    const double k2 = k1 + budget(gen);
    const auto s1 = solve_lambda(inst.target, inst.det, k1);
    const auto s2 = solve_lambda(inst.target, inst.det, k2);
    ASSERT_LE(std::abs(s1.budget_residual), 1e-9 * std::max(1.0, k1)) << "trial " << trial;
    ASSERT_LE(std::abs(s2.budget_residual), 1e-9 * std::max(1.0, k2)) << "trial " << trial;
    ASSERT_LE(s1.kkt_spread, 1e-8 * s1.lambda_star) << "trial " << trial;
    ASSERT_LE(s1.kkt_violation, 1e-8 * s1.lambda_star) << "trial " << trial;
    const auto generic = solve_lambda(inst.target, inst.det, k1, tol, SolveRoute::generic);
    for (std::size_t i = 0; i < inst.pi.size(); ++i) {
      ASSERT_LE(s1.allocation[i], s2.allocation[i] + 1e-9) << "trial " << trial << " cell " << i;
      // Independent evaluation of the water level at the solver's lambda.
      const double expected = water_level_effort(inst.pi[i], inst.alpha[i], s1.lambda_star);
      ASSERT_NEAR(s1.allocation[i], expected, 1e-7 * std::max(1.0, expected)) << "trial " << trial;
      ASSERT_NEAR(generic.allocation[i], s1.allocation[i], 1e-7 * std::max(1.0, expected)) << "trial " << trial;
    }
  }
}

TEST(AllocatorProperties, BeatsBruteForceOnSmallInstances) {
  std::mt19937_64 gen(77);
  std::uniform_int_distribution<std::size_t> size(2, 3);
  std::uniform_real_distribution<double> rate(0.1, 5.0);
  std::uniform_real_distribution<double> weight(0.05, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = size(gen);
    std::vector<double> pi(m), alpha(m);
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      pi[i] = weight(gen);
      sum += pi[i];
      alpha[i] = rate(gen);
    }
    for (double& p : pi) p /= sum;
    const auto target = TargetDistribution::discretize(DiscretePmf{pi}, SearchSpace::discrete(m));
    const auto det = rates_by_cell(alpha);
    const double k = 2.0;
    const auto opt = optimal_allocation(target, det, k);
    const auto brute = brute_force_allocation(target, det, k, m == 2 ? 1e-3 : 1e-2);
    double p_opt = 0.0, p_brute = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      p_opt += pi[i] * (1.0 - std::exp(-alpha[i] * opt[i]));
      p_brute += pi[i] * (1.0 - std::exp(-alpha[i] * brute[i]));
    }
    EXPECT_GE(p_opt, p_brute - 1e-6) << "trial " << trial;
  }
}

TEST(Allocator, UniformDiscGetsUniformDensity) {
  const double r = 1.0;
  const auto s = SearchSpace::centered_grid_2d(r, r / 20.0);
  const auto t = TargetDistribution::discretize(UniformDisc{r}, s);
  const double e = 2.0;
  const auto a = optimal_allocation(t, DetectionModel::exponential(1.0), e);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < s.size(); ++i) inside += t.mass(i) > 0.0;
  const double density = e / (static_cast<double>(inside) * s.cell_volume());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (t.mass(i) > 0.0) EXPECT_NEAR(a[i], density, 1e-9);
    else EXPECT_EQ(a[i], 0.0);
  }
  EXPECT_NEAR(a.total(), e, 1e-9);
}

TEST(Plans, ParametricAndSampledAgree) {
  const auto t = TargetDistribution::discretize(DiscretePmf{{0.2, 0.3, 0.5}}, SearchSpace::discrete(3));
  const auto det = DetectionModel::exponential(1.0);
  const auto schedule = EffortSchedule::linear(1.0);
  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0, 4.0};
  const auto sampled = optimal_plan(t, det, schedule, grid);
  const auto param = uniformly_optimal_plan(t, det, schedule);
  EXPECT_TRUE(sampled.is_sampled());
  EXPECT_FALSE(param.is_sampled());
  for (double u : grid) {
    const auto a = sampled.at(u);
    const auto b = param.at(u);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_NEAR(a[i], b[i], 1e-10);
      EXPECT_NEAR(param.effort_at(u, i), b[i], 1e-12);
    }
  }
  EXPECT_TRUE(param.monotone_on(grid));
  EXPECT_THROW(optimal_plan(t, det, schedule, std::vector<double>{0.5, 1.0}), ValidationError);
}

TEST(Plans, ClairvoyantPutsEverythingOnTheTruth) {
  const auto g = SearchSpace::grid_1d(0.0, 1.0, 0.25);
  const auto truth = GroundTruth::point(g, {0.6, 0.0});
  const auto plan = clairvoyant_plan(truth, g, EffortSchedule::linear(2.0));
  const auto a = plan.at(1.5);
  EXPECT_NEAR(a[truth.index()], 3.0 / 0.25, 1e-12);
  EXPECT_NEAR(a.total(), 3.0, 1e-12);
}
