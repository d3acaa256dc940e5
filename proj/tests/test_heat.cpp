#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fdnet/errors.hpp"
#include "fdnet/heat.hpp"
#include "support/measure.hpp"
#include "support/oracles.hpp"

using namespace fdnet;

namespace {

HeatProblem single_mode() {
  HeatProblem p;
  p.ic_coeffs.assign(10, 0.0);
  p.ic_coeffs[0] = 1.0;
  return p;
}

std::vector<double> sin_grid(const Grid& grid) {
  std::vector<double> u(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) u[m] = std::sin(grid.point(m));
  return u;
}

double sup_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s = std::max(s, std::abs(x));
  return s;
}

}  // namespace

TEST(Grid, PiWithTenthSpacingHas32Points) {
  const Grid grid(kPi, 0.1);
  EXPECT_EQ(grid.size(), 32u);
  EXPECT_NEAR(grid.point(31), 3.1, 1e-15);
  EXPECT_LE(31 * 0.1, kPi);
  EXPECT_LT(kPi, 32 * 0.1);
}

TEST(Grid, PointsUniformAndIncreasing) {
  const Grid grid(kPi, 0.1);
  const auto x = grid.points();
  for (std::size_t m = 1; m < x.size(); ++m) EXPECT_NEAR(x[m] - x[m - 1], 0.1, 1e-14);
}

TEST(Grid, ExactMultipleKeepsEndpoint) {
  const Grid grid(1.0, 0.25);
  EXPECT_EQ(grid.size(), 5u);
  EXPECT_DOUBLE_EQ(grid.point(4), 1.0);
}

TEST(Grid, RejectsDegenerateInput) {
  EXPECT_THROW(Grid(0.05, 0.1), ConfigError);
  EXPECT_THROW(Grid(1.0, 0.0), ConfigError);
  EXPECT_THROW(Grid(-1.0, 0.1), ConfigError);
}

TEST(ExactSolution, SingleModeAtZeroTime) {
  EXPECT_NEAR(exact_solution(single_mode(), kPi / 2.0, 0.0), 1.0, 1e-15);
}

TEST(ExactSolution, SingleModeDecay) {
  const double u = exact_solution(single_mode(), kPi / 2.0, 1000.0);
  EXPECT_NEAR(u, std::exp(-0.2), 1e-15);
  EXPECT_NEAR(u, 0.81873075307798, 1e-13);
}

TEST(ExactSolution, MatchesDirectSummation) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const bool forcing : {false, true}) {
      const auto p = measure::random_problem(seed, forcing);
      const std::vector<double> d = forcing ? *p.forcing_coeffs : std::vector<double>{};
      for (const double x : {0.0, 0.3, 1.7, 3.1}) {
        for (const double t : {0.0, 1.0, 200.0, 1000.0}) {
          const double ref = oracle::series(p.ic_coeffs, d, p.beta, p.length, x, t);
          EXPECT_NEAR(exact_solution(p, x, t), ref, 1e-9 * std::max(1.0, std::abs(ref)));
        }
      }
    }
  }
}

TEST(ExactSolution, ZeroAtLeftBoundary) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const bool forcing : {false, true}) {
      const auto p = measure::random_problem(seed, forcing);
      for (const double t : {0.0, 3.0, 999.0}) EXPECT_EQ(exact_solution(p, 0.0, t), 0.0);
    }
  }
}

TEST(ExactSolution, InitialConditionIsSineSeries) {
  const auto p = measure::random_problem(11, false);
  for (double x = 0.0; x <= kPi; x += 0.05) {
    double ic = 0.0;
    for (std::size_t i = 0; i < p.ic_coeffs.size(); ++i) ic += p.ic_coeffs[i] * std::sin((i + 1.0) * x);
    EXPECT_NEAR(exact_solution(p, x, 0.0), ic, 1e-12);
  }
}

TEST(ExactSolution, ForcedSteadyState) {
  HeatProblem p;
  p.ic_coeffs.assign(10, 0.0);
  p.forcing_coeffs = std::vector<double>(10, 0.0);
  (*p.forcing_coeffs)[0] = 1.0;
  const double x = 1.2;
  EXPECT_NEAR(exact_solution(p, x, 1e6), std::sin(x) / p.beta, 1e-8 * std::sin(x) / p.beta);
}

TEST(ExactSolution, ForcedSteadyStateAllModes) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto p = measure::random_problem(seed, true);
    for (const double x : {0.4, 1.5, 2.6}) {
      double steady = 0.0;
      for (std::size_t i = 0; i < 10; ++i) {
        const double w = (i + 1.0) * kPi / p.length;
        steady += (*p.forcing_coeffs)[i] / (p.beta * w * w) * std::sin(w * x);
      }
      EXPECT_NEAR(exact_solution(p, x, 1e6), steady, 1e-8 * std::abs(steady));
    }
  }
}

TEST(ExactSolution, DiscreteResidualIsSecondOrder) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    for (const double order : measure::residual_orders(measure::random_problem(seed, false))) {
      EXPECT_GE(order, 1.7);
      EXPECT_LE(order, 2.3);
    }
  }
}

TEST(HeatProblem, Validation) {
  HeatProblem p;
  EXPECT_THROW(p.validate(), ConfigError);
  p.ic_coeffs = {1.0};
  EXPECT_NO_THROW(p.validate());
  p.beta = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p.beta = 1.0;
  p.forcing_coeffs = std::vector<double>{1.0, 2.0};
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Noise, Examples) {
  EXPECT_EQ(apply_noise(2.0, 0.0, 3.7), 2.0);
  EXPECT_EQ(apply_noise(2.0, 0.0, -1.0), 2.0);
  EXPECT_DOUBLE_EQ(apply_noise(1.0, 1e-2, 1.0), 1.01);
  EXPECT_EQ(apply_noise(0.0, 0.5, 2.0), 0.0);
}

TEST(Noise, PreservesSignForSmallPerturbation) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (int i = 0; i < 1000; ++i) {
    const double u = normal(rng);
    const double eps = normal(rng);
    const double gamma = 0.9 / (std::abs(eps) + 1e-9);
    if (gamma * std::abs(eps) < 1.0) EXPECT_GE(apply_noise(u, gamma, eps) * u, 0.0);
  }
}

TEST(EulerConfig, StableAndUnstableDelta) {
  EXPECT_NEAR(EulerConfig::from(2e-4, 1.0, 0.1).delta, 0.02, 1e-15);
  EXPECT_NEAR(EulerConfig::from(2e-4, 200.0, 0.1).delta, 4.0, 1e-12);
  EXPECT_THROW(EulerConfig::from(0.0, 1.0, 0.1), ConfigError);
}

TEST(EulerStep, ZeroIsFixedPoint) {
  const std::vector<double> zero(32, 0.0);
  EXPECT_EQ(euler_step(zero, {0.02, 1.0}), zero);
}

TEST(EulerStep, SineIsEigenvectorInTheInterior) {
  const Grid grid(kPi, 0.1);
  const auto u = sin_grid(grid);
  const auto next = euler_step(u, {0.02, 1.0});
  const double factor = 1.0 + 0.02 * (2.0 * std::cos(0.1) - 2.0);
  EXPECT_NEAR(factor, 0.99980, 1e-5);
  for (std::size_t m = 1; m + 1 < u.size(); ++m) {
    const double literal = u[m] + 0.02 * (u[m + 1] - 2.0 * u[m] + u[m - 1]);
    EXPECT_NEAR(next[m], literal, 1e-15);
    EXPECT_NEAR(next[m], factor * u[m], 1e-14);
  }
  EXPECT_EQ(next.front(), u.front());
  EXPECT_EQ(next.back(), u.back());
}

TEST(EulerStep, Linear) {
  std::mt19937_64 rng(2);
  const auto u = oracle::uniform(rng, 32, 1.0);
  const auto v = oracle::uniform(rng, 32, 1.0);
  const double a = 0.7, b = -1.3;
  std::vector<double> w(32);
  for (std::size_t m = 0; m < 32; ++m) w[m] = a * u[m] + b * v[m];
  const EulerConfig cfg{0.3, 1.0};
  const auto su = euler_step(u, cfg), sv = euler_step(v, cfg), sw = euler_step(w, cfg);
  for (std::size_t m = 0; m < 32; ++m) EXPECT_NEAR(sw[m], a * su[m] + b * sv[m], 1e-14);
}

TEST(EulerRollout, OneStepEqualsEulerStep) {
  const auto u = sin_grid(Grid(kPi, 0.1));
  const auto states = euler_rollout(u, {0.02, 1.0}, 1);
  ASSERT_EQ(states.size(), 1u);
  EXPECT_EQ(states[0], euler_step(u, {0.02, 1.0}));
}

TEST(EulerRollout, StableStaysBounded) {
  const auto u = sin_grid(Grid(kPi, 0.1));
  const auto states = euler_rollout(u, {0.02, 1.0}, 1000);
  ASSERT_EQ(states.size(), 1000u);
  for (const auto& s : states) EXPECT_LE(sup_norm(s), sup_norm(u));
}

TEST(EulerRollout, UnstableSineGrowsOnceBoundaryErrorAmplifies) {
  // With held boundaries the sine profile decays by 0.96 per step until the
  // boundary mismatch, amplified by |1 - 4 delta| = 15 per step, takes over.
  const auto u = sin_grid(Grid(kPi, 0.1));
  const auto states = euler_rollout(u, {4.0, 200.0}, 10);
  std::vector<double> v = u;
  for (std::size_t n = 0; n < 10; ++n) {
    std::vector<double> next = v;
    for (std::size_t m = 1; m + 1 < v.size(); ++m) next[m] = v[m] + 4.0 * (v[m + 1] - 2.0 * v[m] + v[m - 1]);
    v = next;
    EXPECT_LT(oracle::max_abs_diff(states[n], v), 1e-9 * std::max(1.0, sup_norm(v)));
  }
  EXPECT_NEAR(sup_norm(states[3]), 0.8491022825496041, 1e-12);
  EXPECT_NEAR(sup_norm(states[4]), 4.301619385108915, 1e-9);
  EXPECT_LT(sup_norm(states[6]), 1e3 * sup_norm(u));
  EXPECT_GT(sup_norm(states[7]), 1e3 * sup_norm(u));
  EXPECT_GT(sup_norm(states[9]), 1e6 * sup_norm(u));
}

TEST(EulerRollout, UnstableRoughInputBlowsUpWithinFiveSteps) {
  std::mt19937_64 rng(0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = oracle::uniform(rng, 32, 1.0);
    EXPECT_GT(sup_norm(euler_rollout(u, {4.0, 200.0}, 5).back()), 1e3 * sup_norm(u));
  }
}

TEST(EulerRollout, ZeroStepsRejected) {
  const std::vector<double> u(32, 0.0);
  EXPECT_THROW(euler_rollout(u, {0.02, 1.0}, 0), ConfigError);
}
