#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fdnet/errors.hpp"
#include "fdnet/optim.hpp"
#include "support/measure.hpp"
#include "support/oracles.hpp"

using namespace fdnet;

namespace {

using Matrix = std::vector<std::vector<double>>;

std::vector<double> multiply(const Matrix& a, std::span<const double> x) {
  std::vector<double> y(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
  }
  return y;
}

Matrix random_symmetric(std::mt19937_64& rng, std::size_t n, double shift) {
  Matrix a(n, std::vector<double>(n));
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) a[i][j] = a[j][i] = normal(rng);
    a[i][i] += shift;
  }
  return a;
}

// f(x) = b.x + x.Ax/2 + quartic |x|^4.
class Quadratic final : public Objective {
 public:
  Quadratic(Matrix a, std::vector<double> b, double quartic = 0.0)
      : a_(std::move(a)), b_(std::move(b)), quartic_(quartic) {}

  double value(std::span<const double> x) const override {
    const auto ax = multiply(a_, x);
    const double r2 = oracle::dot(x, x);
    return oracle::dot(b_, x) + 0.5 * oracle::dot(x, ax) + quartic_ * r2 * r2;
  }
  LossGrad value_and_grad(std::span<const double> x) const override {
    auto g = multiply(a_, x);
    const double r2 = oracle::dot(x, x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += b_[i] + 4.0 * quartic_ * r2 * x[i];
    return {value(x), g};
  }
  // Hessian of the quadratic part only; exact when quartic is 0 or x = 0.
  std::vector<double> hvp(std::span<const double>, std::span<const double> v) const override {
    return multiply(a_, v);
  }

  const Matrix& a() const { return a_; }

 private:
  Matrix a_;
  std::vector<double> b_;
  double quartic_;
};

double model(std::span<const double> g, const Matrix& h, std::span<const double> s) {
  return oracle::dot(g, s) + 0.5 * oracle::dot(s, multiply(h, s));
}

// Minimizer of the model along -g within the radius.
std::vector<double> cauchy_point(std::span<const double> g, const Matrix& h, double radius) {
  const double gnorm = oracle::norm(g);
  const double ghg = oracle::dot(g, multiply(h, g));
  double tau = 1.0;
  if (ghg > 0.0) tau = std::min(1.0, gnorm * gnorm * gnorm / (radius * ghg));
  std::vector<double> s(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) s[i] = -tau * radius / gnorm * g[i];
  return s;
}

HvpOracle matrix_oracle(const Matrix& h) {
  return [&h](std::span<const double> v) { return multiply(h, v); };
}

const std::vector<TrainTuple>& stable_tuples() {
  static const TrajectorySet ts = generate(measure::reduced(Case::kStable, 0));
  static const std::vector<TrainTuple> tuples = train_tuples(ts);
  return tuples;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesThetaUnchanged) {
  std::vector<double> theta{1.0, -2.0, 3.0};
  AdamMoments moments(3);
  adam_step(theta, std::vector<double>(3, 0.0), moments, 1, {});
  EXPECT_EQ(theta, (std::vector<double>{1.0, -2.0, 3.0}));
}

TEST(Adam, FirstStepIsSignTimesRate) {
  std::vector<double> theta(4, 0.0);
  const std::vector<double> g{0.5, -3.0, 1e-3, 20.0};
  AdamMoments moments(4);
  const AdamConfig cfg;
  adam_step(theta, g, moments, 1, cfg);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(theta[i], -cfg.lr * g[i] / (std::abs(g[i]) + cfg.epsilon), 1e-18);
    EXPECT_NEAR(std::abs(theta[i]), cfg.lr, 1e-8);
  }
}

TEST(Adam, MatchesHandWrittenRecursion) {
  std::mt19937_64 rng(1);
  std::vector<double> theta = oracle::uniform(rng, 5, 1.0);
  std::vector<double> ref = theta, m(5, 0.0), v(5, 0.0);
  AdamMoments moments(5);
  const AdamConfig cfg{0.01, 0.8, 0.99, 1e-6};
  for (std::size_t t = 1; t <= 25; ++t) {
    const auto g = oracle::uniform(rng, 5, 2.0);
    adam_step(theta, g, moments, t, cfg);
    for (std::size_t i = 0; i < 5; ++i) {
      m[i] = 0.8 * m[i] + 0.2 * g[i];
      v[i] = 0.99 * v[i] + 0.01 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.8, t));
      const double vh = v[i] / (1.0 - std::pow(0.99, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-6);
    }
  }
  EXPECT_LT(oracle::max_abs_diff(theta, ref), 1e-14);
}

TEST(Adam, TinyRateIsIdentity) {
  std::vector<double> theta{0.25, -0.75};
  AdamMoments moments(2);
  adam_step(theta, std::vector<double>{5.0, -1.0}, moments, 1, {1e-300, 0.9, 0.999, 1e-8});
  EXPECT_EQ(theta, (std::vector<double>{0.25, -0.75}));
}

TEST(Adam, Contracts) {
  std::vector<double> theta(2, 0.0);
  AdamMoments moments(2);
  EXPECT_THROW(adam_step(theta, std::vector<double>(2), moments, 0, {}), ConfigError);
  EXPECT_THROW(adam_step(theta, std::vector<double>(3), moments, 1, {}), ConfigError);
  EXPECT_THROW(AdamConfig({0.0, 0.9, 0.999, 1e-8}).validate(), ConfigError);
  EXPECT_THROW(AdamConfig({1e-3, 1.0, 0.999, 1e-8}).validate(), ConfigError);
  EXPECT_THROW(AdamConfig({1e-3, 0.9, 0.999, 0.0}).validate(), ConfigError);
}

TEST(Steihaug, InteriorNewtonPoint) {
  const Matrix eye{{1.0, 0.0}, {0.0, 1.0}};
  const auto r = steihaug_cg(std::vector<double>{1.0, 0.0}, matrix_oracle(eye), 10.0, 0.5, 2);
  EXPECT_NEAR(r.step[0], -1.0, 1e-15);
  EXPECT_NEAR(r.step[1], 0.0, 1e-15);
  EXPECT_FALSE(r.boundary_hit);
  EXPECT_EQ(r.exit, CgExit::kConverged);
  EXPECT_NEAR(r.model_decrease, 0.5, 1e-15);
}

TEST(Steihaug, TruncatedAtBoundary) {
  const Matrix eye{{1.0, 0.0}, {0.0, 1.0}};
  const auto r = steihaug_cg(std::vector<double>{1.0, 0.0}, matrix_oracle(eye), 0.5, 0.5, 2);
  EXPECT_NEAR(r.step[0], -0.5, 1e-15);
  EXPECT_NEAR(r.step[1], 0.0, 1e-15);
  EXPECT_TRUE(r.boundary_hit);
  EXPECT_EQ(r.exit, CgExit::kBoundary);
}

TEST(Steihaug, NegativeCurvatureGoesToBoundary) {
  const Matrix h{{-1.0, 0.0}, {0.0, 2.0}};
  const auto r = steihaug_cg(std::vector<double>{1.0, 0.5}, matrix_oracle(h), 0.7, 0.5, 2);
  EXPECT_EQ(r.exit, CgExit::kNegativeCurvature);
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_NEAR(oracle::norm(r.step), 0.7, 1e-14);
  EXPECT_LT(model(std::vector<double>{1.0, 0.5}, h, r.step), 0.0);
}

TEST(Steihaug, ZeroGradient) {
  const Matrix eye{{1.0}};
  const auto r = steihaug_cg(std::vector<double>{0.0}, matrix_oracle(eye), 1.0, 0.5, 1);
  EXPECT_EQ(r.exit, CgExit::kZeroGradient);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_EQ(r.step, std::vector<double>{0.0});
}

TEST(Steihaug, NonFiniteOracle) {
  const HvpOracle bad = [](std::span<const double> v) {
    return std::vector<double>(v.size(), std::numeric_limits<double>::quiet_NaN());
  };
  const auto r = steihaug_cg(std::vector<double>{1.0, 1.0}, bad, 1.0, 0.5, 5);
  EXPECT_EQ(r.exit, CgExit::kNonFinite);
}

TEST(Steihaug, StopsAtForcingTolerance) {
  std::mt19937_64 rng(3);
  const auto h = random_symmetric(rng, 30, 40.0);
  const auto g = oracle::uniform(rng, 30, 1.0);
  const auto r = steihaug_cg(g, matrix_oracle(h), 1e6, 0.5, 30);
  ASSERT_EQ(r.exit, CgExit::kConverged);
  auto residual = multiply(h, r.step);
  for (std::size_t i = 0; i < 30; ++i) residual[i] += g[i];
  const double gnorm = oracle::norm(g);
  EXPECT_LE(oracle::norm(residual), std::min(0.5, std::sqrt(gnorm)) * gnorm * (1.0 + 1e-10));
}

TEST(Steihaug, RespectsRadiusAndBeatsCauchyPoint) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> log_radius(-3.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 15;
    const double shift = trial % 3 == 0 ? -1.0 : (trial % 3 == 1 ? 0.0 : 6.0);
    const auto h = random_symmetric(rng, n, shift);
    const auto g = oracle::uniform(rng, n, 1.0);
    const double radius = std::pow(10.0, log_radius(rng));
    const auto r = steihaug_cg(g, matrix_oracle(h), radius, 0.5, n);
    EXPECT_LE(oracle::norm(r.step), radius * (1.0 + 1e-12));
    const double m_step = model(g, h, r.step);
    const double m_cauchy = model(g, h, cauchy_point(g, h, radius));
    EXPECT_LE(m_step, m_cauchy + 1e-12 * std::abs(m_cauchy));
    EXPECT_NEAR(r.model_decrease, -m_step, 1e-10 * std::max(1.0, std::abs(m_step)));
  }
}

TEST(TrIteration, QuadraticSolvedInOneStepWithRhoOne) {
  std::mt19937_64 rng(5);
  const auto a = random_symmetric(rng, 8, 10.0);
  const auto b = oracle::uniform(rng, 8, 1.0);
  const Quadratic q(a, b);
  std::vector<double> theta(8, 0.0);
  TrustRegionState state{1e6, 0, 0};
  TrustRegionConfig cfg;
  cfg.radius_max = 1e7;
  cfg.cg_forcing_cap = 1e-12;
  const auto report = tr_iteration(theta, q, state, cfg, 1);
  EXPECT_TRUE(report.accepted);
  EXPECT_NEAR(report.rho, 1.0, 1e-10);
  const auto g = q.value_and_grad(theta).grad;
  EXPECT_LE(oracle::norm(g), 1e-9);
}

TEST(TrIteration, RhoIsOneOnQuadraticAndRadiusExpandsAtBoundary) {
  std::mt19937_64 rng(6);
  const Quadratic q(random_symmetric(rng, 6, 10.0), oracle::uniform(rng, 6, 1.0));
  std::vector<double> theta(6, 0.0);
  TrustRegionState state{1e-3, 0, 0};
  const TrustRegionConfig cfg;
  const auto report = tr_iteration(theta, q, state, cfg, 1);
  EXPECT_NEAR(report.rho, 1.0, 1e-10);
  EXPECT_TRUE(report.accepted);
  EXPECT_DOUBLE_EQ(state.radius, 2e-3);
  EXPECT_NEAR(oracle::norm(theta), 1e-3, 1e-15);

  TrustRegionState capped{80.0, 0, 0};
  std::vector<double> far(6, 0.0);
  const Quadratic steep(random_symmetric(rng, 6, 10.0), std::vector<double>(6, 1e6));
  tr_iteration(far, steep, capped, cfg, 1);
  EXPECT_DOUBLE_EQ(capped.radius, cfg.radius_max);
}

TEST(TrIteration, RejectedStepKeepsThetaAndShrinks) {
  const Matrix eye{{1.0, 0.0}, {0.0, 1.0}};
  const Quadratic q(eye, {-100.0, 0.0}, 10.0);
  std::vector<double> theta(2, 0.0);
  TrustRegionState state{100.0, 0, 0};
  const TrustRegionConfig cfg;
  const auto report = tr_iteration(theta, q, state, cfg, 1);
  EXPECT_FALSE(report.accepted);
  EXPECT_LT(report.rho, cfg.eta);
  EXPECT_EQ(theta, (std::vector<double>{0.0, 0.0}));
  EXPECT_DOUBLE_EQ(state.radius, 25.0);
  EXPECT_EQ(report.radius, 25.0);
}

TEST(TrIteration, OracleAccounting) {
  std::mt19937_64 rng(7);
  const Quadratic q(random_symmetric(rng, 10, 1.0), oracle::uniform(rng, 10, 1.0));
  std::vector<double> theta(10, 0.0);
  TrustRegionState state;
  const TrustRegionConfig cfg;
  std::size_t hvps = 0;
  for (std::size_t it = 1; it <= 15; ++it) {
    const double before = q.value(theta);
    const auto report = tr_iteration(theta, q, state, cfg, it);
    hvps += report.cg_iters;
    EXPECT_EQ(report.grad_calls, it);
    EXPECT_EQ(report.hvp_calls, hvps);
    if (report.accepted) EXPECT_LT(q.value(theta), before);
  }
}

TEST(TrIteration, NonFiniteLossThrows) {
  const Quadratic q({{1.0}}, {std::numeric_limits<double>::infinity()});
  std::vector<double> theta{1.0};
  TrustRegionState state;
  EXPECT_THROW(tr_iteration(theta, q, state, {}, 1), NumericalError);
}

TEST(TrustRegionConfig, Validation) {
  TrustRegionConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.eta = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.radius_max = 0.5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.shrink_factor = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(RunOptimizer, ZeroBudget) {
  const auto initial = init_params({4, 1, false, 32, 10}, 1);
  OptimizerSpec spec;
  spec.budget = 0;
  const auto r = run_optimizer(spec, initial, stable_tuples(), 1);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(std::vector<double>(r.final_params.values().begin(), r.final_params.values().end()),
            std::vector<double>(initial.values().begin(), initial.values().end()));
}

TEST(RunOptimizer, TraceLengthCountersAndDeterminism) {
  const auto initial = init_params({4, 1, false, 32, 10}, 2);
  for (const auto method : {Method::kTrustRegion, Method::kAdam}) {
    OptimizerSpec spec;
    spec.method = method;
    spec.budget = 12;
    const auto a = run_optimizer(spec, initial, stable_tuples(), 2);
    const auto b = run_optimizer(spec, initial, stable_tuples(), 2);
    ASSERT_EQ(a.trace.size(), 12u);
    for (std::size_t i = 0; i < 12; ++i) {
      EXPECT_EQ(a.trace[i].iteration, i + 1);
      EXPECT_EQ(a.trace[i].minibatch_loss, b.trace[i].minibatch_loss);
      EXPECT_EQ(a.trace[i].grad_calls, i + 1);
      if (i > 0) EXPECT_GE(a.trace[i].hvp_calls, a.trace[i - 1].hvp_calls);
      if (method == Method::kAdam) EXPECT_EQ(a.trace[i].hvp_calls, 0u);
    }
    EXPECT_EQ(std::vector<double>(a.final_params.values().begin(), a.final_params.values().end()),
              std::vector<double>(b.final_params.values().begin(), b.final_params.values().end()));
  }
}

TEST(RunOptimizer, EvaluationCadenceAndBestParameters) {
  const auto initial = init_params({4, 1, false, 32, 10}, 3);
  OptimizerSpec spec;
  spec.method = Method::kAdam;
  spec.budget = 25;
  spec.eval_every = 10;
  std::vector<std::size_t> seen;
  const std::vector<double> scores{3.0, 1.0, 2.0};
  const auto r = run_optimizer(spec, initial, stable_tuples(), 3, [&](const FdNetParams&, const StepReport& rep) {
    seen.push_back(rep.iteration);
    return std::optional<double>(scores[seen.size() - 1]);
  });
  EXPECT_EQ(seen, (std::vector<std::size_t>{10, 20, 25}));
  EXPECT_EQ(r.best_iteration, 20u);
  EXPECT_EQ(*r.best_score, 1.0);
}

TEST(RunOptimizer, NonFiniteLossAborts) {
  const std::vector<double> input(32, 1.0);
  std::vector<double> target(32, 1.0);
  target[3] = std::numeric_limits<double>::infinity();
  const std::vector<TrainTuple> tuples(4, TrainTuple{input, target});
  OptimizerSpec spec;
  spec.batch_size = 2;
  spec.budget = 5;
  const auto initial = init_params({2, 1, false, 32, 10}, 0);
  const auto r = run_optimizer(spec, initial, tuples, 0);
  EXPECT_TRUE(r.aborted);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_FALSE(r.abort_reason.empty());
}

TEST(RunOptimizer, TrustRegionReducesLossOnHeatData) {
  const auto initial = init_params({8, 1, false, 32, 10}, 4);
  OptimizerSpec spec;
  spec.budget = 40;
  const auto r = run_optimizer(spec, initial, stable_tuples(), 4);
  const auto all = Batch::from_tuples(stable_tuples());
  EXPECT_LT(loss(r.final_params, all), 1e-3 * loss(initial, all));
}
