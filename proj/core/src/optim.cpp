#include "fdnet/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fdnet/errors.hpp"

namespace fdnet {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Roots tau of |p + tau d| = radius, smaller first.
std::pair<double, double> boundary_roots(std::span<const double> p, std::span<const double> d, double radius) {
  const double pd = dot(p, d);
  const double dd = dot(d, d);
  const double pp = dot(p, p);
  const double disc = std::sqrt(std::max(0.0, pd * pd - dd * (pp - radius * radius)));
  return {(-pd - disc) / dd, (-pd + disc) / dd};
}

}  // namespace

FdNetParams BatchLoss::wrap(std::span<const double> x) const {
  return FdNetParams(config_, std::vector<double>(x.begin(), x.end()));
}

double BatchLoss::value(std::span<const double> x) const { return loss(wrap(x), batch_); }

LossGrad BatchLoss::value_and_grad(std::span<const double> x) const { return loss_and_grad(wrap(x), batch_); }

std::vector<double> BatchLoss::hvp(std::span<const double> x, std::span<const double> v) const {
  return fdnet::hvp(wrap(x), v, batch_);
}

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("ADAM learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("ADAM betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("ADAM epsilon must be positive");
}

void adam_step(std::span<double> theta, std::span<const double> grad, AdamMoments& moments, std::size_t iteration,
               const AdamConfig& config) {
  if (grad.size() != theta.size() || moments.first.size() != theta.size() ||
      moments.second.size() != theta.size()) {
    throw ConfigError("adam_step: shape mismatch");
  }
  if (iteration == 0) throw ConfigError("adam_step: iteration counts from 1");
  const auto t = static_cast<double>(iteration);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    moments.first[i] = config.beta1 * moments.first[i] + (1.0 - config.beta1) * grad[i];
    moments.second[i] = config.beta2 * moments.second[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double m_hat = moments.first[i] / correction1;
    const double v_hat = moments.second[i] / correction2;
    theta[i] -= config.lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void TrustRegionConfig::validate() const {
  if (!(initial_radius > 0.0) || !(radius_max >= initial_radius)) {
    throw ConfigError("trust region needs 0 < initial radius <= max radius");
  }
  if (!(eta > 0.0 && eta <= shrink_threshold && shrink_threshold < expand_threshold && expand_threshold < 1.0)) {
    throw ConfigError("trust region needs 0 < eta <= shrink threshold < expand threshold < 1");
  }
  if (!(shrink_factor > 0.0 && shrink_factor < 1.0) || !(expand_factor > 1.0)) {
    throw ConfigError("trust region shrink factor must be in (0, 1) and expand factor above 1");
  }
  if (!(cg_forcing_cap > 0.0 && cg_forcing_cap < 1.0)) throw ConfigError("CG forcing cap must be in (0, 1)");
}

std::string_view to_string(CgExit exit) {
  switch (exit) {
    case CgExit::kConverged:
      return "converged";
    case CgExit::kNegativeCurvature:
      return "negative_curvature";
    case CgExit::kBoundary:
      return "boundary";
    case CgExit::kMaxIterations:
      return "max_iterations";
    case CgExit::kNonFinite:
      return "non_finite";
    case CgExit::kZeroGradient:
      return "zero_gradient";
  }
  return "unknown";
}

SteihaugResult steihaug_cg(std::span<const double> grad, const HvpOracle& hvp, double radius, double forcing_cap,
                           std::size_t max_iters) {
  const std::size_t n = grad.size();
  SteihaugResult result;
  result.step.assign(n, 0.0);
  auto& s = result.step;
  std::vector<double> hs(n, 0.0);
  std::vector<double> r(grad.begin(), grad.end());
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = -grad[i];

  double rr = dot(r, r);
  const double gnorm = std::sqrt(rr);
  if (gnorm == 0.0) {
    result.exit = CgExit::kZeroGradient;
    return result;
  }
  const double tolerance = std::min(forcing_cap, std::sqrt(gnorm)) * gnorm;

  const auto model = [&](std::span<const double> step, std::span<const double> h_step) {
    return dot(grad, step) + 0.5 * dot(step, h_step);
  };
  const auto move = [&](double tau, std::span<const double> hd) {
    for (std::size_t i = 0; i < n; ++i) {
      s[i] += tau * d[i];
      hs[i] += tau * hd[i];
    }
  };

  result.exit = CgExit::kMaxIterations;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const auto hd = hvp(d);
    ++result.iterations;
    if (hd.size() != n || !all_finite(hd)) {
      result.exit = CgExit::kNonFinite;
      return result;
    }
    const double dhd = dot(d, hd);
    if (dhd <= 0.0) {
      // Along d the model is concave: go to whichever boundary point is lower.
      const auto [lo, hi] = boundary_roots(s, d, radius);
      const double slope = dot(grad, d) + dot(d, hs);
      const auto change = [&](double tau) { return tau * slope + 0.5 * tau * tau * dhd; };
      move(change(lo) < change(hi) ? lo : hi, hd);
      result.boundary_hit = true;
      result.exit = CgExit::kNegativeCurvature;
      break;
    }
    const double alpha = rr / dhd;
    double next_norm2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = s[i] + alpha * d[i];
      next_norm2 += v * v;
    }
    if (std::sqrt(next_norm2) >= radius) {
      move(boundary_roots(s, d, radius).second, hd);
      result.boundary_hit = true;
      result.exit = CgExit::kBoundary;
      break;
    }
    move(alpha, hd);
    for (std::size_t i = 0; i < n; ++i) r[i] += alpha * hd[i];
    const double rr_next = dot(r, r);
    if (std::sqrt(rr_next) <= tolerance) {
      result.exit = CgExit::kConverged;
      break;
    }
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i] + beta * d[i];
    rr = rr_next;
  }
  result.model_decrease = -model(s, hs);
  return result;
}

StepReport tr_iteration(std::vector<double>& theta, const Objective& objective, TrustRegionState& state,
                        const TrustRegionConfig& config, std::size_t iteration) {
  StepReport report;
  report.iteration = iteration;

  auto [f0, g] = objective.value_and_grad(theta);
  ++state.grad_calls;
  report.minibatch_loss = f0;
  if (!std::isfinite(f0) || !all_finite(g)) {
    throw NumericalError("non-finite loss or gradient at iteration " + std::to_string(iteration));
  }

  const std::size_t max_cg = config.cg_max_iters == 0 ? theta.size() : config.cg_max_iters;
  const HvpOracle oracle = [&](std::span<const double> v) { return objective.hvp(theta, v); };
  const auto cg = steihaug_cg(g, oracle, state.radius, config.cg_forcing_cap, max_cg);
  state.hvp_calls += cg.iterations;
  report.cg_iters = cg.iterations;

  if (cg.exit == CgExit::kZeroGradient) {
    report.rho = 0.0;
    report.radius = state.radius;
    report.grad_calls = state.grad_calls;
    report.hvp_calls = state.hvp_calls;
    return report;
  }

  std::vector<double> trial(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) trial[i] = theta[i] + cg.step[i];
  const double f1 = cg.exit == CgExit::kNonFinite ? std::numeric_limits<double>::quiet_NaN() : objective.value(trial);
  const double predicted = cg.model_decrease;
  const double actual = f0 - f1;

  double rho = -std::numeric_limits<double>::infinity();
  if (std::isfinite(f1) && std::isfinite(predicted) && predicted > 0.0) rho = actual / predicted;
  report.rho = rho;

  if (rho >= config.eta) {
    theta.swap(trial);
    report.accepted = true;
  }
  if (!(rho >= config.shrink_threshold)) {
    state.radius *= config.shrink_factor;
  } else if (rho > config.expand_threshold && cg.boundary_hit) {
    state.radius = std::min(config.expand_factor * state.radius, config.radius_max);
  }

  report.radius = state.radius;
  report.grad_calls = state.grad_calls;
  report.hvp_calls = state.hvp_calls;
  return report;
}

std::string_view to_string(Method method) { return method == Method::kAdam ? "adam" : "tr"; }

void OptimizerSpec::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (eval_every == 0) throw ConfigError("evaluation cadence must be at least 1");
  if (method == Method::kAdam) {
    adam.validate();
  } else {
    trust_region.validate();
  }
}

TrainResult run_optimizer(const OptimizerSpec& spec, FdNetParams initial, std::span<const TrainTuple> tuples,
                          std::uint64_t seed, const EvalCallback& on_eval) {
  spec.validate();
  TrainResult result{{}, initial, initial, 0, std::nullopt, false, {}};
  if (spec.budget == 0) return result;

  const NetConfig config = initial.config();
  MinibatchSampler sampler(tuples.size(), seed);
  std::vector<double> theta(initial.values().begin(), initial.values().end());
  TrustRegionState tr_state{spec.trust_region.initial_radius, 0, 0};
  AdamMoments moments(theta.size());
  std::size_t adam_grad_calls = 0;
  result.trace.reserve(spec.budget);

  for (std::size_t it = 1; it <= spec.budget; ++it) {
    const auto indices = sampler.sample(spec.batch_size);
    const Batch batch = Batch::from_tuples(tuples, indices);
    const BatchLoss objective(config, batch);

    StepReport report;
    try {
      if (spec.method == Method::kTrustRegion) {
        report = tr_iteration(theta, objective, tr_state, spec.trust_region, it);
      } else {
        auto [f, g] = objective.value_and_grad(theta);
        ++adam_grad_calls;
        if (!std::isfinite(f) || !all_finite(g)) {
          throw NumericalError("non-finite loss or gradient at iteration " + std::to_string(it));
        }
        adam_step(theta, g, moments, it, spec.adam);
        report.iteration = it;
        report.minibatch_loss = f;
        report.rho = std::numeric_limits<double>::quiet_NaN();
        report.radius = std::numeric_limits<double>::quiet_NaN();
        report.accepted = true;
        report.grad_calls = adam_grad_calls;
        report.hvp_calls = 0;
      }
    } catch (const NumericalError& e) {
      result.aborted = true;
      result.abort_reason = e.what();
      break;
    }
    result.trace.push_back(report);

    if (on_eval && (it % spec.eval_every == 0 || it == spec.budget)) {
      FdNetParams current(config, theta);
      const auto score = on_eval(current, report);
      if (score && (!result.best_score || *score < *result.best_score)) {
        result.best_score = score;
        result.best_iteration = it;
        result.best_params = std::move(current);
      }
    }
  }

  result.final_params = FdNetParams(config, std::move(theta));
  if (!result.best_score) {
    result.best_params = result.final_params;
    result.best_iteration = result.trace.empty() ? 0 : result.trace.back().iteration;
  }
  return result;
}

}  // namespace fdnet
