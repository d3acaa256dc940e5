#include "fdnet/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "fdnet/checkpoint.hpp"
#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"

namespace fdnet {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool out_of_bounds(std::span<const double> u) {
  for (double v : u) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceBound) return true;
  }
  return false;
}

}  // namespace

RolloutResult predict_rollout(const CompiledNet& net, std::span<const double> u0, std::size_t n_steps,
                              bool keep_intermediates) {
  if (n_steps == 0) throw ConfigError("predict_rollout needs at least one step");
  if (u0.size() != net.points()) throw ConfigError("predict_rollout: input length does not match the grid");
  RolloutResult result;
  result.final_state.assign(u0.begin(), u0.end());
  std::vector<double> scratch;
  for (std::size_t step = 1; step <= n_steps; ++step) {
    net.forward_inplace(result.final_state, scratch);
    if (keep_intermediates) result.intermediates.push_back(result.final_state);
    if (out_of_bounds(result.final_state)) {
      result.diverged = true;
      result.diverged_at = step;
      break;
    }
  }
  return result;
}

RolloutResult predict_rollout(const FdNetParams& params, std::span<const double> u0, std::size_t n_steps,
                              bool keep_intermediates) {
  return predict_rollout(CompiledNet(params), u0, n_steps, keep_intermediates);
}

std::size_t full_horizon(const TrajectorySet& ts) { return ts.time_count() - 1; }

std::size_t multi_step_tau(const TrajectorySet& ts) {
  const std::size_t tau = ts.spec().kind == Case::kUnstable ? 3 : 10;
  return std::min(tau, full_horizon(ts));
}

namespace {

// Shared tau'-step error loop; `advance` maps (IC, start index, step, state) to the next state.
template <class Advance>
EvalResult tau_error(const TrajectorySet& ts, std::size_t tau_prime, std::size_t iteration, Advance&& advance) {
  if (tau_prime == 0 || tau_prime > full_horizon(ts)) {
    throw ConfigError("tau' must be in [1, " + std::to_string(full_horizon(ts)) + "]");
  }
  const std::size_t m_count = ts.point_count();
  const std::size_t starts = ts.time_count() - tau_prime;
  std::vector<double> state(m_count);
  double total = 0.0;
  std::size_t count = 0;
  for (auto s : ts.test_indices()) {
    for (std::size_t n = 0; n < starts; ++n) {
      const auto u0 = ts.state(s, n);
      std::copy(u0.begin(), u0.end(), state.begin());
      for (std::size_t step = 1; step <= tau_prime; ++step) {
        advance(s, n, step, state);
        if (out_of_bounds(state)) return EvalResult{tau_prime, kInf, iteration, true};
      }
      const auto target = ts.state(s, n + tau_prime);
      for (std::size_t m = 0; m < m_count; ++m) {
        const double r = state[m] - target[m];
        total += r * r;
      }
      count += m_count;
    }
  }
  return EvalResult{tau_prime, total / static_cast<double>(count), iteration, false};
}

}  // namespace

EvalResult test_error(const CompiledNet& net, const TrajectorySet& ts, std::size_t tau_prime,
                      std::size_t iteration) {
  if (net.points() != ts.point_count()) throw ConfigError("network grid does not match the dataset");
  std::vector<double> scratch;
  return tau_error(ts, tau_prime, iteration,
                   [&](std::size_t, std::size_t, std::size_t, std::vector<double>& state) {
                     net.forward_inplace(state, scratch);
                   });
}

EvalResult test_error(const FdNetParams& params, const TrajectorySet& ts, std::size_t tau_prime,
                      std::size_t iteration) {
  return test_error(CompiledNet(params), ts, tau_prime, iteration);
}

EulerConfig euler_config(const TrajectorySet& ts) {
  return EulerConfig::from(ts.spec().beta, ts.spec().dt, ts.spec().dx);
}

EvalResult euler_baseline_error(const TrajectorySet& ts, const EulerConfig& config, std::size_t tau_prime,
                                EulerBoundary boundary) {
  const std::size_t last = ts.point_count() - 1;
  return tau_error(ts, tau_prime, 0,
                   [&](std::size_t s, std::size_t n, std::size_t step, std::vector<double>& state) {
                     state = euler_step(state, config);
                     if (boundary == EulerBoundary::kFromData) {
                       const auto measured = ts.state(s, n + step);
                       state[0] = measured[0];
                       state[last] = measured[last];
                     }
                   });
}

std::size_t default_budget(Method method, Case c) {
  if (method == Method::kAdam) return 12000;
  return c == Case::kUnstable ? 300 : 100;
}

std::size_t default_eval_every(Method method) { return method == Method::kAdam ? 100 : 1; }

void RunConfig::validate(const TrajectorySet& ts) const {
  net.validate();
  optimizer.validate();
  if (!(init_gain > 0.0) || !std::isfinite(init_gain)) throw ConfigError("init gain must be positive");
  if (net.with_forcing != (ts.spec().kind == Case::kForcing)) {
    throw ConfigError(std::string("network forcing ") + (net.with_forcing ? "enabled" : "disabled") +
                      " does not match the '" + std::string(to_string(ts.spec().kind)) + "' dataset");
  }
  if (net.points != ts.point_count()) {
    throw ConfigError("network grid has " + std::to_string(net.points) + " points, dataset has " +
                      std::to_string(ts.point_count()));
  }
  if (optimizer.batch_size > ts.train_indices().size() * (ts.time_count() - 1)) {
    throw ConfigError("batch size exceeds the number of training tuples");
  }
}

std::string metrics_csv(const RunSummary& summary, Method method) {
  std::map<std::size_t, const EvalRow*> evals;
  for (const auto& row : summary.evaluations) evals[row.iteration] = &row;
  std::ostringstream out;
  out << "iteration,grad_calls,hvp_calls,minibatch_mse,radius,accepted,test_mse_1,test_mse_multi,test_mse_full\n";
  for (const auto& r : summary.trace) {
    out << r.iteration << ',' << r.grad_calls << ',' << r.hvp_calls << ',' << io::format_double(r.minibatch_loss)
        << ',';
    if (method == Method::kTrustRegion) {
      out << io::format_double(r.radius) << ',' << (r.accepted ? 1 : 0);
    } else {
      out << ',';
    }
    out << ',';
    if (auto it = evals.find(r.iteration); it != evals.end()) {
      out << io::format_double(it->second->mse_one) << ',' << io::format_double(it->second->mse_multi) << ','
          << io::format_double(it->second->mse_full);
    } else {
      out << ",,";
    }
    out << '\n';
  }
  return out.str();
}

namespace {

nlohmann::json eval_json(const EvalRow& row, std::size_t tau_multi, std::size_t tau_full) {
  nlohmann::json j;
  j["iteration"] = row.iteration;
  // JSON has no infinity; divergent errors are written as the string "inf".
  const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(io::format_double(v)); };
  j["tau_1"] = num(row.mse_one);
  j["tau_multi"] = num(row.mse_multi);
  j["tau_full"] = num(row.mse_full);
  j["tau_multi_value"] = tau_multi;
  j["tau_full_value"] = tau_full;
  return j;
}

nlohmann::json config_json(const TrajectorySet& ts, const RunConfig& config) {
  const auto& opt = config.optimizer;
  nlohmann::json j;
  j["dataset"] = config.dataset_label;
  j["dataset_fingerprint"] = ts.fingerprint();
  j["case"] = std::string(to_string(ts.spec().kind));
  j["seed"] = config.seed;
  j["net"] = {{"filters", config.net.filters},
              {"blocks", config.net.blocks},
              {"with_forcing", config.net.with_forcing},
              {"points", config.net.points},
              {"n_basis", config.net.n_basis},
              {"param_count", param_count(config.net)}};
  j["optimizer"] = {{"method", std::string(to_string(opt.method))},
                    {"budget", opt.budget},
                    {"batch_size", opt.batch_size},
                    {"eval_every", opt.eval_every}};
  if (opt.method == Method::kAdam) {
    j["optimizer"]["adam"] = {{"lr", opt.adam.lr},
                              {"beta1", opt.adam.beta1},
                              {"beta2", opt.adam.beta2},
                              {"epsilon", opt.adam.epsilon}};
  } else {
    const auto& tr = opt.trust_region;
    j["optimizer"]["trust_region"] = {
        {"initial_radius", tr.initial_radius},   {"radius_max", tr.radius_max},
        {"eta", tr.eta},                         {"shrink_threshold", tr.shrink_threshold},
        {"expand_threshold", tr.expand_threshold}, {"shrink_factor", tr.shrink_factor},
        {"expand_factor", tr.expand_factor},     {"cg_forcing_cap", tr.cg_forcing_cap},
        {"cg_max_iters", tr.cg_max_iters == 0 ? param_count(config.net) : tr.cg_max_iters},
        {"ratio_evaluated_on", "same mini-batch as gradient and Hessian"}};
  }
  j["loss_normalization"] = "mean over batch_size * points residuals";
  j["test_error_normalization"] = "mean over test ICs * start times * points residuals";
  j["divergence_bound"] = kDivergenceBound;
  j["init"] = "uniform [-g s, g s]; s = (3 * in_channels)^-1/2 kernels, (2F)^-1/2 mix, n_basis^-1/2 forcing";
  j["init_gain"] = config.init_gain;
  return j;
}

}  // namespace

RunSummary run_experiment(const TrajectorySet& ts, const RunConfig& config) {
  config.validate(ts);
  const auto started = std::chrono::steady_clock::now();
  const std::size_t tau_multi = multi_step_tau(ts);
  const std::size_t tau_full = full_horizon(ts);

  std::vector<EvalRow> evaluations;
  const EvalCallback on_eval = [&](const FdNetParams& params, const StepReport& report) -> std::optional<double> {
    const CompiledNet net(params);
    EvalRow row;
    row.iteration = report.iteration;
    row.mse_one = test_error(net, ts, 1).mse;
    row.mse_multi = test_error(net, ts, tau_multi).mse;
    row.mse_full = test_error(net, ts, tau_full).mse;
    evaluations.push_back(row);
    return row.mse_full;
  };

  const auto tuples = train_tuples(ts);
  auto initial = init_params(config.net, config.seed, config.init_gain);
  auto trained = run_optimizer(config.optimizer, std::move(initial), tuples, config.seed, on_eval);

  RunSummary summary{std::move(trained.trace),
                     std::move(evaluations),
                     tau_multi,
                     tau_full,
                     {},
                     {},
                     trained.best_iteration,
                     trained.aborted,
                     trained.abort_reason,
                     0.0,
                     std::move(trained.final_params),
                     std::move(trained.best_params)};

  if (!summary.evaluations.empty()) {
    summary.final = summary.evaluations.back();
    summary.minimum = {0, kInf, kInf, kInf};
    for (const auto& row : summary.evaluations) {
      summary.minimum.mse_one = std::min(summary.minimum.mse_one, row.mse_one);
      summary.minimum.mse_multi = std::min(summary.minimum.mse_multi, row.mse_multi);
      summary.minimum.mse_full = std::min(summary.minimum.mse_full, row.mse_full);
    }
    summary.minimum.iteration = summary.best_iteration;
  }
  summary.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (!config.output_dir.empty()) {
    const auto& dir = config.output_dir;
    std::filesystem::create_directories(dir);
    io::write_text_atomic(dir / "metrics.csv", metrics_csv(summary, config.optimizer.method));

    nlohmann::json j;
    j["status"] = summary.aborted ? "aborted" : "completed";
    if (summary.aborted) j["abort_reason"] = summary.abort_reason;
    j["iterations_run"] = summary.trace.size();
    j["grad_calls"] = summary.trace.empty() ? 0 : summary.trace.back().grad_calls;
    j["hvp_calls"] = summary.trace.empty() ? 0 : summary.trace.back().hvp_calls;
    if (!summary.evaluations.empty()) {
      j["min_test_error"] = eval_json(summary.minimum, tau_multi, tau_full);
      j["final_test_error"] = eval_json(summary.final, tau_multi, tau_full);
    }
    j["best_iteration"] = summary.best_iteration;
    j["minimum_from"] = "evaluated iterations only (every eval_every iterations and the last)";
    j["wall_clock_seconds"] = summary.wall_seconds;
    j["config"] = config_json(ts, config);
    io::write_text_atomic(dir / "summary.json", j.dump(2) + "\n");

    if (config.write_checkpoints) {
      const std::size_t last_iteration = summary.trace.empty() ? 0 : summary.trace.back().iteration;
      save_checkpoint({summary.final_params, config.seed, last_iteration, ts.fingerprint()}, dir / "final");
      save_checkpoint({summary.best_params, config.seed, summary.best_iteration, ts.fingerprint()}, dir / "best");
    }
  }
  return summary;
}

}  // namespace fdnet
