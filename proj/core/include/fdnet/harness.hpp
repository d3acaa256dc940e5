#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdnet/dataset.hpp"
#include "fdnet/heat.hpp"
#include "fdnet/model.hpp"
#include "fdnet/optim.hpp"

namespace fdnet {

// Rollouts whose sup-norm exceeds this are treated as divergent.
inline constexpr double kDivergenceBound = 1e12;

struct RolloutResult {
  std::vector<double> final_state;
  std::vector<std::vector<double>> intermediates;  // state after each step, when requested
  bool diverged = false;
  std::size_t diverged_at = 0;  // 1-based step index
};

// Feeds each prediction back as the next input for n_steps network applications.
RolloutResult predict_rollout(const CompiledNet& net, std::span<const double> u0, std::size_t n_steps,
                              bool keep_intermediates = false);
RolloutResult predict_rollout(const FdNetParams& params, std::span<const double> u0, std::size_t n_steps,
                              bool keep_intermediates = false);

struct EvalResult {
  std::size_t tau_prime = 0;
  double mse = 0.0;  // +inf when any rollout diverged
  std::size_t iteration = 0;
  bool diverged = false;
};

// Number of stored steps covering the whole horizon (T / dt).
std::size_t full_horizon(const TrajectorySet& ts);
// 3 for the unstable case, 10 otherwise (capped at the full horizon).
std::size_t multi_step_tau(const TrajectorySet& ts);

// Mean squared error of tau'-step predictions over every test IC and every
// start time 0, dt, ..., T - tau' dt. tau' = T/dt is the full-horizon error.
EvalResult test_error(const CompiledNet& net, const TrajectorySet& ts, std::size_t tau_prime,
                      std::size_t iteration = 0);
EvalResult test_error(const FdNetParams& params, const TrajectorySet& ts, std::size_t tau_prime,
                      std::size_t iteration = 0);

enum class EulerBoundary {
  kHeld,      // boundary nodes keep their initial values (euler_step as is)
  kFromData,  // boundary nodes are reset to the measured values after each step
};

EulerConfig euler_config(const TrajectorySet& ts);

// The same error as test_error with forward Euler in place of the network.
EvalResult euler_baseline_error(const TrajectorySet& ts, const EulerConfig& config, std::size_t tau_prime,
                                EulerBoundary boundary = EulerBoundary::kFromData);

std::size_t default_budget(Method method, Case c);
std::size_t default_eval_every(Method method);

struct RunConfig {
  NetConfig net;
  OptimizerSpec optimizer;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::string dataset_label;  // echoed into summary.json
  double init_gain = kInitGain;
  bool write_checkpoints = true;

  void validate(const TrajectorySet& ts) const;
};

struct EvalRow {
  std::size_t iteration = 0;
  double mse_one = 0.0;
  double mse_multi = 0.0;
  double mse_full = 0.0;
};

struct RunSummary {
  std::vector<StepReport> trace;
  std::vector<EvalRow> evaluations;
  std::size_t tau_multi = 0;
  std::size_t tau_full = 0;
  EvalRow minimum;  // per-column minimum over evaluations
  EvalRow final;    // last evaluation
  std::size_t best_iteration = 0;  // argmin of the full-horizon error
  bool aborted = false;
  std::string abort_reason;
  double wall_seconds = 0.0;
  FdNetParams final_params;
  FdNetParams best_params;
};

// Trains one network and evaluates it at the configured cadence and at the
// end. Writes metrics.csv, summary.json and best/ and final/ checkpoints when
// output_dir is set.
RunSummary run_experiment(const TrajectorySet& ts, const RunConfig& config);

// metrics.csv text for a finished run; deterministic in the run's inputs.
std::string metrics_csv(const RunSummary& summary, Method method);

}  // namespace fdnet
