#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/model.hpp"

namespace fdnet {

// Twice-differentiable objective seen by the trust-region solver.
class Objective {
 public:
  virtual ~Objective() = default;
  virtual double value(std::span<const double> x) const = 0;
  virtual LossGrad value_and_grad(std::span<const double> x) const = 0;
  virtual std::vector<double> hvp(std::span<const double> x, std::span<const double> v) const = 0;
};

// Mini-batch MSE of an FD-Net as a function of its flat parameter vector.
class BatchLoss final : public Objective {
 public:
  BatchLoss(NetConfig config, const Batch& batch) : config_(config), batch_(batch) {}

  double value(std::span<const double> x) const override;
  LossGrad value_and_grad(std::span<const double> x) const override;
  std::vector<double> hvp(std::span<const double> x, std::span<const double> v) const override;

 private:
  FdNetParams wrap(std::span<const double> x) const;

  NetConfig config_;
  const Batch& batch_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamMoments {
  std::vector<double> first;
  std::vector<double> second;

  explicit AdamMoments(std::size_t n = 0) : first(n, 0.0), second(n, 0.0) {}
};

// Bias-corrected ADAM update; `iteration` counts from 1.
void adam_step(std::span<double> theta, std::span<const double> grad, AdamMoments& moments, std::size_t iteration,
               const AdamConfig& config);

struct TrustRegionConfig {
  double initial_radius = 1.0;
  double radius_max = 100.0;
  double eta = 1e-4;               // accept iff rho >= eta
  double shrink_threshold = 0.25;  // rho below this shrinks the radius
  double expand_threshold = 0.75;  // rho above this (on the boundary) expands it
  double shrink_factor = 0.25;
  double expand_factor = 2.0;
  double cg_forcing_cap = 0.5;     // CG stops at |r| <= min(cap, sqrt|g|) |g|
  std::size_t cg_max_iters = 0;    // 0 means the parameter count

  void validate() const;
};

struct TrustRegionState {
  double radius = 1.0;
  std::size_t grad_calls = 0;
  std::size_t hvp_calls = 0;
};

enum class CgExit { kConverged, kNegativeCurvature, kBoundary, kMaxIterations, kNonFinite, kZeroGradient };

std::string_view to_string(CgExit exit);

struct SteihaugResult {
  std::vector<double> step;
  std::size_t iterations = 0;  // Hessian-vector products used
  bool boundary_hit = false;
  CgExit exit = CgExit::kConverged;
  double model_decrease = 0.0;  // m(0) - m(step), m(s) = g.s + s.Hs / 2
};

using HvpOracle = std::function<std::vector<double>(std::span<const double>)>;

// Steihaug-Toint truncated CG for min g.s + s.Hs/2 subject to |s| <= radius.
SteihaugResult steihaug_cg(std::span<const double> grad, const HvpOracle& hvp, double radius, double forcing_cap,
                           std::size_t max_iters);

struct StepReport {
  std::size_t iteration = 0;
  double minibatch_loss = 0.0;
  double rho = 0.0;
  double radius = 0.0;
  std::size_t cg_iters = 0;
  bool accepted = false;
  std::size_t grad_calls = 0;
  std::size_t hvp_calls = 0;
};

// One trust-region Newton-CG iteration on a fixed objective. Counts one
// gradient call plus one call per Hessian-vector product.
StepReport tr_iteration(std::vector<double>& theta, const Objective& objective, TrustRegionState& state,
                        const TrustRegionConfig& config, std::size_t iteration);

enum class Method { kTrustRegion, kAdam };

std::string_view to_string(Method method);

struct OptimizerSpec {
  Method method = Method::kTrustRegion;
  AdamConfig adam;
  TrustRegionConfig trust_region;
  std::size_t budget = 100;  // iterations
  std::size_t batch_size = 64;
  std::size_t eval_every = 1;

  void validate() const;
};

// Called after evaluated iterations; a returned score (lower is better)
// selects the best parameters.
using EvalCallback = std::function<std::optional<double>(const FdNetParams&, const StepReport&)>;

struct TrainResult {
  std::vector<StepReport> trace;
  FdNetParams final_params;
  FdNetParams best_params;
  std::size_t best_iteration = 0;
  std::optional<double> best_score;
  bool aborted = false;
  std::string abort_reason;
};

// Trains from `initial` on mini-batches drawn from `tuples` with a stream
// derived from `seed`. Non-finite losses end the run early with aborted set.
TrainResult run_optimizer(const OptimizerSpec& spec, FdNetParams initial, std::span<const TrainTuple> tuples,
                          std::uint64_t seed, const EvalCallback& on_eval = {});

}  // namespace fdnet
