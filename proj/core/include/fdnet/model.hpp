#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fdnet/dataset.hpp"

namespace fdnet {

// Seven taps per (output, input) channel pair: a 3-tap interior stencil, a
// 2-tap stencil at x = 0 and a 2-tap stencil at the last grid point.
inline constexpr std::size_t kKernelSize = 7;

enum KernelTap : std::size_t {
  kInteriorLeft = 0,
  kInteriorCenter = 1,
  kInteriorRight = 2,
  kLeftBoundarySelf = 3,
  kLeftBoundaryNext = 4,
  kRightBoundaryPrev = 5,
  kRightBoundarySelf = 6,
};

struct NetConfig {
  std::size_t filters = 16;
  std::size_t blocks = 1;
  bool with_forcing = false;
  std::size_t points = 32;
  std::size_t n_basis = 10;

  void validate() const;
};

// 7F^2 + 9F, plus n_basis * points with forcing.
std::size_t param_count(const NetConfig& config);

// Offsets of the structured views inside the flat parameter vector, in the
// order group1 | group2 | mix | forcing.
struct ParamLayout {
  std::size_t filters;
  std::size_t points;
  std::size_t n_basis;
  bool with_forcing;

  std::size_t group1_offset() const { return 0; }
  std::size_t group2_offset() const { return kKernelSize * filters; }
  std::size_t mix_offset() const { return group2_offset() + kKernelSize * filters * filters; }
  std::size_t forcing_offset() const { return mix_offset() + 2 * filters; }
  std::size_t total() const { return forcing_offset() + (with_forcing ? n_basis * points : 0); }

  static ParamLayout of(const NetConfig& config) {
    return {config.filters, config.points, config.n_basis, config.with_forcing};
  }
};

class FdNetParams {
 public:
  explicit FdNetParams(NetConfig config);
  FdNetParams(NetConfig config, std::vector<double> values);

  const NetConfig& config() const { return config_; }
  ParamLayout layout() const { return ParamLayout::of(config_); }
  std::size_t size() const { return values_.size(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> group1_kernel(std::size_t out);
  std::span<double> group2_kernel(std::size_t out, std::size_t in);
  std::span<double> mix();
  std::span<double> forcing();  // n_basis x points, row-major; empty without forcing
  std::span<const double> group1() const;
  std::span<const double> group2() const;
  std::span<const double> mix() const;
  std::span<const double> forcing() const;

 private:
  NetConfig config_;
  std::vector<double> values_;
};

inline constexpr double kInitGain = 0.1;

// Uniform init on [-gain s, gain s]: s = (3 * in_channels)^-1/2 for kernels,
// (2F)^-1/2 for channel mixing, n_basis^-1/2 for the forcing matrix.
FdNetParams init_params(const NetConfig& config, std::uint64_t seed, double gain = kInitGain);

// Parameters for which one block reproduces euler_step with the given delta.
FdNetParams euler_embedding(const NetConfig& config, double delta);

// Input: in_channels x points; kernels: out_channels x in_channels x 7.
std::vector<double> conv_group(std::span<const double> input, std::size_t in_channels, std::size_t points,
                               std::span<const double> kernels, std::size_t out_channels);

// Direct evaluation of one FD-Block and of the k-block network.
std::vector<double> block_forward(std::span<const double> u, const FdNetParams& params);
std::vector<double> net_forward(std::span<const double> u, const FdNetParams& params, std::size_t blocks);
inline std::vector<double> net_forward(std::span<const double> u, const FdNetParams& params) {
  return net_forward(u, params, params.config().blocks);
}

// The network with parameters folded into one pentadiagonal operator per
// block plus the forcing vector; much faster than the direct evaluation.
class CompiledNet {
 public:
  explicit CompiledNet(const FdNetParams& params);

  std::size_t points() const { return points_; }
  std::size_t blocks() const { return blocks_; }

  void apply_block(std::span<const double> in, std::span<double> out) const;
  // k blocks; `state` is updated in place.
  void forward_inplace(std::span<double> state, std::vector<double>& scratch) const;
  std::vector<double> forward(std::span<const double> u) const;

  // Band storage: row m, diagonal d in [0, 5) is column m + d - 2.
  std::span<const double> band() const { return band_; }
  std::span<const double> forcing() const { return forcing_; }

 private:
  std::size_t points_;
  std::size_t blocks_;
  std::vector<double> band_;
  std::vector<double> forcing_;
};

struct Batch {
  std::size_t size = 0;
  std::size_t points = 0;
  std::vector<double> inputs;   // size x points
  std::vector<double> targets;  // size x points

  static Batch from_tuples(std::span<const TrainTuple> tuples, std::span<const std::size_t> indices);
  static Batch from_tuples(std::span<const TrainTuple> tuples);
};

// Mean over all size * points residuals of (target - net(input))^2.
double loss(const FdNetParams& params, const Batch& batch);

struct LossGrad {
  double loss;
  std::vector<double> grad;
};

LossGrad loss_and_grad(const FdNetParams& params, const Batch& batch);
std::vector<double> grad(const FdNetParams& params, const Batch& batch);

// Exact Hessian-vector product of the batch loss, computed by forward-mode
// differentiation of the reverse pass.
std::vector<double> hvp(const FdNetParams& params, std::span<const double> direction, const Batch& batch);

}  // namespace fdnet
