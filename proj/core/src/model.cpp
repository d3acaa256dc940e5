#include "fdnet/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fdnet/errors.hpp"
#include "fdnet/random.hpp"

namespace fdnet {

void NetConfig::validate() const {
  if (filters == 0) throw ConfigError("filters must be at least 1");
  if (blocks == 0) throw ConfigError("blocks must be at least 1");
  if (points < 2) throw ConfigError("the grid needs at least two points");
  if (with_forcing && n_basis == 0) throw ConfigError("forcing needs at least one basis row");
}

std::size_t param_count(const NetConfig& config) {
  config.validate();
  return ParamLayout::of(config).total();
}

FdNetParams::FdNetParams(NetConfig config) : config_(config), values_(param_count(config), 0.0) {}

FdNetParams::FdNetParams(NetConfig config, std::vector<double> values)
    : config_(config), values_(std::move(values)) {
  if (values_.size() != param_count(config_)) {
    throw ConfigError("parameter vector has " + std::to_string(values_.size()) + " entries, config needs " +
                      std::to_string(param_count(config_)));
  }
}

std::span<double> FdNetParams::group1_kernel(std::size_t out) {
  return std::span<double>(values_).subspan(layout().group1_offset() + out * kKernelSize, kKernelSize);
}

std::span<double> FdNetParams::group2_kernel(std::size_t out, std::size_t in) {
  return std::span<double>(values_).subspan(
      layout().group2_offset() + (out * config_.filters + in) * kKernelSize, kKernelSize);
}

std::span<double> FdNetParams::mix() {
  return std::span<double>(values_).subspan(layout().mix_offset(), 2 * config_.filters);
}

std::span<double> FdNetParams::forcing() {
  const auto l = layout();
  return std::span<double>(values_).subspan(l.forcing_offset(), l.total() - l.forcing_offset());
}

std::span<const double> FdNetParams::group1() const {
  return std::span<const double>(values_).subspan(0, kKernelSize * config_.filters);
}

std::span<const double> FdNetParams::group2() const {
  return std::span<const double>(values_).subspan(layout().group2_offset(),
                                                  kKernelSize * config_.filters * config_.filters);
}

std::span<const double> FdNetParams::mix() const {
  return std::span<const double>(values_).subspan(layout().mix_offset(), 2 * config_.filters);
}

std::span<const double> FdNetParams::forcing() const {
  const auto l = layout();
  return std::span<const double>(values_).subspan(l.forcing_offset(), l.total() - l.forcing_offset());
}

FdNetParams init_params(const NetConfig& config, std::uint64_t seed, double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain)) throw ConfigError("init gain must be positive");
  FdNetParams params(config);
  auto rng = make_stream(seed, Stream::kParamInit);
  const auto fill = [&rng, gain](std::span<double> out, double scale) {
    std::uniform_real_distribution<double> dist(-gain * scale, gain * scale);
    for (auto& v : out) v = dist(rng);
  };
  const auto f = static_cast<double>(config.filters);
  const auto l = params.layout();
  auto values = params.values();
  fill(values.subspan(l.group1_offset(), l.group2_offset()), 1.0 / std::sqrt(3.0));
  fill(values.subspan(l.group2_offset(), l.mix_offset() - l.group2_offset()), 1.0 / std::sqrt(3.0 * f));
  fill(params.mix(), 1.0 / std::sqrt(2.0 * f));
  if (config.with_forcing) fill(params.forcing(), 1.0 / std::sqrt(static_cast<double>(config.n_basis)));
  return params;
}

FdNetParams euler_embedding(const NetConfig& config, double delta) {
  FdNetParams params(config);
  auto k = params.group1_kernel(0);
  k[kInteriorLeft] = delta;
  k[kInteriorCenter] = -2.0 * delta;
  k[kInteriorRight] = delta;
  params.mix()[0] = 1.0;
  return params;
}

std::vector<double> conv_group(std::span<const double> input, std::size_t in_channels, std::size_t points,
                               std::span<const double> kernels, std::size_t out_channels) {
  if (input.size() != in_channels * points || kernels.size() != out_channels * in_channels * kKernelSize) {
    throw ConfigError("conv_group: shape mismatch");
  }
  if (points < 2) throw ConfigError("conv_group: need at least two grid points");
  std::vector<double> out(out_channels * points, 0.0);
  const std::size_t last = points - 1;
  for (std::size_t o = 0; o < out_channels; ++o) {
    double* y = out.data() + o * points;
    for (std::size_t c = 0; c < in_channels; ++c) {
      const double* u = input.data() + c * points;
      const double* k = kernels.data() + (o * in_channels + c) * kKernelSize;
      y[0] += k[kLeftBoundarySelf] * u[0] + k[kLeftBoundaryNext] * u[1];
      for (std::size_t m = 1; m < last; ++m) {
        y[m] += k[kInteriorLeft] * u[m - 1] + k[kInteriorCenter] * u[m] + k[kInteriorRight] * u[m + 1];
      }
      y[last] += k[kRightBoundaryPrev] * u[last - 1] + k[kRightBoundarySelf] * u[last];
    }
  }
  return out;
}

std::vector<double> block_forward(std::span<const double> u, const FdNetParams& params) {
  const auto& cfg = params.config();
  const std::size_t f = cfg.filters;
  const std::size_t m_count = cfg.points;
  if (u.size() != m_count) throw ConfigError("block_forward: input length does not match the grid");

  const auto g1 = conv_group(u, 1, m_count, params.group1(), f);
  const auto g2 = conv_group(g1, f, m_count, params.group2(), f);
  const auto mix = params.mix();

  std::vector<double> out(u.begin(), u.end());
  for (std::size_t c = 0; c < f; ++c) {
    for (std::size_t m = 0; m < m_count; ++m) {
      out[m] += mix[c] * g1[c * m_count + m] + mix[f + c] * g2[c * m_count + m];
    }
  }
  if (cfg.with_forcing) {
    const auto w = params.forcing();
    for (std::size_t b = 0; b < cfg.n_basis; ++b) {
      for (std::size_t m = 0; m < m_count; ++m) out[m] += w[b * m_count + m];
    }
  }
  return out;
}

std::vector<double> net_forward(std::span<const double> u, const FdNetParams& params, std::size_t blocks) {
  if (blocks == 0) throw ConfigError("net_forward: blocks must be at least 1");
  std::vector<double> state = block_forward(u, params);
  for (std::size_t j = 1; j < blocks; ++j) state = block_forward(state, params);
  return state;
}

namespace {

// Forward-mode number; instantiating the reverse pass on it yields H * v.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit lift of constants
  Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.d - b.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
};

// Tridiagonal storage: row m, diagonal d in [0, 3) is column m + d - 1.
// Pentadiagonal storage: row m, diagonal d in [0, 5) is column m + d - 2.
template <class S>
void kernel_to_tri(const S* k, std::size_t m_count, S* tri) {
  const std::size_t last = m_count - 1;
  tri[0] = S(0.0);
  tri[1] = k[kLeftBoundarySelf];
  tri[2] = k[kLeftBoundaryNext];
  for (std::size_t m = 1; m < last; ++m) {
    tri[3 * m] = k[kInteriorLeft];
    tri[3 * m + 1] = k[kInteriorCenter];
    tri[3 * m + 2] = k[kInteriorRight];
  }
  tri[3 * last] = k[kRightBoundaryPrev];
  tri[3 * last + 1] = k[kRightBoundarySelf];
  tri[3 * last + 2] = S(0.0);
}

template <class S>
void tri_grad_to_kernel(const S* dtri, std::size_t m_count, S* dk) {
  const std::size_t last = m_count - 1;
  dk[kLeftBoundarySelf] += dtri[1];
  dk[kLeftBoundaryNext] += dtri[2];
  for (std::size_t m = 1; m < last; ++m) {
    dk[kInteriorLeft] += dtri[3 * m];
    dk[kInteriorCenter] += dtri[3 * m + 1];
    dk[kInteriorRight] += dtri[3 * m + 2];
  }
  dk[kRightBoundaryPrev] += dtri[3 * last];
  dk[kRightBoundarySelf] += dtri[3 * last + 1];
}

// One block as z -> A z + f, with A = I + sum_i mix1_i T1_i + sum_i S_i T1_i and
// S_i = sum_c mix2_c T2_{c,i}. T1_i, T2_{c,i} are the tridiagonal matrices of
// the group-1 and group-2 kernels; the T2 products make A pentadiagonal.
template <class S>
struct BlockOperator {
  std::size_t filters = 0;
  std::size_t points = 0;
  std::vector<S> t1;       // filters x points x 3
  std::vector<S> s;        // filters x points x 3
  std::vector<S> band;     // points x 5
  std::vector<S> forcing;  // points
};

template <class S>
BlockOperator<S> build_operator(std::span<const S> theta, const ParamLayout& layout) {
  const std::size_t f = layout.filters;
  const std::size_t m_count = layout.points;
  BlockOperator<S> op;
  op.filters = f;
  op.points = m_count;
  op.t1.assign(f * m_count * 3, S(0.0));
  op.s.assign(f * m_count * 3, S(0.0));
  op.band.assign(m_count * 5, S(0.0));
  op.forcing.assign(m_count, S(0.0));

  const S* g1 = theta.data() + layout.group1_offset();
  const S* g2 = theta.data() + layout.group2_offset();
  const S* mix = theta.data() + layout.mix_offset();

  for (std::size_t i = 0; i < f; ++i) kernel_to_tri(g1 + i * kKernelSize, m_count, op.t1.data() + i * m_count * 3);

  std::vector<S> tri(m_count * 3);
  for (std::size_t c = 0; c < f; ++c) {
    const S weight = mix[f + c];
    for (std::size_t i = 0; i < f; ++i) {
      kernel_to_tri(g2 + (c * f + i) * kKernelSize, m_count, tri.data());
      S* s_i = op.s.data() + i * m_count * 3;
      for (std::size_t e = 0; e < m_count * 3; ++e) s_i[e] += weight * tri[e];
    }
  }

  for (std::size_t m = 0; m < m_count; ++m) op.band[m * 5 + 2] = S(1.0);
  for (std::size_t i = 0; i < f; ++i) {
    const S* t = op.t1.data() + i * m_count * 3;
    const S* s_i = op.s.data() + i * m_count * 3;
    for (std::size_t m = 0; m < m_count; ++m) {
      for (std::size_t d = 0; d < 3; ++d) op.band[m * 5 + d + 1] += mix[i] * t[m * 3 + d];
      // (S_i T1_i)[m][n + b - 1] with n = m + a - 1 lands on band diagonal a + b.
      for (std::size_t a = 0; a < 3; ++a) {
        if ((m == 0 && a == 0) || (m + 1 == m_count && a == 2)) continue;
        const std::size_t n = m + a - 1;
        const S lhs = s_i[m * 3 + a];
        for (std::size_t b = 0; b < 3; ++b) op.band[m * 5 + a + b] += lhs * t[n * 3 + b];
      }
    }
  }

  if (layout.with_forcing) {
    const S* w = theta.data() + layout.forcing_offset();
    for (std::size_t b = 0; b < layout.n_basis; ++b) {
      for (std::size_t m = 0; m < m_count; ++m) op.forcing[m] += w[b * m_count + m];
    }
  }
  return op;
}

template <class S>
void apply_band(const std::vector<S>& band, const std::vector<S>& forcing, const S* in, S* out,
                std::size_t m_count) {
  for (std::size_t m = 0; m < m_count; ++m) {
    S acc = forcing[m];
    const std::size_t lo = m >= 2 ? 0 : 2 - m;
    const std::size_t hi = m + 2 < m_count ? 5 : m_count + 2 - m;
    for (std::size_t d = lo; d < hi; ++d) acc += band[m * 5 + d] * in[m + d - 2];
    out[m] = acc;
  }
}

template <class S>
struct LossGradT {
  S loss;
  std::vector<S> grad;
};

template <class S>
LossGradT<S> loss_grad_impl(std::span<const S> theta, const ParamLayout& layout, std::size_t blocks,
                            const Batch& batch) {
  const std::size_t f = layout.filters;
  const std::size_t m_count = layout.points;
  const auto op = build_operator<S>(theta, layout);

  std::vector<S> g_band(m_count * 5, S(0.0));
  std::vector<S> g_forcing(m_count, S(0.0));
  std::vector<S> states((blocks + 1) * m_count);
  std::vector<S> lambda(m_count);
  std::vector<S> next(m_count);
  const double scale = 2.0 / static_cast<double>(batch.size * m_count);
  S total(0.0);

  for (std::size_t b = 0; b < batch.size; ++b) {
    const double* u = batch.inputs.data() + b * m_count;
    const double* y = batch.targets.data() + b * m_count;
    for (std::size_t m = 0; m < m_count; ++m) states[m] = S(u[m]);
    for (std::size_t j = 0; j < blocks; ++j) {
      apply_band(op.band, op.forcing, states.data() + j * m_count, states.data() + (j + 1) * m_count, m_count);
    }
    const S* z_out = states.data() + blocks * m_count;
    for (std::size_t m = 0; m < m_count; ++m) {
      const S r = z_out[m] - S(y[m]);
      total += r * r;
      lambda[m] = S(scale) * r;
    }
    for (std::size_t j = blocks; j-- > 0;) {
      const S* z = states.data() + j * m_count;
      for (std::size_t m = 0; m < m_count; ++m) {
        g_forcing[m] += lambda[m];
        const std::size_t lo = m >= 2 ? 0 : 2 - m;
        const std::size_t hi = m + 2 < m_count ? 5 : m_count + 2 - m;
        for (std::size_t d = lo; d < hi; ++d) g_band[m * 5 + d] += lambda[m] * z[m + d - 2];
      }
      if (j == 0) break;
      for (auto& v : next) v = S(0.0);
      for (std::size_t m = 0; m < m_count; ++m) {
        const std::size_t lo = m >= 2 ? 0 : 2 - m;
        const std::size_t hi = m + 2 < m_count ? 5 : m_count + 2 - m;
        for (std::size_t d = lo; d < hi; ++d) next[m + d - 2] += op.band[m * 5 + d] * lambda[m];
      }
      lambda.swap(next);
    }
  }

  LossGradT<S> result{total * S(1.0 / static_cast<double>(batch.size * m_count)),
                      std::vector<S>(layout.total(), S(0.0))};
  S* d_g1 = result.grad.data() + layout.group1_offset();
  S* d_g2 = result.grad.data() + layout.group2_offset();
  S* d_mix = result.grad.data() + layout.mix_offset();
  const S* g2 = theta.data() + layout.group2_offset();
  const S* mix = theta.data() + layout.mix_offset();

  std::vector<S> d_t1(m_count * 3);
  std::vector<S> d_s(m_count * 3);
  std::vector<S> tri(m_count * 3);
  for (std::size_t i = 0; i < f; ++i) {
    const S* t = op.t1.data() + i * m_count * 3;
    const S* s_i = op.s.data() + i * m_count * 3;
    S d_mix1(0.0);
    for (std::size_t m = 0; m < m_count; ++m) {
      for (std::size_t d = 0; d < 3; ++d) {
        const S g = g_band[m * 5 + d + 1];
        d_mix1 += g * t[m * 3 + d];
        d_t1[m * 3 + d] = mix[i] * g;
        d_s[m * 3 + d] = S(0.0);
      }
    }
    d_mix[i] += d_mix1;
    for (std::size_t m = 0; m < m_count; ++m) {
      for (std::size_t a = 0; a < 3; ++a) {
        if ((m == 0 && a == 0) || (m + 1 == m_count && a == 2)) continue;
        const std::size_t n = m + a - 1;
        for (std::size_t b = 0; b < 3; ++b) {
          const S g = g_band[m * 5 + a + b];
          // d(S_i)[m][n] += G[m][col] T1_i[n][col];  d(T1_i)[n][col] += S_i[m][n] G[m][col]
          d_s[m * 3 + a] += g * t[n * 3 + b];
          d_t1[n * 3 + b] += s_i[m * 3 + a] * g;
        }
      }
    }
    tri_grad_to_kernel(d_t1.data(), m_count, d_g1 + i * kKernelSize);
    for (std::size_t c = 0; c < f; ++c) {
      kernel_to_tri(g2 + (c * f + i) * kKernelSize, m_count, tri.data());
      S d_mix2(0.0);
      for (std::size_t e = 0; e < m_count * 3; ++e) d_mix2 += tri[e] * d_s[e];
      d_mix[f + c] += d_mix2;
      for (std::size_t e = 0; e < m_count * 3; ++e) tri[e] = mix[f + c] * d_s[e];
      tri_grad_to_kernel(tri.data(), m_count, d_g2 + (c * f + i) * kKernelSize);
    }
  }

  if (layout.with_forcing) {
    S* d_w = result.grad.data() + layout.forcing_offset();
    for (std::size_t b = 0; b < layout.n_basis; ++b) {
      for (std::size_t m = 0; m < m_count; ++m) d_w[b * m_count + m] = g_forcing[m];
    }
  }
  return result;
}

void check_batch(const FdNetParams& params, const Batch& batch) {
  if (batch.size == 0) throw ConfigError("batch must not be empty");
  if (batch.points != params.config().points || batch.inputs.size() != batch.size * batch.points ||
      batch.targets.size() != batch.size * batch.points) {
    throw ConfigError("batch shape does not match the network grid");
  }
}

}  // namespace

CompiledNet::CompiledNet(const FdNetParams& params)
    : points_(params.config().points), blocks_(params.config().blocks) {
  auto op = build_operator<double>(params.values(), params.layout());
  band_ = std::move(op.band);
  forcing_ = std::move(op.forcing);
}

void CompiledNet::apply_block(std::span<const double> in, std::span<double> out) const {
  apply_band(band_, forcing_, in.data(), out.data(), points_);
}

void CompiledNet::forward_inplace(std::span<double> state, std::vector<double>& scratch) const {
  scratch.resize(points_);
  for (std::size_t j = 0; j < blocks_; ++j) {
    apply_band(band_, forcing_, state.data(), scratch.data(), points_);
    std::copy(scratch.begin(), scratch.end(), state.begin());
  }
}

std::vector<double> CompiledNet::forward(std::span<const double> u) const {
  if (u.size() != points_) throw ConfigError("CompiledNet: input length does not match the grid");
  std::vector<double> state(u.begin(), u.end());
  std::vector<double> scratch;
  forward_inplace(state, scratch);
  return state;
}

Batch Batch::from_tuples(std::span<const TrainTuple> tuples, std::span<const std::size_t> indices) {
  Batch batch;
  batch.size = indices.size();
  batch.points = tuples.empty() ? 0 : tuples.front().input.size();
  batch.inputs.reserve(batch.size * batch.points);
  batch.targets.reserve(batch.size * batch.points);
  for (auto i : indices) {
    const auto& tuple = tuples[i];
    batch.inputs.insert(batch.inputs.end(), tuple.input.begin(), tuple.input.end());
    batch.targets.insert(batch.targets.end(), tuple.target.begin(), tuple.target.end());
  }
  return batch;
}

Batch Batch::from_tuples(std::span<const TrainTuple> tuples) {
  std::vector<std::size_t> all(tuples.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return from_tuples(tuples, all);
}

double loss(const FdNetParams& params, const Batch& batch) {
  check_batch(params, batch);
  const CompiledNet net(params);
  const std::size_t m_count = batch.points;
  std::vector<double> state(m_count);
  std::vector<double> scratch;
  double total = 0.0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    std::copy_n(batch.inputs.begin() + static_cast<std::ptrdiff_t>(b * m_count), m_count, state.begin());
    net.forward_inplace(state, scratch);
    for (std::size_t m = 0; m < m_count; ++m) {
      const double r = state[m] - batch.targets[b * m_count + m];
      total += r * r;
    }
  }
  return total / static_cast<double>(batch.size * m_count);
}

LossGrad loss_and_grad(const FdNetParams& params, const Batch& batch) {
  check_batch(params, batch);
  auto result = loss_grad_impl<double>(params.values(), params.layout(), params.config().blocks, batch);
  return {result.loss, std::move(result.grad)};
}

std::vector<double> grad(const FdNetParams& params, const Batch& batch) {
  return loss_and_grad(params, batch).grad;
}

std::vector<double> hvp(const FdNetParams& params, std::span<const double> direction, const Batch& batch) {
  check_batch(params, batch);
  if (direction.size() != params.size()) throw ConfigError("hvp: direction length does not match parameters");
  const auto theta = params.values();
  std::vector<Dual> lifted(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) lifted[i] = Dual(theta[i], direction[i]);
  auto result = loss_grad_impl<Dual>(std::span<const Dual>(lifted), params.layout(), params.config().blocks, batch);
  std::vector<double> out(result.grad.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = result.grad[i].d;
  return out;
}

}  // namespace fdnet
