#include "fdnet/heat.hpp"

#include <cmath>
#include <string>

#include "fdnet/errors.hpp"

namespace fdnet {

Grid::Grid(double length, double spacing) : length_(length), spacing_(spacing) {
  if (!(length > 0.0) || !(spacing > 0.0) || !std::isfinite(length) || !std::isfinite(spacing)) {
    throw ConfigError("grid length and spacing must be positive and finite");
  }
  // Absorb representation error when L is an exact multiple of dx (e.g. 1.0 / 0.1).
  const double ratio = length / spacing;
  auto steps = static_cast<std::size_t>(std::floor(ratio + 1e-9));
  size_ = steps + 1;
  if (size_ < 2) {
    throw ConfigError("grid needs at least two points");
  }
}

std::vector<double> Grid::points() const {
  std::vector<double> xs(size_);
  for (std::size_t m = 0; m < size_; ++m) xs[m] = point(m);
  return xs;
}

void HeatProblem::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(length > 0.0)) throw ConfigError("length must be positive");
  if (ic_coeffs.empty()) throw ConfigError("at least one initial-condition mode is required");
  if (forcing_coeffs && forcing_coeffs->size() != ic_coeffs.size()) {
    throw ConfigError("forcing and initial-condition series must have the same length");
  }
}

double exact_solution(const HeatProblem& problem, double x, double t) {
  const std::size_t n = problem.ic_coeffs.size();
  double sum = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double wave = static_cast<double>(i) * kPi / problem.length;
    const double rate = problem.beta * wave * wave;
    const double mode = std::sin(wave * x);
    double c = problem.ic_coeffs[i - 1];
    double steady = 0.0;
    if (problem.forcing_coeffs) {
      steady = (*problem.forcing_coeffs)[i - 1] / rate;
      c -= steady;
    }
    sum += c * mode * std::exp(-rate * t) + steady * mode;
  }
  return sum;
}

std::vector<double> exact_profile(const HeatProblem& problem, const Grid& grid, double t) {
  std::vector<double> u(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) u[m] = exact_solution(problem, grid.point(m), t);
  return u;
}

EulerConfig EulerConfig::from(double beta, double dt, double dx) {
  if (!(beta > 0.0) || !(dt > 0.0) || !(dx > 0.0)) {
    throw ConfigError("beta, dt and dx must be positive");
  }
  return EulerConfig{beta * dt / (dx * dx), dt};
}

std::vector<double> euler_step(std::span<const double> u, const EulerConfig& config) {
  const std::size_t size = u.size();
  std::vector<double> next(u.begin(), u.end());
  for (std::size_t m = 1; m + 1 < size; ++m) {
    next[m] = u[m] + config.delta * (u[m + 1] - 2.0 * u[m] + u[m - 1]);
  }
  return next;
}

std::vector<std::vector<double>> euler_rollout(std::span<const double> u0, const EulerConfig& config,
                                               std::size_t steps) {
  if (steps == 0) throw ConfigError("euler_rollout needs at least one step");
  std::vector<std::vector<double>> states;
  states.reserve(steps);
  states.push_back(euler_step(u0, config));
  for (std::size_t n = 1; n < steps; ++n) states.push_back(euler_step(states.back(), config));
  return states;
}

}  // namespace fdnet
