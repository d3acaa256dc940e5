#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace fdnet {

inline constexpr double kPi = 3.14159265358979323846;

// Uniform grid x_m = m * dx on [0, L]. The last point is the largest multiple
// of dx not exceeding L, so for L = pi and dx = 0.1 the grid ends at 3.1.
class Grid {
 public:
  Grid(double length, double spacing);

  double length() const { return length_; }
  double spacing() const { return spacing_; }
  std::size_t size() const { return size_; }
  double point(std::size_t m) const { return static_cast<double>(m) * spacing_; }
  std::vector<double> points() const;

 private:
  double length_;
  double spacing_;
  std::size_t size_;
};

// Heat equation u_t = beta u_xx (+ f(x)) on [0, L] with u(0,t) = u(L,t) = 0 and a
// sine-series initial condition. Forcing, when present, is a sine series too.
struct HeatProblem {
  double beta = 2e-4;
  double length = kPi;
  std::vector<double> ic_coeffs;
  std::optional<std::vector<double>> forcing_coeffs;

  void validate() const;
};

// Closed-form u(x, t). Uses the forced solution when forcing_coeffs is set.
double exact_solution(const HeatProblem& problem, double x, double t);

// exact_solution at every grid point.
std::vector<double> exact_profile(const HeatProblem& problem, const Grid& grid, double t);

// Multiplicative measurement noise u * (1 + gamma * eps).
inline double apply_noise(double u, double gamma, double eps) { return u * (1.0 + gamma * eps); }

struct EulerConfig {
  double delta = 0.0;  // beta * dt / dx^2
  double dt = 0.0;

  static EulerConfig from(double beta, double dt, double dx);
};

// One forward Euler step of the heat equation. Interior points get the
// three-point stencil; the two boundary points are returned unchanged.
std::vector<double> euler_step(std::span<const double> u, const EulerConfig& config);

// Iterates euler_step. Element n of the result is the state after n + 1 steps.
std::vector<std::vector<double>> euler_rollout(std::span<const double> u0, const EulerConfig& config,
                                               std::size_t steps);

}  // namespace fdnet
