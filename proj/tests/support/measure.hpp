#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fdnet/dataset.hpp"
#include "fdnet/heat.hpp"
#include "oracles.hpp"

namespace measure {

// Largest discrete heat-equation residual of exact_solution over a few
// interior points, with time step h^2 so both truncation errors are O(h^2).
inline double pde_residual(const fdnet::HeatProblem& problem, double h) {
  const double ht = h * h;
  double worst = 0.0;
  for (const double x : {0.7, 1.3, 2.1, 2.9}) {
    for (const double t : {0.0, 50.0, 400.0}) {
      const double u = fdnet::exact_solution(problem, x, t);
      const double u_t = (fdnet::exact_solution(problem, x, t + ht) - u) / ht;
      const double u_xx =
          (fdnet::exact_solution(problem, x + h, t) - 2.0 * u + fdnet::exact_solution(problem, x - h, t)) / (h * h);
      worst = std::max(worst, std::abs(u_t - problem.beta * u_xx));
    }
  }
  return worst;
}

// Observed orders log2(r(h) / r(h/2)) along h = 0.1, 0.05, 0.025, 0.0125.
inline std::vector<double> residual_orders(const fdnet::HeatProblem& problem) {
  std::vector<double> orders;
  double h = 0.1;
  double previous = pde_residual(problem, h);
  for (int level = 0; level < 3; ++level) {
    h /= 2.0;
    const double current = pde_residual(problem, h);
    orders.push_back(std::log2(previous / current));
    previous = current;
  }
  return orders;
}

inline fdnet::HeatProblem random_problem(std::uint64_t seed, bool forcing) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  fdnet::HeatProblem p;
  p.ic_coeffs.resize(10);
  for (auto& c : p.ic_coeffs) c = normal(rng);
  if (forcing) {
    p.forcing_coeffs.emplace(10);
    for (auto& d : *p.forcing_coeffs) d = normal(rng);
  }
  return p;
}

// Reduced datasets: 25 ICs (20 train / 5 test).
inline fdnet::CaseSpec reduced(fdnet::Case kind, std::uint64_t seed = 0) {
  auto spec = fdnet::CaseSpec::defaults(kind, seed);
  spec.n_ics = 25;
  spec.n_train = 20;
  if (kind != fdnet::Case::kUnstable) spec.horizon = 200.0;
  return spec;
}

}  // namespace measure
