#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/heat.hpp"

namespace fdnet {

enum class Case { kStable, kUnstable, kNoisy, kForcing };

std::string_view to_string(Case c);
Case parse_case(std::string_view name);

// Noise levels used for the low / medium / high noisy datasets.
inline constexpr double kNoiseLow = 1e-8;
inline constexpr double kNoiseMedium = 1e-4;
inline constexpr double kNoiseHigh = 1e-2;

struct CaseSpec {
  Case kind = Case::kStable;
  double beta = 2e-4;
  double length = kPi;
  double dx = 0.1;
  double dt = 1.0;
  double horizon = 1000.0;
  std::size_t n_modes = 10;
  std::size_t n_ics = 200;
  std::size_t n_train = 150;
  std::optional<double> noise_gamma;
  std::uint64_t seed = 0;

  // Defaults for a case: dt = 200 for unstable, 1 otherwise; noisy uses the
  // medium noise level unless overridden.
  static CaseSpec defaults(Case kind, std::uint64_t seed = 0);

  std::size_t time_count() const;
  void validate() const;
};

// One-step-ahead sample: (u_s(., t), u_s(., t + dt)). Views into a TrajectorySet.
struct TrainTuple {
  std::span<const double> input;
  std::span<const double> target;
};

class TrajectorySet {
 public:
  TrajectorySet(CaseSpec spec, std::vector<double> values, std::vector<std::vector<double>> ic_coeffs,
                std::optional<std::vector<double>> forcing_coeffs, std::vector<std::size_t> train,
                std::vector<std::size_t> test);

  const CaseSpec& spec() const { return spec_; }
  const Grid& grid() const { return grid_; }
  std::size_t n_ics() const { return spec_.n_ics; }
  std::size_t time_count() const { return time_count_; }
  std::size_t point_count() const { return grid_.size(); }
  double time(std::size_t n) const { return static_cast<double>(n) * spec_.dt; }

  // Values at IC s and time index n.
  std::span<const double> state(std::size_t s, std::size_t n) const;
  std::span<const double> values() const { return values_; }

  const std::vector<std::vector<double>>& ic_coeffs() const { return ic_coeffs_; }
  const std::optional<std::vector<double>>& forcing_coeffs() const { return forcing_coeffs_; }
  const std::vector<std::size_t>& train_indices() const { return train_; }
  const std::vector<std::size_t>& test_indices() const { return test_; }

  HeatProblem problem(std::size_t s) const;
  std::string fingerprint() const;

  bool operator==(const TrajectorySet& other) const;

 private:
  CaseSpec spec_;
  Grid grid_;
  std::size_t time_count_;
  std::vector<double> values_;
  std::vector<std::vector<double>> ic_coeffs_;
  std::optional<std::vector<double>> forcing_coeffs_;
  std::vector<std::size_t> train_;
  std::vector<std::size_t> test_;
};

TrajectorySet generate(const CaseSpec& spec);

std::vector<TrainTuple> train_tuples(const TrajectorySet& ts);

// Draws mini-batches of distinct tuple indices; draws are independent across calls.
class MinibatchSampler {
 public:
  MinibatchSampler(std::size_t tuple_count, std::uint64_t seed);

  std::vector<std::size_t> sample(std::size_t batch_size);

 private:
  std::size_t tuple_count_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> scratch_;
};

// Directory with meta.json, data.bin and split.csv.
void save(const TrajectorySet& ts, const std::filesystem::path& dir);
TrajectorySet load(const std::filesystem::path& dir);

}  // namespace fdnet
