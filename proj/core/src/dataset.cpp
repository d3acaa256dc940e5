#include "fdnet/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"
#include "fdnet/random.hpp"

namespace fdnet {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

std::size_t checked_time_count(double horizon, double dt) {
  const double steps = horizon / dt;
  const double rounded = std::round(steps);
  if (rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, rounded)) {
    throw ConfigError("dt must divide the horizon exactly");
  }
  return static_cast<std::size_t>(rounded) + 1;
}

std::vector<double> standard_normals(std::mt19937_64& rng, std::size_t count) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(count);
  for (auto& v : out) v = normal(rng);
  return out;
}

}  // namespace

std::string_view to_string(Case c) {
  switch (c) {
    case Case::kStable:
      return "stable";
    case Case::kUnstable:
      return "unstable";
    case Case::kNoisy:
      return "noisy";
    case Case::kForcing:
      return "forcing";
  }
  return "unknown";
}

Case parse_case(std::string_view name) {
  if (name == "stable") return Case::kStable;
  if (name == "unstable") return Case::kUnstable;
  if (name == "noisy") return Case::kNoisy;
  if (name == "forcing") return Case::kForcing;
  throw ConfigError("unknown case '" + std::string(name) + "' (expected stable|unstable|noisy|forcing)");
}

CaseSpec CaseSpec::defaults(Case kind, std::uint64_t seed) {
  CaseSpec spec;
  spec.kind = kind;
  spec.seed = seed;
  spec.dt = kind == Case::kUnstable ? 200.0 : 1.0;
  if (kind == Case::kNoisy) spec.noise_gamma = kNoiseMedium;
  return spec;
}

std::size_t CaseSpec::time_count() const { return checked_time_count(horizon, dt); }

void CaseSpec::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be positive");
  if (!(dt > 0.0) || !(horizon > 0.0)) throw ConfigError("dt and horizon must be positive");
  (void)time_count();
  (void)Grid(length, dx);
  if (n_modes == 0) throw ConfigError("n_modes must be at least 1");
  if (n_ics == 0 || n_train == 0 || n_train >= n_ics) {
    throw ConfigError("need 0 < n_train < n_ics");
  }
  if (kind == Case::kNoisy) {
    if (!noise_gamma || !(*noise_gamma > 0.0)) throw ConfigError("noisy case needs a positive noise level");
  } else if (noise_gamma) {
    throw ConfigError("noise level is only valid for the noisy case");
  }
}

TrajectorySet::TrajectorySet(CaseSpec spec, std::vector<double> values,
                             std::vector<std::vector<double>> ic_coeffs,
                             std::optional<std::vector<double>> forcing_coeffs, std::vector<std::size_t> train,
                             std::vector<std::size_t> test)
    : spec_(std::move(spec)),
      grid_(spec_.length, spec_.dx),
      time_count_(spec_.time_count()),
      values_(std::move(values)),
      ic_coeffs_(std::move(ic_coeffs)),
      forcing_coeffs_(std::move(forcing_coeffs)),
      train_(std::move(train)),
      test_(std::move(test)) {
  if (values_.size() != spec_.n_ics * time_count_ * grid_.size()) {
    throw DataError("trajectory data has " + std::to_string(values_.size()) + " values, expected " +
                    std::to_string(spec_.n_ics * time_count_ * grid_.size()) + " (n_ics * time_count * M)");
  }
  if (ic_coeffs_.size() != spec_.n_ics) throw DataError("one coefficient vector per IC is required");
  for (const auto& c : ic_coeffs_) {
    if (c.size() != spec_.n_modes) throw DataError("IC coefficient vector has the wrong length");
  }
  if ((spec_.kind == Case::kForcing) != forcing_coeffs_.has_value()) {
    throw DataError("forcing coefficients must be present exactly for the forcing case");
  }
  if (forcing_coeffs_ && forcing_coeffs_->size() != spec_.n_modes) {
    throw DataError("forcing coefficient vector has the wrong length");
  }
  std::vector<int> role(spec_.n_ics, 0);
  for (auto s : train_) {
    if (s >= spec_.n_ics || role[s]++ != 0) throw DataError("invalid or duplicate train index");
  }
  for (auto s : test_) {
    if (s >= spec_.n_ics || role[s]++ != 0) throw DataError("invalid or duplicate test index");
  }
  if (train_.size() + test_.size() != spec_.n_ics || train_.size() != spec_.n_train) {
    throw DataError("split does not cover every IC exactly once with n_train training ICs");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw DataError("trajectory data contains non-finite values");
  }
}

std::span<const double> TrajectorySet::state(std::size_t s, std::size_t n) const {
  const std::size_t m = grid_.size();
  return std::span<const double>(values_).subspan((s * time_count_ + n) * m, m);
}

HeatProblem TrajectorySet::problem(std::size_t s) const {
  HeatProblem p;
  p.beta = spec_.beta;
  p.length = spec_.length;
  p.ic_coeffs = ic_coeffs_.at(s);
  p.forcing_coeffs = forcing_coeffs_;
  return p;
}

std::string TrajectorySet::fingerprint() const { return io::fingerprint(values_); }

bool TrajectorySet::operator==(const TrajectorySet& other) const {
  const auto same_bits = [](std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](double x, double y) {
             return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y);
           });
  };
  const auto& a = spec_;
  const auto& b = other.spec_;
  const bool spec_equal = a.kind == b.kind && a.beta == b.beta && a.length == b.length && a.dx == b.dx &&
                          a.dt == b.dt && a.horizon == b.horizon && a.n_modes == b.n_modes &&
                          a.n_ics == b.n_ics && a.n_train == b.n_train && a.noise_gamma == b.noise_gamma &&
                          a.seed == b.seed;
  if (!spec_equal || !same_bits(values_, other.values_) || train_ != other.train_ || test_ != other.test_) {
    return false;
  }
  if (ic_coeffs_.size() != other.ic_coeffs_.size()) return false;
  for (std::size_t s = 0; s < ic_coeffs_.size(); ++s) {
    if (!same_bits(ic_coeffs_[s], other.ic_coeffs_[s])) return false;
  }
  if (forcing_coeffs_.has_value() != other.forcing_coeffs_.has_value()) return false;
  return !forcing_coeffs_ || same_bits(*forcing_coeffs_, *other.forcing_coeffs_);
}

TrajectorySet generate(const CaseSpec& spec) {
  spec.validate();
  const Grid grid(spec.length, spec.dx);
  const std::size_t times = spec.time_count();
  const std::size_t m_count = grid.size();

  // Coefficients come from per-IC streams that do not depend on the case, so
  // stable, unstable and noisy sets built from one seed share trajectories.
  std::vector<std::vector<double>> ic_coeffs(spec.n_ics);
  for (std::size_t s = 0; s < spec.n_ics; ++s) {
    auto rng = make_stream(spec.seed, Stream::kInitialCondition, s);
    ic_coeffs[s] = standard_normals(rng, spec.n_modes);
  }
  std::optional<std::vector<double>> forcing;
  if (spec.kind == Case::kForcing) {
    auto rng = make_stream(spec.seed, Stream::kForcing);
    forcing = standard_normals(rng, spec.n_modes);
  }

  std::vector<double> values(spec.n_ics * times * m_count);
  HeatProblem problem;
  problem.beta = spec.beta;
  problem.length = spec.length;
  problem.forcing_coeffs = forcing;
  for (std::size_t s = 0; s < spec.n_ics; ++s) {
    problem.ic_coeffs = ic_coeffs[s];
    double* out = values.data() + s * times * m_count;
    for (std::size_t n = 0; n < times; ++n) {
      const double t = static_cast<double>(n) * spec.dt;
      for (std::size_t m = 0; m < m_count; ++m) out[n * m_count + m] = exact_solution(problem, grid.point(m), t);
    }
    if (spec.kind == Case::kNoisy) {
      auto rng = make_stream(spec.seed, Stream::kNoise, s);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (std::size_t i = 0; i < times * m_count; ++i) out[i] = apply_noise(out[i], *spec.noise_gamma, normal(rng));
    }
  }

  std::vector<std::size_t> order(spec.n_ics);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto split_rng = make_stream(spec.seed, Stream::kSplit);
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(spec.n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  return TrajectorySet(spec, std::move(values), std::move(ic_coeffs), std::move(forcing), std::move(train),
                       std::move(test));
}

std::vector<TrainTuple> train_tuples(const TrajectorySet& ts) {
  std::vector<TrainTuple> tuples;
  if (ts.time_count() < 2) return tuples;
  tuples.reserve(ts.train_indices().size() * (ts.time_count() - 1));
  for (auto s : ts.train_indices()) {
    for (std::size_t n = 0; n + 1 < ts.time_count(); ++n) tuples.push_back({ts.state(s, n), ts.state(s, n + 1)});
  }
  return tuples;
}

MinibatchSampler::MinibatchSampler(std::size_t tuple_count, std::uint64_t seed)
    : tuple_count_(tuple_count), rng_(make_stream(seed, Stream::kMinibatch)), scratch_(tuple_count) {
  std::iota(scratch_.begin(), scratch_.end(), std::size_t{0});
}

std::vector<std::size_t> MinibatchSampler::sample(std::size_t batch_size) {
  if (batch_size == 0 || batch_size > tuple_count_) {
    throw ConfigError("batch size " + std::to_string(batch_size) + " must be in [1, " +
                      std::to_string(tuple_count_) + "]");
  }
  // Partial Fisher-Yates over a persistent permutation: the first batch_size
  // slots form a uniform sample without replacement on every call.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, tuple_count_ - 1);
    std::swap(scratch_[i], scratch_[pick(rng_)]);
  }
  return {scratch_.begin(), scratch_.begin() + static_cast<std::ptrdiff_t>(batch_size)};
}

void save(const TrajectorySet& ts, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& spec = ts.spec();
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["case"] = std::string(to_string(spec.kind));
  meta["beta"] = spec.beta;
  meta["length"] = spec.length;
  meta["dx"] = spec.dx;
  meta["point_count"] = ts.point_count();
  meta["dt"] = spec.dt;
  meta["horizon"] = spec.horizon;
  meta["time_count"] = ts.time_count();
  meta["n_modes"] = spec.n_modes;
  meta["n_ics"] = spec.n_ics;
  meta["n_train"] = spec.n_train;
  meta["seed"] = spec.seed;
  meta["noise_gamma"] = spec.noise_gamma ? json(*spec.noise_gamma) : json(nullptr);
  meta["ic_coeffs"] = ts.ic_coeffs();
  meta["forcing_coeffs"] = ts.forcing_coeffs() ? json(*ts.forcing_coeffs()) : json(nullptr);
  meta["delta"] = spec.beta * spec.dt / (spec.dx * spec.dx);
  meta["fingerprint"] = ts.fingerprint();

  io::write_f64(dir / "data.bin", ts.values());

  std::ostringstream split;
  split << "ic_index,role\n";
  std::vector<const char*> role(spec.n_ics, "train");
  for (auto s : ts.test_indices()) role[s] = "test";
  for (std::size_t s = 0; s < spec.n_ics; ++s) split << s << ',' << role[s] << '\n';
  io::write_text_atomic(dir / "split.csv", split.str());
  io::write_text_atomic(dir / "meta.json", meta.dump(2) + "\n");
}

TrajectorySet load(const std::filesystem::path& dir) {
  json meta;
  try {
    meta = json::parse(io::read_text(dir / "meta.json"));
  } catch (const json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }

  CaseSpec spec;
  std::vector<std::vector<double>> ic_coeffs;
  std::optional<std::vector<double>> forcing;
  std::size_t point_count = 0;
  std::size_t time_count = 0;
  try {
    if (meta.at("format_version").get<int>() != kFormatVersion) throw DataError("unsupported dataset format");
    spec.kind = parse_case(meta.at("case").get<std::string>());
    spec.beta = meta.at("beta").get<double>();
    spec.length = meta.at("length").get<double>();
    spec.dx = meta.at("dx").get<double>();
    spec.dt = meta.at("dt").get<double>();
    spec.horizon = meta.at("horizon").get<double>();
    spec.n_modes = meta.at("n_modes").get<std::size_t>();
    spec.n_ics = meta.at("n_ics").get<std::size_t>();
    spec.n_train = meta.at("n_train").get<std::size_t>();
    spec.seed = meta.at("seed").get<std::uint64_t>();
    if (!meta.at("noise_gamma").is_null()) spec.noise_gamma = meta.at("noise_gamma").get<double>();
    ic_coeffs = meta.at("ic_coeffs").get<std::vector<std::vector<double>>>();
    if (!meta.at("forcing_coeffs").is_null()) forcing = meta.at("forcing_coeffs").get<std::vector<double>>();
    point_count = meta.at("point_count").get<std::size_t>();
    time_count = meta.at("time_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }

  try {
    spec.validate();
  } catch (const ConfigError& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  if (Grid(spec.length, spec.dx).size() != point_count) {
    throw DataError("shape mismatch: point_count " + std::to_string(point_count) + " disagrees with length/dx");
  }
  if (spec.time_count() != time_count) {
    throw DataError("shape mismatch: time_count " + std::to_string(time_count) + " disagrees with horizon/dt");
  }

  auto values = io::read_f64(dir / "data.bin");
  if (values.size() != spec.n_ics * time_count * point_count) {
    throw DataError("shape mismatch: data.bin holds " + std::to_string(values.size()) + " values, meta.json implies " +
                    std::to_string(spec.n_ics * time_count * point_count));
  }

  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  const std::string split_text = io::read_text(dir / "split.csv");
  std::istringstream lines(split_text);
  std::string line;
  std::getline(lines, line);
  if (io::trim(line) != "ic_index,role") throw DataError("split.csv: unexpected header");
  while (std::getline(lines, line)) {
    if (io::trim(line).empty()) continue;
    auto cols = io::split_trimmed(line, ',');
    if (cols.size() != 2) throw DataError("split.csv: malformed row '" + line + "'");
    std::size_t index = 0;
    try {
      index = static_cast<std::size_t>(std::stoull(cols[0]));
    } catch (const std::exception&) {
      throw DataError("split.csv: bad index '" + cols[0] + "'");
    }
    if (cols[1] == "train") {
      train.push_back(index);
    } else if (cols[1] == "test") {
      test.push_back(index);
    } else {
      throw DataError("split.csv: bad role '" + cols[1] + "'");
    }
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());

  return TrajectorySet(spec, std::move(values), std::move(ic_coeffs), std::move(forcing), std::move(train),
                       std::move(test));
}

}  // namespace fdnet
