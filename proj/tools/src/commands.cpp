#include "fdnet/cli/commands.hpp"

#include <cmath>
#include <cstdlib>
#include <ostream>

#include <json.hpp>

#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"

namespace fdnet::cli {

namespace fs = std::filesystem;

fs::path output_root() {
  const char* root = std::getenv(kOutputRootVariable);
  if (root != nullptr && *root != '\0') return fs::path(root);
  return fs::path("fdnet-out");
}

namespace {

std::string dataset_label(const fs::path& dir) {
  auto name = dir.lexically_normal().filename();
  if (name.empty()) name = dir.lexically_normal().parent_path().filename();
  return name.empty() ? std::string("data") : name.string();
}

nlohmann::json mse_json(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(io::format_double(v));
}

}  // namespace

CaseSpec case_spec(const GenOptions& options) {
  auto spec = CaseSpec::defaults(options.kind, options.seed);
  if (options.noise_gamma) spec.noise_gamma = options.noise_gamma;
  if (options.n_ics) spec.n_ics = *options.n_ics;
  if (options.n_train) spec.n_train = *options.n_train;
  if (options.horizon) spec.horizon = *options.horizon;
  spec.validate();
  return spec;
}

fs::path cmd_gen(const GenOptions& options, std::ostream& out) {
  const auto spec = case_spec(options);
  const fs::path dir = options.out.empty()
                           ? output_root() / "data" / (std::string(to_string(spec.kind)) + "-seed" +
                                                        std::to_string(spec.seed))
                           : options.out;
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
    if (!fs::is_empty(dir) && !options.force) {
      throw ConfigError(dir.string() + " is not empty (use --force to overwrite)");
    }
  }
  const auto ts = generate(spec);
  save(ts, dir);

  out << "dataset     " << dir.string() << '\n'
      << "case        " << to_string(spec.kind) << '\n'
      << "seed        " << spec.seed << '\n'
      << "ics         " << spec.n_ics << " (" << ts.train_indices().size() << " train / "
      << ts.test_indices().size() << " test)\n"
      << "grid        " << ts.point_count() << " points, dx = " << io::format_double(spec.dx) << '\n'
      << "times       " << ts.time_count() << ", dt = " << io::format_double(spec.dt) << '\n'
      << "delta       " << io::format_double(spec.beta * spec.dt / (spec.dx * spec.dx)) << '\n';
  if (spec.noise_gamma) out << "noise       " << io::format_double(*spec.noise_gamma) << '\n';
  out << "fingerprint " << ts.fingerprint() << '\n';
  return dir;
}

std::string OptimizerChoice::label() const {
  return method == Method::kTrustRegion ? std::string("tr") : "adam@" + io::format_double(lr);
}

OptimizerChoice OptimizerChoice::parse(std::string_view text) {
  text = io::trim(text);
  if (text == "tr") return {};
  if (text == "adam") return {Method::kAdam, 1e-3};
  if (text.rfind("adam@", 0) == 0) {
    const std::string rate(text.substr(5));
    char* end = nullptr;
    const double lr = std::strtod(rate.c_str(), &end);
    if (rate.empty() || end != rate.c_str() + rate.size() || !(lr > 0.0) || !std::isfinite(lr)) {
      throw ConfigError("bad learning rate in optimizer '" + std::string(text) + "'");
    }
    return {Method::kAdam, lr};
  }
  throw ConfigError("unknown optimizer '" + std::string(text) + "' (expected tr, adam or adam@<lr>)");
}

RunConfig run_config(const TrajectorySet& ts, const TrainOptions& options) {
  const Case kind = ts.spec().kind;
  RunConfig config;
  config.net.filters = options.filters;
  config.net.blocks = options.blocks;
  config.net.with_forcing = options.forcing.value_or(kind == Case::kForcing);
  config.net.points = ts.point_count();
  config.optimizer.method = options.optimizer.method;
  config.optimizer.adam.lr = options.optimizer.lr;
  config.optimizer.budget = options.budget.value_or(default_budget(options.optimizer.method, kind));
  config.optimizer.batch_size = options.batch_size;
  config.optimizer.eval_every = options.eval_every.value_or(default_eval_every(options.optimizer.method));
  config.seed = options.seed;
  config.init_gain = options.init_gain;
  config.write_checkpoints = options.checkpoints;
  config.dataset_label = dataset_label(options.data);
  config.output_dir = options.out.empty() ? output_root() / "runs" / config.dataset_label /
                                                (options.optimizer.label() + "-k" + std::to_string(options.blocks) +
                                                 "-f" + std::to_string(options.filters)) /
                                                ("seed" + std::to_string(options.seed))
                                          : options.out;
  config.validate(ts);
  return config;
}

RunSummary cmd_train(const TrainOptions& options, std::ostream& out) {
  const auto ts = load(options.data);
  const auto config = run_config(ts, options);
  auto summary = run_experiment(ts, config);

  out << "run         " << config.output_dir.string() << '\n'
      << "status      " << (summary.aborted ? "aborted: " + summary.abort_reason : std::string("completed")) << '\n'
      << "iterations  " << summary.trace.size() << '\n';
  if (!summary.trace.empty()) {
    out << "oracle      " << summary.trace.back().grad_calls << " grad + " << summary.trace.back().hvp_calls
        << " hvp\n"
        << "loss        " << io::format_double(summary.trace.back().minibatch_loss) << '\n';
  }
  if (!summary.evaluations.empty()) {
    out << "test mse    final " << io::format_double(summary.final.mse_full) << ", min "
        << io::format_double(summary.minimum.mse_full) << " (tau' = " << summary.tau_full << ", best iteration "
        << summary.best_iteration << ")\n";
  }
  return summary;
}

std::size_t cmd_params(const ParamsOptions& options, std::ostream& out) {
  NetConfig config;
  config.filters = options.filters;
  config.with_forcing = options.forcing;
  config.points = options.points;
  config.n_basis = options.n_basis;
  const auto count = param_count(config);
  out << count << '\n';
  return count;
}

std::vector<EvalResult> cmd_euler(const EulerOptions& options, std::ostream& out) {
  const auto ts = load(options.data);
  const auto config = euler_config(ts);
  std::vector<EvalResult> results;
  for (const std::size_t tau : {std::size_t{1}, multi_step_tau(ts), full_horizon(ts)}) {
    results.push_back(euler_baseline_error(ts, config, tau, options.boundary));
  }

  const fs::path dir = options.out.empty() ? output_root() / "euler" / dataset_label(options.data) : options.out;
  nlohmann::json j;
  j["dataset"] = dataset_label(options.data);
  j["dataset_fingerprint"] = ts.fingerprint();
  j["case"] = std::string(to_string(ts.spec().kind));
  j["delta"] = config.delta;
  j["dt"] = config.dt;
  j["boundary"] = options.boundary == EulerBoundary::kFromData ? "data" : "held";
  j["divergence_bound"] = kDivergenceBound;
  j["results"] = nlohmann::json::array();
  for (const auto& r : results) {
    j["results"].push_back({{"tau_prime", r.tau_prime}, {"mse", mse_json(r.mse)}, {"diverged", r.diverged}});
  }
  fs::create_directories(dir);
  io::write_text_atomic(dir / "euler.json", j.dump(2) + "\n");

  out << "euler       " << to_string(ts.spec().kind) << ", delta = " << io::format_double(config.delta)
      << (config.delta > 0.5 ? " (unstable)" : "") << '\n';
  for (const auto& r : results) {
    out << "tau' = " << r.tau_prime << "\tmse " << io::format_double(r.mse) << (r.diverged ? " (diverged)" : "")
        << '\n';
  }
  out << "written     " << (dir / "euler.json").string() << '\n';
  return results;
}

}  // namespace fdnet::cli
