#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "fdnet/cli/commands.hpp"
#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"

namespace fdnet::cli {

namespace fs = std::filesystem;

std::vector<std::size_t> default_blocks(Case c) {
  if (c == Case::kUnstable) return {1, 2, 3, 4, 6, 8, 10};
  return {1, 2, 3, 4};
}

std::vector<std::size_t> default_filters() { return {2, 4, 8, 16}; }

namespace {

std::uint64_t parse_unsigned(std::string_view text, const std::string& key) {
  const std::string s(io::trim(text));
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError(key + ": '" + s + "' is not a non-negative integer");
  }
  return std::stoull(s);
}

double parse_real(std::string_view text, const std::string& key) {
  const std::string s(io::trim(text));
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) {
    throw ConfigError(key + ": '" + s + "' is not a number");
  }
  return v;
}

bool parse_bool(std::string_view text, const std::string& key) {
  const auto s = io::trim(text);
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError(key + ": '" + std::string(s) + "' is not a boolean");
}

std::vector<std::uint64_t> parse_integer_list(std::string_view text, const std::string& key) {
  std::vector<std::uint64_t> values;
  for (const auto& item : io::split_trimmed(text, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      values.push_back(parse_unsigned(item, key));
      continue;
    }
    const auto lo = parse_unsigned(std::string_view(item).substr(0, dash), key);
    const auto hi = parse_unsigned(std::string_view(item).substr(dash + 1), key);
    if (hi < lo) throw ConfigError(key + ": empty range '" + item + "'");
    for (auto v = lo; v <= hi; ++v) values.push_back(v);
  }
  if (values.empty()) throw ConfigError(key + ": empty list");
  return values;
}

std::vector<std::size_t> to_sizes(const std::vector<std::uint64_t>& values) {
  return {values.begin(), values.end()};
}

std::string csv_field(std::string text) {
  std::replace(text.begin(), text.end(), ',', ';');
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

std::string optional_number(const std::optional<double>& v) { return v ? io::format_double(*v) : std::string(); }

}  // namespace

ExperimentMatrix ExperimentMatrix::parse(std::string_view text, const fs::path& base_dir) {
  ExperimentMatrix m;
  std::set<std::string> seen;
  std::optional<fs::path> shared_data;
  const auto resolve = [&base_dir](const std::string& p) {
    const fs::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  std::istringstream lines{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto body = io::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(number) + ": expected 'key = value'");
    }
    std::string key(io::trim(body.substr(0, eq)));
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value(io::trim(body.substr(eq + 1)));
    if (!seen.insert(key).second) throw ConfigError("line " + std::to_string(number) + ": duplicate key " + key);
    if (value.empty()) throw ConfigError("line " + std::to_string(number) + ": empty value for " + key);

    if (key == "cases" || key == "case") {
      for (const auto& item : io::split_trimmed(value, ',')) m.cases.push_back(parse_case(item));
    } else if (key == "data") {
      shared_data = resolve(value);
    } else if (key.rfind("data.", 0) == 0) {
      m.data[parse_case(key.substr(5))] = resolve(value);
    } else if (key == "blocks") {
      m.blocks[Case::kStable] = m.blocks[Case::kUnstable] = m.blocks[Case::kNoisy] = m.blocks[Case::kForcing] =
          to_sizes(parse_integer_list(value, key));
    } else if (key.rfind("blocks.", 0) == 0) {
      m.blocks[parse_case(key.substr(7))] = to_sizes(parse_integer_list(value, key));
    } else if (key == "filters") {
      m.filters = to_sizes(parse_integer_list(value, key));
    } else if (key == "optimizers" || key == "opt") {
      m.optimizers.clear();
      for (const auto& item : io::split_trimmed(value, ',')) m.optimizers.push_back(OptimizerChoice::parse(item));
    } else if (key == "seeds" || key == "seed") {
      m.seeds = parse_integer_list(value, key);
    } else if (key == "budget") {
      m.budget = parse_unsigned(value, key);
    } else if (key == "batch_size") {
      m.batch_size = parse_unsigned(value, key);
    } else if (key == "eval_every") {
      m.eval_every = parse_unsigned(value, key);
    } else if (key == "init_gain") {
      m.init_gain = parse_real(value, key);
    } else if (key == "checkpoints") {
      m.checkpoints = parse_bool(value, key);
    } else if (key == "out") {
      m.out = resolve(value);
    } else if (key == "jobs") {
      m.jobs = parse_unsigned(value, key);
    } else {
      throw ConfigError("line " + std::to_string(number) + ": unknown key " + key);
    }
  }

  if (shared_data) {
    if (m.cases.size() != 1) throw ConfigError("'data' needs exactly one case; use data.<case> keys");
    if (!m.data.empty()) throw ConfigError("'data' and data.<case> keys are exclusive");
    m.data[m.cases.front()] = *shared_data;
  }
  for (const auto c : m.cases) {
    if (!m.blocks.contains(c)) m.blocks[c] = default_blocks(c);
  }
  return m;
}

void ExperimentMatrix::validate() const {
  if (cases.empty()) throw ConfigError("matrix lists no cases");
  for (const auto c : cases) {
    if (!data.contains(c)) throw ConfigError("no dataset given for case " + std::string(to_string(c)));
    if (!blocks.contains(c) || blocks.at(c).empty()) {
      throw ConfigError("no block counts for case " + std::string(to_string(c)));
    }
  }
  if (filters.empty() || optimizers.empty() || seeds.empty()) throw ConfigError("matrix has an empty list");
  if (jobs == 0) throw ConfigError("jobs must be at least 1");
  if (!(init_gain > 0.0)) throw ConfigError("init gain must be positive");
}

std::vector<MatrixRun> enumerate_runs(const ExperimentMatrix& matrix) {
  std::vector<MatrixRun> runs;
  for (const auto c : matrix.cases) {
    for (const auto k : matrix.blocks.at(c)) {
      for (const auto f : matrix.filters) {
        for (const auto& opt : matrix.optimizers) {
          for (const auto seed : matrix.seeds) {
            MatrixRun run{"", c, k, f, opt, seed};
            run.id = std::string(to_string(c)) + "/" + opt.label() + "/k" + std::to_string(k) + "-f" +
                     std::to_string(f) + "/seed" + std::to_string(seed);
            runs.push_back(std::move(run));
          }
        }
      }
    }
  }
  return runs;
}

std::vector<MatrixOutcome> run_matrix(const ExperimentMatrix& matrix, std::ostream& out) {
  matrix.validate();
  const fs::path root = matrix.out.empty() ? output_root() / "matrix" : matrix.out;

  std::map<Case, TrajectorySet> datasets;
  for (const auto c : matrix.cases) {
    auto ts = load(matrix.data.at(c));
    if (ts.spec().kind != c) {
      throw ConfigError(matrix.data.at(c).string() + " holds a '" + std::string(to_string(ts.spec().kind)) +
                        "' dataset, listed as " + std::string(to_string(c)));
    }
    datasets.emplace(c, std::move(ts));
  }

  const auto runs = enumerate_runs(matrix);
  std::vector<MatrixOutcome> outcomes(runs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex print;

  const auto worker = [&] {
    for (std::size_t i = next++; i < runs.size(); i = next++) {
      const auto& run = runs[i];
      MatrixOutcome outcome{run, "failed", std::nullopt, std::nullopt, {}};
      try {
        const auto& ts = datasets.at(run.kind);
        TrainOptions options;
        options.data = matrix.data.at(run.kind);
        options.blocks = run.blocks;
        options.filters = run.filters;
        options.optimizer = run.optimizer;
        options.budget = matrix.budget;
        options.batch_size = matrix.batch_size;
        options.eval_every = matrix.eval_every;
        options.seed = run.seed;
        options.init_gain = matrix.init_gain;
        options.checkpoints = matrix.checkpoints;
        options.out = root / run.id;
        const auto summary = run_experiment(ts, run_config(ts, options));
        outcome.status = summary.aborted ? "aborted" : "completed";
        outcome.message = summary.abort_reason;
        if (!summary.evaluations.empty()) {
          outcome.min_full = summary.minimum.mse_full;
          outcome.final_full = summary.final.mse_full;
        }
      } catch (const std::exception& e) {
        outcome.message = e.what();
      }
      const std::lock_guard lock(print);
      out << '[' << ++done << '/' << runs.size() << "] " << run.id << ' ' << outcome.status;
      if (outcome.final_full) out << " final " << io::format_double(*outcome.final_full);
      if (!outcome.message.empty()) out << " (" << outcome.message << ')';
      out << '\n';
      outcomes[i] = std::move(outcome);
    }
  };

  const std::size_t workers = std::min(matrix.jobs, std::max<std::size_t>(runs.size(), 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::ostringstream index;
  index << kIndexHeader << '\n';
  for (const auto& o : outcomes) {
    index << o.run.id << ',' << to_string(o.run.kind) << ',' << o.run.optimizer.label() << ',' << o.run.blocks << ','
          << o.run.filters << ',' << o.run.seed << ',' << o.status << ',' << optional_number(o.min_full) << ','
          << optional_number(o.final_full) << ',' << csv_field(o.message) << '\n';
  }
  fs::create_directories(root);
  io::write_text_atomic(root / "index.csv", index.str());
  out << "index       " << (root / "index.csv").string() << '\n';
  return outcomes;
}

std::vector<MatrixOutcome> cmd_matrix(const MatrixOptions& options, std::ostream& out) {
  if (!fs::is_regular_file(options.config)) throw ConfigError("matrix config " + options.config.string() + " not found");
  auto matrix = ExperimentMatrix::parse(io::read_text(options.config), options.config.parent_path());
  if (options.jobs) matrix.jobs = *options.jobs;
  if (!options.out.empty()) matrix.out = options.out;
  return run_matrix(matrix, out);
}

}  // namespace fdnet::cli
