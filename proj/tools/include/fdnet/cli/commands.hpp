#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fdnet/dataset.hpp"
#include "fdnet/harness.hpp"

namespace fdnet::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kOutputRootVariable = "FDNET_OUTPUT_ROOT";

// $FDNET_OUTPUT_ROOT when set and non-empty, otherwise ./fdnet-out.
std::filesystem::path output_root();

struct GenOptions {
  Case kind = Case::kStable;
  std::optional<double> noise_gamma;
  std::uint64_t seed = 0;
  std::optional<std::size_t> n_ics;
  std::optional<std::size_t> n_train;
  std::optional<double> horizon;
  std::filesystem::path out;  // empty: <root>/data/<case>-seed<seed>
  bool force = false;
};

CaseSpec case_spec(const GenOptions& options);
std::filesystem::path cmd_gen(const GenOptions& options, std::ostream& out);

struct OptimizerChoice {
  Method method = Method::kTrustRegion;
  double lr = 1e-3;  // ADAM only

  std::string label() const;  // "tr" or "adam@<lr>"
  static OptimizerChoice parse(std::string_view text);
  bool operator==(const OptimizerChoice&) const = default;
};

struct TrainOptions {
  std::filesystem::path data;
  std::size_t blocks = 1;
  std::size_t filters = 16;
  OptimizerChoice optimizer;
  std::optional<std::size_t> budget;
  std::size_t batch_size = 64;
  std::optional<std::size_t> eval_every;
  std::uint64_t seed = 0;
  std::optional<bool> forcing;  // inferred from the dataset when unset
  double init_gain = kInitGain;
  bool checkpoints = true;
  std::filesystem::path out;  // empty: <root>/runs/<dataset>/<opt>-k<blocks>-f<filters>/seed<seed>
};

RunConfig run_config(const TrajectorySet& ts, const TrainOptions& options);
RunSummary cmd_train(const TrainOptions& options, std::ostream& out);

struct ParamsOptions {
  std::size_t filters = 16;
  bool forcing = false;
  std::size_t points = 32;
  std::size_t n_basis = 10;
};

std::size_t cmd_params(const ParamsOptions& options, std::ostream& out);

struct EulerOptions {
  std::filesystem::path data;
  std::filesystem::path out;  // empty: <root>/euler/<dataset>
  EulerBoundary boundary = EulerBoundary::kFromData;
};

std::vector<EvalResult> cmd_euler(const EulerOptions& options, std::ostream& out);

// Block counts swept for a case when the matrix gives none.
std::vector<std::size_t> default_blocks(Case c);
std::vector<std::size_t> default_filters();

// Flat "key = value" text; list values are comma separated, integer lists
// also accept inclusive ranges "a-b". '#' starts a comment.
struct ExperimentMatrix {
  std::vector<Case> cases;
  std::map<Case, std::filesystem::path> data;
  std::map<Case, std::vector<std::size_t>> blocks;
  std::vector<std::size_t> filters = default_filters();
  std::vector<OptimizerChoice> optimizers{OptimizerChoice{}};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::optional<std::size_t> budget;
  std::size_t batch_size = 64;
  std::optional<std::size_t> eval_every;
  double init_gain = kInitGain;
  bool checkpoints = true;
  std::filesystem::path out;
  std::size_t jobs = 1;

  static ExperimentMatrix parse(std::string_view text, const std::filesystem::path& base_dir = {});
  void validate() const;
};

struct MatrixRun {
  std::string id;  // relative run directory
  Case kind = Case::kStable;
  std::size_t blocks = 1;
  std::size_t filters = 16;
  OptimizerChoice optimizer;
  std::uint64_t seed = 0;
};

std::vector<MatrixRun> enumerate_runs(const ExperimentMatrix& matrix);

struct MatrixOutcome {
  MatrixRun run;
  std::string status;  // completed, aborted or failed
  std::optional<double> min_full;
  std::optional<double> final_full;
  std::string message;
};

struct MatrixOptions {
  std::filesystem::path config;
  std::optional<std::size_t> jobs;
  std::filesystem::path out;  // overrides the config's out
};

inline constexpr const char* kIndexHeader =
    "run_id,case,optimizer,blocks,filters,seed,status,min_test_mse_full,final_test_mse_full,message";

std::vector<MatrixOutcome> run_matrix(const ExperimentMatrix& matrix, std::ostream& out);
std::vector<MatrixOutcome> cmd_matrix(const MatrixOptions& options, std::ostream& out);

struct PlotdataOptions {
  std::filesystem::path runs;  // index.csv or the directory holding it
  std::filesystem::path out;   // empty: <root>/plotdata
};

inline constexpr const char* kTracesHeader =
    "case,optimizer,blocks,filters,seed,iteration,grad_calls,hvp_calls,oracle_calls,minibatch_mse,radius,accepted,"
    "test_mse_1,test_mse_multi,test_mse_full";
inline constexpr const char* kRunsHeader =
    "case,optimizer,blocks,filters,seed,status,grad_calls,hvp_calls,min_test_mse_1,min_test_mse_multi,"
    "min_test_mse_full,final_test_mse_1,final_test_mse_multi,final_test_mse_full,best_iteration";

struct PlotdataResult {
  std::size_t runs = 0;
  std::vector<std::string> missing;  // run ids without usable outputs
};

PlotdataResult cmd_plotdata(const PlotdataOptions& options, std::ostream& out, std::ostream& err);

// Parses and runs one command line (without the program name). Returns the
// process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fdnet::cli
