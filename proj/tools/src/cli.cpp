#include <algorithm>
#include <limits>
#include <ostream>

#include <CLI11.hpp>

#include "fdnet/cli/commands.hpp"
#include "fdnet/errors.hpp"

namespace fdnet::cli {

namespace {

// Positive-count validator shared by size options.
const CLI::Range kAtLeastOne(std::size_t{1}, std::numeric_limits<std::size_t>::max());

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn 1-D heat equation dynamics with FD-Nets", "fdnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  GenOptions gen;
  std::string gen_case;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a trajectory dataset");
  gen_cmd->add_option("--case", gen_case, "stable | unstable | noisy | forcing")->required();
  gen_cmd->add_option("--noise-gamma", gen.noise_gamma, "Multiplicative noise level (noisy case)");
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed");
  gen_cmd->add_option("--n-ics", gen.n_ics, "Number of initial conditions")->check(kAtLeastOne);
  gen_cmd->add_option("--n-train", gen.n_train, "Training ICs")->check(kAtLeastOne);
  gen_cmd->add_option("--horizon", gen.horizon, "Final time T");
  gen_cmd->add_option("--out", gen_out, "Output directory");
  gen_cmd->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

  TrainOptions train;
  std::string train_data;
  std::string train_out;
  std::string train_opt = "tr";
  std::optional<double> train_lr;
  bool train_forcing = false;
  bool no_checkpoints = false;
  auto* train_cmd = app.add_subcommand("train", "Train one network and evaluate it");
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--blocks", train.blocks, "FD-Blocks per time step")->check(kAtLeastOne);
  train_cmd->add_option("--filters", train.filters, "Filters per FD-Block")->check(kAtLeastOne);
  train_cmd->add_option("--opt", train_opt, "tr | adam | adam@<lr>");
  train_cmd->add_option("--lr", train_lr, "ADAM learning rate");
  train_cmd->add_option("--budget", train.budget, "Iterations (default depends on optimizer and case)");
  train_cmd->add_option("--batch-size", train.batch_size, "Mini-batch size")->check(kAtLeastOne);
  train_cmd->add_option("--eval-every", train.eval_every, "Test evaluation cadence")->check(kAtLeastOne);
  train_cmd->add_option("--seed", train.seed, "Initialization and mini-batch seed");
  train_cmd->add_option("--init-gain", train.init_gain, "Scale of the uniform initialization");
  auto* forcing_flag =
      train_cmd->add_flag("--forcing,!--no-forcing", train_forcing, "Learn a forcing term (default: from data)");
  train_cmd->add_flag("--no-checkpoints", no_checkpoints, "Skip best/ and final/ parameter files");
  train_cmd->add_option("--out", train_out, "Run directory");

  std::string matrix_config;
  std::string matrix_out;
  MatrixOptions matrix;
  auto* matrix_cmd = app.add_subcommand("matrix", "Run a sweep described by a config file");
  matrix_cmd->add_option("--config", matrix_config, "Matrix config file")->required();
  matrix_cmd->add_option("--jobs", matrix.jobs, "Parallel runs")->check(kAtLeastOne);
  matrix_cmd->add_option("--out", matrix_out, "Sweep output directory");

  ParamsOptions params;
  auto* params_cmd = app.add_subcommand("params", "Print the parameter count of a network");
  params_cmd->add_option("--filters", params.filters, "Filters per FD-Block")->check(kAtLeastOne);
  params_cmd->add_flag("--forcing", params.forcing, "Include the forcing matrix");
  params_cmd->add_option("--points", params.points, "Grid points")->check(CLI::Range(2, 1 << 20));
  params_cmd->add_option("--n-basis", params.n_basis, "Forcing basis size")->check(kAtLeastOne);

  EulerOptions euler;
  std::string euler_data;
  std::string euler_out;
  std::string boundary = "data";
  auto* euler_cmd = app.add_subcommand("euler", "Forward Euler baseline errors on a dataset");
  euler_cmd->add_option("--data", euler_data, "Dataset directory")->required();
  euler_cmd->add_option("--boundary", boundary, "data | held")->check(CLI::IsMember({"data", "held"}));
  euler_cmd->add_option("--out", euler_out, "Output directory");

  PlotdataOptions plot;
  std::string plot_runs;
  std::string plot_out;
  auto* plot_cmd = app.add_subcommand("plotdata", "Collect run metrics into long-format CSV files");
  plot_cmd->add_option("--runs", plot_runs, "Run index (index.csv or its directory)")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (gen_cmd->parsed()) {
      gen.kind = parse_case(gen_case);
      gen.out = gen_out;
      cmd_gen(gen, out);
    } else if (train_cmd->parsed()) {
      train.data = train_data;
      train.out = train_out;
      train.optimizer = OptimizerChoice::parse(train_opt);
      if (train_lr) {
        if (train.optimizer.method != Method::kAdam) throw ConfigError("--lr applies to the adam optimizer only");
        train.optimizer.lr = *train_lr;
        if (!(train.optimizer.lr > 0.0)) throw ConfigError("--lr must be positive");
      }
      if (forcing_flag->count() > 0) train.forcing = train_forcing;
      train.checkpoints = !no_checkpoints;
      const auto summary = cmd_train(train, out);
      if (summary.aborted) {
        err << "error: training aborted: " << summary.abort_reason << '\n';
        return kExitNumerical;
      }
    } else if (matrix_cmd->parsed()) {
      matrix.config = matrix_config;
      matrix.out = matrix_out;
      const auto outcomes = cmd_matrix(matrix, out);
      const auto count = [&outcomes](std::string_view status) {
        return std::count_if(outcomes.begin(), outcomes.end(), [status](const auto& o) { return o.status == status; });
      };
      if (count("failed") > 0 || count("aborted") > 0) {
        err << "warning: " << count("failed") << " failed, " << count("aborted") << " aborted of " << outcomes.size()
            << " runs\n";
      }
      if (count("failed") > 0) return kExitConfig;
      if (count("aborted") > 0) return kExitNumerical;
    } else if (params_cmd->parsed()) {
      cmd_params(params, out);
    } else if (euler_cmd->parsed()) {
      euler.data = euler_data;
      euler.out = euler_out;
      euler.boundary = boundary == "held" ? EulerBoundary::kHeld : EulerBoundary::kFromData;
      cmd_euler(euler, out);
    } else if (plot_cmd->parsed()) {
      plot.runs = plot_runs;
      plot.out = plot_out;
      cmd_plotdata(plot, out, err);
    }
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace fdnet::cli
