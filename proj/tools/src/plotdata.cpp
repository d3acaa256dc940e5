#include <algorithm>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "fdnet/cli/commands.hpp"
#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"

namespace fdnet::cli {

namespace fs = std::filesystem;

namespace {

struct IndexRow {
  std::string id;
  std::string kind;
  std::string optimizer;
  std::string blocks;
  std::string filters;
  std::string seed;
  std::string status;
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!io::trim(line).empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<IndexRow> read_index(const fs::path& path) {
  const auto lines = lines_of(io::read_text(path));
  if (lines.empty() || lines.front() != kIndexHeader) throw DataError(path.string() + ": not a run index");
  std::vector<IndexRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = io::split_trimmed(lines[i], ',');
    if (f.size() < 7) throw DataError(path.string() + ": line " + std::to_string(i + 1) + " is short");
    rows.push_back({f[0], f[1], f[2], f[3], f[4], f[5], f[6]});
  }
  return rows;
}

std::string json_number(const nlohmann::json& j, const char* group, const char* key) {
  if (!j.contains(group) || !j[group].contains(key)) return {};
  const auto& v = j[group][key];
  return v.is_string() ? v.get<std::string>() : io::format_double(v.get<double>());
}

}  // namespace

PlotdataResult cmd_plotdata(const PlotdataOptions& options, std::ostream& out, std::ostream& err) {
  const fs::path index_path = fs::is_directory(options.runs) ? options.runs / "index.csv" : options.runs;
  if (!fs::is_regular_file(index_path)) throw ConfigError("run index " + index_path.string() + " not found");
  const auto base = index_path.parent_path();
  const auto rows = read_index(index_path);

  std::ostringstream traces;
  std::ostringstream runs;
  traces << kTracesHeader << '\n';
  runs << kRunsHeader << '\n';
  PlotdataResult result;

  for (const auto& row : rows) {
    const std::string key =
        row.kind + ',' + row.optimizer + ',' + row.blocks + ',' + row.filters + ',' + row.seed;
    const auto dir = base / row.id;
    std::string status = row.status;
    try {
      const auto metric_lines = lines_of(io::read_text(dir / "metrics.csv"));
      const auto summary = nlohmann::json::parse(io::read_text(dir / "summary.json"));
      if (metric_lines.empty()) throw DataError("empty metrics.csv");
      const auto header = io::split_trimmed(metric_lines.front(), ',');
      const auto column = [&header](std::string_view name) {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError("metrics.csv lacks column " + std::string(name));
        return static_cast<std::size_t>(it - header.begin());
      };
      const std::size_t c_it = column("iteration"), c_grad = column("grad_calls"), c_hvp = column("hvp_calls"),
                        c_loss = column("minibatch_mse"), c_radius = column("radius"), c_acc = column("accepted"),
                        c_1 = column("test_mse_1"), c_multi = column("test_mse_multi"),
                        c_full = column("test_mse_full");

      std::ostringstream rows_out;
      for (std::size_t i = 1; i < metric_lines.size(); ++i) {
        const auto f = io::split_trimmed(metric_lines[i], ',');
        if (f.size() != header.size()) throw DataError("metrics.csv line " + std::to_string(i + 1) + " is malformed");
        const auto oracle = std::stoull(f[c_grad]) + std::stoull(f[c_hvp]);
        rows_out << key << ',' << f[c_it] << ',' << f[c_grad] << ',' << f[c_hvp] << ',' << oracle << ',' << f[c_loss]
                 << ',' << f[c_radius] << ',' << f[c_acc] << ',' << f[c_1] << ',' << f[c_multi] << ',' << f[c_full]
                 << '\n';
      }
      traces << rows_out.str();
      status = summary.value("status", status);
      runs << key << ',' << status << ',' << summary.value("grad_calls", 0) << ',' << summary.value("hvp_calls", 0)
           << ',' << json_number(summary, "min_test_error", "tau_1") << ','
           << json_number(summary, "min_test_error", "tau_multi") << ','
           << json_number(summary, "min_test_error", "tau_full") << ','
           << json_number(summary, "final_test_error", "tau_1") << ','
           << json_number(summary, "final_test_error", "tau_multi") << ','
           << json_number(summary, "final_test_error", "tau_full") << ',' << summary.value("best_iteration", 0)
           << '\n';
      ++result.runs;
    } catch (const std::exception& e) {
      result.missing.push_back(row.id);
      err << "missing run " << row.id << " (" << e.what() << ")\n";
      runs << key << ',' << (status == "completed" ? std::string("missing") : status) << ",,,,,,,,,\n";
    }
  }

  const fs::path dir = options.out.empty() ? output_root() / "plotdata" : options.out;
  fs::create_directories(dir);
  io::write_text_atomic(dir / "traces.csv", traces.str());
  io::write_text_atomic(dir / "runs.csv", runs.str());
  out << "runs        " << result.runs << " collected, " << result.missing.size() << " missing\n"
      << "written     " << (dir / "traces.csv").string() << ", " << (dir / "runs.csv").string() << '\n';
  return result;
}

}  // namespace fdnet::cli
