#include "fdnet/checkpoint.hpp"

#include <json.hpp>

#include "fdnet/errors.hpp"
#include "fdnet/io.hpp"

namespace fdnet {

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& cfg = checkpoint.params.config();
  nlohmann::json meta;
  meta["filters"] = cfg.filters;
  meta["blocks"] = cfg.blocks;
  meta["with_forcing"] = cfg.with_forcing;
  meta["points"] = cfg.points;
  meta["n_basis"] = cfg.n_basis;
  meta["param_count"] = checkpoint.params.size();
  meta["seed"] = checkpoint.seed;
  meta["iteration"] = checkpoint.iteration;
  meta["dataset_fingerprint"] = checkpoint.dataset_fingerprint;
  io::write_f64(dir / "params.bin", checkpoint.params.values());
  io::write_text_atomic(dir / "params.json", meta.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  NetConfig cfg;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  std::string fingerprint;
  try {
    const auto meta = nlohmann::json::parse(io::read_text(dir / "params.json"));
    cfg.filters = meta.at("filters").get<std::size_t>();
    cfg.blocks = meta.at("blocks").get<std::size_t>();
    cfg.with_forcing = meta.at("with_forcing").get<bool>();
    cfg.points = meta.at("points").get<std::size_t>();
    cfg.n_basis = meta.at("n_basis").get<std::size_t>();
    seed = meta.at("seed").get<std::uint64_t>();
    iteration = meta.at("iteration").get<std::size_t>();
    fingerprint = meta.at("dataset_fingerprint").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "params.json").string() + ": " + e.what());
  }
  auto values = io::read_f64(dir / "params.bin");
  try {
    if (values.size() != param_count(cfg)) {
      throw DataError("params.bin holds " + std::to_string(values.size()) + " values, config needs " +
                      std::to_string(param_count(cfg)));
    }
  } catch (const ConfigError& e) {
    throw DataError((dir / "params.json").string() + ": " + e.what());
  }
  return Checkpoint{FdNetParams(cfg, std::move(values)), seed, iteration, std::move(fingerprint)};
}

}  // namespace fdnet
