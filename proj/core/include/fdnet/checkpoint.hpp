#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fdnet/model.hpp"

namespace fdnet {

struct Checkpoint {
  FdNetParams params;
  std::uint64_t seed = 0;
  std::size_t iteration = 0;
  std::string dataset_fingerprint;
};

// Writes <dir>/params.bin and <dir>/params.json.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace fdnet
