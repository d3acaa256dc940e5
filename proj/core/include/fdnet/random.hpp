#pragma once

#include <cstdint>
#include <random>

namespace fdnet {

// Independent child streams derived from one master seed.
enum class Stream : std::uint32_t {
  kInitialCondition = 1,
  kForcing = 2,
  kNoise = 3,
  kSplit = 4,
  kParamInit = 5,
  kMinibatch = 6,
};

inline std::mt19937_64 make_stream(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index & 0xFFFFFFFFu),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace fdnet
