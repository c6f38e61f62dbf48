#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "panelvit/data.hpp"
#include "panelvit/model.hpp"
#include "panelvit/optim.hpp"

namespace panelvit {

/// Training randomness is counter-based, so its full state is the run
/// seed plus the number of epochs already consumed.
struct RngState {
  std::uint64_t seed = 0;
  std::uint64_t epochs_completed = 0;
  bool operator==(const RngState&) const = default;
};

struct OptimizerState {
  AdamWConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> class_names;
  NormStats norm;
  double train_fraction = 0.75;
  std::uint64_t split_seed = 0;
  RngState rng;
  ModelParams params;
  std::optional<OptimizerState> optimizer;
};

/// Binary layout, all integers u64 and reals IEEE-754 binary64, little-endian:
///
///   "PVITCKPT" | u32 version
///   config fields | class names | normalization | train_fraction | split seed
///   rng state
///   u64 tensor count, then per tensor: name, u64 rank, dims, data
///   u8 has_optimizer [, lr β1 β2 eps decay, step, m and v per tensor]
///   "PVITEND!"
///
/// Strings are a u64 byte length followed by the bytes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<unsigned char> serialize_checkpoint(const Checkpoint& checkpoint);

/// Throws CheckpointError on a bad magic, unknown version, truncation, or any
/// tensor whose name or shape disagrees with the stored configuration.
Checkpoint deserialize_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace panelvit
