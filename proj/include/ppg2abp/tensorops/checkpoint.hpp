#pragma once

#include "ppg2abp/tensorops/param.hpp"

#include <cstdint>
#include <string>

namespace ppg2abp::tensorops {

// Layout (all integers little-endian):
//   "P2ABPCKPT"                9 bytes
//   version                    u32 (= 1)
//   entry count                u32
//   per entry:
//     name length, name        u32, UTF-8 bytes
//     rank, dims[rank]         u32, u64 each
//     payload                  prod(dims) IEEE-754 f64
inline constexpr std::string_view kCheckpointMagic = "P2ABPCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Checkpoint problem tied to a specific entry (layer parameter).
struct CheckpointError : DataError {
  CheckpointError(const std::string& layer, const std::string& what)
      : DataError("checkpoint: " + (layer.empty() ? std::string() : "layer '" + layer + "': ") + what),
        layer_name(layer) {}
  std::string layer_name;
};

std::string serialize_checkpoint(const ParamList& params);
/// Loads values into `params`, matching entries by name. Every parameter must
/// be present with an identical shape; payloads must be finite.
void deserialize_checkpoint(const std::string& bytes, const ParamList& params);

void save_checkpoint(const std::string& path, const ParamList& params);
void load_checkpoint(const std::string& path, const ParamList& params);

}  // namespace ppg2abp::tensorops
