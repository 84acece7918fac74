#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sppnet/model_config.hpp"
#include "sppnet/parameters.hpp"

namespace sppnet {

/// Checkpoint file layout (all integers little-endian):
///
///   magic    8 bytes  "SPPNETCK"
///   version  u32      kCheckpointVersion
///   meta     u32 length + UTF-8 JSON {"model": ModelConfig, "extra": {...}}
///   count    u32      number of tensors
///   tensor   u32 name length, name bytes, u32 rank, u32 dims[rank],
///            float32 payload[prod(dims)]
inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'P', 'N', 'E', 'T', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  nlohmann::json extra = nlohmann::json::object();
  std::vector<std::pair<std::string, Tensor>> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterSet& params,
                      const nlohmann::json& extra = nlohmann::json::object());
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint tensors into `params`; names and shapes must match exactly.
void load_parameters(ParameterSet& params, const Checkpoint& ckpt);

}  // namespace sppnet
