#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json_fwd.hpp>

#include "sppnet/model_config.hpp"
#include "sppnet/prompt_sampling.hpp"
#include "sppnet/train_config.hpp"

namespace sppnet {

struct EvalConfig {
  int iterations = 500;
  int fps_warmup = 2;
  int fps_timed = 10;
  bool write_overlays = false;

  bool operator==(const EvalConfig&) const = default;
};

/// Everything one CLI invocation needs. Paths are absolute after loading.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  SamplerConfig sampler;
  EvalConfig eval;
  std::filesystem::path dataset;
  std::filesystem::path output;

  /// Seeds every stochastic stage (init, split, augmentation, prompts).
  void set_seed(std::uint64_t seed);
};

void to_json(nlohmann::json& j, const SamplerConfig& cfg);
void from_json(const nlohmann::json& j, SamplerConfig& cfg);
void to_json(nlohmann::json& j, const EvalConfig& cfg);
void from_json(const nlohmann::json& j, EvalConfig& cfg);

/// Parses a JSON run configuration:
///
///   {"dataset": "data", "output": "runs/a", "seed": 0,
///    "model": {...}, "train": {...}, "sampler": {...}, "eval": {...}}
///
/// Relative paths resolve against the directory holding the file. The
/// dataset directory must exist.
RunConfig load_run_config(const std::filesystem::path& path);

/// Same as `load_run_config` for an in-memory document.
RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

}  // namespace sppnet
