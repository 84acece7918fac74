#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sppnet/image.hpp"
#include "sppnet/model_config.hpp"
#include "sppnet/prompt_sampling.hpp"
#include "sppnet/tensor.hpp"

namespace sppnet {

struct Sample {
  std::string id;
  Image image;
  InstanceLabelMap instances;
};

/// Reads `root/images/<id>.png` and `root/masks/<id>.png` (16-bit instance
/// labels, 0 background). Samples are sorted by id and labels renumbered.
std::vector<Sample> load_dataset(const std::filesystem::path& root);

/// Writes a dataset in the layout read by `load_dataset`.
void save_dataset(const std::filesystem::path& root, std::span<const Sample> samples);

/// Per-channel mean and standard deviation of [0,1]-scaled pixels.
struct NormalizationStats {
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};

  bool operator==(const NormalizationStats&) const = default;
};

/// Statistics over every pixel of the given samples. A channel with zero
/// variance keeps stddev 1 so standardization stays finite.
NormalizationStats compute_normalization(std::span<const Sample> samples);

void to_json(nlohmann::json& j, const NormalizationStats& stats);
void from_json(const nlohmann::json& j, NormalizationStats& stats);

/// Network inputs for one sample.
struct PreparedInputs {
  Tensor image_full;   // (3, encoder_input_size, encoder_input_size)
  Tensor image_llsie;  // (3, llsie_input_size, llsie_input_size)
  BinaryMask ground_truth;  // foreground at decoder resolution
  ImageSize original_size;
};

/// Bilinear resize of an RGB image to (3, size, size), scaled to [0,1] and standardized.
Tensor resize_and_standardize(const Image& image, int size, const NormalizationStats& stats);

/// Nearest-neighbor resampling: output pixel (y, x) reads source pixel
/// (floor((y + 0.5) * H / h), floor((x + 0.5) * W / w)).
BinaryMask resize_nearest(const BinaryMask& mask, int height, int width);

PreparedInputs prepare_inputs(const Sample& sample, const ModelConfig& cfg, const NormalizationStats& stats);

}  // namespace sppnet
