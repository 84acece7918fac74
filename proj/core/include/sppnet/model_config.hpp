#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace sppnet {

/// Low-level feature branch run in parallel with the image encoder.
enum class BlockKind { kLlsie, kUNet, kStem };

std::string to_string(BlockKind kind);
/// Accepts "llsie", "unet_block", "stem_block"; throws ConfigError otherwise.
BlockKind parse_block_kind(std::string_view name);

/// Architecture hyperparameters. All shape arithmetic derives from here.
struct ModelConfig {
  int encoder_input_size = 256;
  int patch_size = 16;
  int encoder_dim = 64;
  int encoder_layers = 2;
  int encoder_heads = 4;
  int encoder_mlp_dim = 256;
  int embed_channels = 256;
  int decoder_dim = 64;
  int decoder_heads = 4;
  int decoder_mlp_dim = 256;
  int num_output_tokens = 1;
  int llsie_input_size = 128;
  int llsie_channels = 16;
  int num_classes = 1;
  BlockKind block_kind = BlockKind::kLlsie;

  int grid_size() const { return encoder_input_size / patch_size; }
  /// Spatial size of the mask decoder output (two 2x upscalings).
  int decoder_output_size() const { return 4 * grid_size(); }
  /// One channel per output token.
  int decoder_output_channels() const { return num_output_tokens; }
  int upscale_channels() const { return decoder_dim / 8; }

  void validate() const;

  /// 256 encoder input, 128 low-level input, 64x64 logits.
  static ModelConfig desk();
  /// 1024 encoder input, 512 low-level input, 256x256 logits.
  static ModelConfig full_scale();
  /// 32 encoder input, one encoder layer, width 32; for gradient checks and overfitting.
  static ModelConfig micro();

  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
void from_json(const nlohmann::json& j, ModelConfig& cfg);

}  // namespace sppnet
