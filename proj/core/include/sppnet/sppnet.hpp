#pragma once

#include <cstdint>
#include <span>

#include "sppnet/blocks.hpp"
#include "sppnet/encoder.hpp"
#include "sppnet/mask_decoder.hpp"
#include "sppnet/prompt_encoder.hpp"

namespace sppnet {

/// Output shapes of every stage of one forward pass.
struct ForwardTrace {
  Shape encoder_out;
  Shape tokens;
  Shape decoder_out;
  Shape block_out;
  Shape pooled;
  Shape fused;
  Shape logits;
};

/// Prompt-independent features of one image.
struct ImageFeatures {
  Var embedding;  // (embed_channels, G, G)
  Var low_level;  // (llsie_channels, 2D, 2D)
};

/// Single-point prompt network: image encoder -> prompt encoder -> mask
/// decoder, in parallel a low-level branch on a 2x larger image, fused by
/// 2x2 max pooling, channel concatenation and a 1x1 conv to class logits.
///
/// Parameter names are prefixed by submodule: encoder., prompt_encoder.,
/// decoder., block., head.
class SppNet {
 public:
  explicit SppNet(const ModelConfig& cfg, std::uint64_t seed = 0);

  SppNet(const SppNet&) = delete;
  SppNet& operator=(const SppNet&) = delete;
  SppNet(SppNet&&) = default;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  const ImageEncoder& encoder() const { return encoder_; }
  const PromptEncoder& prompt_encoder() const { return prompt_encoder_; }
  const MaskDecoder& decoder() const { return decoder_; }
  const LowLevelBranch& block() const { return block_; }

  /// image_full (3, N, N), image_llsie (3, 2D, 2D); prompts are in the
  /// coordinates of an image of `original_size`. Returns (num_classes, D, D).
  Var forward(const Var& image_full, const Var& image_llsie, std::span<const PointPrompt> prompts,
              ImageSize original_size, ForwardTrace* trace = nullptr) const;

  /// Runs the image encoder and the low-level branch.
  ImageFeatures encode_image(const Var& image_full, const Var& image_llsie) const;
  /// Prompt encoder, mask decoder and fusion head on precomputed features.
  Var decode(const ImageFeatures& features, std::span<const PointPrompt> prompts, ImageSize original_size,
             ForwardTrace* trace = nullptr) const;

  /// decoder_out (Cd, D, D), block_out (Cl, 2D, 2D) -> (num_classes, D, D).
  Var fuse_and_predict(const Var& decoder_out, const Var& block_out) const;

  /// Layer-by-layer description for parameter and FLOP accounting; assumes
  /// `num_points` prompts (two for a single positive/negative pair).
  ArchitectureSpec describe(int num_points = 2) const;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  Initializer init_;
  ImageEncoder encoder_;
  PromptEncoder prompt_encoder_;
  MaskDecoder decoder_;
  LowLevelBranch block_;
  Conv2d fuse_;
};

/// Bilinear upsampling of (1, D, D) logits to the original size and a strict
/// > 0 threshold (sigmoid > 0.5).
BinaryMask postprocess(const Tensor& logits, ImageSize original_size);

}  // namespace sppnet
