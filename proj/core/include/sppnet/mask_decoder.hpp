#pragma once

#include <vector>

#include "sppnet/layers.hpp"
#include "sppnet/model_config.hpp"
#include "sppnet/prompt_encoder.hpp"

namespace sppnet {

/// Two-way transformer decoder followed by 4x upscaling and a hypernetwork
/// head. The image embedding is first projected to `decoder_dim`.
///
/// Each of the two blocks runs: token self-attention, token-to-image
/// cross-attention, token MLP, image-to-token cross-attention (each with a
/// residual and a row layer norm). Positional encodings are re-added to
/// queries and keys before every attention.
///
/// Output: one channel per output token, (num_output_tokens, 4G, 4G), each
/// the per-pixel inner product of the upscaled features with the token's
/// hypernetwork vector.
class MaskDecoder {
 public:
  static constexpr int kBlocks = 2;

  MaskDecoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init);

  Var forward(const Var& embedding, const PromptTokens& tokens, AttentionTrace* trace = nullptr) const;
  void describe(ArchitectureSpec& out, int num_points) const;

 private:
  struct Block {
    MultiHeadAttention self_attn;
    LayerNorm norm1;
    MultiHeadAttention token_to_image;
    LayerNorm norm2;
    Mlp mlp;
    LayerNorm norm3;
    MultiHeadAttention image_to_token;
    LayerNorm norm4;
  };
  struct Hypernet {
    Linear fc1;
    Linear fc2;
    Linear fc3;
  };

  ModelConfig cfg_;
  Linear input_proj_;
  std::vector<Block> blocks_;
  ConvTranspose2d upscale1_;
  LayerNorm upscale_norm_;
  ConvTranspose2d upscale2_;
  std::vector<Hypernet> hypernets_;
};

}  // namespace sppnet
