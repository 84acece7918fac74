#pragma once

#include <span>
#include <vector>

#include "sppnet/layers.hpp"
#include "sppnet/model_config.hpp"

namespace sppnet {

/// Plain pre-norm vision transformer: patch embedding, learned absolute
/// positions, `encoder_layers` attention + MLP blocks, then a 1x1 conv neck
/// with channel-wise layer norm. (3, N, N) -> (embed_channels, N/p, N/p).
class ImageEncoder {
 public:
  ImageEncoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init);

  Var forward(const Var& image) const;
  /// Images are encoded independently.
  std::vector<Var> forward_batch(std::span<const Var> images) const;

  void describe(ArchitectureSpec& out) const;

 private:
  struct Layer {
    LayerNorm norm1;
    MultiHeadAttention attn;
    LayerNorm norm2;
    Mlp mlp;
  };

  ModelConfig cfg_;
  Conv2d patch_embed_;
  Var pos_embed_;  // (grid^2, encoder_dim)
  std::vector<Layer> layers_;
  Conv2d neck_;
  LayerNorm neck_norm_;
};

}  // namespace sppnet
