#pragma once

#include <span>

#include "sppnet/grid.hpp"
#include "sppnet/layers.hpp"
#include "sppnet/model_config.hpp"
#include "sppnet/prompt_sampling.hpp"

namespace sppnet {

/// Sinusoidal encoding of a normalized coordinate (u, v) in [0, 1]^2.
/// The first half of the vector encodes u, the second half v, each as
/// interleaved sin/cos pairs at frequencies 1..dim/4 cycles per unit.
Tensor sinusoidal_encoding(double u, double v, int dim);

/// Encodings of the centers of a grid x grid lattice, shape (grid^2, dim).
Tensor dense_positional_encoding(int grid, int dim);

/// Point tokens followed by the learned output tokens.
struct PromptTokens {
  Var tokens;  // (num_points + num_output_tokens, decoder_dim)
  int num_points = 0;
  int num_output_tokens = 0;
};

/// Points -> tokens: positional encoding of (x + 0.5) / W, (y + 0.5) / H plus
/// a learned embedding for the point's label.
class PromptEncoder {
 public:
  PromptEncoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init);

  PromptTokens forward(std::span<const PointPrompt> prompts, ImageSize image_size) const;
  void describe(ArchitectureSpec& out, int num_points) const;

 private:
  int dim_;
  int num_output_tokens_;
  Var label_embed_;    // (2, dim): row 0 negative, row 1 positive
  Var output_tokens_;  // (num_output_tokens, dim)
};

}  // namespace sppnet
