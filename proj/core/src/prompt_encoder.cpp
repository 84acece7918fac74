#include "sppnet/prompt_encoder.hpp"

#include <cmath>
#include <numbers>

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {
constexpr const char* kSub = "prompt_encoder";
}

Tensor sinusoidal_encoding(double u, double v, int dim) {
  if (dim < 4 || dim % 4 != 0) throw ConfigError("positional encoding dim must be a positive multiple of 4");
  Tensor out({dim});
  const int freqs = dim / 4;
  for (int k = 0; k < freqs; ++k) {
    const double w = 2.0 * std::numbers::pi * (k + 1);
    out[static_cast<std::size_t>(2 * k)] = std::sin(w * u);
    out[static_cast<std::size_t>(2 * k + 1)] = std::cos(w * u);
    out[static_cast<std::size_t>(dim / 2 + 2 * k)] = std::sin(w * v);
    out[static_cast<std::size_t>(dim / 2 + 2 * k + 1)] = std::cos(w * v);
  }
  return out;
}

Tensor dense_positional_encoding(int grid, int dim) {
  Tensor out({grid * grid, dim});
  for (int y = 0; y < grid; ++y)
    for (int x = 0; x < grid; ++x) {
      const Tensor e = sinusoidal_encoding((x + 0.5) / grid, (y + 0.5) / grid, dim);
      std::copy(e.data().begin(), e.data().end(), out.raw() + static_cast<std::size_t>(y * grid + x) * dim);
    }
  return out;
}

PromptEncoder::PromptEncoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init)
    : dim_(cfg.decoder_dim), num_output_tokens_(cfg.num_output_tokens) {
  label_embed_ = params.add("prompt_encoder.label_embed", init.normal({2, dim_}, 1.0));
  output_tokens_ = params.add("prompt_encoder.output_tokens", init.normal({num_output_tokens_, dim_}, 1.0));
}

PromptTokens PromptEncoder::forward(std::span<const PointPrompt> prompts, ImageSize image_size) const {
  if (image_size.height < 1 || image_size.width < 1) throw ShapeError("prompt encoder: image size must be positive");
  std::vector<Var> rows;
  rows.reserve(prompts.size() + 1);
  for (const PointPrompt& p : prompts) {
    if (p.x < 0 || p.y < 0 || p.x >= image_size.width || p.y >= image_size.height) {
      throw ShapeError("prompt (" + std::to_string(p.x) + ", " + std::to_string(p.y) + ") outside image " +
                       std::to_string(image_size.width) + "x" + std::to_string(image_size.height));
    }
    const double u = (p.x + 0.5) / image_size.width;
    const double v = (p.y + 0.5) / image_size.height;
    const Var label = ops::slice_rows(label_embed_, p.label == PromptLabel::kPositive ? 1 : 0, 1);
    rows.push_back(ops::add_constant(label, sinusoidal_encoding(u, v, dim_).reshaped({1, dim_})));
  }
  rows.push_back(output_tokens_);
  PromptTokens t;
  t.tokens = ops::concat_rows(rows);
  t.num_points = static_cast<int>(prompts.size());
  t.num_output_tokens = num_output_tokens_;
  return t;
}

void PromptEncoder::describe(ArchitectureSpec& out, int num_points) const {
  LayerSpec pe;
  pe.submodule = kSub;
  pe.name = "point_encoding";
  pe.kind = "positional_encoding";
  pe.tokens = num_points;
  pe.dim = dim_;
  out.push_back(pe);
  LayerSpec labels;
  labels.submodule = kSub;
  labels.name = "label_embed";
  labels.kind = "embedding";
  labels.elements = 2LL * dim_;
  labels.tokens = num_points;
  labels.dim = dim_;
  out.push_back(labels);
  LayerSpec tokens;
  tokens.submodule = kSub;
  tokens.name = "output_tokens";
  tokens.kind = "embedding";
  tokens.elements = static_cast<std::int64_t>(num_output_tokens_) * dim_;
  tokens.tokens = 0;
  tokens.dim = dim_;
  out.push_back(tokens);
}

}  // namespace sppnet
