#include "sppnet/encoder.hpp"

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {
constexpr const char* kSub = "image_encoder";
}

ImageEncoder::ImageEncoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init)
    : cfg_(cfg),
      patch_embed_(Conv2d::create(params, init, "encoder.patch_embed", 3, cfg.encoder_dim, cfg.patch_size,
                                  cfg.patch_size, 0)) {
  const int tokens = cfg.grid_size() * cfg.grid_size();
  pos_embed_ = params.add("encoder.pos_embed", init.normal({tokens, cfg.encoder_dim}, 0.02));
  for (int i = 0; i < cfg.encoder_layers; ++i) {
    const std::string p = "encoder.layers." + std::to_string(i);
    layers_.push_back(Layer{LayerNorm::create(params, p + ".norm1", cfg.encoder_dim),
                            MultiHeadAttention::create(params, init, p + ".attn", cfg.encoder_dim, cfg.encoder_heads),
                            LayerNorm::create(params, p + ".norm2", cfg.encoder_dim),
                            Mlp::create(params, init, p + ".mlp", cfg.encoder_dim, cfg.encoder_mlp_dim)});
  }
  neck_ = Conv2d::create(params, init, "encoder.neck", cfg.encoder_dim, cfg.embed_channels, 1, 1, 0);
  neck_norm_ = LayerNorm::create(params, "encoder.neck_norm", cfg.embed_channels);
}

Var ImageEncoder::forward(const Var& image) const {
  const int n = cfg_.encoder_input_size;
  if (image.value().rank() != 3 || image.dim(0) != 3 || image.dim(1) != n || image.dim(2) != n) {
    throw ShapeError("image encoder expects (3, " + std::to_string(n) + ", " + std::to_string(n) + "), got " +
                     shape_to_string(image.shape()));
  }
  const int g = cfg_.grid_size();
  const int d = cfg_.encoder_dim;
  Var x = ops::transpose(ops::reshape(patch_embed_(image), {d, g * g}));
  x = ops::add(x, pos_embed_);
  for (const Layer& layer : layers_) {
    const Var h = layer.norm1.rows(x);
    x = ops::add(x, layer.attn(h, h, h));
    x = ops::add(x, layer.mlp(layer.norm2.rows(x)));
  }
  const Var grid = ops::reshape(ops::transpose(x), {d, g, g});
  return neck_norm_.channels(neck_(grid));
}

std::vector<Var> ImageEncoder::forward_batch(std::span<const Var> images) const {
  std::vector<Var> out;
  out.reserve(images.size());
  for (const Var& img : images) out.push_back(forward(img));
  return out;
}

void ImageEncoder::describe(ArchitectureSpec& out) const {
  const int g = cfg_.grid_size();
  const int tokens = g * g;
  const int d = cfg_.encoder_dim;
  out.push_back(patch_embed_.spec(kSub, "patch_embed", g, g));
  LayerSpec pos;
  pos.submodule = kSub;
  pos.name = "pos_embed";
  pos.kind = "embedding";
  pos.elements = static_cast<std::int64_t>(tokens) * d;
  pos.tokens = tokens;
  pos.dim = d;
  out.push_back(pos);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const std::string p = "layers." + std::to_string(i);
    const Layer& l = layers_[i];
    out.push_back(l.norm1.spec(kSub, p + ".norm1", static_cast<std::int64_t>(tokens) * d));
    out.push_back(l.attn.spec(kSub, p + ".attn", tokens, tokens));
    out.push_back(add_spec(kSub, p + ".residual1", static_cast<std::int64_t>(tokens) * d));
    out.push_back(l.norm2.spec(kSub, p + ".norm2", static_cast<std::int64_t>(tokens) * d));
    out.push_back(l.mlp.spec(kSub, p + ".mlp", tokens));
    out.push_back(add_spec(kSub, p + ".residual2", static_cast<std::int64_t>(tokens) * d));
  }
  out.push_back(neck_.spec(kSub, "neck", g, g));
  out.push_back(neck_norm_.spec(kSub, "neck_norm", static_cast<std::int64_t>(cfg_.embed_channels) * tokens));
}

}  // namespace sppnet
