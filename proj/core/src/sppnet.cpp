#include "sppnet/sppnet.hpp"

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

SppNet::SppNet(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(validated(cfg)),
      init_(seed),
      encoder_(cfg_, params_, init_),
      prompt_encoder_(cfg_, params_, init_),
      decoder_(cfg_, params_, init_),
      block_(cfg_.block_kind, params_, init_, "block", cfg_.llsie_channels),
      fuse_(Conv2d::create(params_, init_, "head.fuse", cfg_.decoder_output_channels() + cfg_.llsie_channels,
                           cfg_.num_classes, 1, 1, 0)) {}

Var SppNet::forward(const Var& image_full, const Var& image_llsie, std::span<const PointPrompt> prompts,
                    ImageSize original_size, ForwardTrace* trace) const {
  return decode(encode_image(image_full, image_llsie), prompts, original_size, trace);
}

ImageFeatures SppNet::encode_image(const Var& image_full, const Var& image_llsie) const {
  const int s = cfg_.llsie_input_size;
  if (image_llsie.value().rank() != 3 || image_llsie.dim(1) != s || image_llsie.dim(2) != s) {
    throw ShapeError("low-level branch expects (3, " + std::to_string(s) + ", " + std::to_string(s) + "), got " +
                     shape_to_string(image_llsie.shape()));
  }
  return {encoder_.forward(image_full), block_.forward(image_llsie)};
}

Var SppNet::decode(const ImageFeatures& features, std::span<const PointPrompt> prompts, ImageSize original_size,
                   ForwardTrace* trace) const {
  const PromptTokens tokens = prompt_encoder_.forward(prompts, original_size);
  const Var decoded = decoder_.forward(features.embedding, tokens);
  const Var& low_level = features.low_level;
  const Var logits = fuse_and_predict(decoded, low_level);
  if (trace) {
    trace->encoder_out = features.embedding.shape();
    trace->tokens = tokens.tokens.shape();
    trace->decoder_out = decoded.shape();
    trace->block_out = low_level.shape();
    trace->pooled = {low_level.dim(0), low_level.dim(1) / 2, low_level.dim(2) / 2};
    trace->fused = {decoded.dim(0) + low_level.dim(0), decoded.dim(1), decoded.dim(2)};
    trace->logits = logits.shape();
  }
  return logits;
}

Var SppNet::fuse_and_predict(const Var& decoder_out, const Var& block_out) const {
  if (decoder_out.value().rank() != 3 || block_out.value().rank() != 3) {
    throw ShapeError("fuse_and_predict expects (C, H, W) inputs");
  }
  if (block_out.dim(1) != 2 * decoder_out.dim(1) || block_out.dim(2) != 2 * decoder_out.dim(2)) {
    throw ShapeError("misaligned feature maps: low-level " + shape_to_string(block_out.shape()) +
                     " must be exactly twice the decoder output " + shape_to_string(decoder_out.shape()));
  }
  const Var pooled = ops::max_pool2d(block_out, 2, 2);
  return fuse_(ops::concat_rows({decoder_out, pooled}));
}

ArchitectureSpec SppNet::describe(int num_points) const {
  ArchitectureSpec spec;
  encoder_.describe(spec);
  prompt_encoder_.describe(spec, num_points);
  decoder_.describe(spec, num_points);
  block_.describe(spec, "block", cfg_.llsie_input_size);
  const int d = cfg_.decoder_output_size();
  LayerSpec pool;
  pool.submodule = "fusion_head";
  pool.name = "align_pool";
  pool.kind = "max_pool2d";
  pool.kernel = 2;
  pool.elements = static_cast<std::int64_t>(cfg_.llsie_channels) * d * d;
  spec.push_back(pool);
  spec.push_back(fuse_.spec("fusion_head", "fuse", d, d));
  return spec;
}

BinaryMask postprocess(const Tensor& logits, ImageSize original_size) {
  if (original_size.height < 1 || original_size.width < 1) {
    throw ShapeError("postprocess: target size must be positive");
  }
  if (logits.rank() != 3 || logits.dim(0) != 1 || logits.dim(1) < 1 || logits.dim(2) < 1) {
    throw ShapeError("postprocess expects (1, D, D) logits, got " + shape_to_string(logits.shape()));
  }
  const Tensor up = resize_bilinear(logits, original_size.height, original_size.width);
  BinaryMask mask(original_size.height, original_size.width, 0);
  auto dst = mask.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = up[i] > 0.0 ? 1 : 0;
  return mask;
}

}  // namespace sppnet
