#include "sppnet/blocks.hpp"

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {

void check_image(const Var& image, const char* block) {
  if (image.value().rank() != 3 || image.dim(0) != 3) {
    throw ShapeError(std::string(block) + " expects a (3, S, S) image, got " + shape_to_string(image.shape()));
  }
}

Var norm_act(const LayerNorm& norm, const Var& x) { return ops::gelu(norm.channels(x)); }

}  // namespace

LlsieBlock::LlsieBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels)
    : head_(Conv2d::create(params, init, prefix + ".head", 3, channels, 3, 1, 1)),
      head_norm_(LayerNorm::create(params, prefix + ".head_norm", channels)),
      depthwise_(Conv2d::create(params, init, prefix + ".depthwise", channels, channels, 3, 1, 1, channels)),
      pointwise_(Conv2d::create(params, init, prefix + ".pointwise", channels, channels, 1, 1, 0)),
      norm_(LayerNorm::create(params, prefix + ".norm", channels)) {}

Var LlsieBlock::forward(const Var& image) const {
  check_image(image, "llsie");
  const Var h = norm_act(head_norm_, head_(image));
  const Var separable = norm_.channels(pointwise_(depthwise_(h)));
  return ops::gelu(ops::add(separable, h));
}

void LlsieBlock::describe(ArchitectureSpec& out, const std::string& sub, int size) const {
  const std::int64_t elems = static_cast<std::int64_t>(head_.out) * size * size;
  out.push_back(head_.spec(sub, "head", size, size));
  out.push_back(head_norm_.spec(sub, "head_norm", elems));
  out.push_back(gelu_spec(sub, "head_act", elems));
  out.push_back(depthwise_.spec(sub, "depthwise", size, size));
  out.push_back(pointwise_.spec(sub, "pointwise", size, size));
  out.push_back(norm_.spec(sub, "norm", elems));
  out.push_back(add_spec(sub, "residual", elems));
  out.push_back(gelu_spec(sub, "act", elems));
}

UNetBlock::UNetBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels)
    : conv1_(Conv2d::create(params, init, prefix + ".conv1", 3, channels, 3, 1, 1)),
      norm1_(LayerNorm::create(params, prefix + ".norm1", channels)),
      conv2_(Conv2d::create(params, init, prefix + ".conv2", channels, channels, 3, 1, 1)),
      norm2_(LayerNorm::create(params, prefix + ".norm2", channels)) {}

Var UNetBlock::forward(const Var& image) const {
  check_image(image, "unet_block");
  return norm_act(norm2_, conv2_(norm_act(norm1_, conv1_(image))));
}

void UNetBlock::describe(ArchitectureSpec& out, const std::string& sub, int size) const {
  const std::int64_t elems = static_cast<std::int64_t>(conv1_.out) * size * size;
  out.push_back(conv1_.spec(sub, "conv1", size, size));
  out.push_back(norm1_.spec(sub, "norm1", elems));
  out.push_back(gelu_spec(sub, "act1", elems));
  out.push_back(conv2_.spec(sub, "conv2", size, size));
  out.push_back(norm2_.spec(sub, "norm2", elems));
  out.push_back(gelu_spec(sub, "act2", elems));
}

StemBlock::StemBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels)
    : stem_(Conv2d::create(params, init, prefix + ".stem", 3, channels, 3, 1, 1)),
      stem_norm_(LayerNorm::create(params, prefix + ".stem_norm", channels)),
      branch_(Conv2d::create(params, init, prefix + ".branch", channels, channels, 3, 1, 1)),
      branch_norm_(LayerNorm::create(params, prefix + ".branch_norm", channels)),
      merge_(Conv2d::create(params, init, prefix + ".merge", 2 * channels, channels, 1, 1, 0)),
      merge_norm_(LayerNorm::create(params, prefix + ".merge_norm", channels)) {}

Var StemBlock::forward(const Var& image) const {
  check_image(image, "stem_block");
  const Var h = norm_act(stem_norm_, stem_(image));
  const Var pooled = ops::max_pool2d(h, 3, 1, 1);
  const Var conv = norm_act(branch_norm_, branch_(h));
  return norm_act(merge_norm_, merge_(ops::concat_rows({pooled, conv})));
}

void StemBlock::describe(ArchitectureSpec& out, const std::string& sub, int size) const {
  const std::int64_t elems = static_cast<std::int64_t>(stem_.out) * size * size;
  out.push_back(stem_.spec(sub, "stem", size, size));
  out.push_back(stem_norm_.spec(sub, "stem_norm", elems));
  out.push_back(gelu_spec(sub, "stem_act", elems));
  LayerSpec pool;
  pool.submodule = sub;
  pool.name = "branch_pool";
  pool.kind = "max_pool2d";
  pool.kernel = 3;
  pool.elements = elems;
  out.push_back(pool);
  out.push_back(branch_.spec(sub, "branch", size, size));
  out.push_back(branch_norm_.spec(sub, "branch_norm", elems));
  out.push_back(gelu_spec(sub, "branch_act", elems));
  out.push_back(merge_.spec(sub, "merge", size, size));
  out.push_back(merge_norm_.spec(sub, "merge_norm", elems));
  out.push_back(gelu_spec(sub, "merge_act", elems));
}

namespace {

std::variant<LlsieBlock, UNetBlock, StemBlock> make_block(BlockKind kind, ParameterSet& params, Initializer& init,
                                                         const std::string& prefix, int channels) {
  switch (kind) {
    case BlockKind::kLlsie:
      return LlsieBlock(params, init, prefix, channels);
    case BlockKind::kUNet:
      return UNetBlock(params, init, prefix, channels);
    case BlockKind::kStem:
      return StemBlock(params, init, prefix, channels);
  }
  throw ConfigError("invalid block kind");
}

}  // namespace

LowLevelBranch::LowLevelBranch(BlockKind kind, ParameterSet& params, Initializer& init, const std::string& prefix,
                               int channels)
    : kind_(kind), block_(make_block(kind, params, init, prefix, channels)) {}

Var LowLevelBranch::forward(const Var& image) const {
  return std::visit([&](const auto& b) { return b.forward(image); }, block_);
}

void LowLevelBranch::describe(ArchitectureSpec& out, const std::string& submodule, int size) const {
  std::visit([&](const auto& b) { b.describe(out, submodule, size); }, block_);
}

}  // namespace sppnet
