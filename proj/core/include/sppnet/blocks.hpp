#pragma once

#include <string>
#include <variant>

#include "sppnet/layers.hpp"
#include "sppnet/model_config.hpp"

namespace sppnet {

/// Low-level semantic information extractor.
///
///   h = gelu(norm(conv3x3(image, 3 -> C)))
///   y = gelu(norm(pointwise(depthwise(h))) + h)
///
/// The residual skips only the channel-preserving depthwise-separable stage.
/// Norms are channel-wise layer norms.
class LlsieBlock {
 public:
  LlsieBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels);

  Var forward(const Var& image) const;
  void describe(ArchitectureSpec& out, const std::string& submodule, int size) const;

  const Conv2d& head() const { return head_; }
  const Conv2d& depthwise() const { return depthwise_; }
  const Conv2d& pointwise() const { return pointwise_; }

 private:
  Conv2d head_;
  LayerNorm head_norm_;
  Conv2d depthwise_;
  Conv2d pointwise_;
  LayerNorm norm_;
};

/// Two (conv3x3 -> norm -> gelu) stages.
class UNetBlock {
 public:
  UNetBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels);

  Var forward(const Var& image) const;
  void describe(ArchitectureSpec& out, const std::string& submodule, int size) const;

 private:
  Conv2d conv1_;
  LayerNorm norm1_;
  Conv2d conv2_;
  LayerNorm norm2_;
};

/// Stem: a wide 3x3 conv, then a max-pool branch and a conv branch in
/// parallel, concatenated and merged back to C channels by a 1x1 conv.
class StemBlock {
 public:
  StemBlock(ParameterSet& params, Initializer& init, const std::string& prefix, int channels);

  Var forward(const Var& image) const;
  void describe(ArchitectureSpec& out, const std::string& submodule, int size) const;

 private:
  Conv2d stem_;
  LayerNorm stem_norm_;
  Conv2d branch_;
  LayerNorm branch_norm_;
  Conv2d merge_;
  LayerNorm merge_norm_;
};

/// The low-level branch selected by `ModelConfig::block_kind`.
class LowLevelBranch {
 public:
  LowLevelBranch(BlockKind kind, ParameterSet& params, Initializer& init, const std::string& prefix, int channels);

  BlockKind kind() const { return kind_; }
  Var forward(const Var& image) const;
  void describe(ArchitectureSpec& out, const std::string& submodule, int size) const;
  const LlsieBlock* llsie() const { return std::get_if<LlsieBlock>(&block_); }

 private:
  BlockKind kind_;
  std::variant<LlsieBlock, UNetBlock, StemBlock> block_;
};

}  // namespace sppnet
