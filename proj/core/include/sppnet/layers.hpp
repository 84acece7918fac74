#pragma once

#include <string>
#include <vector>

#include "sppnet/layer_spec.hpp"
#include "sppnet/ops.hpp"
#include "sppnet/parameters.hpp"

namespace sppnet {

struct Linear {
  Var weight;  // (out, in)
  Var bias;    // (out)
  int in = 0;
  int out = 0;

  static Linear create(ParameterSet& params, Initializer& init, const std::string& name, int in, int out);
  Var operator()(const Var& x) const { return ops::linear(x, weight, bias); }
  LayerSpec spec(const std::string& submodule, const std::string& name, int tokens) const;
};

struct Conv2d {
  Var weight;  // (out, in / groups, k, k)
  Var bias;    // (out) or undefined
  int in = 0;
  int out = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int groups = 1;

  static Conv2d create(ParameterSet& params, Initializer& init, const std::string& name, int in, int out, int kernel,
                       int stride, int padding, int groups = 1, bool bias = true);
  Var operator()(const Var& x) const { return ops::conv2d(x, weight, bias, stride, padding, groups); }
  int output_size(int input) const { return (input + 2 * padding - kernel) / stride + 1; }
  LayerSpec spec(const std::string& submodule, const std::string& name, int out_h, int out_w) const;
};

struct ConvTranspose2d {
  Var weight;  // (in, out, k, k)
  Var bias;    // (out)
  int in = 0;
  int out = 0;
  int kernel = 2;

  static ConvTranspose2d create(ParameterSet& params, Initializer& init, const std::string& name, int in, int out,
                                int kernel);
  Var operator()(const Var& x) const { return ops::conv_transpose2d(x, weight, bias, kernel); }
  LayerSpec spec(const std::string& submodule, const std::string& name, int out_h, int out_w) const;
};

struct LayerNorm {
  Var gamma;
  Var beta;
  int dim = 0;

  static LayerNorm create(ParameterSet& params, const std::string& name, int dim);
  Var rows(const Var& x) const { return ops::layer_norm_rows(x, gamma, beta); }
  Var channels(const Var& x) const { return ops::layer_norm_channels(x, gamma, beta); }
  LayerSpec spec(const std::string& submodule, const std::string& name, std::int64_t elements) const;
};

/// Two-layer perceptron with GELU.
struct Mlp {
  Linear fc1;
  Linear fc2;

  static Mlp create(ParameterSet& params, Initializer& init, const std::string& name, int dim, int hidden);
  Var operator()(const Var& x) const { return fc2(ops::gelu(fc1(x))); }
  LayerSpec spec(const std::string& submodule, const std::string& name, int tokens) const;
};

/// Softmax probability matrices recorded during a forward pass, one per head.
struct AttentionTrace {
  std::vector<Tensor> probabilities;
};

/// Multi-head scaled dot-product attention with q/k/v/out projections.
struct MultiHeadAttention {
  Linear q_proj;
  Linear k_proj;
  Linear v_proj;
  Linear out_proj;
  int dim = 0;
  int heads = 1;

  static MultiHeadAttention create(ParameterSet& params, Initializer& init, const std::string& name, int dim,
                                   int heads);
  Var operator()(const Var& query, const Var& key, const Var& value, AttentionTrace* trace = nullptr) const;
  LayerSpec spec(const std::string& submodule, const std::string& name, int tokens_q, int tokens_kv) const;
};

LayerSpec gelu_spec(const std::string& submodule, const std::string& name, std::int64_t elements);
LayerSpec add_spec(const std::string& submodule, const std::string& name, std::int64_t elements);

}  // namespace sppnet
