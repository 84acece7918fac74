#include "sppnet/layers.hpp"

#include <cmath>

#include "sppnet/errors.hpp"

namespace sppnet {

Linear Linear::create(ParameterSet& params, Initializer& init, const std::string& name, int in, int out) {
  Linear l;
  l.in = in;
  l.out = out;
  l.weight = params.add(name + ".weight", init.fan_in_uniform({out, in}, in));
  l.bias = params.add(name + ".bias", init.fan_in_uniform({out}, in));
  return l;
}

LayerSpec Linear::spec(const std::string& submodule, const std::string& name, int tokens) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "linear";
  s.in_channels = in;
  s.out_channels = out;
  s.tokens = tokens;
  return s;
}

Conv2d Conv2d::create(ParameterSet& params, Initializer& init, const std::string& name, int in, int out, int kernel,
                      int stride, int padding, int groups, bool bias) {
  if (in % groups != 0 || out % groups != 0) throw ConfigError("conv " + name + ": channels not divisible by groups");
  Conv2d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  c.stride = stride;
  c.padding = padding;
  c.groups = groups;
  const int fan_in = (in / groups) * kernel * kernel;
  c.weight = params.add(name + ".weight", init.fan_in_uniform({out, in / groups, kernel, kernel}, fan_in));
  if (bias) c.bias = params.add(name + ".bias", init.fan_in_uniform({out}, fan_in));
  return c;
}

LayerSpec Conv2d::spec(const std::string& submodule, const std::string& name, int out_h, int out_w) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "conv2d";
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = stride;
  s.groups = groups;
  s.bias = bias.defined();
  s.out_height = out_h;
  s.out_width = out_w;
  return s;
}

ConvTranspose2d ConvTranspose2d::create(ParameterSet& params, Initializer& init, const std::string& name, int in,
                                        int out, int kernel) {
  ConvTranspose2d c;
  c.in = in;
  c.out = out;
  c.kernel = kernel;
  const int fan_in = out * kernel * kernel;
  c.weight = params.add(name + ".weight", init.fan_in_uniform({in, out, kernel, kernel}, fan_in));
  c.bias = params.add(name + ".bias", init.fan_in_uniform({out}, fan_in));
  return c;
}

LayerSpec ConvTranspose2d::spec(const std::string& submodule, const std::string& name, int out_h, int out_w) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "conv_transpose2d";
  s.in_channels = in;
  s.out_channels = out;
  s.kernel = kernel;
  s.stride = kernel;
  s.out_height = out_h;
  s.out_width = out_w;
  return s;
}

LayerNorm LayerNorm::create(ParameterSet& params, const std::string& name, int dim) {
  LayerNorm n;
  n.dim = dim;
  n.gamma = params.add(name + ".weight", Tensor({dim}, 1.0));
  n.beta = params.add(name + ".bias", Tensor({dim}, 0.0));
  return n;
}

LayerSpec LayerNorm::spec(const std::string& submodule, const std::string& name, std::int64_t elements) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "layer_norm";
  s.dim = dim;
  s.elements = elements;
  return s;
}

Mlp Mlp::create(ParameterSet& params, Initializer& init, const std::string& name, int dim, int hidden) {
  return Mlp{Linear::create(params, init, name + ".fc1", dim, hidden),
             Linear::create(params, init, name + ".fc2", hidden, dim)};
}

LayerSpec Mlp::spec(const std::string& submodule, const std::string& name, int tokens) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "mlp";
  s.dim = fc1.in;
  s.hidden = fc1.out;
  s.tokens = tokens;
  return s;
}

MultiHeadAttention MultiHeadAttention::create(ParameterSet& params, Initializer& init, const std::string& name,
                                              int dim, int heads) {
  if (dim % heads != 0) throw ConfigError("attention " + name + ": dim not divisible by heads");
  MultiHeadAttention a;
  a.dim = dim;
  a.heads = heads;
  a.q_proj = Linear::create(params, init, name + ".q_proj", dim, dim);
  a.k_proj = Linear::create(params, init, name + ".k_proj", dim, dim);
  a.v_proj = Linear::create(params, init, name + ".v_proj", dim, dim);
  a.out_proj = Linear::create(params, init, name + ".out_proj", dim, dim);
  return a;
}

Var MultiHeadAttention::operator()(const Var& query, const Var& key, const Var& value, AttentionTrace* trace) const {
  if (query.value().rank() != 2 || key.value().rank() != 2 || value.value().rank() != 2 || query.dim(1) != dim ||
      key.dim(1) != dim || value.dim(1) != dim || key.dim(0) != value.dim(0)) {
    throw ShapeError("attention expects (N, " + std::to_string(dim) + ") inputs, got q " +
                     shape_to_string(query.shape()) + ", k " + shape_to_string(key.shape()) + ", v " +
                     shape_to_string(value.shape()));
  }
  const Var q = q_proj(query);
  const Var k = k_proj(key);
  const Var v = v_proj(value);
  const int head_dim = dim / heads;
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Var qh = heads == 1 ? q : ops::slice_cols(q, h * head_dim, head_dim);
    const Var kh = heads == 1 ? k : ops::slice_cols(k, h * head_dim, head_dim);
    const Var vh = heads == 1 ? v : ops::slice_cols(v, h * head_dim, head_dim);
    const Var probs = ops::softmax_rows(ops::scale(ops::matmul(qh, kh, false, true), inv_scale));
    if (trace) trace->probabilities.push_back(probs.value());
    outputs.push_back(ops::matmul(probs, vh));
  }
  const Var merged = heads == 1 ? outputs.front() : ops::concat_cols(outputs);
  return out_proj(merged);
}

LayerSpec MultiHeadAttention::spec(const std::string& submodule, const std::string& name, int tokens_q,
                                   int tokens_kv) const {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "attention";
  s.dim = dim;
  s.heads = heads;
  s.tokens = tokens_q;
  s.tokens_kv = tokens_kv;
  return s;
}

LayerSpec gelu_spec(const std::string& submodule, const std::string& name, std::int64_t elements) {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "gelu";
  s.elements = elements;
  return s;
}

LayerSpec add_spec(const std::string& submodule, const std::string& name, std::int64_t elements) {
  LayerSpec s;
  s.submodule = submodule;
  s.name = name;
  s.kind = "add";
  s.elements = elements;
  return s;
}

}  // namespace sppnet
