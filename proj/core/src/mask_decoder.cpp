#include "sppnet/mask_decoder.hpp"

#include "sppnet/errors.hpp"

namespace sppnet {

namespace {
constexpr const char* kSub = "mask_decoder";
}

MaskDecoder::MaskDecoder(const ModelConfig& cfg, ParameterSet& params, Initializer& init)
    : cfg_(cfg), input_proj_(Linear::create(params, init, "decoder.input_proj", cfg.embed_channels, cfg.decoder_dim)) {
  const int d = cfg.decoder_dim;
  for (int i = 0; i < kBlocks; ++i) {
    const std::string p = "decoder.blocks." + std::to_string(i);
    blocks_.push_back(Block{MultiHeadAttention::create(params, init, p + ".self_attn", d, cfg.decoder_heads),
                            LayerNorm::create(params, p + ".norm1", d),
                            MultiHeadAttention::create(params, init, p + ".token_to_image", d, cfg.decoder_heads),
                            LayerNorm::create(params, p + ".norm2", d),
                            Mlp::create(params, init, p + ".mlp", d, cfg.decoder_mlp_dim),
                            LayerNorm::create(params, p + ".norm3", d),
                            MultiHeadAttention::create(params, init, p + ".image_to_token", d, cfg.decoder_heads),
                            LayerNorm::create(params, p + ".norm4", d)});
  }
  upscale1_ = ConvTranspose2d::create(params, init, "decoder.upscale1", d, d / 4, 2);
  upscale_norm_ = LayerNorm::create(params, "decoder.upscale_norm", d / 4);
  upscale2_ = ConvTranspose2d::create(params, init, "decoder.upscale2", d / 4, d / 8, 2);
  for (int t = 0; t < cfg.num_output_tokens; ++t) {
    const std::string p = "decoder.hypernet." + std::to_string(t);
    hypernets_.push_back(Hypernet{Linear::create(params, init, p + ".fc1", d, d),
                                  Linear::create(params, init, p + ".fc2", d, d),
                                  Linear::create(params, init, p + ".fc3", d, d / 8)});
  }
}

Var MaskDecoder::forward(const Var& embedding, const PromptTokens& tokens, AttentionTrace* trace) const {
  const int g = cfg_.grid_size();
  const int d = cfg_.decoder_dim;
  if (embedding.value().rank() != 3 || embedding.dim(0) != cfg_.embed_channels || embedding.dim(1) != g ||
      embedding.dim(2) != g) {
    throw ShapeError("mask decoder expects an embedding of shape (" + std::to_string(cfg_.embed_channels) + ", " +
                     std::to_string(g) + ", " + std::to_string(g) + "), got " + shape_to_string(embedding.shape()));
  }
  if (!tokens.tokens.defined() || tokens.tokens.value().rank() != 2 || tokens.tokens.dim(1) != d) {
    throw ShapeError("mask decoder expects tokens of width " + std::to_string(d));
  }
  if (tokens.num_output_tokens != cfg_.num_output_tokens ||
      tokens.tokens.dim(0) != tokens.num_points + tokens.num_output_tokens) {
    throw ShapeError("mask decoder: token count does not match the configured output tokens");
  }

  const int pixels = g * g;
  Var keys = input_proj_(ops::transpose(ops::reshape(embedding, {cfg_.embed_channels, pixels})));
  const Tensor key_pe = dense_positional_encoding(g, d);
  const Var query_pe = tokens.tokens;
  Var queries = tokens.tokens;

  for (const Block& b : blocks_) {
    Var q = ops::add(queries, query_pe);
    queries = b.norm1.rows(ops::add(queries, b.self_attn(q, q, queries, trace)));

    q = ops::add(queries, query_pe);
    Var k = ops::add_constant(keys, key_pe);
    queries = b.norm2.rows(ops::add(queries, b.token_to_image(q, k, keys, trace)));

    queries = b.norm3.rows(ops::add(queries, b.mlp(queries)));

    q = ops::add(queries, query_pe);
    k = ops::add_constant(keys, key_pe);
    keys = b.norm4.rows(ops::add(keys, b.image_to_token(k, q, queries, trace)));
  }

  Var up = ops::reshape(ops::transpose(keys), {d, g, g});
  up = ops::gelu(upscale_norm_.channels(upscale1_(up)));
  up = ops::gelu(upscale2_(up));
  const int out_size = 4 * g;
  const Var features = ops::reshape(up, {d / 8, out_size * out_size});

  std::vector<Var> hyper;
  hyper.reserve(hypernets_.size());
  for (std::size_t t = 0; t < hypernets_.size(); ++t) {
    const Var token = ops::slice_rows(queries, tokens.num_points + static_cast<int>(t), 1);
    const Hypernet& h = hypernets_[t];
    hyper.push_back(h.fc3(ops::gelu(h.fc2(ops::gelu(h.fc1(token))))));
  }
  const Var weights = hyper.size() == 1 ? hyper.front() : ops::concat_rows(hyper);
  return ops::reshape(ops::matmul(weights, features),
                      {static_cast<int>(hypernets_.size()), out_size, out_size});
}

void MaskDecoder::describe(ArchitectureSpec& out, int num_points) const {
  const int g = cfg_.grid_size();
  const int pixels = g * g;
  const int d = cfg_.decoder_dim;
  const int t = num_points + cfg_.num_output_tokens;
  const auto td = static_cast<std::int64_t>(t) * d;
  const auto pd = static_cast<std::int64_t>(pixels) * d;
  out.push_back(input_proj_.spec(kSub, "input_proj", pixels));
  LayerSpec pe;
  pe.submodule = kSub;
  pe.name = "dense_pe";
  pe.kind = "positional_encoding";
  pe.tokens = pixels;
  pe.dim = d;
  out.push_back(pe);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = "blocks." + std::to_string(i);
    const Block& b = blocks_[i];
    // Positional additions: 2 query adds + 1 key add per attention, 3 attentions use them.
    out.push_back(add_spec(kSub, p + ".pe_adds", 3 * td + 2 * pd));
    out.push_back(b.self_attn.spec(kSub, p + ".self_attn", t, t));
    out.push_back(add_spec(kSub, p + ".residual1", td));
    out.push_back(b.norm1.spec(kSub, p + ".norm1", td));
    out.push_back(b.token_to_image.spec(kSub, p + ".token_to_image", t, pixels));
    out.push_back(add_spec(kSub, p + ".residual2", td));
    out.push_back(b.norm2.spec(kSub, p + ".norm2", td));
    out.push_back(b.mlp.spec(kSub, p + ".mlp", t));
    out.push_back(add_spec(kSub, p + ".residual3", td));
    out.push_back(b.norm3.spec(kSub, p + ".norm3", td));
    out.push_back(b.image_to_token.spec(kSub, p + ".image_to_token", pixels, t));
    out.push_back(add_spec(kSub, p + ".residual4", pd));
    out.push_back(b.norm4.spec(kSub, p + ".norm4", pd));
  }
  const auto up1 = static_cast<std::int64_t>(d / 4) * (2 * g) * (2 * g);
  const auto up2 = static_cast<std::int64_t>(d / 8) * (4 * g) * (4 * g);
  out.push_back(upscale1_.spec(kSub, "upscale1", 2 * g, 2 * g));
  out.push_back(upscale_norm_.spec(kSub, "upscale_norm", up1));
  out.push_back(gelu_spec(kSub, "upscale_act1", up1));
  out.push_back(upscale2_.spec(kSub, "upscale2", 4 * g, 4 * g));
  out.push_back(gelu_spec(kSub, "upscale_act2", up2));
  for (std::size_t i = 0; i < hypernets_.size(); ++i) {
    const std::string p = "hypernet." + std::to_string(i);
    const Hypernet& h = hypernets_[i];
    out.push_back(h.fc1.spec(kSub, p + ".fc1", 1));
    out.push_back(gelu_spec(kSub, p + ".act1", d));
    out.push_back(h.fc2.spec(kSub, p + ".fc2", 1));
    out.push_back(gelu_spec(kSub, p + ".act2", d));
    out.push_back(h.fc3.spec(kSub, p + ".fc3", 1));
  }
  LayerSpec product;
  product.submodule = kSub;
  product.name = "mask_product";
  product.kind = "matmul";
  product.tokens = cfg_.num_output_tokens;
  product.dim = d / 8;
  product.elements = static_cast<std::int64_t>(4 * g) * (4 * g);
  out.push_back(product);
}

}  // namespace sppnet
