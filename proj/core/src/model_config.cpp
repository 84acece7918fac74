#include "sppnet/model_config.hpp"

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"

namespace sppnet {

std::string to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::kLlsie:
      return "llsie";
    case BlockKind::kUNet:
      return "unet_block";
    case BlockKind::kStem:
      return "stem_block";
  }
  return "unknown";
}

BlockKind parse_block_kind(std::string_view name) {
  if (name == "llsie") return BlockKind::kLlsie;
  if (name == "unet_block") return BlockKind::kUNet;
  if (name == "stem_block") return BlockKind::kStem;
  throw ConfigError("invalid block_kind '" + std::string(name) + "' (expected llsie, unet_block or stem_block)");
}

namespace {
void positive(int v, const char* name) {
  if (v < 1) throw ConfigError(std::string(name) + " must be >= 1, got " + std::to_string(v));
}
}  // namespace

void ModelConfig::validate() const {
  positive(encoder_input_size, "encoder_input_size");
  positive(patch_size, "patch_size");
  positive(encoder_dim, "encoder_dim");
  positive(encoder_heads, "encoder_heads");
  positive(encoder_mlp_dim, "encoder_mlp_dim");
  positive(embed_channels, "embed_channels");
  positive(decoder_dim, "decoder_dim");
  positive(decoder_heads, "decoder_heads");
  positive(decoder_mlp_dim, "decoder_mlp_dim");
  positive(num_output_tokens, "num_output_tokens");
  positive(llsie_input_size, "llsie_input_size");
  positive(llsie_channels, "llsie_channels");
  positive(num_classes, "num_classes");
  if (encoder_layers < 0) throw ConfigError("encoder_layers must be >= 0");
  if (encoder_input_size % patch_size != 0) {
    throw ConfigError("encoder_input_size " + std::to_string(encoder_input_size) + " is not divisible by patch_size " +
                      std::to_string(patch_size));
  }
  if (encoder_dim % encoder_heads != 0) throw ConfigError("encoder_dim must be divisible by encoder_heads");
  if (decoder_dim % decoder_heads != 0) throw ConfigError("decoder_dim must be divisible by decoder_heads");
  if (decoder_dim % 8 != 0) throw ConfigError("decoder_dim must be divisible by 8");
  if (llsie_input_size != 2 * decoder_output_size()) {
    throw ConfigError("llsie_input_size must be 2 x decoder output size (" + std::to_string(2 * decoder_output_size()) +
                      "), got " + std::to_string(llsie_input_size));
  }
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::full_scale() {
  ModelConfig c;
  c.encoder_input_size = 1024;
  c.patch_size = 16;
  c.encoder_dim = 192;
  c.encoder_layers = 12;
  c.encoder_heads = 3;
  c.encoder_mlp_dim = 768;
  c.embed_channels = 256;
  c.decoder_dim = 256;
  c.decoder_heads = 8;
  c.decoder_mlp_dim = 2048;
  c.llsie_input_size = 512;
  c.llsie_channels = 16;
  return c;
}

ModelConfig ModelConfig::micro() {
  ModelConfig c;
  c.encoder_input_size = 32;
  c.patch_size = 16;
  c.encoder_dim = 32;
  c.encoder_layers = 1;
  c.encoder_heads = 2;
  c.encoder_mlp_dim = 64;
  c.embed_channels = 32;
  c.decoder_dim = 32;
  c.decoder_heads = 2;
  c.decoder_mlp_dim = 64;
  c.llsie_input_size = 16;
  c.llsie_channels = 8;
  return c;
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"encoder_input_size", c.encoder_input_size},
                     {"patch_size", c.patch_size},
                     {"encoder_dim", c.encoder_dim},
                     {"encoder_layers", c.encoder_layers},
                     {"encoder_heads", c.encoder_heads},
                     {"encoder_mlp_dim", c.encoder_mlp_dim},
                     {"embed_channels", c.embed_channels},
                     {"decoder_dim", c.decoder_dim},
                     {"decoder_heads", c.decoder_heads},
                     {"decoder_mlp_dim", c.decoder_mlp_dim},
                     {"num_output_tokens", c.num_output_tokens},
                     {"llsie_input_size", c.llsie_input_size},
                     {"llsie_channels", c.llsie_channels},
                     {"num_classes", c.num_classes},
                     {"block_kind", to_string(c.block_kind)}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  if (!j.is_object()) throw ConfigError("model config must be an object");
  auto get = [&](const char* key, int& field) {
    if (j.contains(key)) field = j.at(key).get<int>();
  };
  // Unspecified fields keep desk defaults; llsie_input_size follows the
  // encoder size unless given explicitly.
  c = ModelConfig{};
  get("encoder_input_size", c.encoder_input_size);
  get("patch_size", c.patch_size);
  if (c.patch_size > 0) c.llsie_input_size = 8 * (c.encoder_input_size / c.patch_size);
  get("encoder_dim", c.encoder_dim);
  get("encoder_layers", c.encoder_layers);
  get("encoder_heads", c.encoder_heads);
  get("encoder_mlp_dim", c.encoder_mlp_dim);
  get("embed_channels", c.embed_channels);
  get("decoder_dim", c.decoder_dim);
  get("decoder_heads", c.decoder_heads);
  get("decoder_mlp_dim", c.decoder_mlp_dim);
  get("num_output_tokens", c.num_output_tokens);
  get("llsie_input_size", c.llsie_input_size);
  get("llsie_channels", c.llsie_channels);
  get("num_classes", c.num_classes);
  if (j.contains("block_kind")) c.block_kind = parse_block_kind(j.at("block_kind").get<std::string>());
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const char* known[] = {"encoder_input_size", "patch_size", "encoder_dim", "encoder_layers",
                                  "encoder_heads", "encoder_mlp_dim", "embed_channels", "decoder_dim",
                                  "decoder_heads", "decoder_mlp_dim", "num_output_tokens", "llsie_input_size",
                                  "llsie_channels", "num_classes", "block_kind"};
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown model config key '" + it.key() + "'");
  }
}

}  // namespace sppnet
