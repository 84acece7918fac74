#include "sppnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "sppnet/errors.hpp"

namespace sppnet {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t read_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw FormatError(std::string("truncated checkpoint while reading ") + what);
  }
  return v;
}

std::string read_bytes(std::istream& is, std::uint32_t n, const char* what) {
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw FormatError(std::string("truncated checkpoint while reading ") + what);
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ParameterSet& params,
                      const nlohmann::json& extra) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open checkpoint for writing: " + path.string());
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  const std::string meta = nlohmann::json{{"model", config}, {"extra", extra}}.dump();
  write_u32(os, static_cast<std::uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_u32(os, static_cast<std::uint32_t>(params.size()));
  std::vector<float> buf;
  for (const auto& [name, var] : params.entries()) {
    const Tensor& t = var.value();
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) write_u32(os, static_cast<std::uint32_t>(d));
    buf.assign(t.data().begin(), t.data().end());
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw FormatError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint: " + path.string());
  char magic[sizeof kCheckpointMagic] = {};
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw FormatError("bad checkpoint magic in " + path.string());
  }
  const std::uint32_t version = read_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const std::string meta_text = read_bytes(is, read_u32(is, "metadata length"), "metadata");
  try {
    const auto meta = nlohmann::json::parse(meta_text);
    ckpt.config = meta.at("model").get<ModelConfig>();
    if (meta.contains("extra")) ckpt.extra = meta.at("extra");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint metadata: ") + e.what());
  }
  const std::uint32_t count = read_u32(is, "tensor count");
  std::vector<float> buf;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_bytes(is, read_u32(is, "name length"), "tensor name");
    const std::uint32_t rank = read_u32(is, "rank");
    if (rank == 0 || rank > 8) throw FormatError("invalid tensor rank for '" + name + "'");
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(read_u32(is, "dimension")));
    buf.resize(shape_size(shape));
    if (!buf.empty() &&
        !is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)))) {
      throw FormatError("truncated payload for tensor '" + name + "'");
    }
    ckpt.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::vector<double>(buf.begin(), buf.end())));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint tensors");
  return ckpt;
}

void load_parameters(ParameterSet& params, const Checkpoint& ckpt) {
  if (ckpt.tensors.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(ckpt.tensors.size()) + " tensors, model expects " +
                      std::to_string(params.size()));
  }
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : ckpt.tensors) by_name[name] = &t;
  std::vector<Tensor> values;
  values.reserve(params.size());
  for (const auto& [name, var] : params.entries()) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (it->second->shape() != var.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_to_string(it->second->shape()) +
                        ", model expects " + shape_to_string(var.shape()));
    }
    values.push_back(*it->second);
  }
  params.restore(values);
}

}  // namespace sppnet
