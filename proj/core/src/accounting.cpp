#include "sppnet/accounting.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"
#include "sppnet/sppnet.hpp"

namespace sppnet {

namespace {

using i64 = std::int64_t;

LayerCost conv_cost(const LayerSpec& l) {
  if (l.groups < 1 || l.in_channels % l.groups != 0) throw ConfigError("layer " + l.name + ": bad groups");
  const i64 k2 = static_cast<i64>(l.kernel) * l.kernel;
  const i64 out_px = static_cast<i64>(l.out_height) * l.out_width;
  const i64 weights = k2 * (l.in_channels / l.groups) * l.out_channels;
  LayerCost c{weights, 2 * weights * out_px};
  if (l.bias) {
    c.params += l.out_channels;
    c.flops += l.out_channels * out_px;
  }
  return c;
}

LayerCost conv_transpose_cost(const LayerSpec& l) {
  const i64 k2 = static_cast<i64>(l.kernel) * l.kernel;
  const i64 in_px = static_cast<i64>(l.out_height / l.stride) * (l.out_width / l.stride);
  const i64 weights = static_cast<i64>(l.in_channels) * l.out_channels * k2;
  LayerCost c{weights, 2 * weights * in_px};
  if (l.bias) {
    c.params += l.out_channels;
    c.flops += static_cast<i64>(l.out_channels) * l.out_height * l.out_width;
  }
  return c;
}

LayerCost linear_cost(const LayerSpec& l) {
  const i64 weights = static_cast<i64>(l.in_channels) * l.out_channels;
  LayerCost c{weights, 2 * weights * l.tokens};
  if (l.bias) {
    c.params += l.out_channels;
    c.flops += static_cast<i64>(l.tokens) * l.out_channels;
  }
  return c;
}

LayerCost attention_cost(const LayerSpec& l) {
  const i64 d = l.dim;
  const i64 nq = l.tokens;
  const i64 nk = l.tokens_kv;
  LayerCost c;
  c.params = 4 * d * d + 4 * d;
  const i64 projected_rows = 2 * nq + 2 * nk;  // q and output on queries, k and v on keys
  c.flops = 2 * d * d * projected_rows + d * projected_rows + 4 * nq * nk * d + 4 * static_cast<i64>(l.heads) * nq * nk;
  return c;
}

LayerCost mlp_cost(const LayerSpec& l) {
  const i64 d = l.dim;
  const i64 h = l.hidden;
  const i64 n = l.tokens;
  return {2 * d * h + h + d, 4 * n * d * h + n * (h + d) + n * h};
}

}  // namespace

LayerCost layer_cost(const LayerSpec& l) {
  const std::string& k = l.kind;
  if (k == "conv2d") return conv_cost(l);
  if (k == "conv_transpose2d") return conv_transpose_cost(l);
  if (k == "linear") return linear_cost(l);
  if (k == "attention") return attention_cost(l);
  if (k == "mlp") return mlp_cost(l);
  if (k == "layer_norm") return {2LL * l.dim, 5 * l.elements};
  if (k == "gelu" || k == "add") return {0, l.elements};
  if (k == "max_pool2d") return {0, (static_cast<i64>(l.kernel) * l.kernel - 1) * l.elements};
  if (k == "embedding") return {l.elements, static_cast<i64>(l.tokens) * l.dim};
  if (k == "positional_encoding") return {0, static_cast<i64>(l.tokens) * l.dim};
  if (k == "matmul") return {0, 2LL * l.tokens * l.dim * l.elements};
  throw ConfigError("unsupported layer kind '" + k + "' (" + l.submodule + "." + l.name + ")");
}

namespace {

void require_supported(const ArchitectureSpec& spec) {
  std::set<std::string> unknown;
  for (const LayerSpec& l : spec) {
    try {
      layer_cost(l);
    } catch (const ConfigError&) {
      unknown.insert(l.kind);
    }
  }
  if (unknown.empty()) return;
  std::string list;
  for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
  throw ConfigError("unsupported layer kinds: " + list);
}

}  // namespace

std::int64_t count_params(const ArchitectureSpec& spec) {
  require_supported(spec);
  i64 total = 0;
  for (const LayerSpec& l : spec) total += layer_cost(l).params;
  return total;
}

std::int64_t estimate_flops(const ArchitectureSpec& spec) {
  require_supported(spec);
  i64 total = 0;
  for (const LayerSpec& l : spec) total += layer_cost(l).flops;
  return total;
}

std::int64_t count_params(const SppNet& model) { return count_params(model.describe()); }

std::int64_t estimate_flops(const SppNet& model, int num_points) { return estimate_flops(model.describe(num_points)); }

std::vector<SubmoduleCost> cost_by_submodule(const ArchitectureSpec& spec) {
  require_supported(spec);
  std::vector<SubmoduleCost> rows;
  for (const LayerSpec& l : spec) {
    auto it = std::find_if(rows.begin(), rows.end(), [&](const SubmoduleCost& r) { return r.submodule == l.submodule; });
    if (it == rows.end()) {
      rows.push_back({l.submodule, 0, 0});
      it = rows.end() - 1;
    }
    const LayerCost c = layer_cost(l);
    it->params += c.params;
    it->flops += c.flops;
  }
  return rows;
}

void to_json(nlohmann::json& j, const SubmoduleCost& row) {
  j = nlohmann::json{{"submodule", row.submodule}, {"params", row.params}, {"flops", row.flops}};
}

}  // namespace sppnet
