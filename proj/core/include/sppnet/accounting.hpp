#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sppnet/layer_spec.hpp"

namespace sppnet {

class SppNet;

struct LayerCost {
  std::int64_t params = 0;
  std::int64_t flops = 0;

  bool operator==(const LayerCost&) const = default;
};

/// Closed-form cost of one layer; a multiply-accumulate counts as 2 FLOPs.
///
///   conv2d            k^2 (Cin/g) Cout params, 2 k^2 (Cin/g) Cout Ho Wo FLOPs
///   conv_transpose2d  Cin Cout k^2 params, 2 Cin Cout k^2 Hin Win FLOPs
///   linear            in out params, 2 n in out FLOPs
///   attention         4 d^2 + 4 d params; projections, 4 nq nk d for the two
///                     products and 4 h nq nk for scaling and softmax
///   mlp               2 d h + h + d params, 4 n d h + n (h + d) + n h FLOPs
///   layer_norm        2 dim params, 5 FLOPs per element
///   gelu, add         1 FLOP per element
///   max_pool2d        k^2 - 1 comparisons per output element
///   embedding         table size params, tokens dim FLOPs
///   positional_encoding, matmul  no params
///
/// Biases add one parameter per output channel and one FLOP per output value.
/// Throws ConfigError for an unknown kind.
LayerCost layer_cost(const LayerSpec& layer);

std::int64_t count_params(const ArchitectureSpec& spec);
/// Throws ConfigError listing every unsupported layer kind.
std::int64_t estimate_flops(const ArchitectureSpec& spec);

std::int64_t count_params(const SppNet& model);
std::int64_t estimate_flops(const SppNet& model, int num_points = 2);

struct SubmoduleCost {
  std::string submodule;
  std::int64_t params = 0;
  std::int64_t flops = 0;
};

/// Costs grouped by submodule, in order of first appearance.
std::vector<SubmoduleCost> cost_by_submodule(const ArchitectureSpec& spec);

void to_json(nlohmann::json& j, const SubmoduleCost& row);

}  // namespace sppnet
