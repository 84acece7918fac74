#pragma once

#include <array>
#include <cstdint>

#include <nlohmann/json_fwd.hpp>

namespace sppnet {

struct TrainConfig {
  double learning_rate = 5e-4;
  int batch_size = 4;
  int max_epochs = 200;
  int early_stop_patience = 20;
  double aug_probability = 0.25;
  /// Fraction of the image side used for the cutout square.
  double cutout_fraction = 0.25;
  /// (train, val, test)
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::uint64_t seed = 0;

  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

}  // namespace sppnet
