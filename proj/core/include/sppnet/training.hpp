#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "sppnet/data_io.hpp"
#include "sppnet/sppnet.hpp"
#include "sppnet/train_config.hpp"

namespace sppnet {

inline constexpr double kDiceEpsilon = 1e-6;

/// 1 - (2 sum(p g) + eps) / (sum p + sum g + eps) for probabilities (1, H, W).
Var dice_loss(const Var& probs, const BinaryMask& target, double eps = kDiceEpsilon);
double dice_loss_value(const Tensor& probs, const BinaryMask& target, double eps = kDiceEpsilon);

/// Which transforms `augment` applied.
struct AugmentRecord {
  bool flipped = false;
  int quarter_turns = 0;  // clockwise, 0..3
  bool cutout = false;
  int cutout_y = 0;
  int cutout_x = 0;
  int cutout_side = 0;
};

struct Augmented {
  Image image;
  InstanceLabelMap instances;
  AugmentRecord record;
};

Image flip_horizontal(const Image& image);
Grid<int> flip_horizontal(const Grid<int>& labels);
/// Rotates clockwise by 90 degrees `quarter_turns` times.
Image rotate_quarter(const Image& image, int quarter_turns);
Grid<int> rotate_quarter(const Grid<int>& labels, int quarter_turns);

/// Horizontal flip, quarter-turn rotation and cutout, each applied
/// independently with probability `cfg.aug_probability`. Cutout zeroes one
/// square of side `cutout_fraction * min(H, W)` in the image only.
Augmented augment(const Image& image, const InstanceLabelMap& instances, const TrainConfig& cfg, Rng& rng);

struct DatasetSplit {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

/// Seeded shuffle, then val and test take floor(n * fraction) ids each and
/// train takes the remainder. Each list is returned sorted.
DatasetSplit split_dataset(std::vector<std::string> ids, const std::array<double, 3>& fractions, std::uint64_t seed);

void to_json(nlohmann::json& j, const DatasetSplit& split);
void from_json(const nlohmann::json& j, DatasetSplit& split);

/// Adam without weight decay.
class Adam {
 public:
  Adam(ParameterSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Applies one update from the accumulated gradients.
  void step();
  std::int64_t steps() const { return steps_; }

 private:
  ParameterSet* params_;
  double lr_, beta1_, beta2_, eps_;
  std::int64_t steps_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Stops once the score has not improved for `patience` consecutive epochs.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Records an epoch score; returns true if it is a new best.
  bool observe(double score);
  bool should_stop() const { return since_improvement_ >= patience_; }
  double best() const { return best_; }
  int epochs_since_improvement() const { return since_improvement_; }

 private:
  int patience_;
  bool has_best_ = false;
  double best_ = 0.0;
  int since_improvement_ = 0;
};

struct TrainState {
  int epoch = 0;
  double best_val_dsc = 0.0;
  int best_epoch = 0;
  int epochs_since_improvement = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_dsc = 0.0;
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const EpochRecord& r);

struct TrainResult {
  std::vector<EpochRecord> log;
  TrainState state;
  bool stopped_early = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mean dice loss over a batch; accumulates parameter gradients.
/// `seed` determines augmentation and prompt draws for the batch.
double train_step(SppNet& model, Adam& optimizer, std::span<const Sample* const> batch,
                  const NormalizationStats& stats, const TrainConfig& train, const SamplerConfig& sampler,
                  std::uint64_t seed);

/// Mean DSC of thresholded logits against the ground truth at decoder
/// resolution, one seeded prompt pair per sample.
double validation_dsc(const SppNet& model, std::span<const Sample> samples, const NormalizationStats& stats,
                      const SamplerConfig& sampler, std::uint64_t seed);

/// Runs epochs until max_epochs or early stopping and leaves the model at
/// its best validation parameters. Throws DivergenceError on a non-finite loss.
TrainResult train_loop(SppNet& model, std::span<const Sample> train_set, std::span<const Sample> val_set,
                       const NormalizationStats& stats, const TrainConfig& train, const SamplerConfig& sampler,
                       const EpochCallback& on_epoch = {});

}  // namespace sppnet
