#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sppnet/grid.hpp"
#include "sppnet/random.hpp"

namespace sppnet {

/// Instance segmentation ground truth: 0 is background, k in 1..n is the
/// k-th nucleus. Ids are contiguous; use `renumbered` to normalize raw labels.
class InstanceLabelMap {
 public:
  InstanceLabelMap() = default;
  /// Validates that ids are exactly {0} or {0..n} subsets covering 1..n.
  explicit InstanceLabelMap(Grid<int> labels);

  /// Renumbers nonzero labels to 1..n in order of first appearance (row-major).
  static InstanceLabelMap renumbered(const Grid<int>& raw);

  const Grid<int>& labels() const { return labels_; }
  int num_instances() const { return num_instances_; }
  int height() const { return labels_.height(); }
  int width() const { return labels_.width(); }
  int operator()(int y, int x) const { return labels_(y, x); }

  /// Pixel count per instance; index 0 holds the background count.
  std::vector<std::int64_t> pixel_counts() const;
  /// Union of all instances.
  BinaryMask foreground() const;

  bool operator==(const InstanceLabelMap&) const = default;

 private:
  Grid<int> labels_;
  int num_instances_ = 0;
};

/// Exact L1 distance (pixels) from each instance pixel to the nearest
/// non-instance pixel. Zero outside the instance.
using DistanceMap = Grid<int>;

enum class PromptLabel : int { kNegative = 0, kPositive = 1 };

struct PointPrompt {
  int x = 0;  // column
  int y = 0;  // row
  PromptLabel label = PromptLabel::kPositive;

  bool operator==(const PointPrompt&) const = default;
};

/// Normalized (2K+1)x(2K+1) isotropic Gaussian window.
struct GaussianKernel {
  int half_width = 0;
  double sigma = 1.0;
  /// Constant that makes the weights sum to one.
  double normalizer = 1.0;
  /// Row-major over (m_y, m_x), both running -K..K.
  std::vector<double> weights;

  int side() const { return 2 * half_width + 1; }
  double at(int mx, int my) const {
    return weights[static_cast<std::size_t>((my + half_width) * side() + (mx + half_width))];
  }
};

struct SamplerConfig {
  int half_width = 2;  // K
  double sigma = 1.0;
  std::uint64_t seed = 0;
  bool require_inside_instance = false;

  void validate() const;
};

/// Positive prompt together with where it came from.
struct PositiveSample {
  PointPrompt point;
  int instance_id = 0;
  PointPrompt center;
};

struct PromptPair {
  PointPrompt positive;
  PointPrompt negative;
};

/// Two-pass city-block transform; pixels outside the image count as background.
DistanceMap l1_distance_transform(const InstanceLabelMap& mask, int instance_id);

/// First maximal pixel in row-major order. Throws on an all-zero map.
PointPrompt find_center(const DistanceMap& dist);

GaussianKernel make_gaussian_kernel(int half_width, double sigma);

/// Picks an instance uniformly, finds its center and draws a Gaussian-weighted
/// neighbor inside the image (and inside the instance when configured).
PositiveSample sample_positive_point(const InstanceLabelMap& mask, const SamplerConfig& cfg, Rng& rng);

/// Uniform over background pixels.
PointPrompt sample_negative_point(const InstanceLabelMap& mask, Rng& rng);

/// Positive draw followed by negative draw from the same generator.
PromptPair sample_prompt_pair(const InstanceLabelMap& mask, const SamplerConfig& cfg, Rng& rng);

}  // namespace sppnet
