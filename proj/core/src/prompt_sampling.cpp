#include "sppnet/prompt_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

namespace sppnet {

InstanceLabelMap::InstanceLabelMap(Grid<int> labels) : labels_(std::move(labels)) {
  if (labels_.height() < 1 || labels_.width() < 1) throw ShapeError("instance label map must be at least 1x1");
  int max_id = 0;
  for (int v : labels_.values()) {
    if (v < 0) throw FormatError("instance label map contains negative id " + std::to_string(v));
    max_id = std::max(max_id, v);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (int v : labels_.values()) seen[static_cast<std::size_t>(v)] = true;
  for (int id = 1; id <= max_id; ++id) {
    if (!seen[static_cast<std::size_t>(id)]) {
      throw FormatError("instance ids are not contiguous: id " + std::to_string(id) + " missing below " +
                        std::to_string(max_id));
    }
  }
  num_instances_ = max_id;
}

InstanceLabelMap InstanceLabelMap::renumbered(const Grid<int>& raw) {
  Grid<int> out(raw.height(), raw.width(), 0);
  std::unordered_map<int, int> mapping;
  auto src = raw.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const int v = src[i];
    if (v < 0) throw FormatError("instance label map contains negative id " + std::to_string(v));
    if (v == 0) continue;
    auto [it, inserted] = mapping.try_emplace(v, static_cast<int>(mapping.size()) + 1);
    dst[i] = it->second;
  }
  return InstanceLabelMap(std::move(out));
}

std::vector<std::int64_t> InstanceLabelMap::pixel_counts() const {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(num_instances_) + 1, 0);
  for (int v : labels_.values()) ++counts[static_cast<std::size_t>(v)];
  return counts;
}

BinaryMask InstanceLabelMap::foreground() const {
  BinaryMask m(height(), width(), 0);
  auto src = labels_.values();
  auto dst = m.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0 ? 1 : 0;
  return m;
}

void SamplerConfig::validate() const {
  if (half_width < 0) throw ConfigError("sampler K must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sampler sigma must be > 0");
}

DistanceMap l1_distance_transform(const InstanceLabelMap& mask, int instance_id) {
  if (instance_id < 1 || instance_id > mask.num_instances()) {
    throw SamplingError("no such instance: " + std::to_string(instance_id));
  }
  const int h = mask.height();
  const int w = mask.width();
  constexpr int kInf = std::numeric_limits<int>::max() / 2;
  DistanceMap d(h, w, 0);
  bool any = false;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask(y, x) == instance_id) {
        d(y, x) = kInf;
        any = true;
      }
  if (!any) throw SamplingError("empty region: instance " + std::to_string(instance_id));

  // Neighbors outside the image read as 0 (background).
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (d(y, x) == 0) continue;
      const int up = y > 0 ? d(y - 1, x) : 0;
      const int left = x > 0 ? d(y, x - 1) : 0;
      d(y, x) = std::min(d(y, x), std::min(up, left) + 1);
    }
  for (int y = h - 1; y >= 0; --y)
    for (int x = w - 1; x >= 0; --x) {
      if (d(y, x) == 0) continue;
      const int down = y + 1 < h ? d(y + 1, x) : 0;
      const int right = x + 1 < w ? d(y, x + 1) : 0;
      d(y, x) = std::min(d(y, x), std::min(down, right) + 1);
    }
  return d;
}

PointPrompt find_center(const DistanceMap& dist) {
  int best = 0;
  PointPrompt center{0, 0, PromptLabel::kPositive};
  for (int y = 0; y < dist.height(); ++y)
    for (int x = 0; x < dist.width(); ++x)
      if (dist(y, x) > best) {  // strict: keeps the first maximum in scan order
        best = dist(y, x);
        center.x = x;
        center.y = y;
      }
  if (best == 0) throw SamplingError("degenerate instance: distance map is all zero");
  return center;
}

GaussianKernel make_gaussian_kernel(int half_width, double sigma) {
  if (half_width < 0) throw ConfigError("kernel half-width K must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("kernel sigma must be > 0");
  GaussianKernel k;
  k.half_width = half_width;
  k.sigma = sigma;
  const int side = k.side();
  k.weights.resize(static_cast<std::size_t>(side) * side);
  double total = 0.0;
  for (int my = -half_width; my <= half_width; ++my)
    for (int mx = -half_width; mx <= half_width; ++mx) {
      const double v = std::exp(-static_cast<double>(mx * mx + my * my) / (2.0 * sigma * sigma));
      k.weights[static_cast<std::size_t>((my + half_width) * side + (mx + half_width))] = v;
      total += v;
    }
  k.normalizer = 1.0 / total;
  for (double& v : k.weights) v *= k.normalizer;
  return k;
}

PositiveSample sample_positive_point(const InstanceLabelMap& mask, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  if (mask.num_instances() < 1) throw SamplingError("no foreground: label map has no instances");
  const int id = uniform_int(rng, 1, mask.num_instances());
  const PointPrompt center = find_center(l1_distance_transform(mask, id));
  const GaussianKernel kernel = make_gaussian_kernel(cfg.half_width, cfg.sigma);

  struct Candidate {
    int x;
    int y;
    double weight;
  };
  std::vector<Candidate> candidates;
  double total = 0.0;
  const int k = cfg.half_width;
  for (int my = -k; my <= k; ++my)
    for (int mx = -k; mx <= k; ++mx) {
      const int x = center.x + mx;
      const int y = center.y + my;
      if (!mask.labels().contains(y, x)) continue;
      if (cfg.require_inside_instance && mask(y, x) != id) continue;
      const double w = kernel.at(mx, my);
      candidates.push_back({x, y, w});
      total += w;
    }

  PositiveSample out;
  out.instance_id = id;
  out.center = center;
  out.point = center;
  if (candidates.empty() || total <= 0.0) return out;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  const Candidate* chosen = &candidates.back();
  for (const Candidate& c : candidates) {
    acc += c.weight;
    if (u < acc) {
      chosen = &c;
      break;
    }
  }
  out.point = {chosen->x, chosen->y, PromptLabel::kPositive};
  return out;
}

PointPrompt sample_negative_point(const InstanceLabelMap& mask, Rng& rng) {
  const auto labels = mask.labels().values();
  const auto background = std::count(labels.begin(), labels.end(), 0);
  if (background == 0) throw SamplingError("no background: every pixel belongs to an instance");
  auto target = std::uniform_int_distribution<std::int64_t>(0, background - 1)(rng);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) continue;
    if (target-- == 0) {
      const int w = mask.width();
      return {static_cast<int>(i % static_cast<std::size_t>(w)), static_cast<int>(i / static_cast<std::size_t>(w)),
              PromptLabel::kNegative};
    }
  }
  throw SamplingError("no background");  // unreachable
}

PromptPair sample_prompt_pair(const InstanceLabelMap& mask, const SamplerConfig& cfg, Rng& rng) {
  PromptPair pair;
  pair.positive = sample_positive_point(mask, cfg, rng).point;
  pair.negative = sample_negative_point(mask, rng);
  return pair;
}

}  // namespace sppnet
