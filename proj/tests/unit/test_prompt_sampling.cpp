#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "sppnet/errors.hpp"
#include "sppnet/prompt_sampling.hpp"

using namespace sppnet;

namespace {

InstanceLabelMap from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(rows.begin()->size());
  Grid<int> g(h, w, 0);
  int y = 0;
  for (const auto& row : rows) {
    int x = 0;
    for (int v : row) g(y, x++) = v;
    ++y;
  }
  return InstanceLabelMap(g);
}

InstanceLabelMap square(int size, int y0, int x0, int side) {
  Grid<int> g(size, size, 0);
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) g(y, x) = 1;
  return InstanceLabelMap(g);
}

// Min L1 distance to any pixel outside the instance, the image exterior included.
DistanceMap brute_force_distance(const InstanceLabelMap& m, int id) {
  const int h = m.height(), w = m.width();
  DistanceMap d(h, w, 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (m(y, x) != id) continue;
      int best = std::min({y + 1, x + 1, h - y, w - x});
      for (int qy = 0; qy < h; ++qy)
        for (int qx = 0; qx < w; ++qx)
          if (m(qy, qx) != id) best = std::min(best, std::abs(qy - y) + std::abs(qx - x));
      d(y, x) = best;
    }
  return d;
}

InstanceLabelMap random_map(int size, int max_rects, Rng& rng) {
  Grid<int> g(size, size, 0);
  const int n = uniform_int(rng, 1, max_rects);
  for (int i = 0; i < n; ++i) {
    const int y0 = uniform_int(rng, 0, size - 1), x0 = uniform_int(rng, 0, size - 1);
    const int hh = uniform_int(rng, 1, size / 2), ww = uniform_int(rng, 1, size / 2);
    for (int y = y0; y < std::min(size, y0 + hh); ++y)
      for (int x = x0; x < std::min(size, x0 + ww); ++x) g(y, x) = uniform_int(rng, 0, 3) == 0 ? 0 : i + 1;
  }
  g(uniform_int(rng, 0, size - 1), uniform_int(rng, 0, size - 1)) = n + 1;  // never empty
  return InstanceLabelMap::renumbered(g);
}

}  // namespace

TEST(InstanceLabelMap, RenumbersByFirstAppearance) {
  Grid<int> raw(2, 3, 0);
  raw(0, 1) = 9;
  raw(1, 0) = 5;
  raw(1, 2) = 9;
  const InstanceLabelMap m = InstanceLabelMap::renumbered(raw);
  EXPECT_EQ(m.num_instances(), 2);
  EXPECT_EQ(m(0, 1), 1);
  EXPECT_EQ(m(1, 2), 1);
  EXPECT_EQ(m(1, 0), 2);
  EXPECT_EQ(m.pixel_counts(), (std::vector<std::int64_t>{3, 2, 1}));
}

TEST(InstanceLabelMap, RejectsGapsAndNegatives) {
  Grid<int> g(1, 3, 0);
  g(0, 0) = 2;
  EXPECT_THROW(InstanceLabelMap{g}, FormatError);
  g(0, 0) = -1;
  EXPECT_THROW(InstanceLabelMap{g}, FormatError);
  EXPECT_THROW(InstanceLabelMap(Grid<int>(0, 0)), ShapeError);
}

TEST(DistanceTransform, WorkedExamples) {
  Grid<int> lone(5, 5, 0);
  lone(2, 2) = 1;
  const DistanceMap d1 = l1_distance_transform(InstanceLabelMap(lone), 1);
  EXPECT_EQ(d1(2, 2), 1);
  int nonzero = 0;
  for (int v : d1.values()) nonzero += v != 0;
  EXPECT_EQ(nonzero, 1);

  const DistanceMap d2 = l1_distance_transform(square(7, 1, 1, 5), 1);
  EXPECT_EQ(d2(3, 3), 3);

  Grid<int> bar(5, 5, 0);
  for (int x = 1; x <= 3; ++x) bar(2, x) = 1;
  const DistanceMap d3 = l1_distance_transform(InstanceLabelMap(bar), 1);
  for (int x = 1; x <= 3; ++x) EXPECT_EQ(d3(2, x), 1);
}

TEST(DistanceTransform, ImageBorderCountsAsBackground) {
  Grid<int> full(3, 3, 1);
  const DistanceMap d = l1_distance_transform(InstanceLabelMap(full), 1);
  EXPECT_EQ(d(1, 1), 2);
  EXPECT_EQ(d(0, 0), 1);
}

TEST(DistanceTransform, MatchesBruteForceOnRandomMaps) {
  Rng rng(1);
  for (int trial = 0; trial < 60; ++trial) {
    const InstanceLabelMap m = random_map(24, 5, rng);
    for (int id = 1; id <= m.num_instances(); ++id) {
      const DistanceMap d = l1_distance_transform(m, id);
      ASSERT_EQ(d, brute_force_distance(m, id)) << "trial " << trial << " id " << id;
      for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x + 1 < d.width(); ++x) ASSERT_LE(std::abs(d(y, x) - d(y, x + 1)), 1);
    }
  }
}

TEST(DistanceTransform, Errors) {
  const InstanceLabelMap m = square(5, 1, 1, 2);
  EXPECT_THROW(l1_distance_transform(m, 2), SamplingError);
  EXPECT_THROW(l1_distance_transform(m, 0), SamplingError);
}

TEST(FindCenter, WorkedExamplesAndTieBreak) {
  const PointPrompt c = find_center(l1_distance_transform(square(7, 1, 1, 5), 1));
  EXPECT_EQ(c.x, 3);
  EXPECT_EQ(c.y, 3);
  EXPECT_EQ(c.label, PromptLabel::kPositive);

  Grid<int> bar(5, 5, 0);
  for (int x = 1; x <= 3; ++x) bar(2, x) = 1;
  const PointPrompt b = find_center(l1_distance_transform(InstanceLabelMap(bar), 1));
  EXPECT_EQ(b.x, 1);
  EXPECT_EQ(b.y, 2);

  // 2x4 block: four pixels tie at distance 2 -> first in row-major order.
  const PointPrompt t = find_center(l1_distance_transform(from_rows({{0, 0, 0, 0, 0, 0},
                                                                      {0, 1, 1, 1, 1, 0},
                                                                      {0, 1, 1, 1, 1, 0},
                                                                      {0, 1, 1, 1, 1, 0},
                                                                      {0, 1, 1, 1, 1, 0},
                                                                      {0, 0, 0, 0, 0, 0}}),
                                                            1));
  EXPECT_EQ(t.x, 2);
  EXPECT_EQ(t.y, 2);
  EXPECT_THROW(find_center(DistanceMap(3, 3, 0)), SamplingError);
}

TEST(GaussianKernel, NormalizedSymmetricCenterMax) {
  for (int k = 0; k <= 5; ++k)
    for (double sigma : {0.5, 1.0, 2.0, 3.0}) {
      const GaussianKernel g = make_gaussian_kernel(k, sigma);
      double sum = 0.0;
      for (double w : g.weights) sum += w;
      EXPECT_NEAR(sum, 1.0, 1e-9);
      for (int my = -k; my <= k; ++my)
        for (int mx = -k; mx <= k; ++mx) {
          EXPECT_DOUBLE_EQ(g.at(mx, my), g.at(-mx, -my));
          EXPECT_DOUBLE_EQ(g.at(mx, my), g.at(my, mx));
          EXPECT_LE(g.at(mx, my), g.at(0, 0));
        }
    }
}

TEST(GaussianKernel, WorkedExamples) {
  EXPECT_EQ(make_gaussian_kernel(0, 1.0).weights, std::vector<double>{1.0});
  double sum = 0.0;
  for (int my = -2; my <= 2; ++my)
    for (int mx = -2; mx <= 2; ++mx) sum += std::exp(-(mx * mx + my * my) / 2.0);
  EXPECT_NEAR(make_gaussian_kernel(2, 1.0).at(0, 0), 1.0 / sum, 1e-15);
  const GaussianKernel k1 = make_gaussian_kernel(1, 1.0);
  EXPECT_DOUBLE_EQ(k1.at(1, 0), k1.at(0, 1));
  EXPECT_DOUBLE_EQ(k1.at(1, 0), k1.at(-1, 0));
  EXPECT_THROW(make_gaussian_kernel(1, 0.0), ConfigError);
  EXPECT_THROW(make_gaussian_kernel(-1, 1.0), ConfigError);
}

TEST(PositiveSampling, StaysInWindowAndBounds) {
  Rng map_rng(2);
  SamplerConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    const InstanceLabelMap m = random_map(16, 4, map_rng);
    Rng rng(static_cast<std::uint64_t>(trial));
    const PositiveSample s = sample_positive_point(m, cfg, rng);
    ASSERT_GE(s.instance_id, 1);
    ASSERT_LE(s.instance_id, m.num_instances());
    ASSERT_EQ(m(s.center.y, s.center.x), s.instance_id);
    ASSERT_LE(std::abs(s.point.x - s.center.x), cfg.half_width);
    ASSERT_LE(std::abs(s.point.y - s.center.y), cfg.half_width);
    ASSERT_TRUE(m.labels().contains(s.point.y, s.point.x));
  }
}

TEST(PositiveSampling, InsideInstanceFlag) {
  Rng map_rng(3);
  SamplerConfig cfg;
  cfg.require_inside_instance = true;
  cfg.half_width = 4;
  for (int trial = 0; trial < 300; ++trial) {
    const InstanceLabelMap m = random_map(16, 4, map_rng);
    Rng rng(static_cast<std::uint64_t>(trial));
    const PositiveSample s = sample_positive_point(m, cfg, rng);
    ASSERT_EQ(m(s.point.y, s.point.x), s.instance_id);
  }
}

TEST(PositiveSampling, ZeroWindowReturnsCenter) {
  SamplerConfig cfg;
  cfg.half_width = 0;
  const InstanceLabelMap m = square(9, 2, 2, 5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const PositiveSample s = sample_positive_point(m, cfg, rng);
    EXPECT_EQ(s.point, s.center);
  }
}

TEST(PositiveSampling, NoForegroundIsAnError) {
  Rng rng(0);
  EXPECT_THROW(sample_positive_point(InstanceLabelMap(Grid<int>(4, 4, 0)), SamplerConfig{}, rng), SamplingError);
}

TEST(PositiveSampling, BorderOffsetsAreRenormalized) {
  // Center at (0, 0): only offsets with mx, my >= 0 are in bounds.
  Grid<int> g(6, 6, 0);
  g(0, 0) = 1;
  const InstanceLabelMap m(g);
  SamplerConfig cfg;
  const GaussianKernel k = make_gaussian_kernel(2, 1.0);
  double total = 0.0;
  for (int my = 0; my <= 2; ++my)
    for (int mx = 0; mx <= 2; ++mx) total += k.at(mx, my);
  std::map<std::pair<int, int>, int> counts;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    Rng rng(static_cast<std::uint64_t>(i) + 17);
    const PointPrompt p = sample_positive_point(m, cfg, rng).point;
    ++counts[{p.x, p.y}];
  }
  double tv = 0.0;
  for (int my = 0; my <= 2; ++my)
    for (int mx = 0; mx <= 2; ++mx) tv += std::abs(counts[{mx, my}] / static_cast<double>(n) - k.at(mx, my) / total);
  EXPECT_LT(0.5 * tv, 0.01);
}

TEST(NegativeSampling, OnlyBackgroundAndForcedPixel) {
  Grid<int> g(3, 3, 1);
  g(2, 1) = 0;
  const InstanceLabelMap m(g);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const PointPrompt p = sample_negative_point(m, rng);
    EXPECT_EQ(p.x, 1);
    EXPECT_EQ(p.y, 2);
    EXPECT_EQ(p.label, PromptLabel::kNegative);
  }
  Rng rng(0);
  EXPECT_THROW(sample_negative_point(InstanceLabelMap(Grid<int>(2, 2, 1)), rng), SamplingError);
}

TEST(PromptPair, DeterministicAndLabeled) {
  const InstanceLabelMap m = square(12, 3, 4, 5);
  SamplerConfig cfg;
  Rng a(42), b(42);
  const PromptPair p = sample_prompt_pair(m, cfg, a);
  const PromptPair q = sample_prompt_pair(m, cfg, b);
  EXPECT_EQ(p.positive, q.positive);
  EXPECT_EQ(p.negative, q.negative);
  EXPECT_EQ(p.positive.label, PromptLabel::kPositive);
  EXPECT_EQ(p.negative.label, PromptLabel::kNegative);

  Grid<int> one(5, 5, 0);
  one(1, 3) = 1;
  cfg.half_width = 0;
  Rng c(1);
  const PromptPair forced = sample_prompt_pair(InstanceLabelMap(one), cfg, c);
  EXPECT_EQ(forced.positive.x, 3);
  EXPECT_EQ(forced.positive.y, 1);
}

TEST(SamplerConfig, Validation) {
  SamplerConfig cfg;
  cfg.half_width = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.half_width = 2;
  cfg.sigma = 0.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}
