#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <unistd.h>

namespace sppnet::test_support {

namespace fs = std::filesystem;

namespace {

void paint_background(Image& img, Rng& rng) {
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const int noise = uniform_int(rng, -6, 6);
      img.at(y, x, 0) = static_cast<std::uint8_t>(230 + noise);
      img.at(y, x, 1) = static_cast<std::uint8_t>(190 + noise);
      img.at(y, x, 2) = static_cast<std::uint8_t>(210 + noise);
    }
}

void paint_nucleus(Image& img, int y, int x, Rng& rng) {
  const int noise = uniform_int(rng, -6, 6);
  img.at(y, x, 0) = static_cast<std::uint8_t>(80 + noise);
  img.at(y, x, 1) = static_cast<std::uint8_t>(40 + noise);
  img.at(y, x, 2) = static_cast<std::uint8_t>(130 + noise);
}

}  // namespace

Sample make_blob_sample(const std::string& id, int height, int width, int num_blobs, std::uint64_t seed) {
  Rng rng(seed);
  Image img(height, width);
  paint_background(img, rng);
  Grid<int> labels(height, width, 0);
  const int rmax = std::max(2, std::min(height, width) / 8);
  int placed = 0;
  for (int attempt = 0; attempt < 50 * num_blobs && placed < num_blobs; ++attempt) {
    const int ry = uniform_int(rng, 2, rmax);
    const int rx = uniform_int(rng, 2, rmax);
    const int cy = uniform_int(rng, ry + 1, height - ry - 2);
    const int cx = uniform_int(rng, rx + 1, width - rx - 2);
    bool free = true;
    for (int y = cy - ry - 1; y <= cy + ry + 1 && free; ++y)
      for (int x = cx - rx - 1; x <= cx + rx + 1 && free; ++x) free = labels(y, x) == 0;
    if (!free) continue;
    ++placed;
    for (int y = cy - ry; y <= cy + ry; ++y)
      for (int x = cx - rx; x <= cx + rx; ++x) {
        const double u = static_cast<double>(y - cy) / ry;
        const double v = static_cast<double>(x - cx) / rx;
        if (u * u + v * v <= 1.0) {
          labels(y, x) = placed;
          paint_nucleus(img, y, x, rng);
        }
      }
  }
  return Sample{id, std::move(img), InstanceLabelMap::renumbered(labels)};
}

Sample make_single_blob(const std::string& id, int size, int radius) {
  Rng rng(7);
  Image img(size, size);
  paint_background(img, rng);
  Grid<int> labels(size, size, 0);
  const double c = (size - 1) / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if ((y - c) * (y - c) + (x - c) * (x - c) <= static_cast<double>(radius) * radius) {
        labels(y, x) = 1;
        paint_nucleus(img, y, x, rng);
      }
  return Sample{id, std::move(img), InstanceLabelMap(std::move(labels))};
}

std::vector<Sample> make_dataset(int count, int size, int num_blobs, std::uint64_t seed) {
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "img%03d", i);
    out.push_back(make_blob_sample(id, size, size, num_blobs, derive_seed(seed, {static_cast<std::uint64_t>(i)})));
  }
  return out;
}

namespace {

/// Removes every directory handed out by fresh_dir when the process exits.
struct TempDirs {
  std::vector<fs::path> dirs;
  ~TempDirs() {
    std::error_code ec;
    for (const auto& d : dirs) fs::remove_all(d, ec);
  }
};

}  // namespace

fs::path fresh_dir(const std::string& name) {
  static TempDirs registry;
  // The pid keeps concurrently running test processes apart.
  const fs::path dir = fs::temp_directory_path() / ("sppnet_test_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  registry.dirs.push_back(dir);
  return dir;
}

GradCheck check_gradients(const std::function<Var()>& loss, std::vector<std::pair<std::string, Var>> inputs, double h,
                          double floor, std::int64_t stride) {
  for (auto& [name, v] : inputs) v.zero_grad();
  loss().backward();
  GradCheck result;
  NoGradGuard no_grad;
  std::int64_t counter = 0;
  for (auto& [name, v] : inputs) {
    const Tensor analytic = v.grad();
    Tensor& value = v.mutable_value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (counter++ % stride != 0) continue;
      const double saved = value[i];
      value[i] = saved + h;
      const double up = loss().value()[0];
      value[i] = saved - h;
      const double down = loss().value()[0];
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = name + "[" + std::to_string(i) + "] analytic " + std::to_string(a) + " numeric " +
                       std::to_string(numeric);
      }
    }
  }
  return result;
}

}  // namespace sppnet::test_support
