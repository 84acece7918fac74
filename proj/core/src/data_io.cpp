#include "sppnet/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "sppnet/errors.hpp"

namespace sppnet {

namespace fs = std::filesystem;

namespace {

std::map<std::string, fs::path> list_pngs(const fs::path& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) throw FormatError("missing directory " + dir.string());
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    out.emplace(entry.path().stem().string(), entry.path());
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string s;
  for (const auto& item : items) s += (s.empty() ? "" : ", ") + item;
  return s;
}

}  // namespace

std::vector<Sample> load_dataset(const fs::path& root) {
  const auto images = list_pngs(root / "images");
  const auto masks = list_pngs(root / "masks");
  std::vector<std::string> missing_mask;
  std::vector<std::string> missing_image;
  for (const auto& [id, path] : images)
    if (!masks.contains(id)) missing_mask.push_back(id);
  for (const auto& [id, path] : masks)
    if (!images.contains(id)) missing_image.push_back(id);
  if (!missing_mask.empty()) throw FormatError("images without a mask: " + join(missing_mask));
  if (!missing_image.empty()) throw FormatError("masks without an image: " + join(missing_image));
  if (images.empty()) throw FormatError("no samples found under " + root.string());

  std::vector<Sample> samples;
  samples.reserve(images.size());
  for (const auto& [id, image_path] : images) {
    Sample s;
    s.id = id;
    s.image = read_rgb_png(image_path);
    const Grid<int> raw = read_label_png(masks.at(id));
    if (raw.height() != s.image.height || raw.width() != s.image.width) {
      throw FormatError("sample " + id + ": image is " + std::to_string(s.image.height) + "x" +
                        std::to_string(s.image.width) + " but mask is " + std::to_string(raw.height()) + "x" +
                        std::to_string(raw.width()));
    }
    s.instances = InstanceLabelMap::renumbered(raw);
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_dataset(const fs::path& root, std::span<const Sample> samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  for (const Sample& s : samples) {
    write_rgb_png(root / "images" / (s.id + ".png"), s.image);
    write_label_png(root / "masks" / (s.id + ".png"), s.instances.labels());
  }
}

NormalizationStats compute_normalization(std::span<const Sample> samples) {
  std::array<double, 3> sum{};
  std::array<double, 3> sum_sq{};
  double count = 0.0;
  for (const Sample& s : samples) {
    const auto& px = s.image.pixels;
    for (std::size_t i = 0; i < px.size(); i += 3) {
      for (int c = 0; c < 3; ++c) {
        const double v = px[i + static_cast<std::size_t>(c)] / 255.0;
        sum[c] += v;
        sum_sq[c] += v * v;
      }
    }
    count += static_cast<double>(px.size() / 3);
  }
  NormalizationStats stats;
  if (count == 0.0) return stats;
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / count;
    const double var = std::max(0.0, sum_sq[c] / count - mean * mean);
    stats.mean[c] = mean;
    stats.stddev[c] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return stats;
}

void to_json(nlohmann::json& j, const NormalizationStats& stats) {
  j = nlohmann::json{{"mean", stats.mean}, {"std", stats.stddev}};
}

void from_json(const nlohmann::json& j, NormalizationStats& stats) {
  j.at("mean").get_to(stats.mean);
  j.at("std").get_to(stats.stddev);
}

Tensor resize_and_standardize(const Image& image, int size, const NormalizationStats& stats) {
  if (image.height < 1 || image.width < 1) throw ShapeError("degenerate image dimensions");
  if (size < 1) throw ShapeError("target size must be positive");
  Tensor out = resize_bilinear(image_to_tensor(image), size, size);
  const std::size_t plane = static_cast<std::size_t>(size) * size;
  for (int c = 0; c < 3; ++c) {
    double* p = out.raw() + plane * static_cast<std::size_t>(c);
    for (std::size_t i = 0; i < plane; ++i) p[i] = (p[i] - stats.mean[c]) / stats.stddev[c];
  }
  return out;
}

BinaryMask resize_nearest(const BinaryMask& mask, int height, int width) {
  if (mask.height() < 1 || mask.width() < 1 || height < 1 || width < 1) {
    throw ShapeError("resize_nearest: degenerate dimensions");
  }
  BinaryMask out(height, width, 0);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
      out(y, x) = mask(sy, sx);
    }
  }
  return out;
}

PreparedInputs prepare_inputs(const Sample& sample, const ModelConfig& cfg, const NormalizationStats& stats) {
  if (sample.image.height < 1 || sample.image.width < 1) {
    throw ShapeError("sample " + sample.id + ": degenerate image dimensions");
  }
  if (sample.instances.height() != sample.image.height || sample.instances.width() != sample.image.width) {
    throw ShapeError("sample " + sample.id + ": image and mask sizes differ");
  }
  PreparedInputs p;
  p.image_full = resize_and_standardize(sample.image, cfg.encoder_input_size, stats);
  p.image_llsie = resize_and_standardize(sample.image, cfg.llsie_input_size, stats);
  const int d = cfg.decoder_output_size();
  p.ground_truth = resize_nearest(sample.instances.foreground(), d, d);
  p.original_size = sample.image.size();
  return p;
}

}  // namespace sppnet
