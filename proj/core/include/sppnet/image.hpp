#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sppnet/grid.hpp"
#include "sppnet/tensor.hpp"

namespace sppnet {

/// 8-bit RGB image, interleaved HWC.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w * 3, fill) {}

  std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  ImageSize size() const { return {height, width}; }

  bool operator==(const Image&) const = default;
};

/// (3, H, W) tensor with values scaled to [0, 1].
Tensor image_to_tensor(const Image& image);

/// Reads any 8/16-bit PNG as RGB (alpha dropped, gray replicated).
Image read_rgb_png(const std::filesystem::path& path);
/// Reads a single-channel 8- or 16-bit PNG as integer labels.
Grid<int> read_label_png(const std::filesystem::path& path);

void write_rgb_png(const std::filesystem::path& path, const Image& image);
/// Writes labels as a 16-bit grayscale PNG; values must fit in [0, 65535].
void write_label_png(const std::filesystem::path& path, const Grid<int>& labels);

}  // namespace sppnet
