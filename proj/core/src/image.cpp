#include "sppnet/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

#include "sppnet/errors.hpp"

namespace sppnet {

Tensor image_to_tensor(const Image& image) {
  Tensor t({3, image.height, image.width});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) t.at(c, y, x) = image.at(y, x, c) / 255.0;
  return t;
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw FormatError("cannot open " + path.string());
  return f;
}

struct RawPng {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> bytes;  // rows, 8-bit or host-order 16-bit samples
};

enum class ReadMode { kRgb8, kGray };

// Returns false on a libpng error; all C++ objects live in `out` which is
// constructed by the caller before setjmp.
bool read_png_raw(std::FILE* fp, ReadMode mode, RawPng& out, std::vector<png_bytep>& rows, std::string& error) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    error = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    error = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    error = "libpng decode error";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (mode == ReadMode::kRgb8) {
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
  } else {
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_destroy_read_struct(&png, &info, nullptr);
      error = "label image must be single-channel grayscale";
      return false;
    }
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // big-endian file -> little-endian host
  }
  png_read_update_info(png, info);
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.channels = png_get_channels(png, info);
  out.bit_depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  out.bytes.resize(rowbytes * static_cast<std::size_t>(out.height));
  rows.resize(static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[static_cast<std::size_t>(y)] = out.bytes.data() + rowbytes * y;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

RawPng read_png(const std::filesystem::path& path, ReadMode mode) {
  FilePtr fp = open_file(path, "rb");
  png_byte header[8] = {};
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
    throw FormatError("not a PNG file: " + path.string());
  }
  std::rewind(fp.get());
  RawPng raw;
  std::vector<png_bytep> rows;
  std::string error;
  if (!read_png_raw(fp.get(), mode, raw, rows, error)) throw FormatError(error + ": " + path.string());
  return raw;
}

bool write_png_raw(std::FILE* fp, int width, int height, int color_type, int bit_depth,
                   const std::vector<png_bytep>& rows, bool swap16) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (swap16) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

Image read_rgb_png(const std::filesystem::path& path) {
  RawPng raw = read_png(path, ReadMode::kRgb8);
  if (raw.channels != 3 || raw.bit_depth != 8) throw FormatError("unexpected PNG layout after conversion: " + path.string());
  Image img;
  img.height = raw.height;
  img.width = raw.width;
  img.pixels = std::move(raw.bytes);
  return img;
}

Grid<int> read_label_png(const std::filesystem::path& path) {
  const RawPng raw = read_png(path, ReadMode::kGray);
  if (raw.channels != 1) throw FormatError("label PNG must have one channel: " + path.string());
  Grid<int> labels(raw.height, raw.width, 0);
  auto dst = labels.values();
  if (raw.bit_depth == 16) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      std::uint16_t v = 0;
      std::memcpy(&v, raw.bytes.data() + 2 * i, 2);
      dst[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = raw.bytes[i];
  }
  return labels;
}

void write_rgb_png(const std::filesystem::path& path, const Image& image) {
  if (image.height < 1 || image.width < 1) throw FormatError("cannot write an empty image");
  FilePtr fp = open_file(path, "wb");
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  auto* base = const_cast<std::uint8_t*>(image.pixels.data());
  for (int y = 0; y < image.height; ++y) rows[static_cast<std::size_t>(y)] = base + static_cast<std::size_t>(y) * image.width * 3;
  if (!write_png_raw(fp.get(), image.width, image.height, PNG_COLOR_TYPE_RGB, 8, rows, false)) {
    throw FormatError("failed to write PNG " + path.string());
  }
}

void write_label_png(const std::filesystem::path& path, const Grid<int>& labels) {
  if (labels.height() < 1 || labels.width() < 1) throw FormatError("cannot write an empty label map");
  std::vector<std::uint16_t> data(labels.size());
  auto src = labels.values();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (src[i] < 0 || src[i] > 65535) throw FormatError("label value out of 16-bit range");
    data[i] = static_cast<std::uint16_t>(src[i]);
  }
  FilePtr fp = open_file(path, "wb");
  std::vector<png_bytep> rows(static_cast<std::size_t>(labels.height()));
  for (int y = 0; y < labels.height(); ++y) {
    rows[static_cast<std::size_t>(y)] = reinterpret_cast<png_bytep>(data.data() + static_cast<std::size_t>(y) * labels.width());
  }
  if (!write_png_raw(fp.get(), labels.width(), labels.height(), PNG_COLOR_TYPE_GRAY, 16, rows, true)) {
    throw FormatError("failed to write PNG " + path.string());
  }
}

}  // namespace sppnet
