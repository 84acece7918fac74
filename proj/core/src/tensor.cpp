#include "sppnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sppnet/errors.hpp"

namespace sppnet {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor data size " + std::to_string(data_.size()) + " does not match shape " +
                     shape_to_string(shape_));
  }
}

int Tensor::dim(int i) const {
  if (i < 0 || i >= rank()) throw ShapeError("dimension index out of range for shape " + shape_to_string(shape_));
  return shape_[static_cast<std::size_t>(i)];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Tensor& Tensor::operator+=(const Tensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("tensor += shape mismatch " + shape_to_string(shape_) + " vs " + shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in_size, int out_size) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_size));
  const double ratio = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int lo = static_cast<int>(std::floor(src));
    if (lo > in_size - 1) lo = in_size - 1;
    const int hi = std::min(lo + 1, in_size - 1);
    taps[static_cast<std::size_t>(o)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& input, int out_height, int out_width) {
  if (input.rank() != 3) throw ShapeError("resize_bilinear expects (C, H, W), got " + shape_to_string(input.shape()));
  if (out_height <= 0 || out_width <= 0) throw ShapeError("resize_bilinear target size must be positive");
  const int channels = input.dim(0);
  const int in_h = input.dim(1);
  const int in_w = input.dim(2);
  const auto ys = bilinear_taps(in_h, out_height);
  const auto xs = bilinear_taps(in_w, out_width);
  Tensor out({channels, out_height, out_width});
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < out_height; ++y) {
      const Tap& ty = ys[static_cast<std::size_t>(y)];
      for (int x = 0; x < out_width; ++x) {
        const Tap& tx = xs[static_cast<std::size_t>(x)];
        const double top = input.at(c, ty.lo, tx.lo) * (1.0 - tx.frac) + input.at(c, ty.lo, tx.hi) * tx.frac;
        const double bottom = input.at(c, ty.hi, tx.lo) * (1.0 - tx.frac) + input.at(c, ty.hi, tx.hi) * tx.frac;
        out.at(c, y, x) = top * (1.0 - ty.frac) + bottom * ty.frac;
      }
    }
  }
  return out;
}

}  // namespace sppnet
