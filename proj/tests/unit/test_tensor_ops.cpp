#include <gtest/gtest.h>

#include <cmath>

#include "sppnet/errors.hpp"
#include "sppnet/ops.hpp"
#include "synthetic.hpp"

using namespace sppnet;
using sppnet::test_support::check_gradients;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> n(0.0, scale);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

Var param(Shape shape, Rng& rng, double scale = 1.0) { return Var(random_tensor(std::move(shape), rng, scale), true); }

// Loss with a random readout so every output element carries a distinct weight.
std::function<Var()> readout(std::function<Var()> f, std::uint64_t seed) {
  auto weights = std::make_shared<Tensor>();
  return [f, weights, seed] {
    Var out = f();
    if (weights->shape() != out.shape()) {
      Rng rng(seed);
      *weights = random_tensor(out.shape(), rng);
    }
    return ops::weighted_sum(out, *weights);
  };
}

constexpr double kTol = 1e-6;

}  // namespace

TEST(Tensor, ShapeAndIndexing) {
  Tensor t({2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  t.at(1, 2, 3) = 5.0;
  EXPECT_EQ(t[23], 5.0);
  EXPECT_THROW(t.reshaped({5, 5}), ShapeError);
  EXPECT_EQ(t.reshaped({6, 4}).at(5, 3), 5.0);
}

TEST(Tensor, BilinearMatchesHalfPixelReference) {
  // 2x2 -> 4x4 with half-pixel centers and edge clamping.
  const Tensor in({1, 2, 2}, {1, 2, 3, 4});
  const Tensor out = resize_bilinear(in, 4, 4);
  const double row0[4] = {1.0, 1.25, 1.75, 2.0};
  const double row1[4] = {1.5, 1.75, 2.25, 2.5};
  for (int x = 0; x < 4; ++x) {
    EXPECT_DOUBLE_EQ(out.at(0, 0, x), row0[x]);
    EXPECT_DOUBLE_EQ(out.at(0, 1, x), row1[x]);
  }
  EXPECT_EQ(resize_bilinear(in, 2, 2), in);
}

TEST(Tensor, BilinearDownsampleAveragesPairs) {
  Tensor in({1, 1, 4}, {0, 2, 4, 6});
  const Tensor out = resize_bilinear(in, 1, 2);
  EXPECT_DOUBLE_EQ(out[0], 1.0);
  EXPECT_DOUBLE_EQ(out[1], 5.0);
}

TEST(Ops, MatmulMatchesNaiveWithTransposes) {
  Rng rng(1);
  const Tensor a = random_tensor({3, 5}, rng);
  const Tensor b = random_tensor({5, 4}, rng);
  const Tensor c = ops::matmul(Var(a), Var(b)).value();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 5; ++k) s += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), s, 1e-12);
    }
  const Tensor ct = ops::matmul(ops::transpose(Var(a)), ops::transpose(Var(b)), true, true).value();
  EXPECT_EQ(ct.shape(), (Shape{3, 4}));
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(ct[i], c[i], 1e-12);
}

TEST(Ops, Conv2dMatchesDirectSum) {
  Rng rng(2);
  const int cin = 4, cout = 6, k = 3, groups = 2, stride = 2, pad = 1, h = 7, w = 6;
  const Tensor x = random_tensor({cin, h, w}, rng);
  const Tensor wt = random_tensor({cout, cin / groups, k, k}, rng);
  const Tensor b = random_tensor({cout}, rng);
  const Tensor y = ops::conv2d(Var(x), Var(wt), Var(b), stride, pad, groups).value();
  const int oh = (h + 2 * pad - k) / stride + 1, ow = (w + 2 * pad - k) / stride + 1;
  ASSERT_EQ(y.shape(), (Shape{cout, oh, ow}));
  const int cpg_in = cin / groups, cpg_out = cout / groups;
  for (int o = 0; o < cout; ++o)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double s = b[static_cast<std::size_t>(o)];
        const int g = o / cpg_out;
        for (int ci = 0; ci < cpg_in; ++ci)
          for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
              const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
              if (iy < 0 || ix < 0 || iy >= h || ix >= w) continue;
              s += wt[((static_cast<std::size_t>(o) * cpg_in + ci) * k + ky) * k + kx] * x.at(g * cpg_in + ci, iy, ix);
            }
        EXPECT_NEAR(y.at(o, oy, ox), s, 1e-12);
      }
}

TEST(Ops, ConvTransposeMatchesScatter) {
  Rng rng(3);
  const Tensor x = random_tensor({3, 2, 3}, rng);
  const Tensor wt = random_tensor({3, 2, 2, 2}, rng);
  const Tensor b = random_tensor({2}, rng);
  const Tensor y = ops::conv_transpose2d(Var(x), Var(wt), Var(b), 2).value();
  ASSERT_EQ(y.shape(), (Shape{2, 4, 6}));
  Tensor ref({2, 4, 6});
  for (int o = 0; o < 2; ++o)
    for (int yy = 0; yy < 4; ++yy)
      for (int xx = 0; xx < 6; ++xx) ref.at(o, yy, xx) = b[static_cast<std::size_t>(o)];
  for (int c = 0; c < 3; ++c)
    for (int iy = 0; iy < 2; ++iy)
      for (int ix = 0; ix < 3; ++ix)
        for (int o = 0; o < 2; ++o)
          for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx)
              ref.at(o, iy * 2 + ky, ix * 2 + kx) += x.at(c, iy, ix) * wt[((c * 2 + o) * 2 + ky) * 2 + kx];
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
}

TEST(Ops, MaxPoolMatchesWindowMax) {
  Rng rng(4);
  const Tensor x = random_tensor({2, 5, 5}, rng);
  const Tensor y = ops::max_pool2d(Var(x), 3, 1, 1).value();
  ASSERT_EQ(y.shape(), (Shape{2, 5, 5}));
  for (int c = 0; c < 2; ++c)
    for (int oy = 0; oy < 5; ++oy)
      for (int ox = 0; ox < 5; ++ox) {
        double m = -1e300;
        for (int yy = oy - 1; yy <= oy + 1; ++yy)
          for (int xx = ox - 1; xx <= ox + 1; ++xx)
            if (yy >= 0 && xx >= 0 && yy < 5 && xx < 5) m = std::max(m, x.at(c, yy, xx));
        EXPECT_EQ(y.at(c, oy, ox), m);
      }
}

TEST(Ops, GeluUsesExactErf) {
  const Tensor x({3}, {-1.0, 0.0, 2.0});
  const Tensor y = ops::gelu(Var(x)).value();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], 0.5 * x[i] * (1.0 + std::erf(x[i] / std::sqrt(2.0))), 1e-15);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(5);
  const Tensor y = ops::softmax_rows(Var(random_tensor({4, 7}, rng, 10.0))).value();
  for (int r = 0; r < 4; ++r) {
    double s = 0.0;
    for (int c = 0; c < 7; ++c) s += y.at(r, c);
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, ShapeErrors) {
  EXPECT_THROW(ops::add(Var(Tensor({2, 3})), Var(Tensor({3, 2}))), ShapeError);
  EXPECT_THROW(ops::matmul(Var(Tensor({2, 3})), Var(Tensor({2, 3}))), ShapeError);
  EXPECT_THROW(ops::conv2d(Var(Tensor({3, 4, 4})), Var(Tensor({2, 2, 3, 3})), Var(), 1, 1), ShapeError);
  EXPECT_THROW(ops::max_pool2d(Var(Tensor({1, 1, 1})), 2, 2), ShapeError);
}

TEST(Gradients, Elementwise) {
  Rng rng(6);
  Var a = param({3, 4}, rng), b = param({3, 4}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::mul(ops::sub(a, b), ops::add(a, b)); }, 1), {{"a", a}, {"b", b}})
                .max_rel_error,
            kTol);
  EXPECT_LT(check_gradients(readout([&] { return ops::gelu(ops::scale(a, 1.5)); }, 2), {{"a", a}}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(readout([&] { return ops::sigmoid(a); }, 3), {{"a", a}}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(readout([&] { return ops::softmax_rows(a); }, 4), {{"a", a}}).max_rel_error, kTol);
}

TEST(Gradients, MatmulAndLinear) {
  Rng rng(7);
  Var a = param({3, 5}, rng), b = param({4, 5}, rng), bias = param({4}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::matmul(a, b, false, true); }, 5), {{"a", a}, {"b", b}})
                .max_rel_error,
            kTol);
  Var c = param({5, 3}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::matmul(c, b, true, true); }, 6), {{"c", c}, {"b", b}})
                .max_rel_error,
            kTol);
  EXPECT_LT(check_gradients(readout([&] { return ops::linear(a, b, bias); }, 7), {{"a", a}, {"w", b}, {"b", bias}})
                .max_rel_error,
            kTol);
}

TEST(Gradients, SliceConcatReshape) {
  Rng rng(8);
  Var a = param({4, 6}, rng), b = param({2, 6}, rng);
  auto f = [&] {
    Var cat = ops::concat_rows({ops::slice_rows(a, 1, 2), b});
    Var cols = ops::concat_cols({ops::slice_cols(cat, 0, 2), ops::slice_cols(cat, 3, 3)});
    return ops::reshape(ops::transpose(cols), {5, 4});
  };
  EXPECT_LT(check_gradients(readout(f, 8), {{"a", a}, {"b", b}}).max_rel_error, kTol);
}

TEST(Gradients, LayerNorms) {
  Rng rng(9);
  Var x = param({3, 6}, rng), g = param({6}, rng), beta = param({6}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::layer_norm_rows(x, g, beta); }, 9),
                            {{"x", x}, {"g", g}, {"b", beta}})
                .max_rel_error,
            kTol);
  Var m = param({4, 3, 2}, rng), gc = param({4}, rng), bc = param({4}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::layer_norm_channels(m, gc, bc); }, 10),
                            {{"m", m}, {"g", gc}, {"b", bc}})
                .max_rel_error,
            kTol);
}

TEST(Gradients, Convolutions) {
  Rng rng(10);
  Var x = param({4, 6, 5}, rng), w = param({6, 2, 3, 3}, rng), b = param({6}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::conv2d(x, w, b, 2, 1, 2); }, 11), {{"x", x}, {"w", w}, {"b", b}})
                .max_rel_error,
            kTol);
  Var dw = param({4, 1, 3, 3}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::conv2d(x, dw, Var(), 1, 1, 4); }, 12), {{"x", x}, {"w", dw}})
                .max_rel_error,
            kTol);
  Var tw = param({4, 3, 2, 2}, rng), tb = param({3}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::conv_transpose2d(x, tw, tb, 2); }, 13),
                            {{"x", x}, {"w", tw}, {"b", tb}})
                .max_rel_error,
            kTol);
}

TEST(Gradients, MaxPool) {
  Rng rng(11);
  Var x = param({2, 6, 6}, rng);
  EXPECT_LT(check_gradients(readout([&] { return ops::max_pool2d(x, 2, 2); }, 14), {{"x", x}}).max_rel_error, kTol);
  EXPECT_LT(check_gradients(readout([&] { return ops::max_pool2d(x, 3, 1, 1); }, 15), {{"x", x}}).max_rel_error, kTol);
}

TEST(Autograd, SharedSubgraphAccumulates) {
  Var a(Tensor({1}, 3.0), true);
  Var b = ops::mul(a, a);
  ops::sum(ops::add(b, b)).backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 12.0);
}

TEST(Autograd, NoGradGuardRecordsNothing) {
  Var a(Tensor({1}, 3.0), true);
  NoGradGuard guard;
  EXPECT_FALSE(ops::mul(a, a).requires_grad());
}
