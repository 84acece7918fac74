#include "sppnet/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "sppnet/errors.hpp"

namespace sppnet::ops {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

CMapR as_matrix(const Tensor& t, int rows, int cols) { return CMapR(t.raw(), rows, cols); }
MapR as_matrix(Tensor& t, int rows, int cols) { return MapR(t.raw(), rows, cols); }

void require(bool cond, const std::string& what) {
  if (!cond) throw ShapeError(what);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(b.shape()));
}

void require_rank(const Var& a, int rank, const char* op) {
  require(a.value().rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                        shape_to_string(a.shape()));
}

// Column buffer for one convolution group: rows (c, ky, kx), columns (oy, ox).
void im2col(const Tensor& x, int c0, int cg, int k, int stride, int pad, int out_h, int out_w, double* cols) {
  const int in_h = x.dim(1);
  const int in_w = x.dim(2);
  const std::size_t hw = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < cg; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          double* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= in_h) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[ox] = (ix < 0 || ix >= in_w) ? 0.0 : x.at(c0 + c, iy, ix);
          }
        }
      }
    }
  }
}

void col2im(const double* cols, int c0, int cg, int k, int stride, int pad, int out_h, int out_w, Tensor& dx) {
  const int in_h = dx.dim(1);
  const int in_w = dx.dim(2);
  const std::size_t hw = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < cg; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* row = cols + (static_cast<std::size_t>(c * k + ky) * k + kx) * hw;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= in_h) continue;
          const double* src = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < in_w) dx.at(c0 + c, iy, ix) += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return Var::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    accumulate_grad(a.node(), g);
    accumulate_grad(b.node(), g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return Var::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    accumulate_grad(a.node(), g);
    if (b.requires_grad()) {
      Tensor neg = g;
      for (double& v : neg.data()) v = -v;
      accumulate_grad(b.node(), neg);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto bv = b.value().data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return Var::from_op(std::move(out), {a, b}, [a, b](const Tensor& g) {
    if (a.requires_grad()) {
      Tensor ga = g;
      const auto bv = b.value().data();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= bv[i];
      accumulate_grad(a.node(), ga);
    }
    if (b.requires_grad()) {
      Tensor gb = g;
      const auto av = a.value().data();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= av[i];
      accumulate_grad(b.node(), gb);
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.data()) v *= s;
  return Var::from_op(std::move(out), {a}, [a, s](const Tensor& g) {
    Tensor ga = g;
    for (double& v : ga.data()) v *= s;
    accumulate_grad(a.node(), ga);
  });
}

Var add_constant(const Var& a, const Tensor& c) {
  require(a.shape() == c.shape(), "add_constant: shape mismatch " + shape_to_string(a.shape()) + " vs " +
                                      shape_to_string(c.shape()));
  Tensor out = a.value();
  out += c;
  return Var::from_op(std::move(out), {a}, [a](const Tensor& g) { accumulate_grad(a.node(), g); });
}

Var matmul(const Var& a, const Var& b, bool transpose_a, bool transpose_b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
  const int m = transpose_a ? ac : ar;
  const int k = transpose_a ? ar : ac;
  const int kb = transpose_b ? bc : br;
  const int n = transpose_b ? br : bc;
  require(k == kb, "matmul: inner dimensions differ " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  Tensor out({m, n});
  {
    const auto A = as_matrix(a.value(), ar, ac);
    const auto B = as_matrix(b.value(), br, bc);
    auto O = as_matrix(out, m, n);
    if (!transpose_a && !transpose_b) O.noalias() = A * B;
    else if (transpose_a && !transpose_b) O.noalias() = A.transpose() * B;
    else if (!transpose_a && transpose_b) O.noalias() = A * B.transpose();
    else O.noalias() = A.transpose() * B.transpose();
  }
  return Var::from_op(std::move(out), {a, b}, [a, b, transpose_a, transpose_b, m, n](const Tensor& g) {
    const int ar = a.dim(0), ac = a.dim(1), br = b.dim(0), bc = b.dim(1);
    const auto G = as_matrix(g, m, n);
    const auto A = as_matrix(a.value(), ar, ac);
    const auto B = as_matrix(b.value(), br, bc);
    if (a.requires_grad()) {
      Tensor ga({ar, ac});
      auto GA = as_matrix(ga, ar, ac);
      // d(op(A)) = G op(B)^T
      if (!transpose_a) {
        if (!transpose_b) GA.noalias() = G * B.transpose();
        else GA.noalias() = G * B;
      } else {
        if (!transpose_b) GA.noalias() = B * G.transpose();
        else GA.noalias() = B.transpose() * G.transpose();
      }
      accumulate_grad(a.node(), ga);
    }
    if (b.requires_grad()) {
      Tensor gb({br, bc});
      auto GB = as_matrix(gb, br, bc);
      // d(op(B)) = op(A)^T G
      if (!transpose_b) {
        if (!transpose_a) GB.noalias() = A.transpose() * G;
        else GB.noalias() = A * G;
      } else {
        if (!transpose_a) GB.noalias() = G.transpose() * A;
        else GB.noalias() = G.transpose() * A.transpose();
      }
      accumulate_grad(b.node(), gb);
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const int n = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  require(weight.dim(1) == in, "linear: input features " + std::to_string(in) + " do not match weight " +
                                   shape_to_string(weight.shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{out_dim}, "linear: bias shape " + shape_to_string(bias.shape()));
  Tensor out({n, out_dim});
  {
    auto O = as_matrix(out, n, out_dim);
    O.noalias() = as_matrix(x.value(), n, in) * as_matrix(weight.value(), out_dim, in).transpose();
    if (has_bias) {
      const double* b = bias.value().raw();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) O(i, j) += b[j];
    }
  }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Var::from_op(std::move(out), parents, [x, weight, bias, n, in, out_dim](const Tensor& g) {
    const auto G = as_matrix(g, n, out_dim);
    if (x.requires_grad()) {
      Tensor gx({n, in});
      as_matrix(gx, n, in).noalias() = G * as_matrix(weight.value(), out_dim, in);
      accumulate_grad(x.node(), gx);
    }
    if (weight.requires_grad()) {
      Tensor gw({out_dim, in});
      as_matrix(gw, out_dim, in).noalias() = G.transpose() * as_matrix(x.value(), n, in);
      accumulate_grad(weight.node(), gw);
    }
    if (bias.defined() && bias.requires_grad()) {
      Tensor gb({out_dim});
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) gb[static_cast<std::size_t>(j)] += G(i, j);
      accumulate_grad(bias.node(), gb);
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const int r = a.dim(0), c = a.dim(1);
  Tensor out({c, r});
  as_matrix(out, c, r) = as_matrix(a.value(), r, c).transpose();
  return Var::from_op(std::move(out), {a}, [a, r, c](const Tensor& g) {
    Tensor ga({r, c});
    as_matrix(ga, r, c) = as_matrix(g, c, r).transpose();
    accumulate_grad(a.node(), ga);
  });
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return Var::from_op(std::move(out), {a}, [a](const Tensor& g) {
    accumulate_grad(a.node(), g.reshaped(a.shape()));
  });
}

Var slice_rows(const Var& a, int start, int count) {
  require(a.value().rank() >= 1, "slice_rows: rank 0 input");
  const int rows = a.dim(0);
  require(start >= 0 && count >= 1 && start + count <= rows,
          "slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) + ") out of " +
              shape_to_string(a.shape()));
  const std::size_t inner = a.value().size() / static_cast<std::size_t>(rows);
  Shape shape = a.shape();
  shape[0] = count;
  Tensor out(shape);
  std::copy_n(a.value().raw() + start * inner, count * inner, out.raw());
  return Var::from_op(std::move(out), {a}, [a, start, count, inner](const Tensor& g) {
    Tensor ga(a.shape(), 0.0);
    std::copy_n(g.raw(), count * inner, ga.raw() + start * inner);
    accumulate_grad(a.node(), ga);
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Shape tail(parts[0].shape().begin() + 1, parts[0].shape().end());
  int rows = 0;
  for (const Var& p : parts) {
    Shape t(p.shape().begin() + 1, p.shape().end());
    require(t == tail, "concat_rows: trailing dimensions differ " + shape_to_string(parts[0].shape()) + " vs " +
                           shape_to_string(p.shape()));
    rows += p.dim(0);
  }
  Shape shape = parts[0].shape();
  shape[0] = rows;
  Tensor out(shape);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    std::copy_n(p.value().raw(), p.value().size(), out.raw() + offset);
    offset += p.value().size();
  }
  return Var::from_op(std::move(out), parts, [parts](const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      if (p.requires_grad()) {
        Tensor gp(p.shape());
        std::copy_n(g.raw() + offset, gp.size(), gp.raw());
        accumulate_grad(p.node(), gp);
      }
      offset += p.value().size();
    }
  });
}

Var slice_cols(const Var& a, int start, int count) {
  require_rank(a, 2, "slice_cols");
  const int r = a.dim(0), c = a.dim(1);
  require(start >= 0 && count >= 1 && start + count <= c, "slice_cols: column range out of " + shape_to_string(a.shape()));
  Tensor out({r, count});
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < count; ++j) out.at(i, j) = a.value().at(i, start + j);
  return Var::from_op(std::move(out), {a}, [a, r, c, start, count](const Tensor& g) {
    Tensor ga({r, c});
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < count; ++j) ga.at(i, start + j) = g.at(i, j);
    accumulate_grad(a.node(), ga);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const int r = parts[0].dim(0);
  int c = 0;
  for (const Var& p : parts) {
    require_rank(p, 2, "concat_cols");
    require(p.dim(0) == r, "concat_cols: row counts differ");
    c += p.dim(1);
  }
  Tensor out({r, c});
  int offset = 0;
  for (const Var& p : parts) {
    const int pc = p.dim(1);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < pc; ++j) out.at(i, offset + j) = p.value().at(i, j);
    offset += pc;
  }
  return Var::from_op(std::move(out), parts, [parts, r](const Tensor& g) {
    int offset = 0;
    for (const Var& p : parts) {
      const int pc = p.dim(1);
      if (p.requires_grad()) {
        Tensor gp({r, pc});
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < pc; ++j) gp.at(i, j) = g.at(i, offset + j);
        accumulate_grad(p.node(), gp);
      }
      offset += pc;
    }
  });
}

Var gelu(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return Var::from_op(std::move(out), {a}, [a](const Tensor& g) {
    Tensor ga = g;
    const auto x = a.value().data();
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < ga.size(); ++i) {
      const double v = x[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
      ga[i] *= cdf + v * pdf;
    }
    accumulate_grad(a.node(), ga);
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.value();
  for (double& v : out.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  Tensor y = out;
  return Var::from_op(std::move(out), {a}, [a, y = std::move(y)](const Tensor& g) {
    Tensor ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= y[i] * (1.0 - y[i]);
    accumulate_grad(a.node(), ga);
  });
}

Var softmax_rows(const Var& a) {
  require_rank(a, 2, "softmax_rows");
  const int r = a.dim(0), c = a.dim(1);
  Tensor out = a.value();
  for (int i = 0; i < r; ++i) {
    double* row = out.raw() + static_cast<std::size_t>(i) * c;
    const double mx = *std::max_element(row, row + c);
    double total = 0.0;
    for (int j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] /= total;
  }
  Tensor y = out;
  return Var::from_op(std::move(out), {a}, [a, y = std::move(y), r, c](const Tensor& g) {
    Tensor ga({r, c});
    for (int i = 0; i < r; ++i) {
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
      for (int j = 0; j < c; ++j) ga.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
    }
    accumulate_grad(a.node(), ga);
  });
}

namespace {

// Shared layer-norm kernel over `count` groups of `dim` values separated by `stride`.
struct NormLayout {
  int groups;
  int dim;
  std::size_t group_step;  // offset between consecutive groups
  std::size_t elem_step;   // offset between consecutive values of a group
};

Var layer_norm_impl(const Var& x, const Var& gamma, const Var& beta, double eps, NormLayout lay) {
  require(gamma.shape() == Shape{lay.dim} && beta.shape() == Shape{lay.dim},
          "layer_norm: affine parameters must have shape (" + std::to_string(lay.dim) + ")");
  Tensor out(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> inv_std(static_cast<std::size_t>(lay.groups));
  const double* xv = x.value().raw();
  const double* gv = gamma.value().raw();
  const double* bv = beta.value().raw();
  for (int gi = 0; gi < lay.groups; ++gi) {
    const std::size_t base = gi * lay.group_step;
    double mean = 0.0;
    for (int d = 0; d < lay.dim; ++d) mean += xv[base + d * lay.elem_step];
    mean /= lay.dim;
    double var = 0.0;
    for (int d = 0; d < lay.dim; ++d) {
      const double diff = xv[base + d * lay.elem_step] - mean;
      var += diff * diff;
    }
    var /= lay.dim;
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(gi)] = inv;
    for (int d = 0; d < lay.dim; ++d) {
      const std::size_t idx = base + d * lay.elem_step;
      const double h = (xv[idx] - mean) * inv;
      xhat[idx] = h;
      out[idx] = h * gv[d] + bv[d];
    }
  }
  return Var::from_op(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, lay, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Tensor& g) {
        const double* gv = gamma.value().raw();
        Tensor gx(x.shape());
        Tensor gg({lay.dim});
        Tensor gb({lay.dim});
        for (int gi = 0; gi < lay.groups; ++gi) {
          const std::size_t base = gi * lay.group_step;
          double mean_dh = 0.0;
          double mean_dh_h = 0.0;
          for (int d = 0; d < lay.dim; ++d) {
            const std::size_t idx = base + d * lay.elem_step;
            const double dh = g[idx] * gv[d];
            mean_dh += dh;
            mean_dh_h += dh * xhat[idx];
            gg[static_cast<std::size_t>(d)] += g[idx] * xhat[idx];
            gb[static_cast<std::size_t>(d)] += g[idx];
          }
          mean_dh /= lay.dim;
          mean_dh_h /= lay.dim;
          const double inv = inv_std[static_cast<std::size_t>(gi)];
          for (int d = 0; d < lay.dim; ++d) {
            const std::size_t idx = base + d * lay.elem_step;
            gx[idx] = inv * (g[idx] * gv[d] - mean_dh - xhat[idx] * mean_dh_h);
          }
        }
        accumulate_grad(x.node(), gx);
        accumulate_grad(gamma.node(), gg);
        accumulate_grad(beta.node(), gb);
      });
}

}  // namespace

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank(x, 2, "layer_norm_rows");
  const int n = x.dim(0), d = x.dim(1);
  return layer_norm_impl(x, gamma, beta, eps, {n, d, static_cast<std::size_t>(d), 1});
}

Var layer_norm_channels(const Var& x, const Var& gamma, const Var& beta, double eps) {
  require_rank(x, 3, "layer_norm_channels");
  const int c = x.dim(0);
  const int hw = x.dim(1) * x.dim(2);
  return layer_norm_impl(x, gamma, beta, eps, {hw, c, 1, static_cast<std::size_t>(hw)});
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding, int groups) {
  require_rank(x, 3, "conv2d");
  require_rank(weight, 4, "conv2d");
  require(stride >= 1 && padding >= 0 && groups >= 1, "conv2d: invalid stride/padding/groups");
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_c = weight.dim(0), cg = weight.dim(1), k = weight.dim(2);
  require(weight.dim(3) == k, "conv2d: kernel must be square");
  require(in_c == cg * groups, "conv2d: input has " + std::to_string(in_c) + " channels, weight " +
                                   shape_to_string(weight.shape()) + " with " + std::to_string(groups) +
                                   " groups expects " + std::to_string(cg * groups));
  require(out_c % groups == 0, "conv2d: output channels not divisible by groups");
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{out_c}, "conv2d: bias shape " + shape_to_string(bias.shape()));
  const int out_h = (in_h + 2 * padding - k) / stride + 1;
  const int out_w = (in_w + 2 * padding - k) / stride + 1;
  require(in_h + 2 * padding >= k && in_w + 2 * padding >= k && out_h >= 1 && out_w >= 1,
          "conv2d: kernel larger than padded input " + shape_to_string(x.shape()));

  const int og = out_c / groups;
  const int kk = cg * k * k;
  const int hw = out_h * out_w;
  Tensor out({out_c, out_h, out_w});
  std::vector<double> cols(static_cast<std::size_t>(kk) * hw);
  for (int gi = 0; gi < groups; ++gi) {
    im2col(x.value(), gi * cg, cg, k, stride, padding, out_h, out_w, cols.data());
    const CMapR W(weight.value().raw() + static_cast<std::size_t>(gi) * og * kk, og, kk);
    const CMapR C(cols.data(), kk, hw);
    MapR O(out.raw() + static_cast<std::size_t>(gi) * og * hw, og, hw);
    O.noalias() = W * C;
  }
  if (has_bias) {
    for (int o = 0; o < out_c; ++o) {
      const double b = bias.value()[static_cast<std::size_t>(o)];
      double* p = out.raw() + static_cast<std::size_t>(o) * hw;
      for (int i = 0; i < hw; ++i) p[i] += b;
    }
  }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Var::from_op(std::move(out), parents,
                      [x, weight, bias, stride, padding, groups, og, kk, cg, k, out_h, out_w, hw](const Tensor& g) {
                        std::vector<double> cols(static_cast<std::size_t>(kk) * hw);
                        std::vector<double> dcols;
                        Tensor gx;
                        Tensor gw;
                        if (x.requires_grad()) {
                          gx = Tensor(x.shape());
                          dcols.resize(cols.size());
                        }
                        if (weight.requires_grad()) gw = Tensor(weight.shape());
                        for (int gi = 0; gi < groups; ++gi) {
                          const CMapR G(g.raw() + static_cast<std::size_t>(gi) * og * hw, og, hw);
                          if (weight.requires_grad()) {
                            im2col(x.value(), gi * cg, cg, k, stride, padding, out_h, out_w, cols.data());
                            MapR GW(gw.raw() + static_cast<std::size_t>(gi) * og * kk, og, kk);
                            GW.noalias() = G * CMapR(cols.data(), kk, hw).transpose();
                          }
                          if (x.requires_grad()) {
                            const CMapR W(weight.value().raw() + static_cast<std::size_t>(gi) * og * kk, og, kk);
                            MapR D(dcols.data(), kk, hw);
                            D.noalias() = W.transpose() * G;
                            col2im(dcols.data(), gi * cg, cg, k, stride, padding, out_h, out_w, gx);
                          }
                        }
                        if (x.requires_grad()) accumulate_grad(x.node(), gx);
                        if (weight.requires_grad()) accumulate_grad(weight.node(), gw);
                        if (bias.defined() && bias.requires_grad()) {
                          const int out_c = weight.dim(0);
                          Tensor gb({out_c});
                          for (int o = 0; o < out_c; ++o) {
                            const double* p = g.raw() + static_cast<std::size_t>(o) * hw;
                            double s = 0.0;
                            for (int i = 0; i < hw; ++i) s += p[i];
                            gb[static_cast<std::size_t>(o)] = s;
                          }
                          accumulate_grad(bias.node(), gb);
                        }
                      });
}

Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, int stride) {
  require_rank(x, 3, "conv_transpose2d");
  require_rank(weight, 4, "conv_transpose2d");
  const int in_c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_c = weight.dim(1), k = weight.dim(2);
  require(weight.dim(0) == in_c, "conv_transpose2d: input has " + std::to_string(in_c) + " channels, weight " +
                                     shape_to_string(weight.shape()));
  require(weight.dim(3) == k && k == stride, "conv_transpose2d: only kernel == stride is supported");
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{out_c}, "conv_transpose2d: bias shape " + shape_to_string(bias.shape()));
  const int hw = in_h * in_w;
  const int rows = out_c * k * k;
  const int out_h = in_h * k, out_w = in_w * k;

  Tensor cols({rows, hw});
  as_matrix(cols, rows, hw).noalias() =
      as_matrix(weight.value(), in_c, rows).transpose() * as_matrix(x.value(), in_c, hw);
  Tensor out({out_c, out_h, out_w});
  for (int o = 0; o < out_c; ++o) {
    const double b = has_bias ? bias.value()[static_cast<std::size_t>(o)] : 0.0;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const double* src = cols.raw() + static_cast<std::size_t>((o * k + ky) * k + kx) * hw;
        for (int y = 0; y < in_h; ++y)
          for (int xx = 0; xx < in_w; ++xx) out.at(o, y * k + ky, xx * k + kx) = src[y * in_w + xx] + b;
      }
  }
  std::vector<Var> parents{x, weight};
  if (has_bias) parents.push_back(bias);
  return Var::from_op(std::move(out), parents, [x, weight, bias, in_c, in_h, in_w, out_c, k, hw, rows](const Tensor& g) {
    Tensor dcols({rows, hw});
    for (int o = 0; o < out_c; ++o)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          double* dst = dcols.raw() + static_cast<std::size_t>((o * k + ky) * k + kx) * hw;
          for (int y = 0; y < in_h; ++y)
            for (int xx = 0; xx < in_w; ++xx) dst[y * in_w + xx] = g.at(o, y * k + ky, xx * k + kx);
        }
    if (x.requires_grad()) {
      Tensor gx(x.shape());
      as_matrix(gx, in_c, hw).noalias() = as_matrix(weight.value(), in_c, rows) * as_matrix(dcols, rows, hw);
      accumulate_grad(x.node(), gx);
    }
    if (weight.requires_grad()) {
      Tensor gw(weight.shape());
      as_matrix(gw, in_c, rows).noalias() = as_matrix(x.value(), in_c, hw) * as_matrix(dcols, rows, hw).transpose();
      accumulate_grad(weight.node(), gw);
    }
    if (bias.defined() && bias.requires_grad()) {
      Tensor gb({out_c});
      for (int o = 0; o < out_c; ++o) {
        double s = 0.0;
        const double* p = g.raw() + static_cast<std::size_t>(o) * hw * k * k;
        for (int i = 0; i < hw * k * k; ++i) s += p[i];
        gb[static_cast<std::size_t>(o)] = s;
      }
      accumulate_grad(bias.node(), gb);
    }
  });
}

Var max_pool2d(const Var& x, int kernel, int stride, int padding) {
  require_rank(x, 3, "max_pool2d");
  require(kernel >= 1 && stride >= 1 && padding >= 0 && padding < kernel, "max_pool2d: invalid kernel/stride/padding");
  const int c = x.dim(0), in_h = x.dim(1), in_w = x.dim(2);
  const int out_h = (in_h + 2 * padding - kernel) / stride + 1;
  const int out_w = (in_w + 2 * padding - kernel) / stride + 1;
  require(out_h >= 1 && out_w >= 1 && in_h + 2 * padding >= kernel && in_w + 2 * padding >= kernel,
          "max_pool2d: window larger than input " + shape_to_string(x.shape()));
  Tensor out({c, out_h, out_w});
  std::vector<std::size_t> argmax(out.size());
  const Tensor& xv = x.value();
  for (int ch = 0; ch < c; ++ch)
    for (int oy = 0; oy < out_h; ++oy)
      for (int ox = 0; ox < out_w; ++ox) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy * stride - padding + ky;
          if (iy < 0 || iy >= in_h) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox * stride - padding + kx;
            if (ix < 0 || ix >= in_w) continue;
            const double v = xv.at(ch, iy, ix);
            if (v > best) {
              best = v;
              best_idx = (static_cast<std::size_t>(ch) * in_h + iy) * in_w + ix;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(ch) * out_h + oy) * out_w + ox;
        out[o] = best;
        argmax[o] = best_idx;
      }
  return Var::from_op(std::move(out), {x}, [x, argmax = std::move(argmax)](const Tensor& g) {
    Tensor gx(x.shape());
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += g[o];
    accumulate_grad(x.node(), gx);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  return Var::from_op(Tensor::scalar(s), {a}, [a](const Tensor& g) {
    accumulate_grad(a.node(), Tensor(a.shape(), g[0]));
  });
}

Var weighted_sum(const Var& a, const Tensor& w) {
  require(a.shape() == w.shape(), "weighted_sum: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += a.value()[i] * w[i];
  return Var::from_op(Tensor::scalar(s), {a}, [a, w](const Tensor& g) {
    Tensor ga = w;
    for (double& v : ga.data()) v *= g[0];
    accumulate_grad(a.node(), ga);
  });
}

}  // namespace sppnet::ops
