#include "falldet/nn/ops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "falldet/error.hpp"
#include "falldet/rng.hpp"

namespace falldet::nn {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap cmap(const double* p, std::size_t r, std::size_t c) {
  return ConstMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}
MutMap mmap(double* p, std::size_t r, std::size_t c) {
  return MutMap(p, static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

// Gradient buffer of parent i, or nullptr when that parent needs none.
Tensor* parent_grad(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? &p.grad_buffer() : nullptr;
}

const Tensor& parent_value(Node& self, std::size_t i) { return self.parents[i]->value; }

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.begin(), small.end(), big.end() - static_cast<std::ptrdiff_t>(small.size()));
}

// Visits every element of a tensor of shape `in` in the order of its
// permutation `perm`, calling f(out_index, in_index).
template <typename F>
void for_each_permuted(const Shape& in, std::span<const std::size_t> perm, F&& f) {
  const std::size_t rank = in.size();
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];
  std::vector<std::size_t> out_shape(rank), stride(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    out_shape[i] = in[perm[i]];
    stride[i] = in_stride[perm[i]];
  }
  const std::size_t total = numel(in);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t o = 0; o < total; ++o) {
    f(o, src);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out_shape[d]) {
        src += stride[d];
        break;
      }
      src -= stride[d] * (out_shape[d] - 1);
      idx[d] = 0;
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
    return make_node(std::move(out), {a, b}, [](Node& self) {
      for (std::size_t p = 0; p < 2; ++p) {
        if (Tensor* g = parent_grad(self, p)) {
          for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
      }
    });
  }
  if (!is_suffix(sb, sa) || b.size() == 0) shape_error("add", sa, sb);
  const std::size_t inner = b.size();
  const std::size_t outer = a.size() / inner;
  Tensor out = a.value();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) out[o * inner + j] += b.value()[j];
  }
  return make_node(std::move(out), {a, b}, [outer, inner](Node& self) {
    if (Tensor* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i];
    }
    if (Tensor* gb = parent_grad(self, 1)) {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t j = 0; j < inner; ++j) (*gb)[j] += self.grad[o * inner + j];
      }
    }
  });
}

Var mul(const Var& a, const Var& b) {
  if (a.shape() != b.shape()) shape_error("mul", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = parent_value(self, 0);
    const Tensor& bv = parent_value(self, 1);
    if (Tensor* ga = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += self.grad[i] * bv[i];
    }
    if (Tensor* gb = parent_grad(self, 1)) {
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  for (auto& v : out.data()) v *= s;
  return make_node(std::move(out), {a}, [s](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * self.grad[i];
    }
  });
}

Var matmul(const Var& a, const Var& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() != 2) shape_error("matmul", sa, sb);
  const std::size_t k = sa.back();
  const std::size_t rows = a.size() / std::max<std::size_t>(k, 1);
  const std::size_t bk = transpose_b ? sb[1] : sb[0];
  const std::size_t n = transpose_b ? sb[0] : sb[1];
  if (bk != k) shape_error("matmul", sa, sb);

  Shape out_shape(sa.begin(), sa.end() - 1);
  out_shape.push_back(n);
  Tensor out(out_shape);
  auto A = cmap(a.value().data().data(), rows, k);
  auto C = mmap(out.data().data(), rows, n);
  if (transpose_b) {
    C.noalias() = A * cmap(b.value().data().data(), n, k).transpose();
  } else {
    C.noalias() = A * cmap(b.value().data().data(), k, n);
  }
  return make_node(std::move(out), {a, b}, [rows, k, n, transpose_b](Node& self) {
    auto dC = cmap(self.grad.data().data(), rows, n);
    const double* bp = parent_value(self, 1).data().data();
    if (Tensor* ga = parent_grad(self, 0)) {
      auto dA = mmap(ga->data().data(), rows, k);
      if (transpose_b) {
        dA.noalias() += dC * cmap(bp, n, k);
      } else {
        dA.noalias() += dC * cmap(bp, k, n).transpose();
      }
    }
    if (Tensor* gb = parent_grad(self, 1)) {
      auto A = cmap(parent_value(self, 0).data().data(), rows, k);
      if (transpose_b) {
        mmap(gb->data().data(), n, k).noalias() += dC.transpose() * A;
      } else {
        mmap(gb->data().data(), k, n).noalias() += A.transpose() * dC;
      }
    }
  });
}

Var bmm(const Var& a, const Var& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 3 || sb.size() != 3 || sa[0] != sb[0]) shape_error("bmm", sa, sb);
  const std::size_t batch = sa[0], m = sa[1], k = sa[2];
  const std::size_t bk = transpose_b ? sb[2] : sb[1];
  const std::size_t n = transpose_b ? sb[1] : sb[2];
  if (bk != k) shape_error("bmm", sa, sb);

  Tensor out({batch, m, n});
  for (std::size_t i = 0; i < batch; ++i) {
    auto A = cmap(a.value().data().data() + i * m * k, m, k);
    auto C = mmap(out.data().data() + i * m * n, m, n);
    const double* bp = b.value().data().data() + i * k * n;
    if (transpose_b) {
      C.noalias() = A * cmap(bp, n, k).transpose();
    } else {
      C.noalias() = A * cmap(bp, k, n);
    }
  }
  return make_node(std::move(out), {a, b}, [batch, m, k, n, transpose_b](Node& self) {
    Tensor* ga = parent_grad(self, 0);
    Tensor* gb = parent_grad(self, 1);
    for (std::size_t i = 0; i < batch; ++i) {
      auto dC = cmap(self.grad.data().data() + i * m * n, m, n);
      const double* bp = parent_value(self, 1).data().data() + i * k * n;
      if (ga) {
        auto dA = mmap(ga->data().data() + i * m * k, m, k);
        if (transpose_b) {
          dA.noalias() += dC * cmap(bp, n, k);
        } else {
          dA.noalias() += dC * cmap(bp, k, n).transpose();
        }
      }
      if (gb) {
        auto A = cmap(parent_value(self, 0).data().data() + i * m * k, m, k);
        if (transpose_b) {
          mmap(gb->data().data() + i * k * n, n, k).noalias() += dC.transpose() * A;
        } else {
          mmap(gb->data().data() + i * k * n, k, n).noalias() += A.transpose() * dC;
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (weight.shape().size() != 2 || bias.shape() != Shape{weight.shape()[0]}) {
    shape_error("linear", weight.shape(), bias.shape());
  }
  return add(matmul(x, weight, true), bias);
}

Var reshape(const Var& a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  return make_node(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

Var transpose(const Var& a, std::span<const std::size_t> perm) {
  const Shape& in = a.shape();
  if (perm.size() != in.size()) shape_error("transpose", in, Shape(perm.begin(), perm.end()));
  std::vector<bool> seen(in.size(), false);
  Shape out_shape(in.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= in.size() || seen[perm[i]]) shape_error("transpose", in, Shape(perm.begin(), perm.end()));
    seen[perm[i]] = true;
    out_shape[i] = in[perm[i]];
  }
  Tensor out(out_shape);
  const auto& src = a.value();
  for_each_permuted(in, perm, [&](std::size_t o, std::size_t i) { out[o] = src[i]; });
  std::vector<std::size_t> p(perm.begin(), perm.end());
  return make_node(std::move(out), {a}, [in, p = std::move(p)](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for_each_permuted(in, p, [&](std::size_t o, std::size_t i) { (*g)[i] += self.grad[o]; });
    }
  });
}

Var relu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = v > 0.0 ? v : 0.0;
  return make_node(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      const Tensor& x = parent_value(self, 0);
      for (std::size_t i = 0; i < g->size(); ++i) {
        if (x[i] > 0.0) (*g)[i] += self.grad[i];
      }
    }
  });
}

Var gelu(const Var& a) {
  Tensor out = a.value();
  for (auto& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
  return make_node(std::move(out), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      const Tensor& x = parent_value(self, 0);
      const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
      for (std::size_t i = 0; i < g->size(); ++i) {
        const double v = x[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = inv_sqrt_2pi * std::exp(-0.5 * v * v);
        (*g)[i] += self.grad[i] * (cdf + v * pdf);
      }
    }
  });
}

Var softmax(const Var& a) {
  if (a.shape().empty() || a.shape().back() == 0) throw DimensionError("softmax of an empty axis");
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.size() / n;
  Tensor out = a.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = out.data().data() + r * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  return make_node(std::move(out), {a}, [rows, n](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.value.data().data() + r * n;
        const double* gy = self.grad.data().data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += gy[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) (*g)[r * n + j] += y[j] * (gy[j] - dot);
      }
    }
  });
}

Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps) {
  if (x.shape().empty()) throw DimensionError("layer_norm of a scalar");
  const std::size_t n = x.shape().back();
  if (gain.shape() != Shape{n}) shape_error("layer_norm", x.shape(), gain.shape());
  if (bias.shape() != Shape{n}) shape_error("layer_norm", x.shape(), bias.shape());
  const std::size_t rows = x.size() / n;

  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  Tensor out(x.shape());
  const auto& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += xv[r * n + j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = xv[r * n + j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (xv[r * n + j] - mu) * inv_std[r];
      xhat[r * n + j] = h;
      out[r * n + j] = h * gain.value()[j] + bias.value()[j];
    }
  }
  return make_node(std::move(out), {x, gain, bias},
                   [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                     const Tensor& gv = parent_value(self, 1);
                     if (Tensor* gg = parent_grad(self, 1)) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) (*gg)[i % n] += self.grad[i] * xhat[i];
                     }
                     if (Tensor* gb = parent_grad(self, 2)) {
                       for (std::size_t i = 0; i < self.grad.size(); ++i) (*gb)[i % n] += self.grad[i];
                     }
                     if (Tensor* gx = parent_grad(self, 0)) {
                       const double nn = static_cast<double>(n);
                       for (std::size_t r = 0; r < rows; ++r) {
                         double sum_d = 0.0, sum_dx = 0.0;
                         for (std::size_t j = 0; j < n; ++j) {
                           const double d = self.grad[r * n + j] * gv[j];
                           sum_d += d;
                           sum_dx += d * xhat[r * n + j];
                         }
                         for (std::size_t j = 0; j < n; ++j) {
                           const double d = self.grad[r * n + j] * gv[j];
                           (*gx)[r * n + j] += inv_std[r] / nn * (nn * d - sum_d - xhat[r * n + j] * sum_dx);
                         }
                       }
                     }
                   });
}

namespace {

// col[(c*K + k), t] = x[c, t + k - pad] with zero padding.
void im2col(const double* x, std::size_t c_in, std::size_t t_len, std::size_t k_len, double* col) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k_len - 1) / 2);
  const auto tl = static_cast<std::ptrdiff_t>(t_len);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t k = 0; k < k_len; ++k) {
      double* dst = col + (c * k_len + k) * t_len;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::ptrdiff_t t = 0; t < tl; ++t) {
        const std::ptrdiff_t s = t + shift;
        dst[t] = (s >= 0 && s < tl) ? x[c * t_len + static_cast<std::size_t>(s)] : 0.0;
      }
    }
  }
}

void col2im_add(const double* col, std::size_t c_in, std::size_t t_len, std::size_t k_len, double* dx) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>((k_len - 1) / 2);
  const auto tl = static_cast<std::ptrdiff_t>(t_len);
  for (std::size_t c = 0; c < c_in; ++c) {
    for (std::size_t k = 0; k < k_len; ++k) {
      const double* src = col + (c * k_len + k) * t_len;
      const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
      for (std::ptrdiff_t t = 0; t < tl; ++t) {
        const std::ptrdiff_t s = t + shift;
        if (s >= 0 && s < tl) dx[c * t_len + static_cast<std::size_t>(s)] += src[t];
      }
    }
  }
}

}  // namespace

Var conv1d(const Var& x, const Var& w, const Var& bias) {
  const Shape& sx = x.shape();
  const Shape& sw = w.shape();
  if (sx.size() != 3 || sw.size() != 3 || sx[1] != sw[1] || sw[2] == 0) shape_error("conv1d", sx, sw);
  if (bias.shape() != Shape{sw[0]}) shape_error("conv1d", sw, bias.shape());
  const std::size_t batch = sx[0], c_in = sx[1], t_len = sx[2];
  const std::size_t c_out = sw[0], k_len = sw[2];
  const std::size_t ck = c_in * k_len;

  Tensor out({batch, c_out, t_len});
  std::vector<double> col(ck * t_len);
  auto W = cmap(w.value().data().data(), c_out, ck);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.value().data().data() + b * c_in * t_len, c_in, t_len, k_len, col.data());
    auto Y = mmap(out.data().data() + b * c_out * t_len, c_out, t_len);
    Y.noalias() = W * cmap(col.data(), ck, t_len);
    for (std::size_t o = 0; o < c_out; ++o) Y.row(static_cast<Eigen::Index>(o)).array() += bias.value()[o];
  }
  return make_node(std::move(out), {x, w, bias}, [batch, c_in, t_len, c_out, k_len, ck](Node& self) {
    Tensor* gx = parent_grad(self, 0);
    Tensor* gw = parent_grad(self, 1);
    Tensor* gb = parent_grad(self, 2);
    const Tensor& xv = parent_value(self, 0);
    auto W = cmap(parent_value(self, 1).data().data(), c_out, ck);
    std::vector<double> col(ck * t_len);
    for (std::size_t b = 0; b < batch; ++b) {
      auto dY = cmap(self.grad.data().data() + b * c_out * t_len, c_out, t_len);
      if (gb) {
        for (std::size_t o = 0; o < c_out; ++o) (*gb)[o] += dY.row(static_cast<Eigen::Index>(o)).sum();
      }
      if (gw) {
        im2col(xv.data().data() + b * c_in * t_len, c_in, t_len, k_len, col.data());
        mmap(gw->data().data(), c_out, ck).noalias() += dY * cmap(col.data(), ck, t_len).transpose();
      }
      if (gx) {
        mmap(col.data(), ck, t_len).noalias() = W.transpose() * dY;
        col2im_add(col.data(), c_in, t_len, k_len, gx->data().data() + b * c_in * t_len);
      }
    }
  });
}

Var mean(const Var& a, std::size_t axis) {
  const Shape& s = a.shape();
  if (axis >= s.size() || s[axis] == 0) shape_error("mean", s, Shape{axis});
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i != axis) out_shape.push_back(s[i]);
  }
  if (out_shape.empty()) out_shape.push_back(1);
  Tensor out(out_shape);
  const double inv = 1.0 / static_cast<double>(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += a.value()[(o * n + k) * inner + i];
    }
  }
  for (auto& v : out.data()) v *= inv;
  return make_node(std::move(out), {a}, [outer, inner, n, inv](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t k = 0; k < n; ++k) {
          for (std::size_t i = 0; i < inner; ++i) (*g)[(o * n + k) * inner + i] += inv * self.grad[o * inner + i];
        }
      }
    }
  });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return make_node(Tensor::scalar(total), {a}, [](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (auto& v : g->data()) v += self.grad[0];
    }
  });
}

Var concat_last(const Var& a, const Var& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.empty() || sa.size() != sb.size() || !std::equal(sa.begin(), sa.end() - 1, sb.begin())) {
    shape_error("concat", sa, sb);
  }
  const std::size_t na = sa.back(), nb = sb.back();
  const std::size_t rows = a.size() / std::max<std::size_t>(na, 1);
  Shape out_shape = sa;
  out_shape.back() = na + nb;
  Tensor out(out_shape);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data().data() + r * na, na, out.data().data() + r * (na + nb));
    std::copy_n(b.value().data().data() + r * nb, nb, out.data().data() + r * (na + nb) + na);
  }
  return make_node(std::move(out), {a, b}, [rows, na, nb](Node& self) {
    Tensor* ga = parent_grad(self, 0);
    Tensor* gb = parent_grad(self, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data().data() + r * (na + nb);
      if (ga) {
        for (std::size_t j = 0; j < na; ++j) (*ga)[r * na + j] += g[j];
      }
      if (gb) {
        for (std::size_t j = 0; j < nb; ++j) (*gb)[r * nb + j] += g[na + j];
      }
    }
  });
}

Var dropout(const Var& a, double p, bool training, Rng& rng) {
  if (!training || p <= 0.0) return a;
  if (p >= 1.0) throw ConfigError("dropout rate must be < 1");
  const double keep = 1.0 / (1.0 - p);
  std::vector<double> mask(a.size());
  for (auto& m : mask) m = rng.uniform() >= p ? keep : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_node(std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    if (Tensor* g = parent_grad(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * mask[i];
    }
  });
}

Var cross_entropy(const Var& logits, std::span<const int> labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != labels.size() || s[1] == 0) {
    shape_error("cross_entropy", s, Shape{labels.size()});
  }
  const std::size_t batch = s[0], classes = s[1];
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ConfigError("label " + std::to_string(y) + " out of range for " + std::to_string(classes) + " classes");
    }
    const double* row = logits.value().data().data() + b * classes;
    const double mx = *std::max_element(row, row + classes);
    double total = 0.0;
    for (std::size_t j = 0; j < classes; ++j) total += std::exp(row[j] - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t j = 0; j < classes; ++j) probs[b * classes + j] = std::exp(row[j] - log_z);
    loss += log_z - row[y];
  }
  loss /= static_cast<double>(batch);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_node(Tensor::scalar(loss), {logits},
                   [batch, classes, probs = std::move(probs), lab = std::move(lab)](Node& self) {
                     if (Tensor* g = parent_grad(self, 0)) {
                       const double scale_factor = self.grad[0] / static_cast<double>(batch);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t j = 0; j < classes; ++j) {
                           const double onehot = static_cast<int>(j) == lab[b] ? 1.0 : 0.0;
                           (*g)[b * classes + j] += scale_factor * (probs[b * classes + j] - onehot);
                         }
                       }
                     }
                   });
}

Var multi_head_attention(const Var& x, std::size_t heads, const AttentionParams& p, Tensor* weights_out) {
  const Shape& s = x.shape();
  if (s.size() != 3) throw DimensionError("attention input must be [batch, seq, dim], got " + to_string(s));
  const std::size_t batch = s[0], seq = s[1], dim = s[2];
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  const std::size_t dh = dim / heads;
  static constexpr std::size_t kSplit[] = {0, 2, 1, 3};

  auto split = [&](const Var& t) {
    return reshape(transpose(reshape(t, {batch, seq, heads, dh}), kSplit), {batch * heads, seq, dh});
  };
  const Var q = split(linear(x, p.wq, p.bq));
  const Var k = split(linear(x, p.wk, p.bk));
  const Var v = split(linear(x, p.wv, p.bv));

  const Var attn = softmax(scale(bmm(q, k, true), 1.0 / std::sqrt(static_cast<double>(dh))));
  if (weights_out) *weights_out = attn.value().reshaped({batch, heads, seq, seq});

  const Var ctx = reshape(transpose(reshape(bmm(attn, v), {batch, heads, seq, dh}), kSplit), {batch, seq, dim});
  return linear(ctx, p.wo, p.bo);
}

}  // namespace falldet::nn
