#include "jefp/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>

namespace jefp {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
}

void accumulate(Node* target, const double* src, std::size_t n, double factor = 1.0) {
  if (!target->requires_grad) return;
  double* g = target->grad_data();
  for (std::size_t i = 0; i < n; ++i) g[i] += factor * src[i];
}

// Column matrix for a (possibly transposed) convolution. Image is
// [n, c, ih, iw]; positions form an [oh, ow] grid; image row of a tap is
// pos * stride - pad + k.
void im2col(const double* img, std::size_t n, std::size_t c, std::size_t ih, std::size_t iw,
            std::size_t oh, std::size_t ow, const ConvGeometry& g, double* cols) {
  const std::size_t positions = n * oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        double* row = cols + ((ci * g.kernel_h + ki) * g.kernel_w + kj) * positions;
        for (std::size_t b = 0; b < n; ++b) {
          const double* plane = img + (b * c + ci) * ih * iw;
          for (std::size_t y = 0; y < oh; ++y) {
            const long r = static_cast<long>(y * g.stride_h + ki) - static_cast<long>(g.pad_h);
            double* out = row + (b * oh + y) * ow;
            if (r < 0 || r >= static_cast<long>(ih)) {
              for (std::size_t x = 0; x < ow; ++x) out[x] = 0.0;
              continue;
            }
            const double* src = plane + r * iw;
            for (std::size_t x = 0; x < ow; ++x) {
              const long col = static_cast<long>(x * g.stride_w + kj) - static_cast<long>(g.pad_w);
              out[x] = (col < 0 || col >= static_cast<long>(iw)) ? 0.0 : src[col];
            }
          }
        }
      }
}

void col2im(const double* cols, std::size_t n, std::size_t c, std::size_t ih, std::size_t iw,
            std::size_t oh, std::size_t ow, const ConvGeometry& g, double* img) {
  const std::size_t positions = n * oh * ow;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
        const double* row = cols + ((ci * g.kernel_h + ki) * g.kernel_w + kj) * positions;
        for (std::size_t b = 0; b < n; ++b) {
          double* plane = img + (b * c + ci) * ih * iw;
          for (std::size_t y = 0; y < oh; ++y) {
            const long r = static_cast<long>(y * g.stride_h + ki) - static_cast<long>(g.pad_h);
            if (r < 0 || r >= static_cast<long>(ih)) continue;
            const double* src = row + (b * oh + y) * ow;
            double* dst = plane + r * iw;
            for (std::size_t x = 0; x < ow; ++x) {
              const long col = static_cast<long>(x * g.stride_w + kj) - static_cast<long>(g.pad_w);
              if (col >= 0 && col < static_cast<long>(iw)) dst[col] += src[x];
            }
          }
        }
      }
}

// [n, c, p] <-> [c, n * p]
void nchw_to_cnp(const double* src, std::size_t n, std::size_t c, std::size_t p, double* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ci = 0; ci < c; ++ci)
      std::copy_n(src + (b * c + ci) * p, p, dst + ci * n * p + b * p);
}

void cnp_to_nchw(const double* src, std::size_t n, std::size_t c, std::size_t p, double* dst) {
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ci = 0; ci < c; ++ci)
      std::copy_n(src + ci * n * p + b * p, p, dst + (b * c + ci) * p);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Node* pa = a.get();
  Node* pb = b.get();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& o) {
    accumulate(pa, o.grad.data(), o.grad.size());
    accumulate(pb, o.grad.data(), o.grad.size());
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  Node* pa = a.get();
  Node* pb = b.get();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& o) {
    accumulate(pa, o.grad.data(), o.grad.size());
    accumulate(pb, o.grad.data(), o.grad.size(), -1.0);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Node* pa = a.get();
  Node* pb = b.get();
  return make_result(a.shape(), std::move(out), {a, b}, [pa, pb](Node& o) {
    const std::size_t n = o.grad.size();
    if (pa->requires_grad) {
      double* g = pa->grad_data();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * pb->value[i];
    }
    if (pb->requires_grad) {
      double* g = pb->grad_data();
      for (std::size_t i = 0; i < n; ++i) g[i] += o.grad[i] * pa->value[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Buffer out(a.data().begin(), a.data().end());
  for (auto& v : out) v *= s;
  Node* pa = a.get();
  return make_result(a.shape(), std::move(out), {a},
                     [pa, s](Node& o) { accumulate(pa, o.grad.data(), o.grad.size(), s); });
}

Var add_const(const Var& a, const std::vector<double>& c) {
  if (c.size() != a.size()) throw std::invalid_argument("add_const: size mismatch");
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + c[i];
  Node* pa = a.get();
  return make_result(a.shape(), std::move(out), {a},
                     [pa](Node& o) { accumulate(pa, o.grad.data(), o.grad.size()); });
}

Var mul_const(const Var& a, const std::vector<double>& c) {
  if (c.size() != a.size()) throw std::invalid_argument("mul_const: size mismatch");
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c[i];
  Node* pa = a.get();
  return make_result(a.shape(), std::move(out), {a}, [pa, c](Node& o) {
    if (!pa->requires_grad) return;
    double* g = pa->grad_data();
    for (std::size_t i = 0; i < c.size(); ++i) g[i] += o.grad[i] * c[i];
  });
}

Var reshape(const Var& a, Shape shape) {
  if (numel(shape) != a.size())
    throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  Node* pa = a.get();
  return make_result(std::move(shape), Buffer(a.data().begin(), a.data().end()), {a},
                     [pa](Node& o) { accumulate(pa, o.grad.data(), o.grad.size()); });
}

Var permute(const Var& a, const std::vector<std::size_t>& axes) {
  const Shape& in = a.shape();
  const std::size_t rank = in.size();
  if (axes.size() != rank) throw std::invalid_argument("permute: rank mismatch");
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = in.at(axes[i]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in[i];

  // map[out_linear] = in_linear
  const std::size_t total = a.size();
  std::vector<std::size_t> map(total);
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t o = 0; o < total; ++o) {
    std::size_t src = 0;
    for (std::size_t i = 0; i < rank; ++i) src += idx[i] * in_stride[axes[i]];
    map[o] = src;
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Buffer out(total);
  for (std::size_t o = 0; o < total; ++o) out[o] = a.data()[map[o]];
  Node* pa = a.get();
  return make_result(std::move(out_shape), std::move(out), {a},
                     [pa, map = std::move(map)](Node& o) {
                       if (!pa->requires_grad) return;
                       double* g = pa->grad_data();
                       for (std::size_t i = 0; i < map.size(); ++i) g[map[i]] += o.grad[i];
                     });
}

Var gather_rows(const Var& a, const std::vector<std::size_t>& rows) {
  if (a.shape().size() != 2) throw std::invalid_argument("gather_rows: expects a matrix");
  const std::size_t width = a.dim(1);
  Buffer out(rows.size() * width);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.dim(0)) throw std::out_of_range("gather_rows: row index");
    std::copy_n(a.data().begin() + rows[r] * width, width, out.begin() + r * width);
  }
  Node* pa = a.get();
  return make_result({rows.size(), width}, std::move(out), {a}, [pa, rows, width](Node& o) {
    if (!pa->requires_grad) return;
    double* g = pa->grad_data();
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < width; ++j) g[rows[r] * width + j] += o.grad[r * width + j];
  });
}

Var leaky_relu(const Var& a, double slope) {
  Buffer out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = a.data()[i];
    out[i] = v > 0.0 ? v : slope * v;
  }
  Node* pa = a.get();
  return make_result(a.shape(), std::move(out), {a}, [pa, slope](Node& o) {
    if (!pa->requires_grad) return;
    double* g = pa->grad_data();
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      g[i] += pa->value[i] > 0.0 ? o.grad[i] : slope * o.grad[i];
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  Node* pa = a.get();
  return make_result({1}, {s}, {a}, [pa](Node& o) {
    if (!pa->requires_grad) return;
    double* g = pa->grad_data();
    for (std::size_t i = 0; i < pa->value.size(); ++i) g[i] += o.grad[0];
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Var linear(const Var& x, const Var& w, const Var& b) {
  if (x.shape().size() != 2 || w.shape().size() != 2 || x.dim(1) != w.dim(0))
    throw std::invalid_argument("linear: shapes " + shape_str(x.shape()) + " x " +
                                shape_str(w.shape()));
  const std::size_t rows = x.dim(0), in = w.dim(0), outw = w.dim(1);
  Buffer out(rows * outw);
  MapMat y(out.data(), rows, outw);
  y.noalias() = CMapMat(x.data().data(), rows, in) * CMapMat(w.data().data(), in, outw);
  if (b.defined()) {
    if (b.size() != outw) throw std::invalid_argument("linear: bias size");
    y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.data().data(), outw);
  }
  Node* px = x.get();
  Node* pw = w.get();
  Node* pb = b.defined() ? b.get() : nullptr;
  return make_result({rows, outw}, std::move(out), {x, w, b}, [=](Node& o) {
    CMapMat gy(o.grad.data(), rows, outw);
    if (px->requires_grad)
      MapMat(px->grad_data(), rows, in).noalias() += gy * CMapMat(pw->value.data(), in, outw).transpose();
    if (pw->requires_grad)
      MapMat(pw->grad_data(), in, outw).noalias() += CMapMat(px->value.data(), rows, in).transpose() * gy;
    if (pb && pb->requires_grad)
      Eigen::Map<Eigen::RowVectorXd>(pb->grad_data(), outw) += gy.colwise().sum();
  });
}

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < kernel) throw std::invalid_argument("conv: kernel larger than padded input");
  return (in + 2 * pad - kernel) / stride + 1;
}

std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t pad) {
  const long out = static_cast<long>((in - 1) * stride + kernel) - 2 * static_cast<long>(pad);
  if (out <= 0) throw std::invalid_argument("conv_transpose: empty output");
  return static_cast<std::size_t>(out);
}

Var conv2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& g) {
  if (x.shape().size() != 4 || w.shape().size() != 4 || x.dim(1) != w.dim(1) ||
      w.dim(2) != g.kernel_h || w.dim(3) != g.kernel_w)
    throw std::invalid_argument("conv2d: shapes " + shape_str(x.shape()) + " * " +
                                shape_str(w.shape()));
  const std::size_t n = x.dim(0), cin = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const std::size_t cout = w.dim(0);
  const std::size_t oh = conv_out_size(ih, g.kernel_h, g.stride_h, g.pad_h);
  const std::size_t ow = conv_out_size(iw, g.kernel_w, g.stride_w, g.pad_w);
  const std::size_t p = oh * ow, ckk = cin * g.kernel_h * g.kernel_w;

  auto cols = std::make_shared<Buffer>(ckk * n * p);
  im2col(x.data().data(), n, cin, ih, iw, oh, ow, g, cols->data());
  Buffer tmp(cout * n * p);
  MapMat(tmp.data(), cout, n * p).noalias() =
      CMapMat(w.data().data(), cout, ckk) * CMapMat(cols->data(), ckk, n * p);
  Buffer out(n * cout * p);
  cnp_to_nchw(tmp.data(), n, cout, p, out.data());
  if (b.defined())
    for (std::size_t bi = 0; bi < n; ++bi)
      for (std::size_t c = 0; c < cout; ++c) {
        double* dst = out.data() + (bi * cout + c) * p;
        for (std::size_t i = 0; i < p; ++i) dst[i] += b.data()[c];
      }

  Node* px = x.get();
  Node* pw = w.get();
  Node* pb = b.defined() ? b.get() : nullptr;
  return make_result({n, cout, oh, ow}, std::move(out), {x, w, b}, [=](Node& o) {
    Buffer gcnp(cout * n * p);
    nchw_to_cnp(o.grad.data(), n, cout, p, gcnp.data());
    CMapMat gy(gcnp.data(), cout, n * p);
    if (pw->requires_grad)
      MapMat(pw->grad_data(), cout, ckk).noalias() += gy * CMapMat(cols->data(), ckk, n * p).transpose();
    if (pb && pb->requires_grad)
      Eigen::Map<Eigen::VectorXd>(pb->grad_data(), cout) += gy.rowwise().sum();
    if (px->requires_grad) {
      Buffer gcols(ckk * n * p);
      MapMat(gcols.data(), ckk, n * p).noalias() = CMapMat(pw->value.data(), cout, ckk).transpose() * gy;
      col2im(gcols.data(), n, cin, ih, iw, oh, ow, g, px->grad_data());
    }
  });
}

Var conv_transpose2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& g) {
  if (x.shape().size() != 4 || w.shape().size() != 4 || x.dim(1) != w.dim(0) ||
      w.dim(2) != g.kernel_h || w.dim(3) != g.kernel_w)
    throw std::invalid_argument("conv_transpose2d: shapes " + shape_str(x.shape()) + " * " +
                                shape_str(w.shape()));
  const std::size_t n = x.dim(0), cin = x.dim(1), ih = x.dim(2), iw = x.dim(3);
  const std::size_t cout = w.dim(1);
  const std::size_t oh = conv_transpose_out_size(ih, g.kernel_h, g.stride_h, g.pad_h);
  const std::size_t ow = conv_transpose_out_size(iw, g.kernel_w, g.stride_w, g.pad_w);
  const std::size_t p = ih * iw, ckk = cout * g.kernel_h * g.kernel_w;

  auto xc = std::make_shared<Buffer>(cin * n * p);
  nchw_to_cnp(x.data().data(), n, cin, p, xc->data());
  Buffer cols(ckk * n * p);
  MapMat(cols.data(), ckk, n * p).noalias() =
      CMapMat(w.data().data(), cin, ckk).transpose() * CMapMat(xc->data(), cin, n * p);
  Buffer out(n * cout * oh * ow, 0.0);
  col2im(cols.data(), n, cout, oh, ow, ih, iw, g, out.data());
  if (b.defined())
    for (std::size_t bi = 0; bi < n; ++bi)
      for (std::size_t c = 0; c < cout; ++c) {
        double* dst = out.data() + (bi * cout + c) * oh * ow;
        for (std::size_t i = 0; i < oh * ow; ++i) dst[i] += b.data()[c];
      }

  Node* px = x.get();
  Node* pw = w.get();
  Node* pb = b.defined() ? b.get() : nullptr;
  return make_result({n, cout, oh, ow}, std::move(out), {x, w, b}, [=](Node& o) {
    Buffer gcols(ckk * n * p);
    im2col(o.grad.data(), n, cout, oh, ow, ih, iw, g, gcols.data());
    CMapMat gc(gcols.data(), ckk, n * p);
    if (pw->requires_grad)
      MapMat(pw->grad_data(), cin, ckk).noalias() += CMapMat(xc->data(), cin, n * p) * gc.transpose();
    if (pb && pb->requires_grad) {
      double* gb = pb->grad_data();
      const std::size_t op = oh * ow;
      for (std::size_t bi = 0; bi < n; ++bi)
        for (std::size_t c = 0; c < cout; ++c) {
          const double* src = o.grad.data() + (bi * cout + c) * op;
          double s = 0.0;
          for (std::size_t i = 0; i < op; ++i) s += src[i];
          gb[c] += s;
        }
    }
    if (px->requires_grad) {
      Buffer gx(cin * n * p);
      MapMat(gx.data(), cin, n * p).noalias() = CMapMat(pw->value.data(), cin, ckk) * gc;
      Buffer gnchw(n * cin * p);
      cnp_to_nchw(gx.data(), n, cin, p, gnchw.data());
      accumulate(px, gnchw.data(), gnchw.size());
    }
  });
}

Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Buffer& running_mean,
               Buffer& running_var, bool training, double momentum, double eps) {
  if (x.shape().size() < 2) throw std::invalid_argument("batch_norm: rank < 2");
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t inner = x.size() / (n * c);
  if (gamma.size() != c || beta.size() != c || running_mean.size() != c || running_var.size() != c)
    throw std::invalid_argument("batch_norm: channel count");
  const double count = static_cast<double>(n * inner);
  const auto xv = x.data();

  Buffer mu(c, 0.0), var(c, 0.0);
  if (training) {
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = xv.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) mu[ch] += src[i];
      }
    for (auto& m : mu) m /= count;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = xv.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) var[ch] += (src[i] - mu[ch]) * (src[i] - mu[ch]);
      }
    for (std::size_t ch = 0; ch < c; ++ch) {
      var[ch] /= count;
      const double unbiased = count > 1 ? var[ch] * count / (count - 1) : var[ch];
      running_mean[ch] = (1 - momentum) * running_mean[ch] + momentum * mu[ch];
      running_var[ch] = (1 - momentum) * running_var[ch] + momentum * unbiased;
    }
  } else {
    mu = running_mean;
    var = running_var;
  }

  Buffer inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv_std[ch] = 1.0 / std::sqrt(var[ch] + eps);
  auto xhat = std::make_shared<Buffer>(x.size());
  Buffer out(x.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double h = (xv[off + i] - mu[ch]) * inv_std[ch];
        (*xhat)[off + i] = h;
        out[off + i] = gamma.data()[ch] * h + beta.data()[ch];
      }
    }

  Node* px = x.get();
  Node* pg = gamma.get();
  Node* pbeta = beta.get();
  return make_result(x.shape(), std::move(out), {x, gamma, beta},
                     [=, inv_std = std::move(inv_std)](Node& o) {
    Buffer sum_g(c, 0.0), sum_gh(c, 0.0);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t off = (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          sum_g[ch] += o.grad[off + i];
          sum_gh[ch] += o.grad[off + i] * (*xhat)[off + i];
        }
      }
    if (pg->requires_grad) accumulate(pg, sum_gh.data(), c);
    if (pbeta->requires_grad) accumulate(pbeta, sum_g.data(), c);
    if (!px->requires_grad) return;
    double* gx = px->grad_data();
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t off = (b * c + ch) * inner;
        const double gm = pg->value[ch] * inv_std[ch];
        for (std::size_t i = 0; i < inner; ++i) {
          if (training)
            gx[off + i] += gm * (o.grad[off + i] - sum_g[ch] / count -
                                 (*xhat)[off + i] * sum_gh[ch] / count);
          else
            gx[off + i] += gm * o.grad[off + i];
        }
      }
  });
}

Var group_power_normalize(const Var& a, std::size_t group, double target,
                          const std::string& degenerate) {
  if (group == 0 || a.size() % group != 0)
    throw std::invalid_argument("group_power_normalize: size not divisible by group");
  const std::size_t groups = a.size() / group;
  Buffer factor(groups);
  Buffer out(a.size());
  for (std::size_t gi = 0; gi < groups; ++gi) {
    double e = 0.0;
    for (std::size_t i = 0; i < group; ++i) e += a.data()[gi * group + i] * a.data()[gi * group + i];
    if (!(e > 0.0)) throw std::domain_error(degenerate);
    factor[gi] = std::sqrt(target / e);
    for (std::size_t i = 0; i < group; ++i) out[gi * group + i] = a.data()[gi * group + i] * factor[gi];
  }
  Node* pa = a.get();
  return make_result(a.shape(), out, {a},
                     [pa, group, groups, target, factor = std::move(factor), y = out](Node& o) {
    if (!pa->requires_grad) return;
    double* g = pa->grad_data();
    // y = x * sqrt(T / |x|^2):  dx = f * (gy - y * <gy, y> / T)
    for (std::size_t gi = 0; gi < groups; ++gi) {
      double dot = 0.0;
      for (std::size_t i = 0; i < group; ++i) dot += o.grad[gi * group + i] * y[gi * group + i];
      for (std::size_t i = 0; i < group; ++i) {
        const std::size_t k = gi * group + i;
        g[k] += factor[gi] * (o.grad[k] - y[k] * dot / target);
      }
    }
  });
}

Var squared_error(const Var& a, const Var& b, double denom) {
  require_same(a, b, "squared_error");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  Node* pa = a.get();
  Node* pb = b.get();
  return make_result({1}, {s / denom}, {a, b}, [pa, pb, denom](Node& o) {
    const double k = 2.0 * o.grad[0] / denom;
    const std::size_t n = pa->value.size();
    if (pa->requires_grad) {
      double* g = pa->grad_data();
      for (std::size_t i = 0; i < n; ++i) g[i] += k * (pa->value[i] - pb->value[i]);
    }
    if (pb->requires_grad) {
      double* g = pb->grad_data();
      for (std::size_t i = 0; i < n; ++i) g[i] -= k * (pa->value[i] - pb->value[i]);
    }
  });
}

}  // namespace jefp
