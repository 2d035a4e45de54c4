// Differentiable tensor operations. All tensors are dense row-major; image
// tensors use [batch, channel, height, width].
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "jefp/autograd.hpp"

namespace jefp {

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_const(const Var& a, const std::vector<double>& c);
Var mul_const(const Var& a, const std::vector<double>& c);

Var reshape(const Var& a, Shape shape);
// Output axis i is input axis axes[i].
Var permute(const Var& a, const std::vector<std::size_t>& axes);
// Treats `a` as [rows, width] and picks rows[i] for output row i.
Var gather_rows(const Var& a, const std::vector<std::size_t>& rows);

Var leaky_relu(const Var& a, double slope);
inline Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var sum(const Var& a);
Var mean(const Var& a);

// x: [rows, in], w: [in, out], b: [out] or undefined.
Var linear(const Var& x, const Var& w, const Var& b);

struct ConvGeometry {
  std::size_t kernel_h = 3, kernel_w = 3;
  std::size_t stride_h = 1, stride_w = 1;
  std::size_t pad_h = 1, pad_w = 1;
};

std::size_t conv_out_size(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);
std::size_t conv_transpose_out_size(std::size_t in, std::size_t kernel, std::size_t stride,
                                    std::size_t pad);

// w: [out_ch, in_ch, kh, kw]
Var conv2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& g);
// w: [in_ch, out_ch, kh, kw]
Var conv_transpose2d(const Var& x, const Var& w, const Var& b, const ConvGeometry& g);

// Per-channel normalization over every axis except 1. In training mode the
// batch statistics are used and folded into the running estimates.
Var batch_norm(const Var& x, const Var& gamma, const Var& beta, Buffer& running_mean,
               Buffer& running_var, bool training, double momentum = 0.1,
               double eps = 1e-5);

// Splits `a` into contiguous groups of `group` scalars and rescales each so
// its squared norm equals `target`. Throws std::domain_error(`degenerate`)
// when a group is all zero.
Var group_power_normalize(const Var& a, std::size_t group, double target,
                          const std::string& degenerate);

// sum((a - b)^2) / denom
Var squared_error(const Var& a, const Var& b, double denom);

}  // namespace jefp
