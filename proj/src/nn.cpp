#include "jefp/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace jefp {

Parameter::Parameter(Shape shape, std::vector<double> values, bool is_trainable)
    : var(is_trainable ? Var::leaf(std::move(shape), std::move(values))
                       : Var::constant(std::move(shape), std::move(values))),
      trainable(is_trainable) {}

ParamList Module::parameters(const std::string& prefix) {
  ParamList out;
  collect(out, prefix);
  return out;
}

std::size_t Module::trainable_count() {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (p.param->trainable) n += p.param->size();
  return n;
}

std::vector<double> he_normal(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double gain = std::sqrt(2.0 / (1.0 + kLeakySlope * kLeakySlope));
  const double sd = gain / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<double> w(count);
  for (auto& v : w) v = sd * gaussian(rng);
  return w;
}

Linear::Linear(std::size_t in, std::size_t out, bool bias, Rng& rng) : in_(in), out_(out) {
  weight = Parameter({in, out}, he_normal(in * out, in, rng));
  if (bias) this->bias = Parameter({out}, std::vector<double>(out, 0.0));
}

Var Linear::forward(const Var& x) const { return linear(x, weight.var, bias.var); }

void Linear::collect(ParamList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "weight"), &weight});
  if (bias.var.defined()) out.push_back({join_name(prefix, "bias"), &bias});
}

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, const ConvGeometry& g, Rng& rng)
    : geometry(g) {
  const std::size_t fan_in = in_ch * g.kernel_h * g.kernel_w;
  weight = Parameter({out_ch, in_ch, g.kernel_h, g.kernel_w}, he_normal(out_ch * fan_in, fan_in, rng));
  bias = Parameter({out_ch}, std::vector<double>(out_ch, 0.0));
}

Var Conv2d::forward(const Var& x) const { return conv2d(x, weight.var, bias.var, geometry); }

void Conv2d::collect(ParamList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "weight"), &weight});
  out.push_back({join_name(prefix, "bias"), &bias});
}

ConvTranspose2d::ConvTranspose2d(std::size_t in_ch, std::size_t out_ch, const ConvGeometry& g,
                                 Rng& rng)
    : geometry(g) {
  // Each output sees roughly in_ch * kh * kw / (sh * sw) taps.
  const std::size_t fan_in =
      std::max<std::size_t>(1, in_ch * g.kernel_h * g.kernel_w / (g.stride_h * g.stride_w));
  weight = Parameter({in_ch, out_ch, g.kernel_h, g.kernel_w},
                     he_normal(in_ch * out_ch * g.kernel_h * g.kernel_w, fan_in, rng));
  bias = Parameter({out_ch}, std::vector<double>(out_ch, 0.0));
}

Var ConvTranspose2d::forward(const Var& x) const {
  return conv_transpose2d(x, weight.var, bias.var, geometry);
}

void ConvTranspose2d::collect(ParamList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "weight"), &weight});
  out.push_back({join_name(prefix, "bias"), &bias});
}

BatchNorm::BatchNorm(std::size_t channels)
    : gamma({channels}, std::vector<double>(channels, 1.0)),
      beta({channels}, std::vector<double>(channels, 0.0)),
      running_mean({channels}, std::vector<double>(channels, 0.0), false),
      running_var({channels}, std::vector<double>(channels, 1.0), false) {}

Var BatchNorm::forward(const Var& x, bool training) {
  auto& rm = running_mean.var.get()->value;
  auto& rv = running_var.var.get()->value;
  return batch_norm(x, gamma.var, beta.var, rm, rv, training && grad_enabled());
}

void BatchNorm::collect(ParamList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "gamma"), &gamma});
  out.push_back({join_name(prefix, "beta"), &beta});
  out.push_back({join_name(prefix, "running_mean"), &running_mean});
  out.push_back({join_name(prefix, "running_var"), &running_var});
}

Adam::Adam(ParamList params, Options opt) : opt_(opt) {
  for (auto& p : params)
    if (p.param->trainable) params_.push_back(p);
  for (auto& p : params_) {
    m_.emplace_back(p.param->size(), 0.0);
    v_.emplace_back(p.param->size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.param->zero_grad();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Node* node = params_[i].param->var.get();
    if (node->grad.empty()) continue;
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < node->value.size(); ++k) {
      const double g = node->grad[k];
      m[k] = opt_.beta1 * m[k] + (1 - opt_.beta1) * g;
      v[k] = opt_.beta2 * v[k] + (1 - opt_.beta2) * g * g;
      node->value[k] -= opt_.lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + opt_.eps);
    }
  }
}

}  // namespace jefp
