#include "jefp/djscc_codec.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jefp {

Var power_normalize(const Var& v) {
  if (v.shape().size() != 2 || v.dim(1) % 2 != 0)
    throw std::invalid_argument("latent must be [N, 2Z], got " + shape_str(v.shape()));
  return group_power_normalize(v, v.dim(1), static_cast<double>(v.dim(1) / 2), "degenerate latent");
}

CVector power_normalize(const CVector& s) {
  double e = 0.0;
  for (const auto& x : s) e += std::norm(x);
  if (!(e > 0.0)) throw std::domain_error("degenerate latent");
  const double f = std::sqrt(static_cast<double>(s.size()) / e);
  CVector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] * f;
  return out;
}

Encoder::Encoder(std::size_t in_ch, std::size_t height, std::size_t width, std::size_t z,
                 std::size_t hidden, Rng& rng)
    : in_ch_(in_ch),
      height_(height),
      width_(width),
      z_(z),
      conv1_(in_ch, hidden, ConvGeometry{}, rng),
      conv2_(hidden, 2, ConvGeometry{}, rng),
      bn1_(hidden),
      bn2_(2),
      fc_(2 * height * width, 2 * z, true, rng) {}

Var Encoder::forward(const Var& x, bool training) {
  if (x.shape().size() != 4 || x.dim(1) != in_ch_ || x.dim(2) != height_ || x.dim(3) != width_)
    throw std::invalid_argument("encoder input shape mismatch: " + shape_str(x.shape()));
  Var h = leaky_relu(bn1_.forward(conv1_.forward(x), training), kLeakySlope);
  h = leaky_relu(bn2_.forward(conv2_.forward(h), training), kLeakySlope);
  h = reshape(h, {x.dim(0), 2 * height_ * width_});
  return power_normalize(fc_.forward(h));
}

void Encoder::collect(ParamList& out, const std::string& prefix) {
  conv1_.collect(out, join_name(prefix, "conv1"));
  bn1_.collect(out, join_name(prefix, "bn1"));
  conv2_.collect(out, join_name(prefix, "conv2"));
  bn2_.collect(out, join_name(prefix, "bn2"));
  fc_.collect(out, join_name(prefix, "fc"));
}

Eigen::VectorXcd mrc_combiner(const Eigen::VectorXcd& h) {
  const double n = h.norm();
  if (n == 0.0) return Eigen::VectorXcd::Zero(h.size());
  return h / n;
}

UplinkDraw draw_uplink(const CMatrix& h_ul, std::size_t z, double sigma_sq, Rng& rng) {
  if (z > static_cast<std::size_t>(h_ul.rows()))
    throw std::invalid_argument("feedback exceeds subcarriers");
  const Eigen::Index nt = h_ul.cols();
  UplinkDraw d;
  d.gain.resize(z);
  d.noise.assign(z, 0.0);
  Eigen::VectorXcd n(nt);
  for (std::size_t i = 0; i < z; ++i) {
    const Eigen::VectorXcd h = h_ul.row(static_cast<Eigen::Index>(i)).transpose();
    d.gain[i] = h.norm();
    if (sigma_sq > 0.0) {
      for (Eigen::Index a = 0; a < nt; ++a) n(a) = complex_gaussian(rng, sigma_sq);
      d.noise[i] = mrc_combiner(h).dot(n);  // dot() conjugates the first argument
    }
  }
  return d;
}

CVector uplink_feedback_pass(const CVector& s, const CMatrix& h_ul, double sigma_sq,
                             std::uint64_t seed) {
  Rng rng(seed);
  const UplinkDraw d = draw_uplink(h_ul, s.size(), sigma_sq, rng);
  CVector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = d.gain[i] * s[i] + d.noise[i];
  return out;
}

std::vector<double> qam_levels(int bits) {
  if (bits <= 0 || bits % 2 != 0) throw std::invalid_argument("unsupported modulation order");
  const int per_axis = 1 << (bits / 2);
  const double order = std::ldexp(1.0, bits);
  const double scale = 1.0 / std::sqrt(2.0 * (order - 1.0) / 3.0);
  std::vector<double> lv;
  for (int i = 0; i < per_axis; ++i) lv.push_back((2.0 * i - (per_axis - 1)) * scale);
  return lv;
}

namespace {

double nearest_level(const std::vector<double>& lv, double x) {
  // Levels are uniformly spaced, so rounding the index is exact.
  const double step = lv[1] - lv[0];
  const double idx = std::round((x - lv[0]) / step);
  const auto i = static_cast<std::size_t>(std::clamp(idx, 0.0, static_cast<double>(lv.size() - 1)));
  return lv[i];
}

}  // namespace

CVector qam_quantize(const CVector& s, int bits) {
  const auto lv = qam_levels(bits);
  CVector q(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    q[i] = {nearest_level(lv, s[i].real()), nearest_level(lv, s[i].imag())};
  return power_normalize(q);
}

void qam_quantize_rows(std::vector<double>& rows, std::size_t z, int bits) {
  for (std::size_t r = 0; r * 2 * z < rows.size(); ++r) {
    const CVector q = qam_quantize(to_complex({rows.data() + r * 2 * z, 2 * z}), bits);
    for (std::size_t i = 0; i < z; ++i) {
      rows[r * 2 * z + 2 * i] = q[i].real();
      rows[r * 2 * z + 2 * i + 1] = q[i].imag();
    }
  }
}

CVector to_complex(std::span<const double> interleaved) {
  CVector out(interleaved.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {interleaved[2 * i], interleaved[2 * i + 1]};
  return out;
}

}  // namespace jefp
