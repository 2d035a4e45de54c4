// UE-side encoder, latent power normalization, uplink feedback with MRC
// detection, and square-QAM quantization of latents.
#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "jefp/channel_model.hpp"
#include "jefp/nn.hpp"

namespace jefp {

using CVector = std::vector<std::complex<double>>;

// v: [N, 2Z] with interleaved (re, im). Each row is rescaled to ||s||^2 = Z.
Var power_normalize(const Var& v);
CVector power_normalize(const CVector& s);

// conv3x3(in -> hidden) + BN + LReLU, conv3x3(hidden -> 2) + BN + LReLU,
// flatten, FC -> 2Z, power_normalize.
class Encoder : public Module {
 public:
  Encoder() = default;
  Encoder(std::size_t in_ch, std::size_t height, std::size_t width, std::size_t z,
          std::size_t hidden, Rng& rng);

  // x: [N, in_ch, height, width] -> [N, 2Z]
  Var forward(const Var& x, bool training);
  void collect(ParamList& out, const std::string& prefix) override;
  std::size_t z() const { return z_; }

 private:
  std::size_t in_ch_ = 0, height_ = 0, width_ = 0, z_ = 0;
  Conv2d conv1_, conv2_;
  BatchNorm bn1_, bn2_;
  Linear fc_;
};

// Unit-norm MRC combiner h / ||h|| (zero for a zero channel).
Eigen::VectorXcd mrc_combiner(const Eigen::VectorXcd& h);

// One draw of the uplink for Z elements of a user: per-element gain
// ||h_{u,z}|| and the combined noise w^H n with n ~ CN(0, sigma_sq I).
struct UplinkDraw {
  std::vector<double> gain;
  CVector noise;
};
UplinkDraw draw_uplink(const CMatrix& h_ul, std::size_t z, double sigma_sq, Rng& rng);

// s_hat_z = w_z^H (h_{u,z} s_z + n_z), element z on uplink subcarrier z.
CVector uplink_feedback_pass(const CVector& s, const CMatrix& h_ul, double sigma_sq,
                             std::uint64_t seed);

// Points per axis: +-1, +-3, ... scaled for unit average power.
std::vector<double> qam_levels(int bits);
// Nearest-point mapping followed by re-normalization to ||s||^2 = Z.
CVector qam_quantize(const CVector& s, int bits);
// In-place on interleaved rows of width 2Z.
void qam_quantize_rows(std::vector<double>& rows, std::size_t z, int bits);

CVector to_complex(std::span<const double> interleaved);

}  // namespace jefp
