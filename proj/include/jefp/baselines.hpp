// Separate-chain baselines: a learned channel estimator, an MSE-trained CSI
// feedback autoencoder, and classical precoders (matched filter with
// water-filling, regularized MMSE).
#pragma once

#include <vector>

#include "jefp/bs_precoder.hpp"
#include "jefp/config.hpp"
#include "jefp/djscc_codec.hpp"
#include "jefp/pilot_frontend.hpp"

namespace jefp {

// Mean of |H - H_hat|^2 over complex entries. Inputs are [N, 2, Nc, Nt].
Var ce_loss(const Var& h, const Var& h_hat);
Var fb_loss(const Var& h, const Var& h_hat);

// Per pilot subcarrier m: h_m = y_m O_m + b_m with y_m the 1 x L received
// row. y: [N, 2, M, L], o: [M, L, Nt, 2], b: [M, Nt, 2] -> [N, 2, M, Nt].
Var pilot_affine(const Var& y, const Var& o, const Var& b);

// Learned channel estimator with its own trainable pilots.
class CeNet : public Module {
 public:
  CeNet() = default;
  CeNet(const SystemConfig& cfg, Rng& rng);

  // y: [N, 2, M, L] -> [N, 2, Nc, Nt]
  Var forward(const Var& y, bool training);
  void collect(ParamList& out, const std::string& prefix) override;

  PilotBook pilots;
  Parameter o, b;

 private:
  ConvTranspose2d up_;
  BatchNorm up_bn_;
  Conv2d refine_, out_;
};

// Frequency-compressing front end feeding the shared encoder design:
// [N, 2, Nc, Nt] -> stride-g conv -> [N, C, M, Nt] -> Encoder -> [N, 2Z].
class CsiCompressor : public Module {
 public:
  CsiCompressor() = default;
  CsiCompressor(const SystemConfig& cfg, Rng& rng);
  Var forward(const Var& h, bool training);
  void collect(ParamList& out, const std::string& prefix) override;

 private:
  Conv2d down_;
  BatchNorm bn_;
  Encoder encoder_;
};

// BS-side reconstruction: FC 2Z -> 2MNt, then the BS feature network.
class CsiReconstructor : public Module {
 public:
  CsiReconstructor() = default;
  CsiReconstructor(const SystemConfig& cfg, Rng& rng);
  // [N, 2Z] -> [N, 2, Nc, Nt]
  Var forward(const Var& s_hat, bool training);
  void collect(ParamList& out, const std::string& prefix) override;

 private:
  SystemConfig cfg_;
  Linear front_;
  BsFeatureNet net_;
};

// p_i = max(mu - sigma^2 / lambda_i, 0), sum p_i = P. Zero gains get zero
// power. Throws when every gain is zero.
std::vector<double> waterfill(const std::vector<double>& gains, double sigma_sq, double power);

// Matched-filter direction conj(h)/||h|| per user and subcarrier with
// per-subcarrier water-filling over the active users' gains ||h||^2.
std::vector<CMatrix> svd_precode(const std::vector<CMatrix>& h_hat, const Mask& mask,
                                 double sigma_sq, double power);

// Nt x K matrix H^H (H H^H + alpha I)^{-1} for stacked rows H [K, Nt];
// column k is user k's precoder.
CMatrix mmse_matrix(const CMatrix& h, double alpha);

// Regularized MMSE with alpha = K sigma^2 / P over active users, then
// per-subcarrier power normalization.
std::vector<CMatrix> mmse_precode(const std::vector<CMatrix>& h_hat, const Mask& mask,
                                  double sigma_sq, double power);

// Scales each subcarrier's active precoders to total power P, zeroing the rest.
void normalize_precoders(std::vector<CMatrix>& v, const Mask& mask, double power);

}  // namespace jefp
