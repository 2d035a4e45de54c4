// Downlink spectral efficiency (plain and differentiable), NMSE, SNR
// conversions and parameter accounting.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "jefp/bs_precoder.hpp"
#include "jefp/channel_model.hpp"
#include "jefp/nn.hpp"

namespace jefp {

struct SnrConfig {
  double snr_ce_db = 10.0;
  double snr_u_db = 0.0;
  double snr_d_db = 10.0;
  double power = 1.0;

  double sigma_ce_sq() const;
  double sigma_u_sq() const;
  double sigma_d_sq() const;  // scaled by the power budget
};

double db_to_linear(double db);

struct RateResult {
  double total = 0.0;           // summed over users and subcarriers
  double per_subcarrier = 0.0;  // total / Nc
  std::vector<double> per_user;
};

// h and v hold K matrices [Nc, Nt]; the gain of user k from precoder m on
// subcarrier n is h_k[n, :] . v_m[n, :] (no conjugation).
RateResult spectral_efficiency(const std::vector<CMatrix>& h, const std::vector<CMatrix>& v,
                               const Mask& mask, double sigma_sq);

// -mean_b R_b / Nc for precoders v [B, Nc, K, 2Nt]. h[b][k] is [Nc, Nt];
// mask is [B * K]. Per-sample R_b / Nc is written to `rates` if given.
Var rate_objective(const Var& v, const std::vector<std::vector<CMatrix>>& h, const Mask& mask,
                   double sigma_sq, std::vector<double>* rates = nullptr);

inline constexpr double kNmseFloorDb = -300.0;

double nmse_db(const CMatrix& h, const CMatrix& h_hat);
// Pooled over a set: sum of errors over sum of reference energies.
double nmse_db(const std::vector<CMatrix>& h, const std::vector<CMatrix>& h_hat);

struct ParamReport {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_module;  // first name component
};

ParamReport count_parameters(const ParamList& params);

}  // namespace jefp
