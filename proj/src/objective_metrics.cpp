#include "jefp/objective_metrics.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jefp {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

double SnrConfig::sigma_ce_sq() const { return 1.0 / db_to_linear(snr_ce_db); }
double SnrConfig::sigma_u_sq() const { return 1.0 / db_to_linear(snr_u_db); }
double SnrConfig::sigma_d_sq() const { return power / db_to_linear(snr_d_db); }

RateResult spectral_efficiency(const std::vector<CMatrix>& h, const std::vector<CMatrix>& v,
                               const Mask& mask, double sigma_sq) {
  const std::size_t k = h.size();
  if (v.size() != k || mask.size() != k)
    throw std::invalid_argument("spectral efficiency: user counts disagree");
  const Eigen::Index nc = h.at(0).rows();
  RateResult r;
  r.per_user.assign(k, 0.0);
  for (Eigen::Index n = 0; n < nc; ++n)
    for (std::size_t u = 0; u < k; ++u) {
      if (!mask[u]) continue;
      double signal = 0.0, interference = 0.0;
      for (std::size_t m = 0; m < k; ++m) {
        if (!mask[m]) continue;
        const double g = std::norm((h[u].row(n).array() * v[m].row(n).array()).sum());
        (m == u ? signal : interference) += g;
      }
      r.per_user[u] += std::log2(1.0 + signal / (interference + sigma_sq));
    }
  for (double x : r.per_user) r.total += x;
  r.per_subcarrier = r.total / static_cast<double>(nc);
  return r;
}

Var rate_objective(const Var& v, const std::vector<std::vector<CMatrix>>& h, const Mask& mask,
                   double sigma_sq, std::vector<double>* rates) {
  const std::size_t b = v.dim(0), nc = v.dim(1), k = v.dim(2), nt = v.dim(3) / 2;
  if (h.size() != b || mask.size() != b * k)
    throw std::invalid_argument("rate objective: batch sizes disagree");
  const auto d = v.data();
  auto v_at = [&d, nc, k, nt](std::size_t i, std::size_t n, std::size_t u, std::size_t a) {
    const std::size_t o = ((i * nc + n) * k + u) * 2 * nt;
    return std::complex<double>(d[o + a], d[o + nt + a]);
  };
  auto gain = [&](std::size_t i, std::size_t n, std::size_t u, std::size_t m) {
    std::complex<double> g = 0.0;
    for (std::size_t a = 0; a < nt; ++a) g += h[i][u](n, a) * v_at(i, n, m, a);
    return g;
  };

  std::vector<double> per_sample(b, 0.0);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t n = 0; n < nc; ++n)
      for (std::size_t u = 0; u < k; ++u) {
        if (!mask[i * k + u]) continue;
        double total = sigma_sq, signal = 0.0;
        for (std::size_t m = 0; m < k; ++m) {
          if (!mask[i * k + m]) continue;
          const double g2 = std::norm(gain(i, n, u, m));
          total += g2;
          if (m == u) signal = g2;
        }
        per_sample[i] += std::log2(total / (total - signal));
      }
  double loss = 0.0;
  for (auto& r : per_sample) {
    r /= static_cast<double>(nc);
    loss -= r / static_cast<double>(b);
  }
  if (rates) *rates = per_sample;

  const double coef = -1.0 / (static_cast<double>(b * nc) * std::numbers::ln2);
  return make_result({}, {loss}, {v}, [v, h, mask, sigma_sq, b, nc, k, nt, coef](Node& out) {
    // R = sum_k ln(T_k) - ln(T_k - S_k) over active k, with T_k the total
    // received power and S_k the desired part.
    const auto& d = v.get()->value;
    auto gain = [&](std::size_t i, std::size_t n, std::size_t u, std::size_t m) {
      const std::size_t o = ((i * nc + n) * k + m) * 2 * nt;
      std::complex<double> g = 0.0;
      for (std::size_t a = 0; a < nt; ++a) g += h[i][u](n, a) * std::complex<double>(d[o + a], d[o + nt + a]);
      return g;
    };
    double* gv = v.get()->grad_data();
    const double go = out.grad[0] * coef;
    std::vector<std::complex<double>> g(k * k);
    for (std::size_t i = 0; i < b; ++i)
      for (std::size_t n = 0; n < nc; ++n) {
        for (std::size_t u = 0; u < k; ++u)
          for (std::size_t m = 0; m < k; ++m)
            g[u * k + m] = (mask[i * k + u] && mask[i * k + m]) ? gain(i, n, u, m) : 0.0;
        for (std::size_t u = 0; u < k; ++u) {
          if (!mask[i * k + u]) continue;
          double total = sigma_sq;
          for (std::size_t m = 0; m < k; ++m) total += std::norm(g[u * k + m]);
          const double interf = total - std::norm(g[u * k + u]);
          for (std::size_t m = 0; m < k; ++m) {
            if (!mask[i * k + m]) continue;
            const double w = go * (1.0 / total - (m == u ? 0.0 : 1.0 / interf));
            const std::size_t o = ((i * nc + n) * k + m) * 2 * nt;
            for (std::size_t a = 0; a < nt; ++a) {
              const std::complex<double> c = std::conj(g[u * k + m]) * h[i][u](n, a);
              gv[o + a] += w * 2.0 * c.real();
              gv[o + nt + a] -= w * 2.0 * c.imag();
            }
          }
        }
      }
  });
}

double nmse_db(const CMatrix& h, const CMatrix& h_hat) {
  return nmse_db(std::vector<CMatrix>{h}, std::vector<CMatrix>{h_hat});
}

double nmse_db(const std::vector<CMatrix>& h, const std::vector<CMatrix>& h_hat) {
  if (h.size() != h_hat.size()) throw std::invalid_argument("nmse: set sizes differ");
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h[i].rows() != h_hat[i].rows() || h[i].cols() != h_hat[i].cols())
      throw std::invalid_argument("nmse: shapes differ");
    err += (h[i] - h_hat[i]).squaredNorm();
    ref += h[i].squaredNorm();
  }
  if (!(ref > 0.0)) throw std::invalid_argument("nmse: zero reference");
  if (err == 0.0) return kNmseFloorDb;
  return std::max(kNmseFloorDb, 10.0 * std::log10(err / ref));
}

ParamReport count_parameters(const ParamList& params) {
  ParamReport r;
  for (const auto& p : params) {
    if (!p.param->trainable) continue;
    const auto dot = p.name.find('.');
    r.by_module[p.name.substr(0, dot)] += p.param->size();
    r.total += p.param->size();
  }
  return r;
}

}  // namespace jefp
