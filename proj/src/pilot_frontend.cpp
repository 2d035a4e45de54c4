#include "jefp/pilot_frontend.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jefp {

std::vector<std::size_t> pilot_indices(std::size_t nc, std::size_t g) {
  if (g == 0) throw std::invalid_argument("pilot spacing must be positive");
  std::vector<std::size_t> idx;
  for (std::size_t m = 0; m < nc / g; ++m) idx.push_back(m * g);
  return idx;
}

Var project_pilot_power(const Var& raw) {
  if (raw.shape().size() != 4 || raw.dim(3) != 2)
    throw std::invalid_argument("pilots must be [L, M, Nt, 2], got " + shape_str(raw.shape()));
  const std::size_t m = raw.dim(1), nt = raw.dim(2);
  return group_power_normalize(raw, m * nt * 2, static_cast<double>(m), "degenerate pilot symbol");
}

std::vector<CMatrix> pilot_symbols(const Var& pilots) {
  const std::size_t l = pilots.dim(0), m = pilots.dim(1), nt = pilots.dim(2);
  const auto d = pilots.data();
  std::vector<CMatrix> out(l, CMatrix(m, nt));
  for (std::size_t s = 0; s < l; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t a = 0; a < nt; ++a) {
        const std::size_t o = ((s * m + i) * nt + a) * 2;
        out[s](i, a) = {d[o], d[o + 1]};
      }
  return out;
}

Var pilots_from_symbols(const std::vector<CMatrix>& symbols) {
  const std::size_t l = symbols.size(), m = symbols.at(0).rows(), nt = symbols.at(0).cols();
  std::vector<double> v(l * m * nt * 2);
  for (std::size_t s = 0; s < l; ++s)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t a = 0; a < nt; ++a) {
        const std::size_t o = ((s * m + i) * nt + a) * 2;
        v[o] = symbols[s](i, a).real();
        v[o + 1] = symbols[s](i, a).imag();
      }
  return Var::constant({l, m, nt, 2}, std::move(v));
}

PilotBook::PilotBook(std::size_t nc, std::size_t g, std::size_t nt, std::size_t l, Rng& rng)
    : indices_(pilot_indices(nc, g)) {
  const std::size_t n = l * indices_.size() * nt * 2;
  std::vector<double> v(n);
  // Unit-variance complex entries: each real part has variance 1/2.
  for (auto& x : v) x = std::sqrt(0.5) * gaussian(rng);
  raw = Parameter({l, indices_.size(), nt, 2}, std::move(v));
}

PilotBook::PilotBook(std::size_t nc, std::size_t g, const std::vector<CMatrix>& symbols,
                     bool trainable)
    : indices_(pilot_indices(nc, g)) {
  if (static_cast<std::size_t>(symbols.at(0).rows()) != indices_.size())
    throw std::invalid_argument("pilot symbols do not match the pilot count");
  const Var v = pilots_from_symbols(symbols);
  raw = Parameter(v.shape(), std::vector<double>(v.data().begin(), v.data().end()), trainable);
}

void PilotBook::collect(ParamList& out, const std::string& prefix) {
  out.push_back({join_name(prefix, "raw"), &raw});
}

PilotBook dft_pilotbook(std::size_t nc, std::size_t g, std::size_t nt, std::size_t l) {
  const std::size_t m = nc / g;
  std::vector<CMatrix> symbols(l, CMatrix(m, nt));
  for (std::size_t s = 0; s < l; ++s) {
    const std::size_t col = s % nt;
    for (std::size_t a = 0; a < nt; ++a) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(a * col) / static_cast<double>(nt);
      symbols[s].col(a).setConstant(std::polar(1.0, phase));
    }
  }
  return PilotBook(nc, g, symbols, false);
}

Var pilot_pass(const Var& h, const Var& pilots, const std::vector<std::size_t>& indices) {
  const std::size_t n = h.dim(0), nc = h.dim(1), nt = h.dim(2);
  const std::size_t l = pilots.dim(0), m = pilots.dim(1);
  if (pilots.dim(2) != nt || m != indices.size())
    throw std::invalid_argument("pilot pass: pilots " + shape_str(pilots.shape()) +
                                " do not match channel " + shape_str(h.shape()));
  for (auto i : indices)
    if (i >= nc) throw std::invalid_argument("pilot index outside the subcarrier grid");

  const auto hd = h.data();
  const auto pd = pilots.data();
  auto h_at = [&](std::size_t u, std::size_t i, std::size_t a) {
    const std::size_t o = ((u * nc + indices[i]) * nt + a) * 2;
    return std::complex<double>(hd[o], hd[o + 1]);
  };
  auto p_at = [&](std::size_t s, std::size_t i, std::size_t a) {
    const std::size_t o = ((s * m + i) * nt + a) * 2;
    return std::complex<double>(pd[o], pd[o + 1]);
  };

  Buffer y(n * 2 * m * l);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t s = 0; s < l; ++s) {
        std::complex<double> acc = 0.0;
        for (std::size_t a = 0; a < nt; ++a) acc += h_at(u, i, a) * p_at(s, i, a);
        y[((u * 2 + 0) * m + i) * l + s] = acc.real();
        y[((u * 2 + 1) * m + i) * l + s] = acc.imag();
      }

  return make_result({n, 2, m, l}, std::move(y), {h, pilots},
                     [h, pilots, indices, n, nc, nt, l, m](Node& out) {
                       // With G = dL/dRe(y) + j dL/dIm(y): dL/dp = conj(h) G, dL/dh = conj(p) G.
                       Node* hn = h.get();
                       Node* pn = pilots.get();
                       const auto& hd = hn->value;
                       const auto& pd = pn->value;
                       auto h_at = [&](std::size_t u, std::size_t i, std::size_t a) {
                         const std::size_t o = ((u * nc + indices[i]) * nt + a) * 2;
                         return std::complex<double>(hd[o], hd[o + 1]);
                       };
                       auto p_at = [&](std::size_t s, std::size_t i, std::size_t a) {
                         const std::size_t o = ((s * m + i) * nt + a) * 2;
                         return std::complex<double>(pd[o], pd[o + 1]);
                       };
                       double* gh = hn->requires_grad ? hn->grad_data() : nullptr;
                       double* gp = pn->requires_grad ? pn->grad_data() : nullptr;
                       for (std::size_t u = 0; u < n; ++u)
                         for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t s = 0; s < l; ++s) {
                             const std::complex<double> gy(out.grad[((u * 2 + 0) * m + i) * l + s],
                                                           out.grad[((u * 2 + 1) * m + i) * l + s]);
                             for (std::size_t a = 0; a < nt; ++a) {
                               if (gp) {
                                 const auto d = std::conj(h_at(u, i, a)) * gy;
                                 const std::size_t o = ((s * m + i) * nt + a) * 2;
                                 gp[o] += d.real();
                                 gp[o + 1] += d.imag();
                               }
                               if (gh) {
                                 const auto d = std::conj(p_at(s, i, a)) * gy;
                                 const std::size_t o = ((u * nc + indices[i]) * nt + a) * 2;
                                 gh[o] += d.real();
                                 gh[o + 1] += d.imag();
                               }
                             }
                           }
                     });
}

CMatrix downlink_pilot_pass(const CMatrix& h, const std::vector<CMatrix>& pilots,
                            const std::vector<std::size_t>& indices, double sigma_sq,
                            std::uint64_t seed) {
  const std::size_t m = indices.size(), l = pilots.size();
  Rng rng(seed);
  CMatrix y(m, l);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t s = 0; s < l; ++s) {
      const auto row = h.row(static_cast<Eigen::Index>(indices[i]));
      y(i, s) = (row.transpose().array() * pilots[s].row(i).transpose().array()).sum();
      if (sigma_sq > 0.0) y(i, s) += complex_gaussian(rng, sigma_sq);
    }
  return y;
}

CMatrix ls_oracle_estimate(const CMatrix& y, const std::vector<CMatrix>& pilots) {
  if (pilots.empty()) throw std::invalid_argument("need at least one pilot symbol");
  const Eigen::Index m = y.rows(), l = y.cols(), nt = pilots[0].cols();
  CMatrix out(m, nt);
  for (Eigen::Index i = 0; i < m; ++i) {
    // y_m^T = P_m^T h with P_m[a, s] = p_s[i, a]
    CMatrix pt(l, nt);
    for (Eigen::Index s = 0; s < l; ++s) pt.row(s) = pilots[s].row(i);
    const Eigen::VectorXcd rhs = y.row(i).transpose();
    out.row(i) = pt.completeOrthogonalDecomposition().solve(rhs).transpose();
  }
  return out;
}

}  // namespace jefp
