#include "jefp/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <stdexcept>

namespace jefp {

namespace {

Var complex_mse(const Var& h, const Var& h_hat) {
  if (h.shape() != h_hat.shape())
    throw std::invalid_argument("mse: shapes differ " + shape_str(h.shape()) + " vs " +
                                shape_str(h_hat.shape()));
  return squared_error(h_hat, h, static_cast<double>(h.size() / 2));
}

}  // namespace

Var ce_loss(const Var& h, const Var& h_hat) { return complex_mse(h, h_hat); }
Var fb_loss(const Var& h, const Var& h_hat) { return complex_mse(h, h_hat); }

Var pilot_affine(const Var& y, const Var& o, const Var& b) {
  const std::size_t n = y.dim(0), m = y.dim(2), l = y.dim(3), nt = o.dim(2);
  if (o.dim(0) != m || o.dim(1) != l || b.dim(0) != m || b.dim(1) != nt)
    throw std::invalid_argument("pilot affine: shape mismatch");
  const auto yd = y.data(), od = o.data(), bd = b.data();
  auto oi = [l, nt](std::size_t i, std::size_t s, std::size_t a) { return ((i * l + s) * nt + a) * 2; };
  Buffer out(n * 2 * m * nt);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t a = 0; a < nt; ++a) {
        // re = sum yr*or - yi*oi + br, im = sum yr*oi + yi*or + bi
        double re = bd[(i * nt + a) * 2], im = bd[(i * nt + a) * 2 + 1];
        for (std::size_t s = 0; s < l; ++s) {
          const double yr = yd[((u * 2 + 0) * m + i) * l + s];
          const double yi = yd[((u * 2 + 1) * m + i) * l + s];
          const double orr = od[oi(i, s, a)], oim = od[oi(i, s, a) + 1];
          re += yr * orr - yi * oim;
          im += yr * oim + yi * orr;
        }
        out[((u * 2 + 0) * m + i) * nt + a] = re;
        out[((u * 2 + 1) * m + i) * nt + a] = im;
      }
  return make_result({n, 2, m, nt}, std::move(out), {y, o, b}, [y, o, b, n, m, l, nt, oi](Node& r) {
    const auto& yd = y.get()->value;
    const auto& od = o.get()->value;
    double* gy = y.get()->requires_grad ? y.get()->grad_data() : nullptr;
    double* go = o.get()->requires_grad ? o.get()->grad_data() : nullptr;
    double* gb = b.get()->requires_grad ? b.get()->grad_data() : nullptr;
    for (std::size_t u = 0; u < n; ++u)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t a = 0; a < nt; ++a) {
          const double gr = r.grad[((u * 2 + 0) * m + i) * nt + a];
          const double gi = r.grad[((u * 2 + 1) * m + i) * nt + a];
          if (gb) {
            gb[(i * nt + a) * 2] += gr;
            gb[(i * nt + a) * 2 + 1] += gi;
          }
          for (std::size_t s = 0; s < l; ++s) {
            const std::size_t yr_i = ((u * 2 + 0) * m + i) * l + s;
            const std::size_t yi_i = ((u * 2 + 1) * m + i) * l + s;
            const double orr = od[oi(i, s, a)], oim = od[oi(i, s, a) + 1];
            if (gy) {
              gy[yr_i] += gr * orr + gi * oim;
              gy[yi_i] += -gr * oim + gi * orr;
            }
            if (go) {
              go[oi(i, s, a)] += gr * yd[yr_i] + gi * yd[yi_i];
              go[oi(i, s, a) + 1] += -gr * yd[yi_i] + gi * yd[yr_i];
            }
          }
        }
  });
}

CeNet::CeNet(const SystemConfig& cfg, Rng& rng) : pilots(cfg.nc, cfg.g, cfg.nt, cfg.l, rng) {
  const std::size_t m = cfg.m();
  if (m * cfg.g != cfg.nc)
    throw std::invalid_argument("configuration error: CE upsampling needs Nc = M * g");
  std::vector<double> ov(m * cfg.l * cfg.nt * 2);
  const double sd = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.l));
  for (auto& x : ov) x = sd * gaussian(rng);
  o = Parameter({m, cfg.l, cfg.nt, 2}, std::move(ov));
  b = Parameter({m, cfg.nt, 2}, std::vector<double>(m * cfg.nt * 2, 0.0));
  const std::size_t c = cfg.bs_channels;
  up_ = ConvTranspose2d(2, c, upsample_geometry(cfg.g), rng);
  up_bn_ = BatchNorm(c);
  refine_ = Conv2d(c, c, ConvGeometry{}, rng);
  out_ = Conv2d(c, 2, ConvGeometry{}, rng);
}

Var CeNet::forward(const Var& y, bool training) {
  Var h = pilot_affine(y, o.var, b.var);
  h = relu(up_bn_.forward(up_.forward(h), training));
  h = relu(refine_.forward(h));
  return out_.forward(h);
}

void CeNet::collect(ParamList& out, const std::string& prefix) {
  pilots.collect(out, join_name(prefix, "pilots"));
  out.push_back({join_name(prefix, "o"), &o});
  out.push_back({join_name(prefix, "b"), &b});
  up_.collect(out, join_name(prefix, "up"));
  up_bn_.collect(out, join_name(prefix, "up_bn"));
  refine_.collect(out, join_name(prefix, "refine"));
  out_.collect(out, join_name(prefix, "out"));
}

CsiCompressor::CsiCompressor(const SystemConfig& cfg, Rng& rng) {
  ConvGeometry g;
  g.kernel_h = cfg.g;
  g.stride_h = cfg.g;
  g.pad_h = 0;
  down_ = Conv2d(2, cfg.enc_channels, g, rng);
  bn_ = BatchNorm(cfg.enc_channels);
  encoder_ = Encoder(cfg.enc_channels, cfg.m(), cfg.nt, cfg.z, cfg.enc_channels, rng);
}

Var CsiCompressor::forward(const Var& h, bool training) {
  return encoder_.forward(leaky_relu(bn_.forward(down_.forward(h), training), kLeakySlope), training);
}

void CsiCompressor::collect(ParamList& out, const std::string& prefix) {
  down_.collect(out, join_name(prefix, "down"));
  bn_.collect(out, join_name(prefix, "bn"));
  encoder_.collect(out, join_name(prefix, "encoder"));
}

CsiReconstructor::CsiReconstructor(const SystemConfig& cfg, Rng& rng)
    : cfg_(cfg),
      front_(2 * cfg.z, 2 * cfg.m() * cfg.nt, true, rng),
      net_(2, cfg.bs_channels, cfg.res_blocks, cfg.m(), cfg.nc, cfg.s1, rng) {}

Var CsiReconstructor::forward(const Var& s_hat, bool training) {
  const Var x = reshape(front_.forward(s_hat), {s_hat.dim(0), 2, cfg_.m(), cfg_.nt});
  return net_.forward(x, training);
}

void CsiReconstructor::collect(ParamList& out, const std::string& prefix) {
  front_.collect(out, join_name(prefix, "front"));
  net_.collect(out, join_name(prefix, "features"));
}

std::vector<double> waterfill(const std::vector<double>& gains, double sigma_sq, double power) {
  if (!(power > 0.0)) throw std::invalid_argument("water-filling needs a positive budget");
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < gains.size(); ++i) {
    if (gains[i] < 0.0) throw std::invalid_argument("negative eigenmode gain");
    if (gains[i] > 0.0) order.push_back(i);
  }
  if (order.empty()) throw std::invalid_argument("no usable eigenmodes");
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return gains[a] > gains[b]; });

  // Largest n such that the water level over the n strongest modes stays
  // above the floor of the n-th one.
  double floor_sum = 0.0, mu = 0.0;
  std::size_t used = 0;
  for (std::size_t n = 0; n < order.size(); ++n) {
    const double floor_n = sigma_sq / gains[order[n]];
    const double candidate = (power + floor_sum + floor_n) / static_cast<double>(n + 1);
    if (candidate <= floor_n) break;
    floor_sum += floor_n;
    mu = candidate;
    used = n + 1;
  }
  std::vector<double> p(gains.size(), 0.0);
  for (std::size_t n = 0; n < used; ++n) p[order[n]] = mu - sigma_sq / gains[order[n]];
  return p;
}

void normalize_precoders(std::vector<CMatrix>& v, const Mask& mask, double power) {
  const Eigen::Index nc = v.at(0).rows();
  for (std::size_t u = 0; u < v.size(); ++u)
    if (!mask[u]) v[u].setZero();
  for (Eigen::Index n = 0; n < nc; ++n) {
    double e = 0.0;
    for (std::size_t u = 0; u < v.size(); ++u) e += v[u].row(n).squaredNorm();
    if (!(e > 0.0)) throw std::domain_error("degenerate precoder");
    const double f = std::sqrt(power / e);
    for (std::size_t u = 0; u < v.size(); ++u) v[u].row(n) *= f;
  }
}

std::vector<CMatrix> svd_precode(const std::vector<CMatrix>& h_hat, const Mask& mask,
                                 double sigma_sq, double power) {
  const std::size_t k = h_hat.size();
  const Eigen::Index nc = h_hat.at(0).rows(), nt = h_hat[0].cols();
  std::vector<CMatrix> v(k, CMatrix::Zero(nc, nt));
  std::vector<double> gains(k);
  for (Eigen::Index n = 0; n < nc; ++n) {
    for (std::size_t u = 0; u < k; ++u) gains[u] = mask[u] ? h_hat[u].row(n).squaredNorm() : 0.0;
    if (std::all_of(gains.begin(), gains.end(), [](double g) { return g == 0.0; })) continue;
    const auto p = waterfill(gains, sigma_sq, power);
    // The right singular vector of a single row h is conj(h)/||h||.
    for (std::size_t u = 0; u < k; ++u)
      if (p[u] > 0.0)
        v[u].row(n) = h_hat[u].row(n).conjugate() * (std::sqrt(p[u]) / std::sqrt(gains[u]));
  }
  return v;
}

CMatrix mmse_matrix(const CMatrix& h, double alpha) {
  const Eigen::Index k = h.rows();
  const CMatrix gram = h * h.adjoint() + alpha * CMatrix::Identity(k, k);
  // (H H^H + aI) is Hermitian positive definite for a > 0; solve rather than invert.
  return gram.ldlt().solve(h).adjoint();
}

std::vector<CMatrix> mmse_precode(const std::vector<CMatrix>& h_hat, const Mask& mask,
                                  double sigma_sq, double power) {
  const std::size_t k_max = h_hat.size();
  const Eigen::Index nc = h_hat.at(0).rows(), nt = h_hat[0].cols();
  std::vector<std::size_t> active;
  for (std::size_t u = 0; u < k_max; ++u)
    if (mask[u]) active.push_back(u);
  if (active.empty()) throw std::invalid_argument("no active users");
  const auto k = static_cast<Eigen::Index>(active.size());
  double alpha = static_cast<double>(k) * sigma_sq / power;

  std::vector<CMatrix> v(k_max, CMatrix::Zero(nc, nt));
  CMatrix h(k, nt);
  for (Eigen::Index n = 0; n < nc; ++n) {
    for (Eigen::Index i = 0; i < k; ++i) h.row(i) = h_hat[active[i]].row(n);
    double a = alpha;
    if (a < 1e-12) {
      Eigen::FullPivLU<CMatrix> lu(h * h.adjoint());
      if (lu.rank() < k) {
        std::cerr << "warning: singular MMSE system on subcarrier " << n
                  << ", applying regularization floor 1e-12\n";
        a = 1e-12;
      }
    }
    const CMatrix w = mmse_matrix(h, a);
    for (Eigen::Index i = 0; i < k; ++i) v[active[i]].row(n) = w.col(i).transpose();
  }
  normalize_precoders(v, mask, power);
  return v;
}

}  // namespace jefp
