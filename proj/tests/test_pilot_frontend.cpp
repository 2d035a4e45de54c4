#include <numbers>

#include "jefp/pilot_frontend.hpp"
#include "support.hpp"

namespace jefp {
namespace {

double symbol_power(const CMatrix& p) { return p.squaredNorm() / static_cast<double>(p.rows()); }

TEST(PilotPower, ScalarForcedToUnitPower) {
  const Var p = project_pilot_power(Var::constant({1, 1, 1, 2}, {3.0, 0.0}));
  EXPECT_NEAR(p.data()[0], 1.0, 1e-15);
  EXPECT_NEAR(p.data()[1], 0.0, 1e-15);
}

TEST(PilotPower, IdempotentOnFeasiblePilots) {
  Rng rng(1);
  const Var once = project_pilot_power(Var::constant({3, 4, 2, 2}, test::random_values(rng, 48)));
  const Var twice = project_pilot_power(once);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(once.data()[i], twice.data()[i], 1e-12);
}

TEST(PilotPower, FullScaleEverySymbol) {
  Rng rng(2);
  PilotBook book(96, 4, 32, 6, rng);
  ASSERT_EQ(book.m(), 24u);
  for (const auto& p : pilot_symbols(book.forward())) EXPECT_NEAR(symbol_power(p), 1.0, 1e-9);
  EXPECT_THROW(project_pilot_power(Var::constant({1, 2, 2, 2}, 0.0)), std::domain_error);
}

TEST(DftPilots, OrthogonalSymbols) {
  const PilotBook book = dft_pilotbook(8, 4, 2, 2);
  const auto p = pilot_symbols(book.forward());
  std::complex<double> inner = 0;
  for (Eigen::Index m = 0; m < p[0].rows(); ++m) inner += p[0].row(m).conjugate().dot(p[1].row(m));
  EXPECT_LT(std::abs(inner), 1e-9);
  for (const auto& s : p) EXPECT_NEAR(symbol_power(s), 1.0, 1e-12);
  EXPECT_FALSE(book.raw.trainable);
}

TEST(DftPilots, ColumnsCycleWhenLExceedsNt) {
  const std::size_t nt = 3, l = 7;
  const auto p = pilot_symbols(dft_pilotbook(12, 4, nt, l).forward());
  for (std::size_t s = 0; s < l; ++s)
    for (std::size_t a = 0; a < nt; ++a) {
      const auto expected = std::polar(1.0 / std::sqrt(3.0),
                                       -2.0 * std::numbers::pi * double(a * (s % nt)) / double(nt));
      for (Eigen::Index m = 0; m < 3; ++m) EXPECT_NEAR(std::abs(p[s](m, a) - expected), 0.0, 1e-12);
    }
}

TEST(PilotPass, ScalarNoiseless) {
  CMatrix h(1, 1);
  h(0, 0) = 2.0;
  std::vector<CMatrix> p{CMatrix::Ones(1, 1)};
  const CMatrix y = downlink_pilot_pass(h, p, {0}, 0.0, 1);
  EXPECT_NEAR(std::abs(y(0, 0) - 2.0), 0.0, 1e-15);
}

TEST(PilotPass, BatchedMatchesRealExpansion) {
  Rng rng(3);
  const std::size_t n = 2, nc = 8, nt = 3, g = 2, l = 2;
  const auto idx = pilot_indices(nc, g);
  const std::size_t m = idx.size();
  const Var h = Var::constant({n, nc, nt, 2}, test::random_values(rng, n * nc * nt * 2));
  const Var p = Var::constant({l, m, nt, 2}, test::random_values(rng, l * m * nt * 2));
  const Var y = pilot_pass(h, p, idx);
  ASSERT_EQ(y.shape(), (Shape{n, 2, m, l}));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t mm = 0; mm < m; ++mm)
      for (std::size_t s = 0; s < l; ++s) {
        double re = 0, im = 0;
        for (std::size_t a = 0; a < nt; ++a) {
          const double hr = h.data()[((i * nc + idx[mm]) * nt + a) * 2];
          const double hi = h.data()[((i * nc + idx[mm]) * nt + a) * 2 + 1];
          const double pr = p.data()[((s * m + mm) * nt + a) * 2];
          const double pi = p.data()[((s * m + mm) * nt + a) * 2 + 1];
          re += hr * pr - hi * pi;
          im += hr * pi + hi * pr;
        }
        EXPECT_NEAR(y.data()[((i * 2 + 0) * m + mm) * l + s], re, 1e-12);
        EXPECT_NEAR(y.data()[((i * 2 + 1) * m + mm) * l + s], im, 1e-12);
      }
}

TEST(PilotPass, BackwardMatchesFiniteDifferences) {
  Rng rng(4);
  const auto idx = pilot_indices(4, 2);
  Var h = Var::leaf({1, 4, 2, 2}, test::random_values(rng, 16));
  Var p = Var::leaf({2, 2, 2, 2}, test::random_values(rng, 16));
  const Var r = Var::constant({1, 2, 2, 2}, test::random_values(rng, 8));
  auto loss = [&] { return sum(mul(pilot_pass(h, p, idx), r)); };
  backward(loss());
  for (Var* v : {&h, &p}) {
    const std::vector<double> g(v->grad().begin(), v->grad().end());
    auto d = v->mutable_data();
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double s = d[j];
      d[j] = s + 1e-6;
      const double up = loss().item();
      d[j] = s - 1e-6;
      const double dn = loss().item();
      d[j] = s;
      EXPECT_NEAR(g[j], (up - dn) / 2e-6, 1e-7);
    }
  }
}

TEST(PilotPass, NoiseVarianceMonteCarlo) {
  const std::size_t draws = 100000;
  const CMatrix h = CMatrix::Zero(4, 1);
  std::vector<CMatrix> p{CMatrix::Ones(1, 1)};
  double acc = 0;
  for (std::size_t i = 0; i < draws; ++i) acc += std::norm(downlink_pilot_pass(h, p, {0}, 0.1, i)(0, 0));
  EXPECT_NEAR(acc / draws, 0.1, 0.003);
}

TEST(LsOracle, ExactlyDeterminedRecoversChannel) {
  Rng rng(5);
  const std::size_t nc = 8, g = 2, nt = 3;
  const auto idx = pilot_indices(nc, g);
  const CMatrix h = test::random_cmatrix(rng, nc, nt);
  std::vector<CMatrix> p;
  for (std::size_t s = 0; s < nt; ++s) p.push_back(test::random_cmatrix(rng, idx.size(), nt));
  const CMatrix est = ls_oracle_estimate(downlink_pilot_pass(h, p, idx, 0.0, 1), p);
  for (std::size_t m = 0; m < idx.size(); ++m)
    EXPECT_LT((est.row(m) - h.row(idx[m])).norm(), 1e-9);
}

TEST(LsOracle, UnderdeterminedIsConsistentAndMatchesPseudoInverse) {
  Rng rng(6);
  const std::size_t nc = 6, g = 3, nt = 4, l = 2;
  const auto idx = pilot_indices(nc, g);
  const CMatrix h = test::random_cmatrix(rng, nc, nt);
  std::vector<CMatrix> p;
  for (std::size_t s = 0; s < l; ++s) p.push_back(test::random_cmatrix(rng, idx.size(), nt));
  const CMatrix y = downlink_pilot_pass(h, p, idx, 0.0, 1);
  const CMatrix est = ls_oracle_estimate(y, p);
  for (std::size_t m = 0; m < idx.size(); ++m) {
    // Y[m, :] = h_m^T P_m with P_m [Nt, L]; min-norm h_m^T = Y[m, :] pinv(P_m).
    CMatrix pm(nt, l);
    for (std::size_t s = 0; s < l; ++s) pm.col(s) = p[s].row(m).transpose();
    Eigen::JacobiSVD<CMatrix> svd(pm, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::VectorXd inv = svd.singularValues();
    for (Eigen::Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > 1e-12 ? 1.0 / inv(i) : 0.0;
    CMatrix sigma_pinv = CMatrix::Zero(l, nt);
    for (Eigen::Index i = 0; i < inv.size(); ++i) sigma_pinv(i, i) = inv(i);
    const CMatrix pinv = svd.matrixV() * sigma_pinv * svd.matrixU().adjoint();
    const CMatrix oracle = y.row(m) * pinv;
    EXPECT_LT((est.row(m) - oracle).norm(), 1e-9);
    EXPECT_LT((est.row(m) * pm - y.row(m)).norm(), 1e-9);
  }
}

}  // namespace
}  // namespace jefp
