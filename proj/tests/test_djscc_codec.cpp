#include "jefp/djscc_codec.hpp"
#include "support.hpp"

namespace jefp {
namespace {

double power(const CVector& s) {
  double p = 0;
  for (auto v : s) p += std::norm(v);
  return p;
}

TEST(LatentPower, Examples) {
  const Var s = power_normalize(Var::constant({1, 4}, {2.0, 0.0, 0.0, 0.0}));
  EXPECT_NEAR(s.data()[0], std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(s.data()[1], 0.0, 1e-15);

  const std::vector<double> feasible{1.0, 0.0, 0.0, -1.0};
  const Var same = power_normalize(Var::constant({1, 4}, feasible));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(same.data()[i], feasible[i], 1e-15);

  Rng rng(1);
  const Var r = power_normalize(Var::constant({5, 16}, test::random_values(rng, 80, 3.0)));
  for (std::size_t row = 0; row < 5; ++row) {
    double p = 0;
    for (std::size_t i = 0; i < 16; ++i) p += r.data()[row * 16 + i] * r.data()[row * 16 + i];
    EXPECT_NEAR(p, 8.0, 1e-12);
  }
  EXPECT_NEAR(power(power_normalize(CVector{{3, 4}, {0, 1}})), 2.0, 1e-12);
  EXPECT_THROW(power_normalize(CVector(3, 0.0)), std::domain_error);
}

TEST(Encoder, FullScaleShapeAndDeterminism) {
  Rng rng(2);
  Encoder enc(2, 24, 6, 32, 4, rng);
  Rng xr(3);
  const Var y = Var::constant({2, 2, 24, 6}, test::random_values(xr, 2 * 2 * 24 * 6));
  NoGradGuard guard;
  const Var a = enc.forward(y, false), b = enc.forward(y, false);
  ASSERT_EQ(a.shape(), (Shape{2, 64}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
  for (std::size_t row = 0; row < 2; ++row) {
    double p = 0;
    for (std::size_t i = 0; i < 64; ++i) p += a.data()[row * 64 + i] * a.data()[row * 64 + i];
    EXPECT_NEAR(p / 32, 1.0, 1e-6);
  }
}

TEST(Uplink, MrcNormGain) {
  CMatrix h = CMatrix::Zero(1, 2);
  h(0, 0) = 3.0;
  h(0, 1) = 4.0;
  EXPECT_NEAR(std::abs(uplink_feedback_pass({1.0}, h, 0.0, 1)[0] - 5.0), 0.0, 1e-15);
  CMatrix e = CMatrix::Zero(1, 4);
  e(0, 0) = 1.0;
  const std::complex<double> s{0.3, -0.7};
  EXPECT_NEAR(std::abs(uplink_feedback_pass({s}, e, 0.0, 1)[0] - s), 0.0, 1e-15);
}

TEST(Uplink, NoiselessMatchesNormOnRandomDraws) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const CMatrix h = test::random_cmatrix(rng, 6, 4);
    CVector s(6);
    for (auto& v : s) v = complex_gaussian(rng, 1.0);
    const CVector out = uplink_feedback_pass(s, h, 0.0, t);
    for (std::size_t z = 0; z < 6; ++z)
      EXPECT_LE(std::abs(out[z] - h.row(z).norm() * s[z]), 1e-12);
  }
}

TEST(Uplink, DetectedNoiseVariancePreserved) {
  Rng rng(5);
  const CMatrix h = test::random_cmatrix(rng, 1, 8);
  const std::size_t draws = 100000;
  double acc = 0;
  Rng noise(6);
  for (std::size_t i = 0; i < draws; ++i) acc += std::norm(draw_uplink(h, 1, 0.2, noise).noise[0]);
  EXPECT_NEAR(acc / draws / 0.2, 1.0, 0.03);
  EXPECT_THROW(uplink_feedback_pass(CVector(3, 1.0), h, 0.0, 1), std::invalid_argument);
}

TEST(Qam, LevelsHaveUnitAveragePower) {
  for (int bits : {2, 4, 6, 8, 10}) {
    const auto lv = qam_levels(bits);
    double p = 0;
    for (double a : lv)
      for (double b : lv) p += a * a + b * b;
    EXPECT_NEAR(p / (lv.size() * lv.size()), 1.0, 1e-12) << bits;
  }
  EXPECT_THROW(qam_levels(3), std::invalid_argument);
  EXPECT_THROW(qam_levels(0), std::invalid_argument);
}

TEST(Qam, FourQamExample) {
  const CVector q = qam_quantize({{0.9, 0.8}}, 2);
  // (1 + j)/sqrt(2) already has unit power, so renormalization keeps it.
  EXPECT_NEAR(q[0].real(), 1 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(q[0].imag(), 1 / std::sqrt(2.0), 1e-15);
}

TEST(Qam, ConstellationPointsAreFixed) {
  const auto lv = qam_levels(4);
  const CVector s{{lv[0], lv[3]}, {lv[3], lv[0]}};  // power 1.8 each => total 3.6
  const CVector q = qam_quantize(s, 4);
  const double k = std::sqrt(2.0 / power(s));
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(std::abs(q[i] - k * s[i]), 0.0, 1e-15);
}

CVector exhaustive_nearest(const CVector& s, int bits) {
  const auto lv = qam_levels(bits);
  CVector out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (double a : lv)
      for (double b : lv) {
        const double d = std::norm(s[i] - std::complex<double>(a, b));
        if (d < best) {
          best = d;
          out[i] = {a, b};
        }
      }
  }
  return out;
}

TEST(Qam, MatchesExhaustiveSearchAndErrorShrinksWithBits) {
  Rng rng(7);
  std::map<int, double> mse;
  for (int t = 0; t < 100; ++t) {
    CVector s(8);
    for (auto& v : s) v = complex_gaussian(rng, 1.0);
    s = power_normalize(s);
    for (int bits : {2, 4, 6, 8, 10}) {
      const CVector q = qam_quantize(s, bits);
      const CVector oracle = power_normalize(exhaustive_nearest(s, bits));
      for (std::size_t i = 0; i < s.size(); ++i) {
        ASSERT_LT(std::abs(q[i] - oracle[i]), 1e-12) << bits;
        mse[bits] += std::norm(q[i] - s[i]);
      }
    }
  }
  EXPECT_LT(mse[10], mse[2]);
  for (int bits : {4, 6, 8, 10}) EXPECT_LT(mse[bits], mse[bits - 2]);
}

TEST(Qam, RowsInPlace) {
  std::vector<double> rows{0.9, 0.8, -0.2, -0.1, 0.1, -0.9, 3.0, 0.2};
  qam_quantize_rows(rows, 2, 2);
  for (double v : rows) EXPECT_NEAR(std::abs(v), 1 / std::sqrt(2.0), 1e-15);
}

}  // namespace
}  // namespace jefp
