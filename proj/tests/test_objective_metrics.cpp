#include "jefp/bs_precoder.hpp"
#include "jefp/nn.hpp"
#include "jefp/objective_metrics.hpp"
#include "support.hpp"

namespace jefp {
namespace {

// Term-by-term sum of log2(1 + SINR) with explicit mask multipliers.
double brute_force_rate(const std::vector<CMatrix>& h, const std::vector<CMatrix>& v, const Mask& mask,
                        double sigma_sq) {
  double total = 0.0;
  for (Eigen::Index n = 0; n < h[0].rows(); ++n)
    for (std::size_t k = 0; k < h.size(); ++k) {
      double sig = 0, intf = 0;
      for (std::size_t m = 0; m < h.size(); ++m) {
        std::complex<double> g = 0;
        for (Eigen::Index a = 0; a < h[k].cols(); ++a) g += h[k](n, a) * v[m](n, a);
        const double p = mask[m] * std::norm(g);
        if (m == k) sig = p;
        else intf += p;
      }
      total += mask[k] * std::log2(1.0 + sig / (intf + sigma_sq));
    }
  return total;
}

TEST(SpectralEfficiency, MatchedUnitChannel) {
  CMatrix h = CMatrix::Zero(1, 4);
  h(0, 0) = 1.0;
  const RateResult r = spectral_efficiency({h}, {h}, Mask{1}, 1.0);
  EXPECT_NEAR(r.total, 1.0, 1e-15);
  EXPECT_NEAR(r.per_subcarrier, 1.0, 1e-15);
}

TEST(SpectralEfficiency, OrthogonalUsersHalfPower) {
  CMatrix h1 = CMatrix::Zero(1, 2), h2 = CMatrix::Zero(1, 2);
  h1(0, 0) = 1.0;
  h2(0, 1) = 1.0;
  const double s = std::sqrt(0.5);
  const RateResult r = spectral_efficiency({h1, h2}, {s * h1, s * h2}, Mask{1, 1}, 1.0);
  EXPECT_NEAR(r.total, 2.0 * std::log2(1.5), 1e-15);
}

TEST(SpectralEfficiency, MatchesBruteForce) {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t k = 3, nc = 4, nt = 3;
    std::vector<CMatrix> h, v;
    for (std::size_t u = 0; u < k; ++u) {
      h.push_back(test::random_cmatrix(rng, nc, nt));
      v.push_back(test::random_cmatrix(rng, nc, nt));
    }
    Mask mask(k);
    do {
      for (auto& m : mask) m = static_cast<std::uint8_t>(rng() % 2);
    } while (active_count(mask) == 0);
    const double sigma = uniform(rng, 0.05, 2.0);
    const RateResult r = spectral_efficiency(h, v, mask, sigma);
    EXPECT_NEAR(r.total, brute_force_rate(h, v, mask, sigma), 1e-10);
    for (std::size_t u = 0; u < k; ++u)
      if (!mask[u]) EXPECT_EQ(r.per_user[u], 0.0);
  }
}

TEST(RateObjective, AgreesWithSpectralEfficiencyAndGradient) {
  Rng rng(2);
  const std::size_t b = 2, nc = 3, k = 2, nt = 2;
  std::vector<std::vector<CMatrix>> h(b);
  for (auto& hb : h)
    for (std::size_t u = 0; u < k; ++u) hb.push_back(test::random_cmatrix(rng, nc, nt));
  const Mask mask{1, 1, 0, 1};
  Var v = Var::leaf({b, nc, k, 2 * nt}, test::random_values(rng, b * nc * k * 2 * nt));
  std::vector<double> rates;
  const Var loss = rate_objective(v, h, mask, 0.3, &rates);
  double mean = 0;
  for (std::size_t i = 0; i < b; ++i) {
    const Mask mi(mask.begin() + i * k, mask.begin() + (i + 1) * k);
    const double r = spectral_efficiency(h[i], precoders_to_complex(v, i), mi, 0.3).per_subcarrier;
    EXPECT_NEAR(rates[i], r, 1e-12);
    mean += r / b;
  }
  EXPECT_NEAR(loss.item(), -mean, 1e-12);

  backward(loss);
  const std::vector<double> g(v.grad().begin(), v.grad().end());
  auto d = v.mutable_data();
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double s = d[j];
    d[j] = s + 1e-6;
    const double up = rate_objective(v, h, mask, 0.3).item();
    d[j] = s - 1e-6;
    const double dn = rate_objective(v, h, mask, 0.3).item();
    d[j] = s;
    EXPECT_NEAR(g[j], (up - dn) / 2e-6, 1e-7);
  }
}

TEST(Nmse, Examples) {
  Rng rng(3);
  const CMatrix h = test::random_cmatrix(rng, 6, 4);
  EXPECT_LE(nmse_db(h, h), -300.0);
  EXPECT_NEAR(nmse_db(h, CMatrix::Zero(6, 4)), 0.0, 1e-12);
  CMatrix e = test::random_cmatrix(rng, 6, 4);
  e *= std::sqrt(0.01 * h.squaredNorm() / e.squaredNorm());
  EXPECT_NEAR(nmse_db(h, h + e), -20.0, 1e-9);
  EXPECT_THROW(nmse_db(CMatrix::Zero(2, 2), h.topLeftCorner(2, 2)), std::invalid_argument);

  // Pooled form weights by energy.
  const CMatrix a = CMatrix::Ones(1, 1), b = 3.0 * CMatrix::Ones(1, 1);
  EXPECT_NEAR(nmse_db(std::vector<CMatrix>{a, b}, std::vector<CMatrix>{CMatrix::Zero(1, 1), b}), 10 * std::log10(1.0 / 10.0), 1e-12);
}

TEST(Snr, NoisePowers) {
  SnrConfig s{20.0, -10.0, 10.0, 2.0};
  EXPECT_NEAR(s.sigma_ce_sq(), 0.01, 1e-15);
  EXPECT_NEAR(s.sigma_u_sq(), 10.0, 1e-12);
  EXPECT_NEAR(s.sigma_d_sq(), 0.2, 1e-15);
  EXPECT_NEAR(db_to_linear(3.0), 1.9952623149688795, 1e-15);
}

struct TwoLayers : Module {
  Linear a, b;
  TwoLayers(Rng& rng) : a(3, 4, true, rng), b(4, 2, false, rng) {}
  void collect(ParamList& out, const std::string& prefix) override {
    a.collect(out, join_name(prefix, "a"));
    b.collect(out, join_name(prefix, "b"));
  }
};

TEST(CountParameters, LinearLayersAndBuffers) {
  Rng rng(4);
  Linear fc(5, 7, true, rng);
  EXPECT_EQ(count_parameters(fc.parameters()).total, 5u * 7 + 7);
  TwoLayers two(rng);
  const ParamReport r = count_parameters(two.parameters());
  EXPECT_EQ(r.total, 3u * 4 + 4 + 4 * 2);
  EXPECT_EQ(r.by_module.at("a"), 16u);
  EXPECT_EQ(r.by_module.at("b"), 8u);
  BatchNorm bn(3);
  EXPECT_EQ(count_parameters(bn.parameters()).total, 6u);  // running stats excluded
}

}  // namespace
}  // namespace jefp
