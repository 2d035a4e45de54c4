#include "jefp/bs_precoder.hpp"
#include "jefp/objective_metrics.hpp"
#include "support.hpp"

namespace jefp {
namespace {

SystemConfig small_config() {
  SystemConfig c = SystemConfig::tiny();
  c.nc = 8;
  c.nt = 3;
  c.g = 2;
  c.z = 3;
  c.k_max = 3;
  c.embed = 6;
  return c;
}

TEST(Upsampling, LayerCounts) {
  EXPECT_EQ(upsample_layers(24, 96, 2), 2u);
  EXPECT_EQ(upsample_layers(12, 96, 2), 3u);
  EXPECT_EQ(upsample_layers(6, 24, 2), 2u);
  EXPECT_EQ(upsample_layers(8, 8, 1), 0u);
  EXPECT_EQ(upsample_layers(4, 36, 3), 2u);
  EXPECT_THROW(upsample_layers(5, 24, 2), std::invalid_argument);
  EXPECT_THROW(upsample_layers(4, 24, 2), std::invalid_argument);
  EXPECT_THROW(upsample_layers(4, 8, 1), std::invalid_argument);
}

TEST(Upsampling, GeometryDoublesHeight) {
  for (std::size_t s1 : {2, 3, 4}) {
    const ConvGeometry g = upsample_geometry(s1);
    EXPECT_EQ(conv_transpose_out_size(6, g.kernel_h, g.stride_h, g.pad_h), 6 * s1) << s1;
    EXPECT_EQ(conv_transpose_out_size(5, g.kernel_w, g.stride_w, g.pad_w), 5u) << s1;
  }
}

TEST(DecodeFront, FullScaleWidthAndZeroMap) {
  SystemConfig full = SystemConfig::full();
  Rng rng(1);
  Linear front(2 * full.z, 2 * full.m() * full.nt, true, rng);
  EXPECT_EQ(front.out_features(), 1536u);

  SystemConfig c = small_config();
  BsPrecoderNet net(c, rng);
  std::fill(net.front.weight.var.mutable_data().begin(), net.front.weight.var.mutable_data().end(), 0.0);
  const Var s = Var::constant({2, 2 * c.z}, 1.0);
  const Var t = net.decode_front(s);
  EXPECT_EQ(t.shape(), (Shape{2, 2, c.m(), c.nt}));
  for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(DecodeFront, SharedAcrossUsers) {
  Rng rng(2);
  const SystemConfig c = small_config();
  BsPrecoderNet net(c, rng);
  Rng xr(3);
  const auto row = test::random_values(xr, 2 * c.z);
  std::vector<double> two(row);
  two.insert(two.end(), row.begin(), row.end());
  const Var t = net.decode_front(Var::constant({2, 2 * c.z}, two));
  const std::size_t half = t.size() / 2;
  for (std::size_t i = 0; i < half; ++i) EXPECT_EQ(t.data()[i], t.data()[half + i]);
}

TEST(FeatureNet, ZeroBlocksAreIdentity) {
  Rng rng(4);
  ResidualBlock block(3, rng);
  for (Conv2d* conv : {&block.conv1, &block.conv2}) {
    for (auto& v : conv->weight.var.mutable_data()) v = 0.0;
    for (auto& v : conv->bias.var.mutable_data()) v = 0.0;
  }
  Rng xr(5);
  const Var x = Var::constant({2, 3, 4, 2}, test::random_values(xr, 48));
  for (bool training : {false, true}) {
    const Var y = block.forward(x, training);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y.data()[i], x.data()[i], 1e-12);
  }
}

TEST(FeatureNet, ShapesAndGradient) {
  Rng rng(6);
  BsFeatureNet net(2, 2, 1, 2, 4, 2, rng);
  EXPECT_EQ(net.num_upsample_layers(), 1u);
  Rng xr(7);
  Var x = Var::leaf({2, 2, 2, 2}, test::random_values(xr, 16));
  const Var f = net.extract_features(x, true);
  EXPECT_EQ(f.dim(2), 2u);
  EXPECT_EQ(f.dim(3), 2u);
  EXPECT_EQ(net.forward(x, true).shape(), (Shape{2, 2, 4, 2}));

  const Var r = Var::constant({2, 2, 4, 2}, test::random_values(xr, 32));
  auto loss = [&] { return sum(mul(net.forward(x, true), r)); };
  backward(loss());
  const std::vector<double> g(x.grad().begin(), x.grad().end());
  auto d = x.mutable_data();
  for (std::size_t j = 0; j < d.size(); ++j) {
    const double s = d[j];
    d[j] = s + 1e-6;
    const double up = loss().item();
    d[j] = s - 1e-6;
    const double dn = loss().item();
    d[j] = s;
    const double num = (up - dn) / 2e-6;
    EXPECT_LE(std::abs(g[j] - num) / std::max({std::abs(g[j]), std::abs(num), 1e-6}), 1e-4);
  }
}

TEST(NoiseEmbedding, UnitNoiseMapsZero) {
  Rng rng(8);
  NoiseEmbedding emb(5, rng);
  const Var e = emb.forward({1.0, 1.0, 0.1});
  ASSERT_EQ(e.shape(), (Shape{3, 5}));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(e.data()[i], e.data()[5 + i]);
  EXPECT_THROW(emb.forward({0.0}), std::invalid_argument);
  EXPECT_EQ(SystemConfig::full().embed, 256u);
}

// Independent masked multi-head attention: per head, softmax(QK^T/sqrt(K)) V.
Eigen::MatrixXd reference_attention(const Eigen::MatrixXd& qkv, const Mask& mask, std::size_t heads,
                                    std::size_t embed, MaskMode mode) {
  const Eigen::Index k = qkv.rows(), he = static_cast<Eigen::Index>(heads * embed);
  const Eigen::Index e = static_cast<Eigen::Index>(embed);
  Eigen::MatrixXd out(k, he);
  for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads); ++h) {
    const Eigen::MatrixXd q = qkv.middleCols(h * e, e);
    const Eigen::MatrixXd kk = qkv.middleCols(he + h * e, e);
    const Eigen::MatrixXd v = qkv.middleCols(2 * he + h * e, e);
    Eigen::MatrixXd s = q * kk.transpose() / std::sqrt(double(k));
    Eigen::MatrixXd a(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        if (mode == MaskMode::kMultiplicative) s(i, j) *= mask[i] * mask[j];
        a(i, j) = (mode == MaskMode::kAdditive && !mask[j]) ? 0.0 : std::exp(s(i, j));
      }
      a.row(i) /= a.row(i).sum();
    }
    out.middleCols(h * e, e) = a * v;
  }
  return out;
}

TEST(Attention, CoreMatchesReference) {
  Rng rng(9);
  const std::size_t k = 4, heads = 2, embed = 3;
  for (MaskMode mode : {MaskMode::kAdditive, MaskMode::kMultiplicative})
    for (const Mask& mask : {Mask{1, 1, 1, 1}, Mask{1, 0, 1, 0}, Mask{0, 0, 1, 0}}) {
      const auto vals = test::random_values(rng, k * 3 * heads * embed);
      const Var qkv = Var::constant({k, 3 * heads * embed}, vals);
      const Var out = masked_attention_core(qkv, mask, k, heads, embed, mode);
      Eigen::MatrixXd m(k, 3 * heads * embed);
      for (std::size_t i = 0; i < vals.size(); ++i) m(i / m.cols(), i % m.cols()) = vals[i];
      const Eigen::MatrixXd ref = reference_attention(m, mask, heads, embed, mode);
      for (std::size_t i = 0; i < out.size(); ++i)
        EXPECT_NEAR(out.data()[i], ref(i / ref.cols(), i % ref.cols()), 1e-12);
    }
  EXPECT_THROW(masked_attention_core(Var::constant({2, 3}, 1.0), Mask{0, 0}, 2, 1, 1, MaskMode::kAdditive),
               std::invalid_argument);
}

TEST(Attention, CoreGradient) {
  Rng rng(10);
  for (MaskMode mode : {MaskMode::kAdditive, MaskMode::kMultiplicative}) {
    const Mask mask{1, 0, 1, 1, 1, 1};
    Var qkv = Var::leaf({6, 12}, test::random_values(rng, 72));
    const Var r = Var::constant({6, 4}, test::random_values(rng, 24));
    auto loss = [&] { return sum(mul(masked_attention_core(qkv, mask, 3, 2, 2, mode), r)); };
    backward(loss());
    const std::vector<double> g(qkv.grad().begin(), qkv.grad().end());
    auto d = qkv.mutable_data();
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

TEST(NormalizePrecoding, Examples) {
  // Two active users, unit-norm rows, P = 1.
  std::vector<double> v{1, 0, 0, 0, 0, 1, 0, 0};
  const Var out = normalize_precoding(Var::constant({1, 1, 2, 4}, v), Mask{1, 1}, 1.0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(out.data()[i], v[i] / std::sqrt(2.0), 1e-15);

  Rng rng(11);
  const std::size_t b = 3, nc = 5, k = 3, w = 6;
  const Var r = normalize_precoding(Var::constant({b, nc, k, w}, test::random_values(rng, b * nc * k * w)),
                                    Mask{1, 0, 1, 0, 0, 1, 1, 1, 1}, 2.5);
  const Mask mask{1, 0, 1, 0, 0, 1, 1, 1, 1};
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t n = 0; n < nc; ++n) {
      double p = 0;
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t c = 0; c < w; ++c) {
          const double x = r.data()[((i * nc + n) * k + u) * w + c];
          if (!mask[i * k + u]) EXPECT_EQ(x, 0.0);
          p += x * x;
        }
      EXPECT_NEAR(p, 2.5, 1e-9);
    }
}

struct PrecoderFixture {
  SystemConfig cfg = small_config();
  Rng rng{12};
  BsPrecoderNet net{cfg, rng};
  Rng data{13};

  std::vector<double> random_codes(std::size_t b) { return test::random_values(data, b * cfg.k_max * 2 * cfg.z); }
  Var run(const std::vector<double>& codes, const Mask& mask, std::size_t b) {
    NoGradGuard guard;
    return net.forward(Var::constant({b * cfg.k_max, 2 * cfg.z}, codes), mask,
                       std::vector<double>(b, 0.1), false);
  }
};

TEST(BsPrecoder, ShapeAndPowerConstraint) {
  PrecoderFixture f;
  const Mask mask{1, 1, 0, 0, 1, 0};
  const Var v = f.run(f.random_codes(2), mask, 2);
  ASSERT_EQ(v.shape(), (Shape{2, f.cfg.nc, 3, 2 * f.cfg.nt}));
  for (std::size_t i = 0; i < 2; ++i) {
    const auto sets = precoders_to_complex(v, i);
    ASSERT_EQ(sets.size(), 3u);
    for (std::size_t n = 0; n < f.cfg.nc; ++n) {
      double p = 0;
      for (std::size_t u = 0; u < 3; ++u) p += sets[u].row(n).squaredNorm();
      EXPECT_NEAR(p, f.cfg.power, 1e-9);
    }
    for (std::size_t u = 0; u < 3; ++u)
      if (!mask[i * 3 + u]) EXPECT_EQ(sets[u].norm(), 0.0);
  }
}

TEST(BsPrecoder, InactiveUsersDoNotLeakInAdditiveMode) {
  PrecoderFixture f;
  const Mask mask{1, 0, 1};
  auto codes = f.random_codes(1);
  const Var a = f.run(codes, mask, 1);
  for (std::size_t i = 2 * f.cfg.z; i < 4 * f.cfg.z; ++i) codes[i] += 5.0 * gaussian(f.data);
  const Var b = f.run(codes, mask, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-6);
}

TEST(BsPrecoder, SingleActiveUserDependsOnlyOnItself) {
  PrecoderFixture f;
  const Mask mask{0, 1, 0};
  auto codes = f.random_codes(1);
  const Var a = f.run(codes, mask, 1);
  for (std::size_t i = 0; i < 2 * f.cfg.z; ++i) codes[i] = gaussian(f.data);
  for (std::size_t i = 4 * f.cfg.z; i < 6 * f.cfg.z; ++i) codes[i] = gaussian(f.data);
  const Var b = f.run(codes, mask, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(BsPrecoder, AllOnesMaskSameInBothModes) {
  PrecoderFixture f;
  const auto codes = f.random_codes(1);
  const Var a = f.run(codes, Mask{1, 1, 1}, 1);
  f.net.attention.mode = MaskMode::kMultiplicative;
  const Var b = f.run(codes, Mask{1, 1, 1}, 1);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(BsPrecoder, PermutationEquivariant) {
  PrecoderFixture f;
  const std::size_t k = 3, w = 2 * f.cfg.z, nc = f.cfg.nc, out_w = 2 * f.cfg.nt;
  const std::vector<std::size_t> perm{2, 0, 1};
  for (const Mask& mask : {Mask{1, 1, 1}, Mask{1, 0, 1}}) {
    const auto codes = f.random_codes(1);
    std::vector<double> permuted(codes.size());
    Mask pmask(k);
    for (std::size_t u = 0; u < k; ++u) {
      pmask[u] = mask[perm[u]];
      std::copy_n(codes.begin() + perm[u] * w, w, permuted.begin() + u * w);
    }
    const Var a = f.run(codes, mask, 1), b = f.run(permuted, pmask, 1);
    for (std::size_t n = 0; n < nc; ++n)
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t c = 0; c < out_w; ++c)
          EXPECT_NEAR(b.data()[(n * k + u) * out_w + c], a.data()[(n * k + perm[u]) * out_w + c], 1e-6);
  }
}

TEST(BsPrecoder, ParameterCountIndependentOfKmax) {
  std::set<std::size_t> counts;
  for (std::size_t k : {2, 4, 6}) {
    SystemConfig c = SystemConfig::desk();
    c.k_max = k;
    Rng rng(1);
    BsPrecoderNet net(c, rng);
    counts.insert(count_parameters(net.parameters()).total);
    const auto& wqkv = count_parameters(net.attention.parameters()).by_module;
    EXPECT_EQ(wqkv.at("wqkv"), 3 * c.heads * 2 * c.nt * c.embed);
  }
  EXPECT_EQ(counts.size(), 1u);
}

TEST(BsPrecoder, ComplexRoundTrip) {
  Rng rng(14);
  std::vector<std::vector<CMatrix>> sets{{test::random_cmatrix(rng, 3, 2), test::random_cmatrix(rng, 3, 2)}};
  const auto back = precoders_to_complex(precoders_from_complex(sets), 0);
  for (std::size_t u = 0; u < 2; ++u) EXPECT_LT((back[u] - sets[0][u]).norm(), 1e-15);
}

}  // namespace
}  // namespace jefp
