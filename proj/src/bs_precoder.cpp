#include "jefp/bs_precoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace jefp {

std::size_t active_count(const Mask& mask) {
  std::size_t n = 0;
  for (auto m : mask) n += m ? 1 : 0;
  return n;
}

std::size_t upsample_layers(std::size_t m, std::size_t nc, std::size_t s1) {
  if (m == 0 || nc % m != 0)
    throw std::invalid_argument("configuration error: Nc=" + std::to_string(nc) +
                                " is not a multiple of M=" + std::to_string(m));
  std::size_t factor = nc / m;
  if (factor == 1) return 0;
  if (s1 < 2)
    throw std::invalid_argument("configuration error: stride 1 cannot upsample M=" +
                                std::to_string(m) + " to Nc=" + std::to_string(nc));
  std::size_t layers = 0;
  while (factor > 1) {
    if (factor % s1 != 0)
      throw std::invalid_argument("configuration error: Nc/M=" + std::to_string(nc / m) +
                                  " is not a power of S1=" + std::to_string(s1));
    factor /= s1;
    ++layers;
  }
  return layers;
}

ConvGeometry upsample_geometry(std::size_t s1) {
  ConvGeometry g;
  g.stride_h = s1;
  if (s1 % 2 == 0) {
    g.kernel_h = 2 * s1;
    g.pad_h = s1 / 2;
  } else {
    g.kernel_h = s1;
    g.pad_h = 0;
  }
  return g;
}

ResidualBlock::ResidualBlock(std::size_t channels, Rng& rng)
    : conv1(channels, channels, ConvGeometry{}, rng),
      conv2(channels, channels, ConvGeometry{}, rng),
      bn1(channels),
      bn2(channels) {}

Var ResidualBlock::forward(const Var& x, bool training) {
  Var h = leaky_relu(bn1.forward(conv1.forward(x), training), kLeakySlope);
  h = bn2.forward(conv2.forward(h), training);
  return add(x, h);
}

void ResidualBlock::collect(ParamList& out, const std::string& prefix) {
  conv1.collect(out, join_name(prefix, "conv1"));
  bn1.collect(out, join_name(prefix, "bn1"));
  conv2.collect(out, join_name(prefix, "conv2"));
  bn2.collect(out, join_name(prefix, "bn2"));
}

BsFeatureNet::BsFeatureNet(std::size_t in_ch, std::size_t channels, std::size_t blocks,
                           std::size_t m, std::size_t nc, std::size_t s1, Rng& rng) {
  ConvGeometry one;
  one.kernel_h = one.kernel_w = 1;
  one.pad_h = one.pad_w = 0;
  stem_ = Conv2d(in_ch, channels, one, rng);
  blocks_.reserve(blocks);
  for (std::size_t i = 0; i < blocks; ++i) blocks_.emplace_back(channels, rng);
  const std::size_t layers = upsample_layers(m, nc, s1);
  ups_.reserve(layers);
  up_bns_.reserve(layers);
  for (std::size_t i = 0; i < layers; ++i) {
    ups_.emplace_back(channels, channels, upsample_geometry(s1), rng);
    up_bns_.emplace_back(channels);
  }
  out_ = Conv2d(channels, 2, ConvGeometry{}, rng);
}

Var BsFeatureNet::extract_features(const Var& x, bool training) {
  Var h = stem_.forward(x);
  for (auto& b : blocks_) h = b.forward(h, training);
  return h;
}

Var BsFeatureNet::reconstruct_dimension(const Var& f, bool training) {
  Var h = f;
  for (std::size_t i = 0; i < ups_.size(); ++i)
    h = leaky_relu(up_bns_[i].forward(ups_[i].forward(h), training), kLeakySlope);
  return out_.forward(h);
}

void BsFeatureNet::collect(ParamList& out, const std::string& prefix) {
  stem_.collect(out, join_name(prefix, "stem"));
  for (std::size_t i = 0; i < blocks_.size(); ++i)
    blocks_[i].collect(out, join_name(prefix, "block" + std::to_string(i)));
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    ups_[i].collect(out, join_name(prefix, "up" + std::to_string(i)));
    up_bns_[i].collect(out, join_name(prefix, "up_bn" + std::to_string(i)));
  }
  out_.collect(out, join_name(prefix, "out"));
}

NoiseEmbedding::NoiseEmbedding(std::size_t embed, Rng& rng)
    : fc1_(1, embed, true, rng), fc2_(embed, embed, true, rng) {}

Var NoiseEmbedding::forward(const std::vector<double>& sigma_sq) const {
  std::vector<double> x;
  for (double s : sigma_sq) {
    if (!(s > 0.0)) throw std::invalid_argument("noise power must be positive");
    x.push_back(std::log10(s));
  }
  const Var in = Var::constant({sigma_sq.size(), 1}, std::move(x));
  return fc2_.forward(leaky_relu(fc1_.forward(in), kLeakySlope));
}

void NoiseEmbedding::collect(ParamList& out, const std::string& prefix) {
  fc1_.collect(out, join_name(prefix, "fc1"));
  fc2_.collect(out, join_name(prefix, "fc2"));
}

Var masked_attention_core(const Var& qkv, const Mask& mask, std::size_t k, std::size_t heads,
                          std::size_t embed, MaskMode mode) {
  const std::size_t rows = qkv.dim(0), width = qkv.dim(1), he = heads * embed;
  if (width != 3 * he) throw std::invalid_argument("attention: qkv width mismatch");
  if (rows % k != 0 || mask.size() != rows)
    throw std::invalid_argument("attention: rows must be whole groups with one mask entry each");
  const std::size_t groups = rows / k;
  for (std::size_t g = 0; g < groups; ++g) {
    bool any = false;
    for (std::size_t i = 0; i < k; ++i) any = any || mask[g * k + i];
    if (!any) throw std::invalid_argument("no active users");
  }
  const double inv = 1.0 / std::sqrt(static_cast<double>(k));
  const auto d = qkv.data();
  auto q_at = [&d, width, embed](std::size_t r, std::size_t h, std::size_t e) {
    return d[r * width + h * embed + e];
  };
  auto k_at = [&d, width, embed, he](std::size_t r, std::size_t h, std::size_t e) {
    return d[r * width + he + h * embed + e];
  };
  auto v_at = [&d, width, embed, he](std::size_t r, std::size_t h, std::size_t e) {
    return d[r * width + 2 * he + h * embed + e];
  };

  // Attention weights [group][head][i][j].
  auto weights = std::make_shared<std::vector<double>>(groups * heads * k * k);
  Buffer out(rows * he, 0.0);
  std::vector<double> s(k);
  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t r0 = g * k;
    for (std::size_t h = 0; h < heads; ++h) {
      double* a = weights->data() + (g * heads + h) * k * k;
      for (std::size_t i = 0; i < k; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
          double dot = 0.0;
          for (std::size_t e = 0; e < embed; ++e) dot += q_at(r0 + i, h, e) * k_at(r0 + j, h, e);
          dot *= inv;
          if (mode == MaskMode::kMultiplicative)
            dot *= static_cast<double>(mask[r0 + i] * mask[r0 + j]);
          else if (!mask[r0 + j])
            dot = -std::numeric_limits<double>::infinity();
          s[j] = dot;
          mx = std::max(mx, dot);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          a[i * k + j] = std::isinf(s[j]) ? 0.0 : std::exp(s[j] - mx);
          z += a[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) a[i * k + j] /= z;
        for (std::size_t j = 0; j < k; ++j) {
          const double w = a[i * k + j];
          if (w == 0.0) continue;
          for (std::size_t e = 0; e < embed; ++e)
            out[(r0 + i) * he + h * embed + e] += w * v_at(r0 + j, h, e);
        }
      }
    }
  }

  return make_result({rows, he}, std::move(out), {qkv},
                     [qkv, mask, weights, groups, k, heads, embed, he, width, inv, mode](Node& o) {
                       const auto& x = qkv.get()->value;
                       double* gx = qkv.get()->grad_data();
                       std::vector<double> da(k * k), ds(k * k);
                       for (std::size_t g = 0; g < groups; ++g) {
                         const std::size_t r0 = g * k;
                         for (std::size_t h = 0; h < heads; ++h) {
                           const double* a = weights->data() + (g * heads + h) * k * k;
                           const std::size_t qo = h * embed, ko = he + h * embed, vo = 2 * he + h * embed;
                           for (std::size_t i = 0; i < k; ++i)
                             for (std::size_t j = 0; j < k; ++j) {
                               double acc = 0.0;
                               for (std::size_t e = 0; e < embed; ++e)
                                 acc += o.grad[(r0 + i) * he + h * embed + e] * x[(r0 + j) * width + vo + e];
                               da[i * k + j] = acc;
                               const double w = a[i * k + j];
                               if (w != 0.0)
                                 for (std::size_t e = 0; e < embed; ++e)
                                   gx[(r0 + j) * width + vo + e] += w * o.grad[(r0 + i) * he + h * embed + e];
                             }
                           for (std::size_t i = 0; i < k; ++i) {
                             double dot = 0.0;
                             for (std::size_t j = 0; j < k; ++j) dot += a[i * k + j] * da[i * k + j];
                             for (std::size_t j = 0; j < k; ++j) {
                               double v = a[i * k + j] * (da[i * k + j] - dot);
                               if (mode == MaskMode::kMultiplicative)
                                 v *= static_cast<double>(mask[r0 + i] * mask[r0 + j]);
                               ds[i * k + j] = v * inv;
                             }
                           }
                           for (std::size_t i = 0; i < k; ++i)
                             for (std::size_t j = 0; j < k; ++j) {
                               const double v = ds[i * k + j];
                               if (v == 0.0) continue;
                               for (std::size_t e = 0; e < embed; ++e) {
                                 gx[(r0 + i) * width + qo + e] += v * x[(r0 + j) * width + ko + e];
                                 gx[(r0 + j) * width + ko + e] += v * x[(r0 + i) * width + qo + e];
                               }
                             }
                         }
                       }
                     });
}

AttentionPrecoder::AttentionPrecoder(std::size_t nt, std::size_t embed, std::size_t heads,
                                     MaskMode m, Rng& rng)
    : mode(m),
      nt_(nt),
      embed_(embed),
      heads_(heads),
      in_proj_(2 * nt, embed, true, rng),
      out_proj_(heads * embed, embed, true, rng),
      fc1_(embed, embed, true, rng),
      fc2_(embed, 2 * nt, true, rng) {
  auto w = he_normal(2 * nt * 3 * heads * embed, 2 * nt, rng);
  wqkv_ = Parameter({2 * nt, 3 * heads * embed}, std::move(w));
}

Var AttentionPrecoder::forward(const Var& x, const Mask& mask, std::size_t k, const Var& e) const {
  if (x.shape().size() != 2 || x.dim(1) != 2 * nt_)
    throw std::invalid_argument("attention input must be [rows, 2Nt], got " + shape_str(x.shape()));
  const Var qkv = linear(x, wqkv_.var, Var());
  const Var att = out_proj_.forward(masked_attention_core(qkv, mask, k, heads_, embed_, mode));
  const Var mixed = add(add(att, in_proj_.forward(x)), e);
  const Var y = fc2_.forward(leaky_relu(fc1_.forward(mixed), kLeakySlope));
  std::vector<double> keep(y.size());
  for (std::size_t r = 0; r < x.dim(0); ++r)
    for (std::size_t c = 0; c < 2 * nt_; ++c) keep[r * 2 * nt_ + c] = mask[r] ? 1.0 : 0.0;
  return mul_const(y, keep);
}

void AttentionPrecoder::collect(ParamList& out, const std::string& prefix) {
  in_proj_.collect(out, join_name(prefix, "in_proj"));
  out.push_back({join_name(prefix, "wqkv"), &wqkv_});
  out_proj_.collect(out, join_name(prefix, "out_proj"));
  fc1_.collect(out, join_name(prefix, "fc1"));
  fc2_.collect(out, join_name(prefix, "fc2"));
}

Var normalize_precoding(const Var& v, const Mask& mask, double power) {
  if (v.shape().size() != 4) throw std::invalid_argument("precoders must be [B, Nc, K, 2Nt]");
  const std::size_t b = v.dim(0), nc = v.dim(1), k = v.dim(2), w = v.dim(3);
  if (mask.size() != b * k) throw std::invalid_argument("mask does not match precoder batch");
  std::vector<double> keep(v.size());
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t n = 0; n < nc; ++n)
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t c = 0; c < w; ++c)
          keep[((i * nc + n) * k + u) * w + c] = mask[i * k + u] ? 1.0 : 0.0;
  return group_power_normalize(mul_const(v, keep), k * w, power, "degenerate precoder");
}

BsPrecoderNet::BsPrecoderNet(const SystemConfig& c, Rng& rng)
    : cfg(c),
      front(2 * c.z, 2 * c.m() * c.nt, true, rng),
      features(2, c.bs_channels, c.res_blocks, c.m(), c.nc, c.s1, rng),
      noise(c.embed, rng),
      attention(c.nt, c.embed, c.heads, c.mask_mode, rng) {}

Var BsPrecoderNet::decode_front(const Var& s_hat) const {
  if (s_hat.shape().size() != 2 || s_hat.dim(1) != 2 * cfg.z)
    throw std::invalid_argument("detected code must be [N, 2Z], got " + shape_str(s_hat.shape()));
  return reshape(front.forward(s_hat), {s_hat.dim(0), 2, cfg.m(), cfg.nt});
}

Var BsPrecoderNet::forward(const Var& s_hat, const Mask& mask, const std::vector<double>& sigma_d_sq,
                           bool training) {
  return precode(features.forward(decode_front(s_hat), training), mask, sigma_d_sq);
}

Var BsPrecoderNet::precode(const Var& feat, const Mask& mask, const std::vector<double>& sigma_d_sq) {
  const std::size_t k = cfg.k_max, nc = cfg.nc, nt = cfg.nt;
  const std::size_t n = feat.dim(0);
  if (n % k != 0 || mask.size() != n || sigma_d_sq.size() != n / k)
    throw std::invalid_argument("precoder batch, mask and noise sizes disagree");
  const std::size_t b = n / k;
  // [B, K, 2, Nc, Nt] -> [B, Nc, K, 2, Nt]
  const Var x = reshape(permute(reshape(feat, {b, k, 2, nc, nt}), {0, 3, 1, 2, 4}),
                        {b * nc * k, 2 * nt});
  Mask row_mask(b * nc * k);
  std::vector<std::size_t> row_batch(b * nc * k);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t u = 0; u < k; ++u) {
        row_mask[(i * nc + c) * k + u] = mask[i * k + u];
        row_batch[(i * nc + c) * k + u] = i;
      }
  const Var e = gather_rows(noise.forward(sigma_d_sq), row_batch);
  const Var y = attention.forward(x, row_mask, k, e);
  return normalize_precoding(reshape(y, {b, nc, k, 2 * nt}), mask, cfg.power);
}

void BsPrecoderNet::collect(ParamList& out, const std::string& prefix) {
  front.collect(out, join_name(prefix, "front"));
  features.collect(out, join_name(prefix, "features"));
  noise.collect(out, join_name(prefix, "noise"));
  attention.collect(out, join_name(prefix, "attention"));
}

std::vector<CMatrix> precoders_to_complex(const Var& v, std::size_t b) {
  const std::size_t nc = v.dim(1), k = v.dim(2), nt = v.dim(3) / 2;
  const auto d = v.data();
  std::vector<CMatrix> out(k, CMatrix(nc, nt));
  for (std::size_t n = 0; n < nc; ++n)
    for (std::size_t u = 0; u < k; ++u) {
      const std::size_t o = ((b * nc + n) * k + u) * 2 * nt;
      for (std::size_t a = 0; a < nt; ++a) out[u](n, a) = {d[o + a], d[o + nt + a]};
    }
  return out;
}

Var precoders_from_complex(const std::vector<std::vector<CMatrix>>& sets) {
  const std::size_t b = sets.size(), k = sets.at(0).size();
  const std::size_t nc = sets[0].at(0).rows(), nt = sets[0][0].cols();
  std::vector<double> v(b * nc * k * 2 * nt);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t n = 0; n < nc; ++n)
      for (std::size_t u = 0; u < k; ++u) {
        const std::size_t o = ((i * nc + n) * k + u) * 2 * nt;
        for (std::size_t a = 0; a < nt; ++a) {
          v[o + a] = sets[i][u](n, a).real();
          v[o + nt + a] = sets[i][u](n, a).imag();
        }
      }
  return Var::constant({b, nc, k, 2 * nt}, std::move(v));
}

}  // namespace jefp
