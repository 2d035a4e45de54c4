#include "jefp/models.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace jefp {

Batch make_batch(const std::vector<ChannelRealization>& data, const std::vector<std::size_t>& idx,
                 const Mask& mask, const std::vector<std::uint64_t>& noise_seeds) {
  Batch batch;
  batch.b = idx.size();
  batch.k = data.at(idx.at(0)).h_dl.size();
  if (mask.size() != batch.b * batch.k || noise_seeds.size() != batch.b)
    throw std::invalid_argument("batch: mask or seed count mismatch");
  batch.mask = mask;
  batch.noise_seeds = noise_seeds;
  for (auto i : idx) {
    const auto& r = data.at(i);
    std::vector<CMatrix> dl, ul;
    for (std::size_t u = 0; u < batch.k; ++u) {
      dl.push_back(r.h_dl[u].cast<std::complex<double>>());
      ul.push_back(r.h_ul[u].cast<std::complex<double>>());
    }
    batch.h_dl.push_back(std::move(dl));
    batch.h_ul.push_back(std::move(ul));
  }
  return batch;
}

Var channel_pilot_layout(const std::vector<std::vector<CMatrix>>& h) {
  const std::size_t b = h.size(), k = h.at(0).size();
  const std::size_t nc = h[0].at(0).rows(), nt = h[0][0].cols();
  std::vector<double> v(b * k * nc * nt * 2);
  std::size_t o = 0;
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t n = 0; n < nc; ++n)
        for (std::size_t a = 0; a < nt; ++a) {
          v[o++] = h[i][u](n, a).real();
          v[o++] = h[i][u](n, a).imag();
        }
  return Var::constant({b * k, nc, nt, 2}, std::move(v));
}

Var channel_image(const std::vector<std::vector<CMatrix>>& h) {
  const std::size_t b = h.size(), k = h.at(0).size();
  const std::size_t nc = h[0].at(0).rows(), nt = h[0][0].cols();
  std::vector<double> v(b * k * 2 * nc * nt);
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t n = 0; n < nc; ++n)
        for (std::size_t a = 0; a < nt; ++a) {
          const std::size_t base = ((i * k + u) * 2 * nc + n) * nt + a;
          v[base] = h[i][u](n, a).real();
          v[base + nc * nt] = h[i][u](n, a).imag();
        }
  return Var::constant({b * k, 2, nc, nt}, std::move(v));
}

std::vector<std::vector<CMatrix>> image_to_complex(const Var& img, std::size_t k) {
  const std::size_t n = img.dim(0), nc = img.dim(2), nt = img.dim(3);
  const auto d = img.data();
  std::vector<std::vector<CMatrix>> out(n / k, std::vector<CMatrix>(k, CMatrix(nc, nt)));
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t c = 0; c < nc; ++c)
      for (std::size_t a = 0; a < nt; ++a) {
        const std::size_t base = (j * 2 * nc + c) * nt + a;
        out[j / k][j % k](c, a) = {d[base], d[base + nc * nt]};
      }
  return out;
}

Var pilot_noise(const Batch& batch, std::size_t m, std::size_t l, double sigma_sq) {
  std::vector<double> v(batch.users() * 2 * m * l, 0.0);
  if (sigma_sq > 0.0)
    for (std::size_t i = 0; i < batch.b; ++i)
      for (std::size_t u = 0; u < batch.k; ++u) {
        Rng rng = make_rng(batch.noise_seeds[i], {kTagPilotNoise, u});
        const std::size_t n = i * batch.k + u;
        for (std::size_t p = 0; p < m; ++p)
          for (std::size_t s = 0; s < l; ++s) {
            const auto z = complex_gaussian(rng, sigma_sq);
            v[((n * 2 + 0) * m + p) * l + s] = z.real();
            v[((n * 2 + 1) * m + p) * l + s] = z.imag();
          }
      }
  return Var::constant({batch.users(), 2, m, l}, std::move(v));
}

Var apply_uplink(const Var& s, const Batch& batch, double sigma_sq, bool equalize) {
  const std::size_t z = s.dim(1) / 2;
  std::vector<double> gain(s.size()), noise(s.size());
  for (std::size_t i = 0; i < batch.b; ++i)
    for (std::size_t u = 0; u < batch.k; ++u) {
      Rng rng = make_rng(batch.noise_seeds[i], {kTagUplinkNoise, u});
      const UplinkDraw d = draw_uplink(batch.h_ul[i][u], z, sigma_sq, rng);
      const std::size_t row = (i * batch.k + u) * 2 * z;
      for (std::size_t e = 0; e < z; ++e) {
        const double g = equalize ? 1.0 : d.gain[e];
        const std::complex<double> n = equalize ? d.noise[e] / d.gain[e] : d.noise[e];
        gain[row + 2 * e] = gain[row + 2 * e + 1] = g;
        noise[row + 2 * e] = n.real();
        noise[row + 2 * e + 1] = n.imag();
      }
    }
  return add_const(mul_const(s, gain), noise);
}

Mask fixed_k_mask(std::size_t k_max, std::size_t k, std::uint64_t seed) {
  if (k == 0 || k > k_max) throw std::invalid_argument("active user count out of range");
  std::vector<std::size_t> order(k_max);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, {kTagMask, k});
  std::shuffle(order.begin(), order.end(), rng);
  Mask m(k_max, 0);
  for (std::size_t i = 0; i < k; ++i) m[order[i]] = 1;
  return m;
}

namespace {

std::vector<double> per_sample_mse(const Var& h, const Var& h_hat, std::size_t k) {
  const std::size_t n = h.dim(0), per_user = h.size() / n;
  std::vector<double> out(n / k, 0.0);
  const auto a = h.data(), b = h_hat.data();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t e = 0; e < per_user; ++e) {
      const double d = a[j * per_user + e] - b[j * per_user + e];
      out[j / k] += d * d;
    }
  // Mean over the sample's complex entries.
  for (auto& x : out) x /= static_cast<double>(k * per_user / 2);
  return out;
}

}  // namespace

JefpNet::JefpNet(const SystemConfig& c, std::uint64_t seed, bool dft) : Model(c), dft_pilots_(dft) {
  cfg.validate();
  Rng rng = make_rng(seed, {kTagInit});
  pilots = dft ? dft_pilotbook(c.nc, c.g, c.nt, c.l) : PilotBook(c.nc, c.g, c.nt, c.l, rng);
  encoder = Encoder(2, c.m(), c.l, c.z, c.enc_channels, rng);
  bs = BsPrecoderNet(c, rng);
}

Var JefpNet::encode(const Batch& batch, const SnrConfig& snr, bool training) {
  const Var p = pilots.forward();
  Var y = pilot_pass(channel_pilot_layout(batch.h_dl), p, pilots.indices());
  y = add(y, pilot_noise(batch, cfg.m(), cfg.l, snr.sigma_ce_sq()));
  return encoder.forward(y, training);
}

Var JefpNet::forward(const Batch& batch, const SnrConfig& snr, bool training, int qam_bits) {
  Var s = encode(batch, snr, training);
  if (qam_bits > 0) {
    std::vector<double> q(s.data().begin(), s.data().end());
    qam_quantize_rows(q, cfg.z, qam_bits);
    s = Var::constant(s.shape(), std::move(q));
  }
  const Var s_hat = apply_uplink(s, batch, snr.sigma_u_sq(), cfg.equalize_uplink);
  return bs.forward(s_hat, batch.mask, std::vector<double>(batch.b, snr.sigma_d_sq()), training);
}

Var JefpNet::loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) {
  return rate_objective(forward(batch, snr, training), batch.h_dl, batch.mask, snr.sigma_d_sq(), metric);
}

void JefpNet::collect(ParamList& out, const std::string& prefix) {
  pilots.collect(out, join_name(prefix, "pilots"));
  encoder.collect(out, join_name(prefix, "encoder"));
  bs.collect(out, join_name(prefix, "bs"));
}

CeModel::CeModel(const SystemConfig& c, std::uint64_t seed) : Model(c) {
  cfg.validate();
  Rng rng = make_rng(seed, {kTagInit});
  net = CeNet(c, rng);
}

Var CeModel::estimate(const Batch& batch, const SnrConfig& snr, bool training) {
  const Var p = net.pilots.forward();
  Var y = pilot_pass(channel_pilot_layout(batch.h_dl), p, net.pilots.indices());
  y = add(y, pilot_noise(batch, cfg.m(), cfg.l, snr.sigma_ce_sq()));
  return net.forward(y, training);
}

Var CeModel::loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) {
  const Var h = channel_image(batch.h_dl);
  const Var h_hat = estimate(batch, snr, training);
  if (metric) *metric = per_sample_mse(h, h_hat, batch.k);
  return ce_loss(h, h_hat);
}

void CeModel::collect(ParamList& out, const std::string& prefix) {
  net.collect(out, join_name(prefix, "ce"));
}

FeedbackModel::FeedbackModel(const SystemConfig& c, std::uint64_t seed) : Model(c) {
  cfg.validate();
  Rng rng = make_rng(seed, {kTagInit});
  compressor = CsiCompressor(c, rng);
  reconstructor = CsiReconstructor(c, rng);
}

Var FeedbackModel::reconstruct(const Var& h, const Batch& batch, const SnrConfig& snr, bool training) {
  const Var s = compressor.forward(h, training);
  const Var s_hat = apply_uplink(s, batch, snr.sigma_u_sq(), cfg.equalize_uplink);
  return reconstructor.forward(s_hat, training);
}

Var FeedbackModel::loss(const Batch& batch, const SnrConfig& snr, bool training,
                        std::vector<double>* metric) {
  const Var h = channel_image(batch.h_dl);
  const Var h_hat = reconstruct(h, batch, snr, training);
  if (metric) *metric = per_sample_mse(h, h_hat, batch.k);
  return fb_loss(h, h_hat);
}

void FeedbackModel::collect(ParamList& out, const std::string& prefix) {
  compressor.collect(out, join_name(prefix, "compressor"));
  reconstructor.collect(out, join_name(prefix, "reconstructor"));
}

JfpModel::JfpModel(const SystemConfig& c, std::uint64_t seed) : Model(c) {
  cfg.validate();
  Rng rng = make_rng(seed, {kTagInit});
  compressor = CsiCompressor(c, rng);
  bs = BsPrecoderNet(c, rng);
}

Var JfpModel::forward(const Var& h, const Batch& batch, const SnrConfig& snr, bool training) {
  const Var s = compressor.forward(h, training);
  const Var s_hat = apply_uplink(s, batch, snr.sigma_u_sq(), cfg.equalize_uplink);
  return bs.forward(s_hat, batch.mask, std::vector<double>(batch.b, snr.sigma_d_sq()), training);
}

Var JfpModel::loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) {
  const Var v = forward(channel_image(batch.h_dl), batch, snr, training);
  return rate_objective(v, batch.h_dl, batch.mask, snr.sigma_d_sq(), metric);
}

void JfpModel::collect(ParamList& out, const std::string& prefix) {
  compressor.collect(out, join_name(prefix, "compressor"));
  bs.collect(out, join_name(prefix, "bs"));
}

std::unique_ptr<Model> make_model(const std::string& kind, const SystemConfig& cfg,
                                  std::uint64_t seed) {
  if (kind == "jefpnet") return std::make_unique<JefpNet>(cfg, seed, false);
  if (kind == "dft-pilot") return std::make_unique<JefpNet>(cfg, seed, true);
  if (kind == "ce") return std::make_unique<CeModel>(cfg, seed);
  if (kind == "feedback") return std::make_unique<FeedbackModel>(cfg, seed);
  if (kind == "jfp") return std::make_unique<JfpModel>(cfg, seed);
  throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace jefp
