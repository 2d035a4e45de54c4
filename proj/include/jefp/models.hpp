// Trainable end-to-end models and the batch plumbing they share.
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "jefp/baselines.hpp"
#include "jefp/bs_precoder.hpp"
#include "jefp/channel_model.hpp"
#include "jefp/config.hpp"
#include "jefp/djscc_codec.hpp"
#include "jefp/objective_metrics.hpp"
#include "jefp/pilot_frontend.hpp"

namespace jefp {

// A set of samples with their user masks and per-sample noise seeds. User
// instance n = i * k + u.
struct Batch {
  std::size_t b = 0, k = 0;
  std::vector<std::vector<CMatrix>> h_dl, h_ul;  // [b][k] -> [Nc, Nt]
  std::vector<std::uint64_t> noise_seeds;        // [b]
  Mask mask;                                     // [b * k]

  std::size_t users() const { return b * k; }
};

Batch make_batch(const std::vector<ChannelRealization>& data, const std::vector<std::size_t>& idx,
                 const Mask& mask, const std::vector<std::uint64_t>& noise_seeds);

// [N, Nc, Nt, 2] (pilot pass layout) and [N, 2, Nc, Nt] (image layout).
Var channel_pilot_layout(const std::vector<std::vector<CMatrix>>& h);
Var channel_image(const std::vector<std::vector<CMatrix>>& h);
std::vector<std::vector<CMatrix>> image_to_complex(const Var& img, std::size_t k);

// CN(0, sigma_sq) per received pilot entry, [N, 2, M, L].
Var pilot_noise(const Batch& batch, std::size_t m, std::size_t l, double sigma_sq);
// y = gain * s + w^H n per latent element of every user instance.
Var apply_uplink(const Var& s, const Batch& batch, double sigma_sq, bool equalize);

// Random K-of-k_max activation for sample seeds (deterministic per seed).
Mask fixed_k_mask(std::size_t k_max, std::size_t k, std::uint64_t seed);

class Model : public Module {
 public:
  explicit Model(const SystemConfig& c) : cfg(c) {}
  virtual std::string kind() const = 0;
  // Objective to minimize. `metric` receives one value per sample (rate per
  // subcarrier for rate models, MSE per sample for reconstruction models).
  virtual Var loss(const Batch& batch, const SnrConfig& snr, bool training,
                   std::vector<double>* metric) = 0;
  // True when larger metrics are better.
  virtual bool maximizes() const = 0;

  SystemConfig cfg;
};

class JefpNet : public Model {
 public:
  JefpNet(const SystemConfig& cfg, std::uint64_t seed, bool dft_pilots = false);
  std::string kind() const override { return dft_pilots_ ? "dft-pilot" : "jefpnet"; }
  Var loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) override;
  bool maximizes() const override { return true; }
  void collect(ParamList& out, const std::string& prefix) override;

  // Precoders [B, Nc, K, 2Nt]; qam_bits > 0 quantizes latents first.
  Var forward(const Batch& batch, const SnrConfig& snr, bool training, int qam_bits = 0);
  Var encode(const Batch& batch, const SnrConfig& snr, bool training);

  PilotBook pilots;
  Encoder encoder;
  BsPrecoderNet bs;

 private:
  bool dft_pilots_ = false;
};

// Learned channel estimation stage (trained on the CE MSE).
class CeModel : public Model {
 public:
  CeModel(const SystemConfig& cfg, std::uint64_t seed);
  std::string kind() const override { return "ce"; }
  Var loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) override;
  bool maximizes() const override { return false; }
  void collect(ParamList& out, const std::string& prefix) override;

  // Estimated channels [N, 2, Nc, Nt].
  Var estimate(const Batch& batch, const SnrConfig& snr, bool training);

  CeNet net;
};

// MSE-trained CSI feedback through the uplink.
class FeedbackModel : public Model {
 public:
  FeedbackModel(const SystemConfig& cfg, std::uint64_t seed);
  std::string kind() const override { return "feedback"; }
  Var loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) override;
  bool maximizes() const override { return false; }
  void collect(ParamList& out, const std::string& prefix) override;

  // h: [N, 2, Nc, Nt] input CSI -> reconstruction of the same shape.
  Var reconstruct(const Var& h, const Batch& batch, const SnrConfig& snr, bool training);

  CsiCompressor compressor;
  CsiReconstructor reconstructor;
};

// Joint feedback and precoding from full CSI, trained with ideal CSI.
class JfpModel : public Model {
 public:
  JfpModel(const SystemConfig& cfg, std::uint64_t seed);
  std::string kind() const override { return "jfp"; }
  Var loss(const Batch& batch, const SnrConfig& snr, bool training, std::vector<double>* metric) override;
  bool maximizes() const override { return true; }
  void collect(ParamList& out, const std::string& prefix) override;

  Var forward(const Var& h, const Batch& batch, const SnrConfig& snr, bool training);

  CsiCompressor compressor;
  BsPrecoderNet bs;
};

std::unique_ptr<Model> make_model(const std::string& kind, const SystemConfig& cfg,
                                  std::uint64_t seed);

}  // namespace jefp
