// Base-station network: feedback decoding, residual feature extraction,
// frequency upsampling, and masked multi-head attention precoding.
//
// Layouts. Per-user feature maps are [N, C, Nc, Nt] with N = B * K_max and
// row n = b * K_max + k. Precoders are [B, Nc, K_max, 2Nt] where each row
// holds the real parts of v then the imaginary parts.
#pragma once

#include <cstdint>
#include <vector>

#include "jefp/channel_model.hpp"
#include "jefp/config.hpp"
#include "jefp/nn.hpp"

namespace jefp {

// One entry per user slot, 1 = active.
using Mask = std::vector<std::uint8_t>;

std::size_t active_count(const Mask& mask);

// Number of stride-s1 transposed convolutions taking m to nc (s1^I = nc/m).
std::size_t upsample_layers(std::size_t m, std::size_t nc, std::size_t s1);
ConvGeometry upsample_geometry(std::size_t s1);

class ResidualBlock : public Module {
 public:
  ResidualBlock() = default;
  ResidualBlock(std::size_t channels, Rng& rng);
  Var forward(const Var& x, bool training);
  void collect(ParamList& out, const std::string& prefix) override;

  Conv2d conv1, conv2;
  BatchNorm bn1, bn2;
};

// [N, in_ch, M, Nt] -> [N, 2, Nc, Nt]
class BsFeatureNet : public Module {
 public:
  BsFeatureNet() = default;
  BsFeatureNet(std::size_t in_ch, std::size_t channels, std::size_t blocks, std::size_t m,
               std::size_t nc, std::size_t s1, Rng& rng);

  // 1x1 stem to `channels` maps, then residual blocks. Keeps [M, Nt].
  Var extract_features(const Var& x, bool training);
  Var reconstruct_dimension(const Var& f, bool training);
  Var forward(const Var& x, bool training) {
    return reconstruct_dimension(extract_features(x, training), training);
  }
  void collect(ParamList& out, const std::string& prefix) override;

  std::size_t num_upsample_layers() const { return ups_.size(); }
  std::vector<ResidualBlock>& blocks() { return blocks_; }

 private:
  Conv2d stem_;
  std::vector<ResidualBlock> blocks_;
  std::vector<ConvTranspose2d> ups_;
  std::vector<BatchNorm> up_bns_;
  Conv2d out_;
};

// log10(sigma_d^2) -> FC(1, E) -> LReLU -> FC(E, E)
class NoiseEmbedding : public Module {
 public:
  NoiseEmbedding() = default;
  NoiseEmbedding(std::size_t embed, Rng& rng);
  // One row per entry of sigma_sq.
  Var forward(const std::vector<double>& sigma_sq) const;
  void collect(ParamList& out, const std::string& prefix) override;

 private:
  Linear fc1_, fc2_;
};

// Softmax attention within consecutive groups of k rows. qkv is [R, 3HE]
// (all heads' queries, then keys, then values); returns [R, HE]. Logits are
// scaled by 1/sqrt(k). `mask` has one entry per row.
Var masked_attention_core(const Var& qkv, const Mask& mask, std::size_t k, std::size_t heads,
                          std::size_t embed, MaskMode mode);

class AttentionPrecoder : public Module {
 public:
  AttentionPrecoder() = default;
  AttentionPrecoder(std::size_t nt, std::size_t embed, std::size_t heads, MaskMode mode, Rng& rng);

  // x: [G * k, 2Nt]; e: [G * k, E] noise embedding per row. Returns
  // [G * k, 2Nt] with inactive rows zeroed (not yet power normalized).
  Var forward(const Var& x, const Mask& mask, std::size_t k, const Var& e) const;
  void collect(ParamList& out, const std::string& prefix) override;

  MaskMode mode;

 private:
  std::size_t nt_ = 0, embed_ = 0, heads_ = 0;
  Linear in_proj_;
  Parameter wqkv_;  // [2Nt, 3HE], no bias
  Linear out_proj_, fc1_, fc2_;
};

// Zeroes inactive rows of v [B, Nc, K, 2Nt] and scales each subcarrier's
// active rows to total power P. mask is [B * K].
Var normalize_precoding(const Var& v, const Mask& mask, double power);

class BsPrecoderNet : public Module {
 public:
  BsPrecoderNet() = default;
  BsPrecoderNet(const SystemConfig& cfg, Rng& rng);

  // [N, 2Z] -> [N, 2, M, Nt]
  Var decode_front(const Var& s_hat) const;
  // s_hat [B * K, 2Z], mask [B * K], one sigma_d^2 per batch element.
  Var forward(const Var& s_hat, const Mask& mask, const std::vector<double>& sigma_d_sq,
              bool training);
  // Same from per-user feature maps [B * K, 2, Nc, Nt].
  Var precode(const Var& features, const Mask& mask, const std::vector<double>& sigma_d_sq);
  void collect(ParamList& out, const std::string& prefix) override;

  SystemConfig cfg;
  Linear front;
  BsFeatureNet features;
  NoiseEmbedding noise;
  AttentionPrecoder attention;
};

// Complex view of sample b of a precoder tensor: K matrices [Nc, Nt].
std::vector<CMatrix> precoders_to_complex(const Var& v, std::size_t b);
// Inverse for a batch of K-user precoder sets.
Var precoders_from_complex(const std::vector<std::vector<CMatrix>>& sets);

}  // namespace jefp
