// System dimensions and network hyper-parameters shared by every model.
#pragma once

#include <cstddef>
#include <string>

namespace jefp {

enum class MaskMode { kAdditive, kMultiplicative };

MaskMode parse_mask_mode(const std::string& s);
std::string to_string(MaskMode m);

struct SystemConfig {
  std::size_t nc = 24;     // subcarriers
  std::size_t nt = 8;      // BS antennas
  std::size_t g = 4;       // pilot spacing
  std::size_t l = 4;       // pilot OFDM symbols
  std::size_t z = 8;       // complex feedback symbols per user
  std::size_t k_max = 2;
  double power = 1.0;      // per-subcarrier precoding budget

  std::size_t enc_channels = 16;
  std::size_t bs_channels = 16;
  std::size_t res_blocks = 2;
  std::size_t s1 = 2;      // frequency upsampling stride
  std::size_t embed = 64;  // attention width E
  std::size_t heads = 2;
  MaskMode mask_mode = MaskMode::kAdditive;
  bool equalize_uplink = false;

  std::size_t m() const { return nc / g; }
  void validate() const;

  static SystemConfig desk();
  static SystemConfig full();
  // Gradient-check size.
  static SystemConfig tiny();
};

}  // namespace jefp

#include <nlohmann/json.hpp>

namespace jefp {

void to_json(nlohmann::json& j, const SystemConfig& c);
// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, SystemConfig& c);

}  // namespace jefp
