#include "jefp/config.hpp"

#include <stdexcept>

namespace jefp {

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "additive") return MaskMode::kAdditive;
  if (s == "multiplicative") return MaskMode::kMultiplicative;
  throw std::invalid_argument("unknown mask_mode: " + s);
}

std::string to_string(MaskMode m) {
  return m == MaskMode::kAdditive ? "additive" : "multiplicative";
}

void SystemConfig::validate() const {
  if (nc == 0 || nt == 0 || l == 0 || z == 0 || k_max == 0)
    throw std::invalid_argument("system: dimensions must be positive");
  if (g == 0 || m() == 0) throw std::invalid_argument("system: pilot spacing leaves no pilots");
  if (z > nc) throw std::invalid_argument("feedback exceeds subcarriers");
  if (!(power > 0.0)) throw std::invalid_argument("system: power budget must be positive");
  if (heads == 0 || embed == 0) throw std::invalid_argument("system: attention sizes must be positive");
}

SystemConfig SystemConfig::desk() { return SystemConfig{}; }

SystemConfig SystemConfig::full() {
  SystemConfig c;
  c.nc = 96;
  c.nt = 32;
  c.g = 4;
  c.l = 6;
  c.z = 32;
  c.k_max = 6;
  c.embed = 256;
  c.heads = 4;
  return c;
}

SystemConfig SystemConfig::tiny() {
  SystemConfig c;
  c.nc = 4;
  c.nt = 2;
  c.g = 2;
  c.l = 2;
  c.z = 2;
  c.k_max = 2;
  c.enc_channels = 4;
  c.bs_channels = 4;
  c.res_blocks = 1;
  c.embed = 8;
  c.heads = 2;
  return c;
}

}  // namespace jefp

namespace jefp {

void to_json(nlohmann::json& j, const SystemConfig& c) {
  j = nlohmann::json{{"nc", c.nc},
                     {"nt", c.nt},
                     {"g", c.g},
                     {"l", c.l},
                     {"z", c.z},
                     {"k_max", c.k_max},
                     {"power", c.power},
                     {"enc_channels", c.enc_channels},
                     {"bs_channels", c.bs_channels},
                     {"res_blocks", c.res_blocks},
                     {"s1", c.s1},
                     {"embed", c.embed},
                     {"heads", c.heads},
                     {"mask_mode", to_string(c.mask_mode)},
                     {"equalize_uplink", c.equalize_uplink}};
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("nc", c.nc);
  get("nt", c.nt);
  get("g", c.g);
  get("l", c.l);
  get("z", c.z);
  get("k_max", c.k_max);
  get("power", c.power);
  get("enc_channels", c.enc_channels);
  get("bs_channels", c.bs_channels);
  get("res_blocks", c.res_blocks);
  get("s1", c.s1);
  get("embed", c.embed);
  get("heads", c.heads);
  if (j.contains("mask_mode")) c.mask_mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
  if (j.contains("equalize_uplink")) {
    // Accept a bool or "on"/"off".
    const auto& e = j.at("equalize_uplink");
    c.equalize_uplink = e.is_string() ? e.get<std::string>() == "on" : e.get<bool>();
  }
}

}  // namespace jefp
