#include "jefp/channel_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>

#include "jefp/rng.hpp"

namespace jefp {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr char kMagic[4] = {'J', 'E', 'F', 'P'};

void put_u16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_f32(std::ostream& os, float f) { put_u32(os, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_clusters < 1) throw std::invalid_argument("scenario: n_clusters must be >= 1");
  if (!(rician_k >= 0.0)) throw std::invalid_argument("scenario: rician_k must be >= 0");
  if (n_subcarriers < 1 || n_tx_antennas < 1 || k_max < 1)
    throw std::invalid_argument("scenario: Nc, Nt and k_max must be >= 1");
  if (carrier_dl_hz == carrier_ul_hz)
    throw std::invalid_argument("scenario: FDD requires distinct uplink and downlink carriers");
  if (!(delay_spread_s >= 0.0) || !(bandwidth_hz > 0.0))
    throw std::invalid_argument("scenario: delay spread and bandwidth must be positive");
}

ScenarioConfig ScenarioConfig::preset(std::string_view name, std::size_t nc, std::size_t nt,
                                      std::size_t k_max) {
  ScenarioConfig s;
  s.n_subcarriers = nc;
  s.n_tx_antennas = nt;
  s.k_max = k_max;
  if (name == "uma-like") {
    s.name = "uma-like";
    s.n_clusters = 17;
    s.rician_k = 2.0;
    s.delay_spread_s = 363e-9;
    s.angle_spread_deg = 12.0;
  } else if (name == "umi-like") {
    s.name = "umi-like";
    s.n_clusters = 12;
    s.rician_k = 5.0;
    s.delay_spread_s = 130e-9;
    s.angle_spread_deg = 8.0;
  } else {
    throw std::invalid_argument("unknown scenario preset: " + std::string(name));
  }
  return s;
}

bool ChannelRealization::operator==(const ChannelRealization& o) const {
  if (seed != o.seed || scenario != o.scenario || h_dl.size() != o.h_dl.size() ||
      h_ul.size() != o.h_ul.size())
    return false;
  for (std::size_t k = 0; k < h_dl.size(); ++k)
    if (h_dl[k] != o.h_dl[k] || h_ul[k] != o.h_ul[k]) return false;
  return true;
}

ClusterSet sample_clusters(const ScenarioConfig& scenario, std::size_t user_index,
                           std::uint64_t seed) {
  scenario.validate();
  Rng rng = make_rng(seed, {kTagCluster, user_index});
  const std::size_t n = scenario.n_clusters;
  ClusterSet cs;
  const double sector = scenario.sector_deg * kPi / 180.0;
  const double mean_aod = uniform(rng, -sector, sector);
  cs.los_aod_rad = mean_aod;

  cs.delay_s.resize(n);
  for (auto& d : cs.delay_s) d = -scenario.delay_spread_s * std::log(1.0 - uniform(rng, 0.0, 1.0));
  std::sort(cs.delay_s.begin(), cs.delay_s.end());
  const double first = cs.delay_s.front();
  for (auto& d : cs.delay_s) d -= first;

  // Exponential power-delay profile with 3 dB per-cluster shadowing.
  constexpr double kDelayScaling = 2.3;
  cs.power.resize(n);
  double total = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const double decay = scenario.delay_spread_s > 0.0
                             ? std::exp(-cs.delay_s[c] * (kDelayScaling - 1.0) /
                                        (kDelayScaling * scenario.delay_spread_s))
                             : 1.0;
    cs.power[c] = decay * std::pow(10.0, -3.0 * gaussian(rng) / 10.0);
    total += cs.power[c];
  }
  for (auto& p : cs.power) p /= total;

  const double spread = scenario.angle_spread_deg * kPi / 180.0;
  cs.aod_rad.resize(n);
  for (auto& a : cs.aod_rad) a = mean_aod + uniform(rng, -spread, spread);

  Rng phase_rng = make_rng(seed, {kTagPhaseDl, user_index});
  cs.phase_rad.resize(n);
  for (auto& p : cs.phase_rad) p = uniform(phase_rng, 0.0, 2.0 * kPi);
  return cs;
}

ClusterSet with_fresh_phases(ClusterSet clusters, std::uint64_t phase_seed) {
  Rng rng(phase_seed);
  for (auto& p : clusters.phase_rad) p = uniform(rng, 0.0, 2.0 * kPi);
  return clusters;
}

std::complex<double> steering(double aod_rad, std::size_t antenna, double carrier_hz,
                              double spacing_ref_hz) {
  const double ref = spacing_ref_hz > 0.0 ? spacing_ref_hz : carrier_hz;
  const double phase = -kPi * (carrier_hz / ref) * static_cast<double>(antenna) * std::sin(aod_rad);
  return std::polar(1.0, phase);
}

double subcarrier_frequency(std::size_t n, std::size_t nc, double bandwidth_hz) {
  const double spacing = bandwidth_hz / static_cast<double>(nc);
  return (static_cast<double>(n) - static_cast<double>(nc) / 2.0) * spacing;
}

CMatrix frequency_response(const ClusterSet& clusters, double carrier_hz, std::size_t nc,
                           std::size_t nt, double bandwidth_hz, double rician_k,
                           double spacing_ref_hz) {
  const double nlos_amp = std::sqrt(1.0 / (rician_k + 1.0));
  const double los_amp = std::isinf(rician_k) ? 1.0 : std::sqrt(rician_k / (rician_k + 1.0));
  const double nlos_scale = std::isinf(rician_k) ? 0.0 : nlos_amp;
  const double tau_los =
      clusters.size() ? *std::min_element(clusters.delay_s.begin(), clusters.delay_s.end()) : 0.0;
  CMatrix h = CMatrix::Zero(static_cast<Eigen::Index>(nc), static_cast<Eigen::Index>(nt));
  for (std::size_t n = 0; n < nc; ++n) {
    const double f = subcarrier_frequency(n, nc, bandwidth_hz);
    for (std::size_t a = 0; a < nt; ++a) {
      std::complex<double> acc = 0.0;
      for (std::size_t c = 0; c < clusters.size(); ++c)
        acc += std::sqrt(clusters.power[c]) * std::polar(1.0, clusters.phase_rad[c]) *
               steering(clusters.aod_rad[c], a, carrier_hz, spacing_ref_hz) *
               std::polar(1.0, -2.0 * kPi * f * clusters.delay_s[c]);
      const std::complex<double> los = steering(clusters.los_aod_rad, a, carrier_hz, spacing_ref_hz) *
                                       std::polar(1.0, -2.0 * kPi * f * tau_los);
      h(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(a)) = nlos_scale * acc + los_amp * los;
    }
  }
  return h;
}

CMatrix normalize_unit_power(const CMatrix& h) {
  const double energy = h.squaredNorm();
  if (!(energy > 0.0)) throw std::domain_error("degenerate channel");
  return h * std::sqrt(static_cast<double>(h.size()) / energy);
}

ChannelRealization generate_realization(const ScenarioConfig& scenario, std::uint64_t seed) {
  scenario.validate();
  ChannelRealization r;
  r.seed = seed;
  r.scenario = scenario.name;
  const std::size_t nc = scenario.n_subcarriers, nt = scenario.n_tx_antennas;
  for (std::size_t k = 0; k < scenario.k_max; ++k) {
    const ClusterSet dl = sample_clusters(scenario, k, seed);
    const ClusterSet ul = with_fresh_phases(dl, derive_seed(seed, {kTagPhaseUl, k}));
    // The array is built for the downlink carrier; the uplink sees it at a
    // slightly different electrical spacing.
    r.h_dl.push_back(normalize_unit_power(frequency_response(dl, scenario.carrier_dl_hz, nc, nt,
                                                             scenario.bandwidth_hz,
                                                             scenario.rician_k,
                                                             scenario.carrier_dl_hz))
                         .cast<std::complex<float>>());
    r.h_ul.push_back(normalize_unit_power(frequency_response(ul, scenario.carrier_ul_hz, nc, nt,
                                                             scenario.bandwidth_hz,
                                                             scenario.rician_k,
                                                             scenario.carrier_dl_hz))
                         .cast<std::complex<float>>());
  }
  return r;
}

std::vector<ChannelRealization> generate_realizations(const ScenarioConfig& scenario,
                                                      std::uint64_t first_seed,
                                                      std::size_t count) {
  std::vector<ChannelRealization> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(generate_realization(scenario, first_seed + i));
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<ChannelRealization>& samples,
                   const DatasetMeta& meta) {
  for (const auto& s : samples) {
    if (s.h_dl.size() != meta.k_max || s.h_ul.size() != meta.k_max)
      throw DatasetError(DatasetError::Kind::kShapeMismatch, "shape mismatch: user count");
    for (std::size_t k = 0; k < meta.k_max; ++k)
      if (static_cast<std::size_t>(s.h_dl[k].rows()) != meta.nc ||
          static_cast<std::size_t>(s.h_dl[k].cols()) != meta.nt ||
          static_cast<std::size_t>(s.h_ul[k].rows()) != meta.nc ||
          static_cast<std::size_t>(s.h_ul[k].cols()) != meta.nt)
        throw DatasetError(DatasetError::Kind::kShapeMismatch, "shape mismatch: channel dimensions");
  }
  nlohmann::json j;
  j["scenario"] = meta.scenario;
  j["nc"] = meta.nc;
  j["nt"] = meta.nt;
  j["k_max"] = meta.k_max;
  j["count"] = samples.size();
  j["base_seed"] = meta.base_seed;
  j["split"] = meta.split;
  std::vector<std::uint64_t> seeds;
  for (const auto& s : samples) seeds.push_back(s.seed);
  j["seeds"] = seeds;
  const std::string text = j.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DatasetError(DatasetError::Kind::kIo, "cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  put_u16(os, kDatasetVersion);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& s : samples)
    for (const auto* block : {&s.h_dl, &s.h_ul})
      for (const auto& h : *block)
        for (Eigen::Index n = 0; n < h.rows(); ++n)
          for (Eigen::Index a = 0; a < h.cols(); ++a) {
            put_f32(os, h(n, a).real());
            put_f32(os, h(n, a).imag());
          }
  if (!os) throw DatasetError(DatasetError::Kind::kIo, "write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DatasetError(DatasetError::Kind::kIo, "cannot open: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw DatasetError(DatasetError::Kind::kNotDataset, "not a dataset file: " + path.string());
  if (bytes.size() < 10) throw DatasetError(DatasetError::Kind::kTruncated, "truncated file: header");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (version != kDatasetVersion)
    throw DatasetError(DatasetError::Kind::kUnsupportedVersion,
                       "unsupported version " + std::to_string(version));
  const std::uint32_t meta_len = get_u32(bytes.data() + 6);
  if (bytes.size() < 10 + static_cast<std::size_t>(meta_len))
    throw DatasetError(DatasetError::Kind::kTruncated, "truncated file: metadata");

  Dataset ds;
  try {
    const auto j = nlohmann::json::parse(bytes.begin() + 10, bytes.begin() + 10 + meta_len);
    ds.meta.scenario = j.at("scenario").get<std::string>();
    ds.meta.nc = j.at("nc").get<std::size_t>();
    ds.meta.nt = j.at("nt").get<std::size_t>();
    ds.meta.k_max = j.at("k_max").get<std::size_t>();
    ds.meta.count = j.at("count").get<std::size_t>();
    ds.meta.base_seed = j.at("base_seed").get<std::uint64_t>();
    ds.meta.split = j.value("split", std::string());
    ds.meta.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetError(DatasetError::Kind::kNotDataset, std::string("not a dataset file: bad metadata: ") + e.what());
  }
  const auto& m = ds.meta;
  if (m.seeds.size() != m.count)
    throw DatasetError(DatasetError::Kind::kShapeMismatch, "shape mismatch: seed list length");

  const std::size_t per_sample = 2 * m.k_max * m.nc * m.nt * 2 * sizeof(float);
  const std::size_t expected = per_sample * m.count;
  const std::size_t payload = bytes.size() - 10 - meta_len;
  if (payload < expected)
    throw DatasetError(DatasetError::Kind::kTruncated,
                       "truncated file: expected " + std::to_string(expected) + " payload bytes, got " +
                           std::to_string(payload));
  if (payload > expected)
    throw DatasetError(DatasetError::Kind::kShapeMismatch,
                       "shape mismatch: payload larger than declared shape");

  const unsigned char* p = bytes.data() + 10 + meta_len;
  auto next = [&p]() {
    const float f = std::bit_cast<float>(get_u32(p));
    p += 4;
    return f;
  };
  ds.samples.reserve(m.count);
  for (std::size_t i = 0; i < m.count; ++i) {
    ChannelRealization r;
    r.seed = m.seeds[i];
    r.scenario = m.scenario;
    for (auto* block : {&r.h_dl, &r.h_ul})
      for (std::size_t k = 0; k < m.k_max; ++k) {
        CMatrixF h(static_cast<Eigen::Index>(m.nc), static_cast<Eigen::Index>(m.nt));
        for (Eigen::Index n = 0; n < h.rows(); ++n)
          for (Eigen::Index a = 0; a < h.cols(); ++a) {
            const float re = next();
            const float im = next();
            h(n, a) = {re, im};
          }
        block->push_back(std::move(h));
      }
    ds.samples.push_back(std::move(r));
  }
  return ds;
}

}  // namespace jefp
