// Clustered Rician MIMO-OFDM channel generator and the binary dataset format.
//
// A user's channel is a sum of NLOS clusters plus a LOS ray seen by a
// half-wavelength uniform linear array at the base station:
//
//   H[n, a] = sqrt(1/(K+1)) * sum_c sqrt(p_c) e^{j phi_c} steer(theta_c, a) e^{-j 2 pi f_n tau_c}
//           + sqrt(K/(K+1)) * steer(theta_los, a) e^{-j 2 pi f_n tau_1}
//
// Uplink and downlink of a user share delays, powers and angles but draw
// their cluster phases independently (FDD, weak reciprocity).
#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace jefp {

using CMatrix = Eigen::MatrixXcd;
using CMatrixF = Eigen::MatrixXcf;

struct ScenarioConfig {
  std::string name = "uma-like";
  std::size_t n_clusters = 17;
  double rician_k = 2.0;
  double delay_spread_s = 363e-9;
  double angle_spread_deg = 12.0;
  double carrier_dl_hz = 1.9e9;
  double carrier_ul_hz = 2.1e9;
  double bandwidth_hz = 1e7;
  std::size_t n_subcarriers = 24;
  std::size_t n_tx_antennas = 8;
  std::size_t k_max = 2;
  // Users' mean departure angles are drawn uniformly in +-sector_deg.
  double sector_deg = 60.0;

  void validate() const;
  // "uma-like" or "umi-like" with the given system dimensions.
  static ScenarioConfig preset(std::string_view name, std::size_t nc, std::size_t nt,
                               std::size_t k_max);
};

struct ClusterSet {
  std::vector<double> delay_s;
  std::vector<double> power;  // sums to one
  std::vector<double> aod_rad;
  std::vector<double> phase_rad;
  double los_aod_rad = 0.0;

  std::size_t size() const { return delay_s.size(); }
};

struct ChannelRealization {
  std::vector<CMatrixF> h_dl;  // k_max x [Nc, Nt]
  std::vector<CMatrixF> h_ul;
  std::uint64_t seed = 0;
  std::string scenario;

  bool operator==(const ChannelRealization& o) const;
};

ClusterSet sample_clusters(const ScenarioConfig& scenario, std::size_t user_index,
                           std::uint64_t seed);

// Same geometry with phases redrawn from `phase_seed`.
ClusterSet with_fresh_phases(ClusterSet clusters, std::uint64_t phase_seed);

// Half-wavelength ULA response; `spacing_ref_hz` fixes the physical element
// spacing (lambda/2 at that frequency). Zero means "at carrier_hz".
std::complex<double> steering(double aod_rad, std::size_t antenna, double carrier_hz,
                              double spacing_ref_hz = 0.0);

// Baseband frequency of subcarrier n on an Nc-point grid centred on DC.
double subcarrier_frequency(std::size_t n, std::size_t nc, double bandwidth_hz);

CMatrix frequency_response(const ClusterSet& clusters, double carrier_hz, std::size_t nc,
                           std::size_t nt, double bandwidth_hz, double rician_k,
                           double spacing_ref_hz = 0.0);

// Scales H so the mean squared entry magnitude is exactly one.
CMatrix normalize_unit_power(const CMatrix& h);

ChannelRealization generate_realization(const ScenarioConfig& scenario, std::uint64_t seed);

// Realizations for seeds first_seed .. first_seed + count - 1.
std::vector<ChannelRealization> generate_realizations(const ScenarioConfig& scenario,
                                                      std::uint64_t first_seed,
                                                      std::size_t count);

// ---------------------------------------------------------------------------
// Dataset file: "JEFP" | u16 version | u32 metadata length | metadata (JSON
// text) | samples. Each sample stores interleaved re/im float32 LE in order
// [user][subcarrier][antenna], downlink block then uplink block.

inline constexpr std::uint16_t kDatasetVersion = 1;

struct DatasetMeta {
  std::string scenario;
  std::size_t nc = 0, nt = 0, k_max = 0;
  std::size_t count = 0;
  std::uint64_t base_seed = 0;
  std::string split;
  std::vector<std::uint64_t> seeds;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<ChannelRealization> samples;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { kIo, kNotDataset, kUnsupportedVersion, kShapeMismatch, kTruncated };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

void write_dataset(const std::filesystem::path& path, const std::vector<ChannelRealization>& samples,
                   const DatasetMeta& meta);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace jefp
