// Experiment configuration, pipeline evaluation, and the command
// implementations behind the CLI.
#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jefp/training.hpp"

namespace jefp {

struct DataSplits {
  std::size_t train = 4000, val = 500, test = 500;
  std::uint64_t base_seed = 1;
};

struct ExperimentConfig {
  ScenarioConfig scenario;
  SystemConfig system;
  std::vector<double> snr_ce_db{10.0};
  std::vector<double> snr_u_db{-10.0, 0.0, 10.0};
  std::vector<double> snr_d_db{10.0};
  std::vector<std::size_t> k_values;  // empty: 1..k_max
  std::vector<std::string> pipelines{"jefpnet", "mmse", "svd-wf"};
  TrainConfig train;
  DataSplits data;
  std::filesystem::path data_dir;    // where gen-data writes and others read
  std::filesystem::path output_dir;
  std::map<std::string, std::filesystem::path> checkpoints;  // model kind -> file
  std::uint64_t eval_seed = 7;
  std::size_t eval_batch = 64;

  void validate() const;
  // Scenario dimensions follow the system block.
  ScenarioConfig scenario_for_system() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

// Models used by the evaluation pipelines; null when not loaded.
struct ModelSet {
  std::shared_ptr<JefpNet> jefpnet, dft;
  std::shared_ptr<CeModel> ce;
  std::shared_ptr<FeedbackModel> feedback;
  std::shared_ptr<JfpModel> jfp;

  void add(std::unique_ptr<Model> m);
};

// Models each pipeline needs, e.g. "mmse" -> {"ce", "feedback"}.
std::vector<std::string> pipeline_requirements(const std::string& pipeline);
bool is_known_pipeline(const std::string& pipeline);

struct PipelineResult {
  std::vector<double> rate;  // per sample, bps/Hz per subcarrier
  std::vector<double> rate_total;
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
};

// Evaluates `pipeline` on `data` with exactly `k_active` users per sample.
// Masks and noise derive from (sample seed, eval_seed), so different
// pipelines see identical draws.
PipelineResult run_pipeline(const std::string& pipeline, const ModelSet& models,
                            const std::vector<ChannelRealization>& data, const SnrConfig& snr,
                            std::size_t k_active, std::uint64_t eval_seed, std::size_t batch_size = 64);

// Fraction of paired bootstrap resamples in which mean(a - b) > 0.
double paired_bootstrap_confidence(const std::vector<double>& a, const std::vector<double>& b,
                                   std::size_t resamples, std::uint64_t seed);

struct ResultRow {
  std::string pipeline;
  std::size_t k = 0;
  double snr_ce_db = 0, snr_u_db = 0, snr_d_db = 0;
  int bits = 0;
  double r_total = 0, r_per_subcarrier = 0;
  double nmse_db = std::numeric_limits<double>::quiet_NaN();
  std::size_t n_samples = 0;
};

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows, const std::string& hash,
                    std::uint64_t eval_seed);

// Thread count from JEFP_THREADS (default 1).
std::size_t thread_count();

// ----- commands ------------------------------------------------------------

struct GenDataResult {
  std::filesystem::path train, val, test, manifest;
};
GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, bool force);

struct LoadedSplits {
  Dataset train, val, test;
};
LoadedSplits load_splits(const std::filesystem::path& data_dir);

// Trains `kind` and writes best.ckpt, last.ckpt and history.csv to out_dir.
TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& kind,
                      const std::filesystem::path& out_dir, const std::filesystem::path& resume = {},
                      bool verbose = false);

std::vector<ResultRow> cmd_eval(const ExperimentConfig& cfg, const ModelSet& models,
                                const std::vector<ChannelRealization>& test);

struct ShiftCell {
  std::string train_scenario, test_scenario;
  std::size_t k = 0;
  double snr_u_db = 0;
  double r_per_subcarrier = 0;
};
// Evaluates each JEFPNet checkpoint on each scenario's test split.
std::vector<ShiftCell> cmd_shift(const ExperimentConfig& cfg, const std::filesystem::path& ckpt_a,
                                 const std::filesystem::path& ckpt_b,
                                 const std::filesystem::path& data_a,
                                 const std::filesystem::path& data_b);

struct SummaryReport {
  std::map<std::string, std::size_t> modules;  // "<side>/<model>/<module>" -> count
  std::size_t ue_jefpnet = 0;
  std::size_t ue_separate = 0;
  std::size_t bs_jefpnet = 0;
  std::size_t pilots = 0;
  std::map<std::size_t, std::size_t> precoder_by_k_max;
};
SummaryReport cmd_summary(const SystemConfig& sys);
void print_summary(std::ostream& os, const SummaryReport& r);

}  // namespace jefp
