// Training loops, learning-rate schedule, checkpoints and gradient checks.
#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "jefp/models.hpp"

namespace jefp {

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 32;
  double lr_init = 1e-3;
  std::size_t plateau_patience_epochs = 20;
  double lr_decay = 0.5;
  double snr_u_min_db = -10.0, snr_u_max_db = 10.0;
  double snr_ce_db = 10.0;
  double snr_d_db = 10.0;
  std::string mask_sampling = "uniform-k";  // or "full"
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// "uniform-k": K uniform on 1..k_max, then a uniformly random subset.
// "full": every user active.
Mask sample_mask(Rng& rng, std::size_t k_max, const std::string& policy);

// Halves (by `decay`) the learning rate once the monitored value has not
// improved for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience, double decay)
      : lr_(lr), patience_(patience), decay_(decay) {}
  // Lower is better. Returns true if this value is a new best.
  bool step(double value);
  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t stale_epochs() const { return stale_; }
  void restore(double lr, double best, std::size_t stale) {
    lr_ = lr;
    best_ = best;
    stale_ = stale;
  }

 private:
  double lr_;
  std::size_t patience_;
  double decay_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t stale_ = 0;
};

struct HistoryRow {
  std::size_t epoch = 0;
  double train_obj = 0.0;
  double val_obj = 0.0;
  double lr = 0.0;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Loss of `model` on one batch, -mean R / Nc for rate models.
Var e2e_loss(Model& model, const Batch& batch, const SnrConfig& snr, bool training = true);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: keep nothing on disk
  std::filesystem::path resume;   // checkpoint to continue from
  std::string scenario;           // recorded in checkpoints
  bool verbose = false;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  double best_val = 0.0;
  std::size_t best_epoch = 0;
};

// Trains in place; on return the model holds the best-validation weights.
// The validation objective is the mean loss at snr_u in {min, mid, max}.
TrainResult train(Model& model, const TrainConfig& cfg, const std::vector<ChannelRealization>& train_set,
                  const std::vector<ChannelRealization>& val_set, const TrainOptions& opts = {});

// Builds and trains one of the separate stages: "ce", "feedback" or "jfp".
std::unique_ptr<Model> train_separate(const std::string& stage, const SystemConfig& sys,
                                      const TrainConfig& cfg,
                                      const std::vector<ChannelRealization>& train_set,
                                      const std::vector<ChannelRealization>& val_set,
                                      const TrainOptions& opts = {});

// Mean per-sample metric and loss over a data set with deterministic masks
// and noise derived from `eval_seed`.
struct EvalSummary {
  double loss = 0.0;
  std::vector<double> metric;
};
EvalSummary evaluate_model(Model& model, const std::vector<ChannelRealization>& data,
                           const SnrConfig& snr, std::size_t batch_size, std::uint64_t eval_seed,
                           std::size_t active_users = 0);

// Checkpoint: "JCKP" | u16 version | u64 header length | JSON header |
// float64 LE tensor data.
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct CheckpointState {
  std::string kind;
  std::string scenario;
  SystemConfig system;
  TrainConfig train;
  std::size_t epoch = 0;  // completed epochs
  double lr = 0.0;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t stale_epochs = 0;
  std::uint64_t adam_steps = 0;
  std::vector<HistoryRow> history;
};

// `best_weights`, when given, is stored alongside so a resumed run can still
// return the best snapshot seen before the interruption.
void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointState& state,
                     Adam* adam = nullptr, const std::vector<std::vector<double>>* best_weights = nullptr);
// Rebuilds the model from the header; restores optimizer moments into
// `adam` when it is given and the file has them.
std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointState* state = nullptr);
void load_weights(const std::filesystem::path& path, Model& model, Adam* adam = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Central differences on `count` randomly chosen trainable scalars.
// Relative error |a - n| / max(|a|, |n|, floor).
GradCheckResult gradient_check(const std::function<Var()>& loss_fn, const ParamList& params,
                               std::size_t count, std::uint64_t seed, double step = 1e-5,
                               double floor = 1e-6);

}  // namespace jefp
