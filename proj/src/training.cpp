#include "jefp/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

namespace jefp {

void TrainConfig::validate() const {
  if (epochs == 0 || batch_size == 0) throw std::invalid_argument("train: epochs and batch_size must be positive");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw std::invalid_argument("train: lr_decay must be in (0, 1)");
  if (!(lr_init >= 0.0)) throw std::invalid_argument("train: lr_init must be non-negative");
  if (snr_u_min_db > snr_u_max_db) throw std::invalid_argument("train: empty snr_u range");
  if (mask_sampling != "uniform-k" && mask_sampling != "full")
    throw std::invalid_argument("train: unknown mask_sampling " + mask_sampling);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"lr_init", c.lr_init},
                     {"plateau_patience_epochs", c.plateau_patience_epochs},
                     {"lr_decay", c.lr_decay},
                     {"snr_u_range_db", {c.snr_u_min_db, c.snr_u_max_db}},
                     {"snr_ce_db", c.snr_ce_db},
                     {"snr_d_db", c.snr_d_db},
                     {"mask_sampling", c.mask_sampling},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("lr_init", c.lr_init);
  get("plateau_patience_epochs", c.plateau_patience_epochs);
  get("lr_decay", c.lr_decay);
  if (j.contains("snr_u_range_db")) {
    const auto& r = j.at("snr_u_range_db");
    c.snr_u_min_db = r.at(0).get<double>();
    c.snr_u_max_db = r.at(1).get<double>();
  }
  get("snr_ce_db", c.snr_ce_db);
  get("snr_d_db", c.snr_d_db);
  get("mask_sampling", c.mask_sampling);
  get("seed", c.seed);
}

Mask sample_mask(Rng& rng, std::size_t k_max, const std::string& policy) {
  if (policy == "full") return Mask(k_max, 1);
  const auto k = std::uniform_int_distribution<std::size_t>(1, k_max)(rng);
  std::vector<std::size_t> order(k_max);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Mask m(k_max, 0);
  for (std::size_t i = 0; i < k; ++i) m[order[i]] = 1;
  return m;
}

bool PlateauScheduler::step(double value) {
  if (value < best_) {
    best_ = value;
    stale_ = 0;
    return true;
  }
  if (++stale_ >= patience_) {
    lr_ *= decay_;
    stale_ = 0;
  }
  return false;
}

Var e2e_loss(Model& model, const Batch& batch, const SnrConfig& snr, bool training) {
  return model.loss(batch, snr, training, nullptr);
}

EvalSummary evaluate_model(Model& model, const std::vector<ChannelRealization>& data,
                           const SnrConfig& snr, std::size_t batch_size, std::uint64_t eval_seed,
                           std::size_t active_users) {
  NoGradGuard no_grad;
  EvalSummary out;
  const std::size_t k = model.cfg.k_max;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    Mask mask;
    std::vector<std::uint64_t> seeds;
    for (auto i : idx) {
      const std::uint64_t s = derive_seed(data[i].seed, {kTagEval, eval_seed});
      Mask m;
      if (active_users == 0) {
        Rng rng(derive_seed(s, {kTagMask}));
        m = sample_mask(rng, k, "uniform-k");
      } else {
        m = fixed_k_mask(k, active_users, s);
      }
      mask.insert(mask.end(), m.begin(), m.end());
      seeds.push_back(s);
    }
    std::vector<double> metric;
    const Var l = model.loss(make_batch(data, idx, mask, seeds), snr, false, &metric);
    out.loss += l.item() * static_cast<double>(idx.size());
    out.metric.insert(out.metric.end(), metric.begin(), metric.end());
  }
  out.loss /= static_cast<double>(data.size());
  return out;
}

namespace {

double validation_objective(Model& model, const TrainConfig& cfg,
                            const std::vector<ChannelRealization>& val) {
  const double pts[3] = {cfg.snr_u_min_db, 0.5 * (cfg.snr_u_min_db + cfg.snr_u_max_db), cfg.snr_u_max_db};
  double total = 0.0;
  for (double snr_u : pts) {
    SnrConfig snr{cfg.snr_ce_db, snr_u, cfg.snr_d_db, model.cfg.power};
    total += evaluate_model(model, val, snr, std::max<std::size_t>(cfg.batch_size, 64), cfg.seed).loss;
  }
  return total / 3.0;
}

std::string parameter_norms(Model& model) {
  std::map<std::string, double> sq;
  for (const auto& p : model.parameters()) {
    const auto dot = p.name.find('.');
    double s = 0.0;
    for (double v : p.param->var.data()) s += v * v;
    sq[p.name.substr(0, dot)] += s;
  }
  std::ostringstream os;
  for (const auto& [name, s] : sq) os << " " << name << "=" << std::sqrt(s);
  return os.str();
}

std::vector<std::vector<double>> snapshot(const ParamList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.param->var.data().begin(), p.param->var.data().end());
  return out;
}

void restore(const ParamList& params, const std::vector<std::vector<double>>& values) {
  for (std::size_t i = 0; i < params.size(); ++i)
    std::copy(values[i].begin(), values[i].end(), params[i].param->var.mutable_data().begin());
}

}  // namespace

namespace {
std::vector<std::vector<double>> read_best_weights(const std::filesystem::path& path, const ParamList& params);
}  // namespace

TrainResult train(Model& model, const TrainConfig& cfg, const std::vector<ChannelRealization>& train_set,
                  const std::vector<ChannelRealization>& val_set, const TrainOptions& opts) {
  cfg.validate();
  if (train_set.empty() || val_set.empty()) throw std::invalid_argument("train: empty data split");
  const ParamList params = model.parameters();
  Adam adam(params, Adam::Options{cfg.lr_init});
  PlateauScheduler sched(cfg.lr_init, cfg.plateau_patience_epochs, cfg.lr_decay);
  CheckpointState state;
  state.kind = model.kind();
  state.scenario = opts.scenario;
  state.system = model.cfg;
  state.train = cfg;

  if (!opts.resume.empty()) {
    CheckpointState prev;
    load_checkpoint(opts.resume, &prev);
    if (prev.kind != model.kind()) throw CheckpointError("checkpoint holds a " + prev.kind + " model");
    load_weights(opts.resume, model, &adam);
    state.epoch = prev.epoch;
    state.history = prev.history;
    state.best_val = prev.best_val;
    state.best_epoch = prev.best_epoch;
    sched.restore(prev.lr, prev.best_val, prev.stale_epochs);
    adam.set_lr(prev.lr);
  }
  if (!opts.out_dir.empty()) std::filesystem::create_directories(opts.out_dir);

  auto best = snapshot(params);
  if (!opts.resume.empty()) {
    auto saved = read_best_weights(opts.resume, params);
    if (!saved.empty()) best = std::move(saved);
  }
  const std::size_t k = model.cfg.k_max;
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = make_rng(cfg.seed, {kTagShuffle, epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double train_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + end);
      Rng rng = make_rng(cfg.seed, {kTagBatch, epoch, batches});
      SnrConfig snr{cfg.snr_ce_db, uniform(rng, cfg.snr_u_min_db, cfg.snr_u_max_db), cfg.snr_d_db,
                    model.cfg.power};
      if (cfg.snr_u_min_db == cfg.snr_u_max_db) snr.snr_u_db = cfg.snr_u_min_db;
      Mask mask;
      std::vector<std::uint64_t> seeds;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const Mask m = sample_mask(rng, k, cfg.mask_sampling);
        mask.insert(mask.end(), m.begin(), m.end());
        seeds.push_back(rng());
      }
      adam.zero_grad();
      const Var loss = model.loss(make_batch(train_set, idx, mask, seeds), snr, true, nullptr);
      if (!std::isfinite(loss.item())) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << " batch " << batches << "; parameter norms:"
           << parameter_norms(model);
        throw TrainingError(os.str());
      }
      backward(loss);
      adam.step();
      train_sum += loss.item();
    }

    const double val = validation_objective(model, cfg, val_set);
    const double lr_used = adam.lr();
    if (sched.step(val)) {
      best = snapshot(params);
      state.best_val = val;
      state.best_epoch = epoch;
    }
    adam.set_lr(sched.lr());
    state.history.push_back({epoch, train_sum / static_cast<double>(batches), val, lr_used});
    state.epoch = epoch;
    state.lr = sched.lr();
    state.stale_epochs = sched.stale_epochs();
    state.adam_steps = adam.steps();
    if (opts.verbose)
      std::cerr << model.kind() << " epoch " << epoch << " train " << state.history.back().train_obj
                << " val " << val << " lr " << lr_used << "\n";
    if (!opts.out_dir.empty()) {
      save_checkpoint(opts.out_dir / "last.ckpt", model, state, &adam, &best);
      if (state.best_epoch == epoch) save_checkpoint(opts.out_dir / "best.ckpt", model, state);
    }
  }
  restore(params, best);
  return {state.history, state.best_val, state.best_epoch};
}

std::unique_ptr<Model> train_separate(const std::string& stage, const SystemConfig& sys,
                                      const TrainConfig& cfg,
                                      const std::vector<ChannelRealization>& train_set,
                                      const std::vector<ChannelRealization>& val_set,
                                      const TrainOptions& opts) {
  if (stage != "ce" && stage != "feedback" && stage != "jfp")
    throw std::invalid_argument("unknown training stage: " + stage);
  auto model = make_model(stage, sys, cfg.seed);
  train(*model, cfg, train_set, val_set, opts);
  return model;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[4] = {'J', 'C', 'K', 'P'};

nlohmann::json history_json(const std::vector<HistoryRow>& rows) {
  auto arr = nlohmann::json::array();
  for (const auto& r : rows) arr.push_back({r.epoch, r.train_obj, r.val_obj, r.lr});
  return arr;
}

std::string payload_checksum(const unsigned char* p, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<double> data;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 14 || !std::equal(kCkptMagic, kCkptMagic + 4, bytes.begin()))
    throw CheckpointError("corrupted checkpoint (bad magic): " + path.string());
  const unsigned version = bytes[4] | bytes[5] << 8;
  if (version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t len = 0;
  for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[6 + i]) << (8 * i);
  if (len > bytes.size() - 14) throw CheckpointError("corrupted checkpoint (truncated header)");
  RawCheckpoint raw;
  try {
    raw.header = nlohmann::json::parse(bytes.begin() + 14, bytes.begin() + 14 + static_cast<std::ptrdiff_t>(len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupted checkpoint (header): ") + e.what());
  }
  const std::size_t payload = bytes.size() - 14 - len;
  const std::size_t expected = raw.header.value("data_count", std::size_t{0});
  if (payload != expected * 8)
    throw CheckpointError("corrupted checkpoint (payload has " + std::to_string(payload) +
                          " bytes, expected " + std::to_string(expected * 8) + ")");
  const unsigned char* p = bytes.data() + 14 + len;
  if (raw.header.value("checksum", std::string()) != payload_checksum(p, payload))
    throw CheckpointError("corrupted checkpoint (checksum mismatch): " + path.string());
  raw.data.resize(expected);
  for (std::size_t i = 0; i < expected; ++i, p += 8) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(p[b]) << (8 * b);
    raw.data[i] = std::bit_cast<double>(u);
  }
  return raw;
}

std::vector<std::vector<double>> read_best_weights(const std::filesystem::path& path,
                                                  const ParamList& params) {
  const RawCheckpoint raw = read_raw(path);
  const auto it = raw.header.find("best_weights");
  if (it == raw.header.end() || it->is_null()) return {};
  std::size_t off = it->get<std::size_t>();
  std::vector<std::vector<double>> out;
  for (const auto& p : params) {
    const std::size_t n = p.param->size();
    if (off + n > raw.data.size()) throw CheckpointError("corrupted checkpoint (best weights out of range)");
    out.emplace_back(raw.data.begin() + off, raw.data.begin() + off + n);
    off += n;
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointState& state,
                     Adam* adam, const std::vector<std::vector<double>>* best_weights) {
  std::vector<double> data;
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : model.parameters()) {
    tensors.push_back({{"name", p.name}, {"shape", p.param->var.shape()}, {"offset", data.size()}});
    data.insert(data.end(), p.param->var.data().begin(), p.param->var.data().end());
  }
  nlohmann::json moments = nlohmann::json::array();
  if (adam) {
    for (std::size_t i = 0; i < adam->params().size(); ++i) {
      moments.push_back({{"name", adam->params()[i].name}, {"offset", data.size()}});
      const auto& m = adam->first_moments()[i];
      const auto& v = adam->second_moments()[i];
      data.insert(data.end(), m.begin(), m.end());
      data.insert(data.end(), v.begin(), v.end());
    }
  }
  nlohmann::json best = nullptr;
  if (best_weights) {
    best = data.size();
    for (const auto& w : *best_weights) data.insert(data.end(), w.begin(), w.end());
  }
  std::string bytes(data.size() * 8, '\0');
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto u = std::bit_cast<std::uint64_t>(data[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  nlohmann::json h{{"kind", state.kind},
                   {"scenario", state.scenario},
                   {"system", state.system},
                   {"train", state.train},
                   {"epoch", state.epoch},
                   {"lr", state.lr},
                   {"best_val", std::isfinite(state.best_val) ? nlohmann::json(state.best_val) : nlohmann::json()},
                   {"best_epoch", state.best_epoch},
                   {"stale_epochs", state.stale_epochs},
                   {"adam_steps", adam ? adam->steps() : state.adam_steps},
                   {"rng", {{"seed", state.train.seed}, {"next_epoch", state.epoch + 1}}},
                   {"history", history_json(state.history)},
                   {"tensors", tensors},
                   {"adam", moments},
                   {"best_weights", best},
                   {"data_count", data.size()},
                   {"checksum", payload_checksum(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size())}};
  const std::string text = h.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw CheckpointError("cannot write checkpoint: " + tmp);
    os.write(kCkptMagic, 4);
    const char ver[2] = {static_cast<char>(kCheckpointVersion & 0xff), static_cast<char>(kCheckpointVersion >> 8)};
    os.write(ver, 2);
    const std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((len >> (8 * i)) & 0xff));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::unique_ptr<Model> load_checkpoint(const std::filesystem::path& path, CheckpointState* state) {
  const RawCheckpoint raw = read_raw(path);
  const auto& h = raw.header;
  CheckpointState s;
  try {
    s.kind = h.at("kind").get<std::string>();
    s.scenario = h.value("scenario", std::string());
    s.system = h.at("system").get<SystemConfig>();
    s.train = h.at("train").get<TrainConfig>();
    s.epoch = h.at("epoch").get<std::size_t>();
    s.lr = h.at("lr").get<double>();
    s.best_val = h.at("best_val").is_null() ? std::numeric_limits<double>::infinity()
                                            : h.at("best_val").get<double>();
    s.best_epoch = h.at("best_epoch").get<std::size_t>();
    s.stale_epochs = h.at("stale_epochs").get<std::size_t>();
    s.adam_steps = h.at("adam_steps").get<std::uint64_t>();
    for (const auto& r : h.at("history"))
      s.history.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>(),
                           r.at(3).get<double>()});
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupted checkpoint (fields): ") + e.what());
  }
  auto model = make_model(s.kind, s.system, s.train.seed);
  load_weights(path, *model);
  if (state) *state = s;
  return model;
}

void load_weights(const std::filesystem::path& path, Model& model, Adam* adam) {
  const RawCheckpoint raw = read_raw(path);
  std::map<std::string, std::pair<std::size_t, Shape>> index;
  for (const auto& t : raw.header.at("tensors"))
    index[t.at("name").get<std::string>()] = {t.at("offset").get<std::size_t>(), t.at("shape").get<Shape>()};
  for (const auto& p : model.parameters()) {
    const auto it = index.find(p.name);
    if (it == index.end()) throw CheckpointError("checkpoint lacks tensor " + p.name);
    if (it->second.second != p.param->var.shape())
      throw CheckpointError("checkpoint tensor " + p.name + " has shape " + shape_str(it->second.second) +
                            ", model expects " + shape_str(p.param->var.shape()));
    const std::size_t off = it->second.first, n = p.param->size();
    if (off + n > raw.data.size()) throw CheckpointError("corrupted checkpoint (tensor out of range)");
    std::copy(raw.data.begin() + off, raw.data.begin() + off + n, p.param->var.mutable_data().begin());
  }
  if (adam && !raw.header.at("adam").empty()) {
    std::map<std::string, std::size_t> moments;
    for (const auto& t : raw.header.at("adam")) moments[t.at("name").get<std::string>()] = t.at("offset");
    for (std::size_t i = 0; i < adam->params().size(); ++i) {
      const auto it = moments.find(adam->params()[i].name);
      if (it == moments.end()) throw CheckpointError("checkpoint lacks optimizer state for " + adam->params()[i].name);
      auto& m = adam->first_moments()[i];
      auto& v = adam->second_moments()[i];
      if (it->second + m.size() + v.size() > raw.data.size())
        throw CheckpointError("corrupted checkpoint (optimizer state out of range)");
      std::copy_n(raw.data.begin() + it->second, m.size(), m.begin());
      std::copy_n(raw.data.begin() + it->second + m.size(), v.size(), v.begin());
    }
    adam->set_steps(raw.header.at("adam_steps").get<std::uint64_t>());
  }
}

GradCheckResult gradient_check(const std::function<Var()>& loss_fn, const ParamList& params,
                               std::size_t count, std::uint64_t seed, double step, double floor) {
  std::vector<std::pair<std::size_t, std::size_t>> slots;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].param->trainable)
      for (std::size_t j = 0; j < params[i].param->size(); ++j) slots.emplace_back(i, j);
  Rng rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  slots.resize(std::min(count, slots.size()));

  for (const auto& p : params) p.param->zero_grad();
  backward(loss_fn());
  GradCheckResult r;
  for (const auto& [i, j] : slots) {
    Node* node = params[i].param->var.get();
    const double analytic = node->grad.empty() ? 0.0 : node->grad[j];
    const double saved = node->value[j];
    // Grad mode stays on: batch norm only uses batch statistics when it is.
    node->value[j] = saved + step;
    const double plus = loss_fn().item();
    node->value[j] = saved - step;
    const double minus = loss_fn().item();
    node->value[j] = saved;
    const double numeric = (plus - minus) / (2.0 * step);
    const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      std::ostringstream os;
      os << params[i].name << "[" << j << "] analytic=" << analytic << " numeric=" << numeric;
      r.worst = os.str();
    }
    ++r.checked;
  }
  return r;
}

}  // namespace jefp
