#include "jefp/experiments.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace jefp {

namespace {

std::vector<std::size_t> iota_range(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> v(end - begin);
  std::iota(v.begin(), v.end(), begin);
  return v;
}

int qam_bits_of(const std::string& pipeline) {
  if (pipeline.rfind("qam:", 0) != 0) return 0;
  try {
    return std::stoi(pipeline.substr(4));
  } catch (const std::exception&) {
    throw std::invalid_argument("bad QAM pipeline: " + pipeline);
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  system.validate();
  scenario_for_system().validate();
  train.validate();
  if (snr_ce_db.empty() || snr_u_db.empty() || snr_d_db.empty())
    throw std::invalid_argument("config: SNR grids must be non-empty");
  if (pipelines.empty()) throw std::invalid_argument("config: no pipelines");
  for (const auto& p : pipelines) {
    if (!is_known_pipeline(p)) throw std::invalid_argument("config: unknown pipeline " + p);
    if (const int b = qam_bits_of(p)) qam_levels(b);
  }
  for (auto k : k_values)
    if (k == 0 || k > system.k_max) throw std::invalid_argument("config: K out of range");
}

ScenarioConfig ExperimentConfig::scenario_for_system() const {
  ScenarioConfig s = scenario;
  s.n_subcarriers = system.nc;
  s.n_tx_antennas = system.nt;
  s.k_max = system.k_max;
  return s;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  const ScenarioConfig& s = c.scenario;
  nlohmann::json ckpts = nlohmann::json::object();
  for (const auto& [k, v] : c.checkpoints) ckpts[k] = v.string();
  j = nlohmann::json{
      {"scenario",
       {{"name", s.name},
        {"n_clusters", s.n_clusters},
        {"rician_k", s.rician_k},
        {"delay_spread_s", s.delay_spread_s},
        {"angle_spread_deg", s.angle_spread_deg},
        {"carrier_dl_hz", s.carrier_dl_hz},
        {"carrier_ul_hz", s.carrier_ul_hz},
        {"bandwidth_hz", s.bandwidth_hz},
        {"sector_deg", s.sector_deg}}},
      {"system", c.system},
      {"snr_grid", {{"snr_ce_db", c.snr_ce_db}, {"snr_u_db", c.snr_u_db}, {"snr_d_db", c.snr_d_db}}},
      {"k_values", c.k_values},
      {"pipelines", c.pipelines},
      {"train", c.train},
      {"data", {{"train", c.data.train}, {"val", c.data.val}, {"test", c.data.test}, {"base_seed", c.data.base_seed}}},
      {"data_dir", c.data_dir.string()},
      {"output_dir", c.output_dir.string()},
      {"checkpoints", ckpts},
      {"eval_seed", c.eval_seed},
      {"eval_batch", c.eval_batch}};
}

namespace {

// Typos in a config would otherwise silently fall back to defaults.
void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
  }
}

}  // namespace

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  reject_unknown(j, {"system", "scenario", "snr_grid", "k_values", "pipelines", "train", "data", "data_dir",
                     "output_dir", "checkpoints", "eval_seed", "eval_batch"},
                 "config");
  if (j.contains("system")) c.system = j.at("system").get<SystemConfig>();
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    if (s.is_string()) {
      c.scenario = ScenarioConfig::preset(s.get<std::string>(), c.system.nc, c.system.nt, c.system.k_max);
    } else {
      reject_unknown(s, {"preset", "name", "n_clusters", "rician_k", "delay_spread_s", "angle_spread_deg",
                         "carrier_dl_hz", "carrier_ul_hz", "bandwidth_hz", "sector_deg", "n_subcarriers",
                         "n_tx_antennas", "k_max"},
                     "scenario");
      const std::string preset = s.value("preset", s.value("name", std::string("uma-like")));
      c.scenario = ScenarioConfig::preset(preset, c.system.nc, c.system.nt, c.system.k_max);
      c.scenario.name = s.value("name", preset);
      auto get = [&s](const char* key, auto& field) {
        if (s.contains(key)) s.at(key).get_to(field);
      };
      get("n_clusters", c.scenario.n_clusters);
      get("rician_k", c.scenario.rician_k);
      get("delay_spread_s", c.scenario.delay_spread_s);
      get("angle_spread_deg", c.scenario.angle_spread_deg);
      get("carrier_dl_hz", c.scenario.carrier_dl_hz);
      get("carrier_ul_hz", c.scenario.carrier_ul_hz);
      get("bandwidth_hz", c.scenario.bandwidth_hz);
      get("sector_deg", c.scenario.sector_deg);
    }
  }
  c.scenario = [&] {
    ScenarioConfig s = c.scenario;
    s.n_subcarriers = c.system.nc;
    s.n_tx_antennas = c.system.nt;
    s.k_max = c.system.k_max;
    return s;
  }();
  if (j.contains("snr_grid")) {
    const auto& g = j.at("snr_grid");
    reject_unknown(g, {"snr_ce_db", "snr_u_db", "snr_d_db"}, "snr_grid");
    if (g.contains("snr_ce_db")) g.at("snr_ce_db").get_to(c.snr_ce_db);
    if (g.contains("snr_u_db")) g.at("snr_u_db").get_to(c.snr_u_db);
    if (g.contains("snr_d_db")) g.at("snr_d_db").get_to(c.snr_d_db);
  }
  if (j.contains("k_values")) j.at("k_values").get_to(c.k_values);
  if (j.contains("pipelines")) j.at("pipelines").get_to(c.pipelines);
  if (j.contains("train")) c.train = j.at("train").get<TrainConfig>();
  if (j.contains("data")) {
    const auto& d = j.at("data");
    reject_unknown(d, {"train", "val", "test", "base_seed"}, "data");
    c.data.train = d.value("train", c.data.train);
    c.data.val = d.value("val", c.data.val);
    c.data.test = d.value("test", c.data.test);
    c.data.base_seed = d.value("base_seed", c.data.base_seed);
  }
  if (j.contains("data_dir")) c.data_dir = j.at("data_dir").get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("checkpoints"))
    for (const auto& [k, v] : j.at("checkpoints").items()) c.checkpoints[k] = v.get<std::string>();
  c.eval_seed = j.value("eval_seed", c.eval_seed);
  c.eval_batch = j.value("eval_batch", c.eval_batch);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  // Relative paths are taken relative to the config file.
  const auto base = path.parent_path();
  auto fix = [&base](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  fix(c.data_dir);
  fix(c.output_dir);
  for (auto& [k, v] : c.checkpoints) fix(v);
  c.validate();
  return c;
}

std::string config_hash(const ExperimentConfig& c) {
  nlohmann::json j = c;
  // Paths do not change results.
  j.erase("data_dir");
  j.erase("output_dir");
  j.erase("checkpoints");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

void ModelSet::add(std::unique_ptr<Model> m) {
  const std::string kind = m->kind();
  Model* raw = m.release();
  if (kind == "jefpnet") jefpnet.reset(static_cast<JefpNet*>(raw));
  else if (kind == "dft-pilot") dft.reset(static_cast<JefpNet*>(raw));
  else if (kind == "ce") ce.reset(static_cast<CeModel*>(raw));
  else if (kind == "feedback") feedback.reset(static_cast<FeedbackModel*>(raw));
  else if (kind == "jfp") jfp.reset(static_cast<JfpModel*>(raw));
  else {
    delete raw;
    throw std::invalid_argument("unknown model kind " + kind);
  }
}

std::vector<std::string> pipeline_requirements(const std::string& p) {
  if (p == "jefpnet" || qam_bits_of(p) > 0) return {"jefpnet"};
  if (p == "dft-pilot") return {"dft-pilot"};
  if (p == "sefpnet") return {"ce", "jfp"};
  if (p == "jfpnet-idealCE") return {"jfp"};
  if (p == "mmse" || p == "svd-wf") return {"ce", "feedback"};
  if (p == "mmse-ideal" || p == "svd-wf-ideal") return {};
  throw std::invalid_argument("unknown pipeline " + p);
}

bool is_known_pipeline(const std::string& p) {
  try {
    pipeline_requirements(p);
    return true;
  } catch (const std::invalid_argument&) {
    return false;
  }
}

PipelineResult run_pipeline(const std::string& pipeline, const ModelSet& models,
                            const std::vector<ChannelRealization>& data, const SnrConfig& snr,
                            std::size_t k_active, std::uint64_t eval_seed, std::size_t batch_size) {
  for (const auto& need : pipeline_requirements(pipeline)) {
    const bool have = (need == "jefpnet" && models.jefpnet) || (need == "dft-pilot" && models.dft) ||
                      (need == "ce" && models.ce) || (need == "feedback" && models.feedback) ||
                      (need == "jfp" && models.jfp);
    if (!have) throw std::invalid_argument("pipeline " + pipeline + " needs a " + need + " checkpoint");
  }
  if (data.empty()) throw std::invalid_argument("empty evaluation set");
  NoGradGuard no_grad;
  const std::size_t k_max = data[0].h_dl.size();
  const double sigma_d = snr.sigma_d_sq();
  const int bits = qam_bits_of(pipeline);
  PipelineResult out;
  double err = 0.0, ref = 0.0;

  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const auto idx = iota_range(start, std::min(data.size(), start + batch_size));
    Mask mask;
    std::vector<std::uint64_t> seeds;
    for (auto i : idx) {
      const std::uint64_t s = derive_seed(data[i].seed, {kTagEval, eval_seed});
      const Mask m = fixed_k_mask(k_max, k_active, s);
      mask.insert(mask.end(), m.begin(), m.end());
      seeds.push_back(s);
    }
    const Batch batch = make_batch(data, idx, mask, seeds);
    std::vector<double> rates;

    auto accumulate_nmse = [&](const Var& estimate) {
      const auto est = image_to_complex(estimate, k_max);
      for (std::size_t i = 0; i < batch.b; ++i)
        for (std::size_t u = 0; u < k_max; ++u)
          if (batch.mask[i * k_max + u]) {
            err += (batch.h_dl[i][u] - est[i][u]).squaredNorm();
            ref += batch.h_dl[i][u].squaredNorm();
          }
    };
    auto classical = [&](const std::vector<std::vector<CMatrix>>& csi, bool mmse) {
      for (std::size_t i = 0; i < batch.b; ++i) {
        const Mask m(batch.mask.begin() + i * k_max, batch.mask.begin() + (i + 1) * k_max);
        const auto v = mmse ? mmse_precode(csi[i], m, sigma_d, snr.power)
                            : svd_precode(csi[i], m, sigma_d, snr.power);
        rates.push_back(spectral_efficiency(batch.h_dl[i], v, m, sigma_d).per_subcarrier);
      }
    };

    if (pipeline == "jefpnet" || bits > 0 || pipeline == "dft-pilot") {
      JefpNet& net = pipeline == "dft-pilot" ? *models.dft : *models.jefpnet;
      rate_objective(net.forward(batch, snr, false, bits), batch.h_dl, batch.mask, sigma_d, &rates);
    } else if (pipeline == "jfpnet-idealCE") {
      const Var v = models.jfp->forward(channel_image(batch.h_dl), batch, snr, false);
      rate_objective(v, batch.h_dl, batch.mask, sigma_d, &rates);
    } else if (pipeline == "sefpnet") {
      const Var h_est = models.ce->estimate(batch, snr, false);
      accumulate_nmse(h_est);
      rate_objective(models.jfp->forward(h_est, batch, snr, false), batch.h_dl, batch.mask, sigma_d, &rates);
    } else if (pipeline == "mmse" || pipeline == "svd-wf") {
      const Var h_est = models.ce->estimate(batch, snr, false);
      const Var h_fb = models.feedback->reconstruct(h_est, batch, snr, false);
      accumulate_nmse(h_fb);
      classical(image_to_complex(h_fb, k_max), pipeline == "mmse");
    } else {
      classical(batch.h_dl, pipeline == "mmse-ideal");
    }
    out.rate.insert(out.rate.end(), rates.begin(), rates.end());
  }
  const double nc = static_cast<double>(data[0].h_dl[0].rows());
  for (double r : out.rate) out.rate_total.push_back(r * nc);
  if (ref > 0.0) out.nmse_db = err > 0.0 ? 10.0 * std::log10(err / ref) : kNmseFloorDb;
  return out;
}

double paired_bootstrap_confidence(const std::vector<double>& a, const std::vector<double>& b,
                                   std::size_t resamples, std::uint64_t seed) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("bootstrap: paired samples required");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, d.size() - 1);
  std::size_t wins = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) s += d[pick(rng)];
    if (s > 0.0) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(resamples);
}

void write_rows_csv(std::ostream& os, const std::vector<ResultRow>& rows, const std::string& hash,
                    std::uint64_t eval_seed) {
  os << "pipeline,K,snr_ce_db,snr_u_db,snr_d_db,bits,R_total,R_per_subcarrier,nmse_db,n_samples,config_hash,eval_seed\n";
  os << std::setprecision(10);
  for (const auto& r : rows) {
    os << r.pipeline << ',' << r.k << ',' << r.snr_ce_db << ',' << r.snr_u_db << ',' << r.snr_d_db << ',';
    if (r.bits) os << r.bits;
    os << ',' << r.r_total << ',' << r.r_per_subcarrier << ',';
    if (!std::isnan(r.nmse_db)) os << r.nmse_db;
    os << ',' << r.n_samples << ',' << hash << ',' << eval_seed << '\n';
  }
}

std::size_t thread_count() {
  if (const char* s = std::getenv("JEFP_THREADS")) {
    try {
      const long n = std::stol(s);
      if (n > 0) return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
    }
  }
  return 1;
}

// ---------------------------------------------------------------------------

GenDataResult cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, bool force) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  GenDataResult res{out_dir / "train.jfd", out_dir / "val.jfd", out_dir / "test.jfd", out_dir / "manifest.json"};
  if (!force)
    for (const auto& p : {res.train, res.val, res.test, res.manifest})
      if (std::filesystem::exists(p))
        throw std::runtime_error(p.string() + " already exists (use --force to overwrite)");

  const ScenarioConfig sc = cfg.scenario_for_system();
  nlohmann::json manifest{{"scenario", sc.name}, {"config_hash", config_hash(cfg)}, {"splits", nlohmann::json::object()}};
  std::uint64_t next = cfg.data.base_seed;
  const std::pair<const char*, std::size_t> splits[] = {
      {"train", cfg.data.train}, {"val", cfg.data.val}, {"test", cfg.data.test}};
  for (const auto& [name, count] : splits) {
    const auto samples = generate_realizations(sc, next, count);
    DatasetMeta meta{sc.name, sc.n_subcarriers, sc.n_tx_antennas, sc.k_max, count, next, name, {}};
    write_dataset(out_dir / (std::string(name) + ".jfd"), samples, meta);
    manifest["splits"][name] = {{"count", count}, {"first_seed", next}, {"last_seed", next + count - 1}};
    next += count;
  }
  std::ofstream(res.manifest) << manifest.dump(2) << "\n";
  return res;
}

LoadedSplits load_splits(const std::filesystem::path& data_dir) {
  return {read_dataset(data_dir / "train.jfd"), read_dataset(data_dir / "val.jfd"),
          read_dataset(data_dir / "test.jfd")};
}

namespace {

void check_dims(const DatasetMeta& meta, const SystemConfig& sys) {
  if (meta.nc != sys.nc || meta.nt != sys.nt || meta.k_max != sys.k_max)
    throw std::invalid_argument("dataset dimensions (Nc=" + std::to_string(meta.nc) + ", Nt=" +
                                std::to_string(meta.nt) + ", K_max=" + std::to_string(meta.k_max) +
                                ") do not match the system config");
}

}  // namespace

TrainResult cmd_train(const ExperimentConfig& cfg, const std::string& kind,
                      const std::filesystem::path& out_dir, const std::filesystem::path& resume,
                      bool verbose) {
  cfg.validate();
  const LoadedSplits d = load_splits(cfg.data_dir);
  check_dims(d.train.meta, cfg.system);
  auto model = make_model(kind, cfg.system, cfg.train.seed);
  TrainOptions opts{out_dir, resume, d.train.meta.scenario, verbose};
  const TrainResult r = train(*model, cfg.train, d.train.samples, d.val.samples, opts);
  std::ofstream os(out_dir / "history.csv");
  os << "epoch,train_obj,val_obj,lr\n" << std::setprecision(10);
  CheckpointState state;
  load_checkpoint(out_dir / "last.ckpt", &state);
  for (const auto& h : state.history) os << h.epoch << ',' << h.train_obj << ',' << h.val_obj << ',' << h.lr << '\n';
  return r;
}

std::vector<ResultRow> cmd_eval(const ExperimentConfig& cfg, const ModelSet& models,
                                const std::vector<ChannelRealization>& test) {
  cfg.validate();
  std::vector<std::size_t> ks = cfg.k_values;
  if (ks.empty()) ks = iota_range(1, cfg.system.k_max + 1);
  std::vector<ResultRow> rows;
  for (double ce : cfg.snr_ce_db)
    for (double u : cfg.snr_u_db)
      for (double dl : cfg.snr_d_db)
        for (auto k : ks)
          for (const auto& p : cfg.pipelines) {
            ResultRow r;
            r.pipeline = p;
            r.k = k;
            r.snr_ce_db = ce;
            r.snr_u_db = u;
            r.snr_d_db = dl;
            r.bits = qam_bits_of(p);
            rows.push_back(r);
          }

  std::mutex err_mu;
  std::string first_error;
  auto work = [&](std::size_t t, std::size_t stride) {
    for (std::size_t i = t; i < rows.size(); i += stride) {
      ResultRow& r = rows[i];
      try {
        const SnrConfig snr{r.snr_ce_db, r.snr_u_db, r.snr_d_db, cfg.system.power};
        const PipelineResult pr = run_pipeline(r.pipeline, models, test, snr, r.k, cfg.eval_seed, cfg.eval_batch);
        r.n_samples = pr.rate.size();
        r.r_per_subcarrier = std::accumulate(pr.rate.begin(), pr.rate.end(), 0.0) / static_cast<double>(r.n_samples);
        r.r_total = r.r_per_subcarrier * static_cast<double>(cfg.system.nc);
        r.nmse_db = pr.nmse_db;
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mu);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  const std::size_t threads = std::min(thread_count(), rows.size());
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
    for (auto& th : pool) th.join();
  }
  if (!first_error.empty()) throw std::runtime_error(first_error);
  return rows;
}

std::vector<ShiftCell> cmd_shift(const ExperimentConfig& cfg, const std::filesystem::path& ckpt_a,
                                 const std::filesystem::path& ckpt_b,
                                 const std::filesystem::path& data_a,
                                 const std::filesystem::path& data_b) {
  struct Side {
    std::string scenario;
    ModelSet models;
    Dataset test;
  };
  std::vector<Side> sides(2);
  const std::filesystem::path ckpts[2] = {ckpt_a, ckpt_b};
  const std::filesystem::path dirs[2] = {data_a, data_b};
  for (int s = 0; s < 2; ++s) {
    CheckpointState st;
    auto m = load_checkpoint(ckpts[s], &st);
    if (st.kind != "jefpnet") throw std::invalid_argument("shift needs jefpnet checkpoints, got " + st.kind);
    sides[s].test = read_dataset(dirs[s] / "test.jfd");
    if (!st.scenario.empty() && st.scenario != sides[s].test.meta.scenario)
      throw std::invalid_argument("scenario mismatch: checkpoint trained on " + st.scenario +
                                  " but dataset is " + sides[s].test.meta.scenario);
    check_dims(sides[s].test.meta, st.system);
    sides[s].scenario = sides[s].test.meta.scenario;
    sides[s].models.add(std::move(m));
  }
  std::vector<std::size_t> ks = cfg.k_values;
  if (ks.empty()) ks = iota_range(1, cfg.system.k_max + 1);
  std::vector<ShiftCell> out;
  for (auto k : ks)
    for (double u : cfg.snr_u_db)
      for (int tr = 0; tr < 2; ++tr)
        for (int te = 0; te < 2; ++te) {
          const SnrConfig snr{cfg.snr_ce_db.front(), u, cfg.snr_d_db.front(), cfg.system.power};
          const auto r = run_pipeline("jefpnet", sides[tr].models, sides[te].test.samples, snr, k,
                                      cfg.eval_seed, cfg.eval_batch);
          out.push_back({sides[tr].scenario, sides[te].scenario, k, u,
                         std::accumulate(r.rate.begin(), r.rate.end(), 0.0) / static_cast<double>(r.rate.size())});
        }
  return out;
}

SummaryReport cmd_summary(const SystemConfig& sys) {
  SummaryReport r;
  JefpNet jefp(sys, 1);
  CeModel ce(sys, 1);
  FeedbackModel fb(sys, 1);

  r.ue_jefpnet = count_parameters(jefp.encoder.parameters()).total;
  r.pilots = count_parameters(jefp.pilots.parameters()).total;
  r.bs_jefpnet = count_parameters(jefp.bs.parameters()).total;
  r.modules["ue/jefpnet/encoder"] = r.ue_jefpnet;
  r.modules["bs/jefpnet/pilots"] = r.pilots;
  r.modules["bs/jefpnet/precoder"] = r.bs_jefpnet;

  // The CE network's pilot book is transmitted by the BS, not stored at the UE.
  std::size_t ce_ue = 0;
  for (const auto& p : ce.net.parameters())
    if (p.param->trainable && p.name.rfind("pilots", 0) != 0) ce_ue += p.param->size();
  const std::size_t comp = count_parameters(fb.compressor.parameters()).total;
  r.modules["ue/separate/ce"] = ce_ue;
  r.modules["ue/separate/compressor"] = comp;
  r.modules["bs/separate/reconstructor"] = count_parameters(fb.reconstructor.parameters()).total;
  r.ue_separate = ce_ue + comp;

  for (std::size_t k : {2, 4, 6}) {
    SystemConfig c = sys;
    c.k_max = k;
    Rng rng(1);
    BsPrecoderNet bs(c, rng);
    r.precoder_by_k_max[k] = count_parameters(bs.parameters()).total;
  }
  return r;
}

void print_summary(std::ostream& os, const SummaryReport& r) {
  os << "module,parameters\n";
  for (const auto& [name, n] : r.modules) os << name << ',' << n << '\n';
  os << "ue_total/jefpnet," << r.ue_jefpnet << '\n';
  os << "ue_total/separate," << r.ue_separate << '\n';
  for (const auto& [k, n] : r.precoder_by_k_max) os << "precoder/k_max=" << k << ',' << n << '\n';
  os << std::fixed << std::setprecision(2) << "# UE-side JEFPNet uses "
     << 100.0 * static_cast<double>(r.ue_jefpnet) / static_cast<double>(r.ue_separate)
     << "% of the separate chain's UE-side parameters\n";
}

}  // namespace jefp
