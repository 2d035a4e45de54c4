// jefp: dataset generation, training, evaluation sweeps and reports.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

#include "jefp/experiments.hpp"

namespace fs = std::filesystem;
using namespace jefp;

namespace {

ExperimentConfig read_config(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig c;
    c.validate();
    return c;
  }
  return load_config(path);
}

void write_manifest(const fs::path& path, const ExperimentConfig& cfg, const std::string& command) {
  nlohmann::json j{{"command", command}, {"config_hash", config_hash(cfg)}, {"config", cfg}};
  std::ofstream(path) << j.dump(2) << "\n";
}

ModelSet load_models(const ExperimentConfig& cfg) {
  ModelSet set;
  for (const auto& [kind, path] : cfg.checkpoints) {
    if (!fs::exists(path)) throw std::runtime_error("checkpoint for " + kind + " not found: " + path.string());
    set.add(load_checkpoint(path));
  }
  return set;
}

// Parses "kind=path" overrides.
void apply_checkpoint_flags(ExperimentConfig& cfg, const std::vector<std::string>& flags) {
  for (const auto& f : flags) {
    const auto eq = f.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--checkpoint expects kind=path, got " + f);
    cfg.checkpoints[f.substr(0, eq)] = f.substr(eq + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint pilot, feedback and precoding simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, model_kind = "jefpnet", resume;
  std::vector<std::string> ckpt_flags;
  std::uint64_t seed = 0;
  bool force = false, verbose = false;
  std::string ckpt_a, ckpt_b, data_a, data_b;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--seed", seed, "override the relevant seed");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* gen = app.add_subcommand("gen-data", "generate train/val/test datasets");
  common(gen);
  gen->add_flag("--force", force, "overwrite existing files");

  auto* tr = app.add_subcommand("train", "train one model");
  common(tr);
  tr->add_option("--model", model_kind, "jefpnet | dft-pilot | ce | feedback | jfp");
  tr->add_option("--data", data_dir, "dataset directory (overrides config)");
  tr->add_option("--resume", resume, "checkpoint to resume from");
  tr->add_flag("--verbose,-v", verbose);

  auto* ev = app.add_subcommand("eval", "evaluate pipelines over the SNR/K grid");
  common(ev);
  ev->add_option("--data", data_dir, "dataset directory (overrides config)");
  ev->add_option("--checkpoint", ckpt_flags, "kind=path, repeatable");

  auto* sh = app.add_subcommand("shift", "cross-scenario evaluation of two JEFPNet checkpoints");
  common(sh);
  sh->add_option("--ckpt-a", ckpt_a)->required();
  sh->add_option("--ckpt-b", ckpt_b)->required();
  sh->add_option("--data-a", data_a)->required();
  sh->add_option("--data-b", data_b)->required();

  auto* sm = app.add_subcommand("summary", "parameter counts per module and side");
  common(sm);

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = read_config(config_path);
    const bool have_seed = app.get_subcommands().front()->count("--seed") > 0;
    if (!data_dir.empty()) cfg.data_dir = data_dir;

    if (gen->parsed()) {
      if (have_seed) cfg.data.base_seed = seed;
      const fs::path out = out_dir.empty() ? cfg.data_dir : fs::path(out_dir);
      if (out.empty()) throw std::invalid_argument("gen-data needs --out or data_dir in the config");
      const auto r = cmd_gen_data(cfg, out, force);
      std::cout << "wrote " << r.train.string() << ", " << r.val.string() << ", " << r.test.string() << "\n";
    } else if (tr->parsed()) {
      if (have_seed) cfg.train.seed = seed;
      const fs::path out = out_dir.empty() ? cfg.output_dir / model_kind : fs::path(out_dir);
      fs::create_directories(out);
      const auto r = cmd_train(cfg, model_kind, out, resume, verbose);
      write_manifest(out / "manifest.json", cfg, "train " + model_kind);
      std::cout << "best epoch " << r.best_epoch << " val " << r.best_val << " -> "
                << (out / "best.ckpt").string() << "\n";
    } else if (ev->parsed()) {
      if (have_seed) cfg.eval_seed = seed;
      apply_checkpoint_flags(cfg, ckpt_flags);
      const ModelSet models = load_models(cfg);
      const Dataset test = read_dataset(cfg.data_dir / "test.jfd");
      const auto rows = cmd_eval(cfg, models, test.samples);
      if (out_dir.empty()) {
        write_rows_csv(std::cout, rows, config_hash(cfg), cfg.eval_seed);
      } else {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "results.csv");
        write_rows_csv(os, rows, config_hash(cfg), cfg.eval_seed);
        write_manifest(fs::path(out_dir) / "manifest.json", cfg, "eval");
        std::cout << rows.size() << " rows -> " << (fs::path(out_dir) / "results.csv").string() << "\n";
      }
    } else if (sh->parsed()) {
      if (have_seed) cfg.eval_seed = seed;
      const auto cells = cmd_shift(cfg, ckpt_a, ckpt_b, data_a, data_b);
      std::ofstream file;
      if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        file.open(fs::path(out_dir) / "shift.csv");
        write_manifest(fs::path(out_dir) / "manifest.json", cfg, "shift");
      }
      std::ostream& os = out_dir.empty() ? std::cout : file;
      os << "train_scenario,test_scenario,K,snr_u_db,R_per_subcarrier,config_hash,eval_seed\n";
      for (const auto& c : cells)
        os << c.train_scenario << ',' << c.test_scenario << ',' << c.k << ',' << c.snr_u_db << ','
           << c.r_per_subcarrier << ',' << config_hash(cfg) << ',' << cfg.eval_seed << '\n';
    } else if (sm->parsed()) {
      const auto report = cmd_summary(cfg.system);
      if (out_dir.empty()) {
        print_summary(std::cout, report);
      } else {
        fs::create_directories(out_dir);
        std::ofstream os(fs::path(out_dir) / "summary.csv");
        print_summary(os, report);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
