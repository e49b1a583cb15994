// modinv: single-branch multimodal classifier over precomputed embeddings,
// with missing/corrupted-modality robustness sweeps and two-branch fusion
// baselines.
//
// Commands: gen, train, eval, sweep, gradcheck, dump.
// Exit codes: 0 success, 1 check failure, 2 I/O, 3 data integrity, 64 usage.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "modinv/data.hpp"
#include "modinv/error.hpp"
#include "modinv/eval.hpp"
#include "modinv/gradcheck.hpp"
#include "modinv/kernels.hpp"
#include "modinv/model.hpp"
#include "modinv/rng.hpp"
#include "modinv/sha256.hpp"
#include "modinv/switching.hpp"
#include "modinv/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace modinv;

namespace {

// Config files are JSON objects with flat keys mirroring the long flag
// names (sans leading dashes); explicit command-line flags win.
json load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw_error(ErrorKind::io, "cannot open config " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw_error(ErrorKind::config,
                "config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object())
    throw_error(ErrorKind::config, "config " + path + " must be an object");
  return j;
}

template <typename T>
void cfg_override(const CLI::App* cmd, const json& cfg, const char* key,
                  T& target) {
  const auto* opt = cmd->get_option(std::string("--") + key);
  if (opt->count() > 0) return;
  if (!cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw_error(ErrorKind::config,
                std::string("config key '") + key + "' has the wrong type");
  }
}

void require_flag(bool present, const char* what) {
  if (!present)
    throw_error(ErrorKind::config, std::string("missing required ") + what);
}

std::vector<double> parse_grid(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::string cur;
  for (char ch : csv + ",") {
    if (ch == ',') {
      if (cur.empty()) continue;
      try {
        out.push_back(std::stod(cur));
      } catch (...) {
        throw_error(ErrorKind::config,
                    std::string("bad ") + what + " entry '" + cur + "'");
      }
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (out.empty())
    throw_error(ErrorKind::config, std::string("empty ") + what + " list");
  return out;
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir))
    throw_error(ErrorKind::io, "cannot create directory " + dir);
}

struct DataFlags {
  std::string bank_a, bank_b;
  double train_frac = 0.75;
  uint64_t seed_data = 1;
  std::string part = "test";  // test|train|all
};

struct LoadedData {
  data::PairedDataset all, train, test;
};

LoadedData load_paired(const DataFlags& flags) {
  require_flag(!flags.bank_a.empty(), "--bank-a");
  require_flag(!flags.bank_b.empty(), "--bank-b");
  LoadedData out;
  out.all = data::pair_banks(data::read_bank(flags.bank_a),
                             data::read_bank(flags.bank_b));
  auto [train, test] = data::split(out.all, flags.train_frac, flags.seed_data);
  out.train = std::move(train);
  out.test = std::move(test);
  return out;
}

void validate_part(const std::string& part) {
  if (part != "test" && part != "train" && part != "all")
    throw_error(ErrorKind::config,
                "unknown --split '" + part + "' (want test|train|all)");
}

const data::PairedDataset& select_part(const LoadedData& loaded,
                                       const std::string& part) {
  validate_part(part);
  if (part == "test") return loaded.test;
  if (part == "train") return loaded.train;
  return loaded.all;
}

model::FusionSpace parse_fusion_space(const std::string& s) {
  if (s == "prob") return model::FusionSpace::prob;
  if (s == "logit") return model::FusionSpace::logit;
  throw_error(ErrorKind::config,
              "unknown --fusion-space '" + s + "' (want prob|logit)");
}

struct ArchChoice {
  model::Arch arch;
  model::Fusion fusion;
};

ArchChoice parse_model_kind(const std::string& s) {
  if (s == "srmm") return {model::Arch::single_branch, model::Fusion::none};
  if (s == "tbn-early") return {model::Arch::two_branch, model::Fusion::early};
  if (s == "tbn-mid") return {model::Arch::two_branch, model::Fusion::mid};
  if (s == "tbn-late") return {model::Arch::two_branch, model::Fusion::late};
  throw_error(ErrorKind::config,
              "unknown --model '" + s +
                  "' (want srmm|tbn-early|tbn-mid|tbn-late)");
}

// Seed tags for mask/corruption derivations.
constexpr uint64_t kMaskTagA = 0xA11u;
constexpr uint64_t kMaskTagB = 0xB11u;
constexpr uint64_t kCorruptTag = 0xC11u;

data::PairedDataset apply_cli_masks(const data::PairedDataset& ds,
                                    std::optional<double> mask_a,
                                    std::optional<double> mask_b, double sigma,
                                    uint64_t seed_mask, data::MaskPhase phase) {
  data::PairedDataset cur = ds;
  if (mask_a) {
    data::MaskSpec spec;
    spec.target = Modality::A;
    spec.availability = *mask_a;
    spec.seed = derive_seed(seed_mask, kMaskTagA);
    spec.phase = phase;
    cur = data::apply_mask(cur, spec);
  }
  if (mask_b) {
    data::MaskSpec spec;
    spec.target = Modality::B;
    spec.availability = *mask_b;
    spec.seed = derive_seed(seed_mask, kMaskTagB);
    spec.phase = phase;
    cur = data::apply_mask(cur, spec);
  }
  if (sigma > 0.0) {
    data::NoiseSpec noise;
    noise.sigma = sigma;
    noise.fraction_corrupted = 1.0;
    noise.seed = derive_seed(seed_mask, kCorruptTag);
    cur = data::corrupt(cur, noise, Modality::A);
    cur = data::corrupt(cur, noise, Modality::B);
  }
  return cur;
}

json hyperparameter_echo(const model::ModelConfig& cfg) {
  return json{{"architecture", model::arch_name(cfg.arch)},
              {"fusion", model::fusion_name(cfg.fusion)},
              {"input_dim", cfg.input_dim},
              {"layer_dim", cfg.layer_dim},
              {"num_classes", cfg.num_classes},
              {"p_drop", cfg.p_drop},
              {"seed", cfg.seed}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"single-branch multimodal classifier benchmark"};
  app.require_subcommand(1);
  std::string config_path;

  // ---- gen
  auto* gen = app.add_subcommand("gen", "generate synthetic embedding banks");
  size_t g_classes = 10, g_per_class = 500, g_dim_a = 32, g_dim_b = 32;
  double g_sigma_a = 0.3, g_sigma_b = 0.3, g_rho = 0.5;
  uint64_t g_seed = 1;
  std::string g_out;
  gen->add_option("--classes", g_classes, "number of classes");
  gen->add_option("--dim-a", g_dim_a, "modality A dimension");
  gen->add_option("--dim-b", g_dim_b, "modality B dimension");
  gen->add_option("--per-class", g_per_class, "instances per class");
  gen->add_option("--sigma-a", g_sigma_a, "noise level for modality A");
  gen->add_option("--sigma-b", g_sigma_b, "noise level for modality B");
  gen->add_option("--rho", g_rho, "cross-modal noise correlation in [0,1]");
  gen->add_option("--seed", g_seed, "generation seed");
  gen->add_option("--out", g_out, "output directory");
  gen->add_option("--config", config_path, "JSON config file");

  // ---- train
  auto* train_cmd = app.add_subcommand("train", "train a model on two banks");
  DataFlags t_data;
  std::string t_model = "srmm", t_switch = "s1", t_out, t_log;
  size_t t_epochs = 50, t_batch = 256, t_layer_dim = 0;
  double t_lr = 0.01, t_beta1 = 0.9, t_beta2 = 0.999, t_adam_eps = 1e-8;
  double t_p_drop = 0.5, t_avail_a = 1.0, t_avail_b = 1.0;
  uint64_t t_seed_model = 1, t_seed_mask = 1;
  train_cmd->add_option("--bank-a", t_data.bank_a, "modality A bank file");
  train_cmd->add_option("--bank-b", t_data.bank_b, "modality B bank file");
  train_cmd->add_option("--model", t_model, "srmm|tbn-early|tbn-mid|tbn-late");
  train_cmd->add_option("--switch", t_switch, "switching strategy s1|s2|s3");
  train_cmd->add_option("--epochs", t_epochs, "training epochs");
  train_cmd->add_option("--batch-size", t_batch, "mini-batch size");
  train_cmd->add_option("--lr", t_lr, "Adam learning rate");
  train_cmd->add_option("--beta1", t_beta1, "Adam beta1");
  train_cmd->add_option("--beta2", t_beta2, "Adam beta2");
  train_cmd->add_option("--adam-eps", t_adam_eps, "Adam epsilon");
  train_cmd->add_option("--p-drop", t_p_drop, "dropout rate");
  train_cmd->add_option("--layer-dim", t_layer_dim,
                        "hidden width (0: use input dim)");
  train_cmd->add_option("--train-frac", t_data.train_frac,
                        "train fraction of the stratified split");
  train_cmd->add_option("--train-avail-a", t_avail_a,
                        "training availability of modality A");
  train_cmd->add_option("--train-avail-b", t_avail_b,
                        "training availability of modality B");
  train_cmd->add_option("--seed-model", t_seed_model,
                        "init + training stochasticity seed");
  train_cmd->add_option("--seed-data", t_data.seed_data, "split seed");
  train_cmd->add_option("--seed-mask", t_seed_mask,
                        "training availability mask seed");
  train_cmd->add_option("--out", t_out, "output model file (SBMD)");
  train_cmd->add_option("--log", t_log,
                        "training log path (default <out>.log.jsonl)");
  train_cmd->add_option("--config", config_path, "JSON config file");

  // ---- eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model");
  DataFlags e_data;
  std::string e_model_path, e_metric = "acc", e_space = "prob";
  double e_sigma = 0.0;
  std::optional<double> e_mask_a, e_mask_b;
  uint64_t e_seed_mask = 1;
  eval_cmd->add_option("--model", e_model_path, "model file");
  eval_cmd->add_option("--bank-a", e_data.bank_a, "modality A bank file");
  eval_cmd->add_option("--bank-b", e_data.bank_b, "modality B bank file");
  eval_cmd->add_option("--train-frac", e_data.train_frac, "split fraction");
  eval_cmd->add_option("--seed-data", e_data.seed_data, "split seed");
  eval_cmd->add_option("--split", e_data.part, "test|train|all");
  eval_cmd->add_option("--mask-a", e_mask_a, "availability of modality A");
  eval_cmd->add_option("--mask-b", e_mask_b, "availability of modality B");
  eval_cmd->add_option("--sigma", e_sigma, "corrupt both modalities");
  eval_cmd->add_option("--seed-mask", e_seed_mask, "mask/corruption seed");
  eval_cmd->add_option("--metric", e_metric, "acc|auroc");
  eval_cmd->add_option("--fusion-space", e_space, "prob|logit");
  eval_cmd->add_option("--config", config_path, "JSON config file");

  // ---- sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "availability/noise sweeps");
  DataFlags s_data;
  std::string s_model_path, s_metric = "acc", s_space = "prob";
  std::string s_target = "b", s_switch = "s1", s_out;
  std::string s_grid = "1.0,0.9,0.7,0.5,0.3,0.1,0.0", s_sigmas;
  uint64_t s_seed_mask = 1;
  sweep_cmd->add_option("--model", s_model_path, "model file");
  sweep_cmd->add_option("--bank-a", s_data.bank_a, "modality A bank file");
  sweep_cmd->add_option("--bank-b", s_data.bank_b, "modality B bank file");
  sweep_cmd->add_option("--train-frac", s_data.train_frac, "split fraction");
  sweep_cmd->add_option("--seed-data", s_data.seed_data, "split seed");
  sweep_cmd->add_option("--split", s_data.part, "test|train|all");
  sweep_cmd->add_option("--target", s_target, "masked modality a|b");
  sweep_cmd->add_option("--grid", s_grid, "availability levels, csv");
  sweep_cmd->add_option("--sigmas", s_sigmas,
                        "corruption sigmas, csv (adds a corruption sweep)");
  sweep_cmd->add_option("--seed-mask", s_seed_mask, "mask seed");
  sweep_cmd->add_option("--metric", s_metric, "acc|auroc");
  sweep_cmd->add_option("--fusion-space", s_space, "prob|logit");
  sweep_cmd->add_option("--switch", s_switch,
                        "strategy echoed into the report");
  sweep_cmd->add_option("--out", s_out, "output directory");
  sweep_cmd->add_option("--config", config_path, "JSON config file");

  // ---- gradcheck
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient audit");
  double gc_eps = 1e-5;
  std::string gc_prec = "double";
  uint64_t gc_seed = 1;
  bool gc_inject = false;
  grad_cmd->add_option("--eps", gc_eps, "finite-difference step");
  grad_cmd->add_option("--prec", gc_prec, "numeric precision (double)");
  grad_cmd->add_option("--seed", gc_seed, "randomization seed");
  grad_cmd->add_flag("--inject-fault", gc_inject,
                     "corrupt one gradient to prove the checker notices");
  grad_cmd->add_option("--config", config_path, "JSON config file");

  // ---- dump
  auto* dump_cmd =
      app.add_subcommand("dump", "export second-block embeddings as CSV");
  DataFlags d_data;
  std::string d_model_path, d_out;
  std::optional<double> d_mask_a, d_mask_b;
  uint64_t d_seed_mask = 1;
  dump_cmd->add_option("--model", d_model_path, "model file");
  dump_cmd->add_option("--bank-a", d_data.bank_a, "modality A bank file");
  dump_cmd->add_option("--bank-b", d_data.bank_b, "modality B bank file");
  dump_cmd->add_option("--train-frac", d_data.train_frac, "split fraction");
  dump_cmd->add_option("--seed-data", d_data.seed_data, "split seed");
  dump_cmd->add_option("--split", d_data.part, "test|train|all");
  dump_cmd->add_option("--mask-a", d_mask_a, "availability of modality A");
  dump_cmd->add_option("--mask-b", d_mask_b, "availability of modality B");
  dump_cmd->add_option("--seed-mask", d_seed_mask, "mask seed");
  dump_cmd->add_option("--out", d_out, "output CSV path");
  dump_cmd->add_option("--config", config_path, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 64;
  }

  try {
    json cfg = json::object();
    if (!config_path.empty()) cfg = load_config(config_path);

    // ---- gen
    if (gen->parsed()) {
      cfg_override(gen, cfg, "classes", g_classes);
      cfg_override(gen, cfg, "dim-a", g_dim_a);
      cfg_override(gen, cfg, "dim-b", g_dim_b);
      cfg_override(gen, cfg, "per-class", g_per_class);
      cfg_override(gen, cfg, "sigma-a", g_sigma_a);
      cfg_override(gen, cfg, "sigma-b", g_sigma_b);
      cfg_override(gen, cfg, "rho", g_rho);
      cfg_override(gen, cfg, "seed", g_seed);
      cfg_override(gen, cfg, "out", g_out);
      require_flag(!g_out.empty(), "--out");

      data::SyntheticSpec spec;
      spec.num_classes = g_classes;
      spec.dim_a = g_dim_a;
      spec.dim_b = g_dim_b;
      spec.per_class = g_per_class;
      spec.sigma_a = g_sigma_a;
      spec.sigma_b = g_sigma_b;
      spec.cross_modal_correlation = g_rho;
      spec.seed = g_seed;

      ensure_directory(g_out);
      const auto [bank_a, bank_b] = data::gen_synthetic(spec);
      data::write_bank(bank_a, (fs::path(g_out) / "bank_a.sbeb").string());
      data::write_bank(bank_b, (fs::path(g_out) / "bank_b.sbeb").string());

      json manifest{{"classes", g_classes},
                    {"dim_a", g_dim_a},
                    {"dim_b", g_dim_b},
                    {"per_class", g_per_class},
                    {"sigma_a", g_sigma_a},
                    {"sigma_b", g_sigma_b},
                    {"rho", g_rho},
                    {"seed", g_seed},
                    {"records_per_bank", bank_a.records.size()},
                    {"bank_a", "bank_a.sbeb"},
                    {"bank_b", "bank_b.sbeb"}};
      const auto manifest_path = (fs::path(g_out) / "manifest.json").string();
      std::ofstream ms(manifest_path, std::ios::trunc);
      if (!ms) throw_error(ErrorKind::io, "cannot write " + manifest_path);
      ms << manifest.dump(2) << "\n";

      std::cerr << "wrote " << bank_a.records.size()
                << " records per bank to " << g_out << "\n";
      return 0;
    }

    // ---- train
    if (train_cmd->parsed()) {
      cfg_override(train_cmd, cfg, "bank-a", t_data.bank_a);
      cfg_override(train_cmd, cfg, "bank-b", t_data.bank_b);
      cfg_override(train_cmd, cfg, "model", t_model);
      cfg_override(train_cmd, cfg, "switch", t_switch);
      cfg_override(train_cmd, cfg, "epochs", t_epochs);
      cfg_override(train_cmd, cfg, "batch-size", t_batch);
      cfg_override(train_cmd, cfg, "lr", t_lr);
      cfg_override(train_cmd, cfg, "beta1", t_beta1);
      cfg_override(train_cmd, cfg, "beta2", t_beta2);
      cfg_override(train_cmd, cfg, "adam-eps", t_adam_eps);
      cfg_override(train_cmd, cfg, "p-drop", t_p_drop);
      cfg_override(train_cmd, cfg, "layer-dim", t_layer_dim);
      cfg_override(train_cmd, cfg, "train-frac", t_data.train_frac);
      cfg_override(train_cmd, cfg, "train-avail-a", t_avail_a);
      cfg_override(train_cmd, cfg, "train-avail-b", t_avail_b);
      cfg_override(train_cmd, cfg, "seed-model", t_seed_model);
      cfg_override(train_cmd, cfg, "seed-data", t_data.seed_data);
      cfg_override(train_cmd, cfg, "seed-mask", t_seed_mask);
      cfg_override(train_cmd, cfg, "out", t_out);
      cfg_override(train_cmd, cfg, "log", t_log);
      require_flag(!t_out.empty(), "--out");

      const auto loaded = load_paired(t_data);
      std::optional<double> avail_a, avail_b;
      if (t_avail_a < 1.0) avail_a = t_avail_a;
      if (t_avail_b < 1.0) avail_b = t_avail_b;
      const auto trainset =
          apply_cli_masks(loaded.train, avail_a, avail_b, 0.0, t_seed_mask,
                          data::MaskPhase::train);

      const auto kind = parse_model_kind(t_model);
      model::ModelConfig mc;
      mc.arch = kind.arch;
      mc.fusion = kind.fusion;
      mc.input_dim = trainset.dim_a;
      mc.layer_dim = t_layer_dim == 0 ? trainset.dim_a : t_layer_dim;
      mc.num_classes = trainset.num_classes;
      mc.p_drop = t_p_drop;
      mc.seed = t_seed_model;
      auto m = model::Model::build(mc);

      train::TrainOptions opts;
      opts.epochs = t_epochs;
      opts.batch_size = t_batch;
      opts.adam.lr = t_lr;
      opts.adam.beta1 = t_beta1;
      opts.adam.beta2 = t_beta2;
      opts.adam.epsilon = t_adam_eps;
      opts.strategy = switching::SwitchStrategy::parse(t_switch);
      opts.seed = t_seed_model;

      const auto log = train::train(m, trainset, opts);
      m.quantize_to_stored_precision();
      m.save(t_out);

      const auto log_path = t_log.empty() ? t_out + ".log.jsonl" : t_log;
      std::ofstream ls(log_path, std::ios::trunc);
      if (!ls) throw_error(ErrorKind::io, "cannot write " + log_path);
      json header{{"event", "config"},
                  {"model", t_model},
                  {"switch", opts.strategy.name()},
                  {"epochs", t_epochs},
                  {"batch_size", t_batch},
                  {"lr", t_lr},
                  {"train_instances", trainset.size()},
                  {"hyperparameters", hyperparameter_echo(mc)}};
      ls << header.dump() << "\n";
      for (const auto& e : log) {
        json line{{"event", "epoch"},    {"epoch", e.epoch},
                  {"loss", e.loss},      {"train_accuracy", e.train_accuracy},
                  {"used_a", e.used_a},  {"used_b", e.used_b}};
        ls << line.dump() << "\n";
      }
      if (!log.empty())
        std::cerr << "trained " << t_model << " for " << log.size()
                  << " epochs; final loss " << log.back().loss
                  << ", train accuracy " << log.back().train_accuracy << "\n";
      std::cerr << "model written to " << t_out << "\n";
      return 0;
    }

    // ---- eval
    if (eval_cmd->parsed()) {
      cfg_override(eval_cmd, cfg, "model", e_model_path);
      cfg_override(eval_cmd, cfg, "bank-a", e_data.bank_a);
      cfg_override(eval_cmd, cfg, "bank-b", e_data.bank_b);
      cfg_override(eval_cmd, cfg, "train-frac", e_data.train_frac);
      cfg_override(eval_cmd, cfg, "seed-data", e_data.seed_data);
      cfg_override(eval_cmd, cfg, "split", e_data.part);
      cfg_override(eval_cmd, cfg, "sigma", e_sigma);
      cfg_override(eval_cmd, cfg, "seed-mask", e_seed_mask);
      cfg_override(eval_cmd, cfg, "metric", e_metric);
      cfg_override(eval_cmd, cfg, "fusion-space", e_space);
      require_flag(!e_model_path.empty(), "--model");
      validate_part(e_data.part);

      auto m = model::Model::load(e_model_path);
      const auto loaded = load_paired(e_data);
      const auto& base = select_part(loaded, e_data.part);

      const auto metric = eval::parse_metric(e_metric);
      const auto space = parse_fusion_space(e_space);
      const auto baseline = eval::evaluate(m, base, metric, space);

      const bool perturbed = e_mask_a || e_mask_b || e_sigma > 0.0;
      const auto scored =
          perturbed ? apply_cli_masks(base, e_mask_a, e_mask_b, e_sigma,
                                      e_seed_mask, data::MaskPhase::test)
                    : base;
      const auto value =
          perturbed ? eval::evaluate(m, scored, metric, space) : baseline;

      size_t both = 0, a_only = 0, b_only = 0;
      for (const auto& inst : scored.instances) {
        if (inst.avail_a && inst.avail_b)
          ++both;
        else if (inst.avail_a)
          ++a_only;
        else
          ++b_only;
      }

      json out{{"metric_kind", eval::metric_name(metric)},
               {"value", value.value},
               {"n", value.n},
               {"baseline", baseline.value},
               {"delta",
                baseline.value > 0.0
                    ? eval::degradation_delta(baseline.value, value.value)
                    : 0.0},
               {"mask_a", e_mask_a ? json(*e_mask_a) : json(nullptr)},
               {"mask_b", e_mask_b ? json(*e_mask_b) : json(nullptr)},
               {"sigma", e_sigma},
               {"split", e_data.part},
               {"fusion_space", e_space},
               {"seed_mask", e_seed_mask},
               {"counts",
                {{"both", both}, {"a_only", a_only}, {"b_only", b_only}}},
               {"hyperparameters", hyperparameter_echo(m.config())}};
      std::cout << out.dump(2) << "\n";
      std::cerr << eval::metric_name(metric) << " " << value.value << " over "
                << value.n << " instances\n";
      return 0;
    }

    // ---- sweep
    if (sweep_cmd->parsed()) {
      cfg_override(sweep_cmd, cfg, "model", s_model_path);
      cfg_override(sweep_cmd, cfg, "bank-a", s_data.bank_a);
      cfg_override(sweep_cmd, cfg, "bank-b", s_data.bank_b);
      cfg_override(sweep_cmd, cfg, "train-frac", s_data.train_frac);
      cfg_override(sweep_cmd, cfg, "seed-data", s_data.seed_data);
      cfg_override(sweep_cmd, cfg, "split", s_data.part);
      cfg_override(sweep_cmd, cfg, "target", s_target);
      cfg_override(sweep_cmd, cfg, "grid", s_grid);
      cfg_override(sweep_cmd, cfg, "sigmas", s_sigmas);
      cfg_override(sweep_cmd, cfg, "seed-mask", s_seed_mask);
      cfg_override(sweep_cmd, cfg, "metric", s_metric);
      cfg_override(sweep_cmd, cfg, "fusion-space", s_space);
      cfg_override(sweep_cmd, cfg, "switch", s_switch);
      cfg_override(sweep_cmd, cfg, "out", s_out);
      require_flag(!s_model_path.empty(), "--model");
      require_flag(!s_out.empty(), "--out");
      validate_part(s_data.part);

      auto m = model::Model::load(s_model_path);
      const auto loaded = load_paired(s_data);
      const auto& base = select_part(loaded, s_data.part);
      ensure_directory(s_out);

      eval::SweepOptions opts;
      opts.seed = s_seed_mask;
      opts.metric = eval::parse_metric(s_metric);
      opts.space = parse_fusion_space(s_space);
      opts.strategy = switching::SwitchStrategy::parse(s_switch).name();
      opts.model_sha = Sha256::of_file(s_model_path);

      const auto target = parse_modality(s_target);
      const auto grid = parse_grid(s_grid, "--grid");
      const std::string provenance =
          json{{"hyperparameters", hyperparameter_echo(m.config())}}.dump();
      const auto missing = eval::sweep_missing(m, base, target, grid, opts);
      const std::string tag =
          std::string("missing_") + (target == Modality::A ? "a" : "b");
      eval::write_sweep_json(missing,
                             (fs::path(s_out) / (tag + ".json")).string(),
                             provenance);
      eval::write_sweep_csv(missing,
                            (fs::path(s_out) / (tag + ".csv")).string());
      std::cerr << "missing-modality sweep over " << grid.size()
                << " levels written to " << s_out << "\n";

      if (!s_sigmas.empty()) {
        const auto sigmas = parse_grid(s_sigmas, "--sigmas");
        const auto corruption = eval::sweep_corruption(m, base, sigmas, opts);
        eval::write_sweep_json(corruption,
                               (fs::path(s_out) / "corruption.json").string(),
                               provenance);
        eval::write_sweep_csv(corruption,
                              (fs::path(s_out) / "corruption.csv").string());
        std::cerr << "corruption sweep over " << sigmas.size()
                  << " sigmas written to " << s_out << "\n";
      }
      return 0;
    }

    // ---- gradcheck
    if (grad_cmd->parsed()) {
      cfg_override(grad_cmd, cfg, "eps", gc_eps);
      cfg_override(grad_cmd, cfg, "prec", gc_prec);
      cfg_override(grad_cmd, cfg, "seed", gc_seed);
      if (gc_prec != "double")
        throw_error(ErrorKind::config,
                    "--prec '" + gc_prec + "' unsupported (double only)");

      std::printf("gradient audit: eps=%g prec=%s seed=%llu kernels=%s%s\n",
                  gc_eps, gc_prec.c_str(),
                  static_cast<unsigned long long>(gc_seed),
                  kernels::backend_name().c_str(),
                  gc_inject ? " [fault injected]" : "");

      Rng rng(derive_seed(gc_seed, 0x6C));
      const auto gaussian_input = [&rng](size_t rows, size_t cols) {
        DenseMatrix x(rows, cols);
        for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
        return x;
      };

      std::vector<net::GradCheckEntry> rows;
      {
        net::LinearLayer linear(16, 32);
        for (size_t i = 0; i < linear.weight().value.size(); ++i)
          linear.weight().value.data()[i] = rng.normal(0.0, 0.3);
        rows.push_back(
            net::check_layer(linear, gaussian_input(8, 16), gc_eps, gc_seed));
      }
      {
        net::BatchNormLayer bn(16);
        rows.push_back(
            net::check_layer(bn, gaussian_input(8, 16), gc_eps, gc_seed));
      }
      {
        net::ReluLayer relu;
        rows.push_back(net::check_layer(relu, gaussian_input(8, 16), gc_eps,
                                        gc_seed, 1e-2));
      }
      {
        net::DropoutLayer dropout(0.5);
        rows.push_back(
            net::check_layer(dropout, gaussian_input(8, 16), gc_eps, gc_seed));
      }
      {
        net::L2NormLayer l2;
        rows.push_back(
            net::check_layer(l2, gaussian_input(8, 16), gc_eps, gc_seed));
      }
      rows.push_back(net::check_softmax_ce(8, 5, gc_eps, gc_seed));

      model::ModelConfig mc;
      mc.input_dim = 16;
      mc.layer_dim = 32;
      mc.num_classes = 5;
      mc.p_drop = 0.5;
      mc.seed = derive_seed(gc_seed, 0x11);
      auto m = model::Model::build(mc);
      const auto x = gaussian_input(8, 16);
      std::vector<int> labels(8);
      for (auto& l : labels) l = static_cast<int>(rng.below(5));

      net::GradCheckOptions opts;
      opts.eps = gc_eps;
      opts.seed = derive_seed(gc_seed, 0x22);
      if (gc_inject) opts.corrupt_tensor = 0;
      const auto network =
          net::check_network_params(m.trunk(), x, labels, opts);

      std::printf("%-24s %-14s %s\n", "check", "max_rel_err", "coords");
      for (const auto& r : rows)
        std::printf("%-24s %-14.3e %zu\n", r.name.c_str(), r.max_rel_err,
                    r.coords_checked);
      double network_max = 0.0;
      for (const auto& r : network) {
        std::printf("%-24s %-14.3e %zu\n", ("net." + r.name).c_str(),
                    r.max_rel_err, r.coords_checked);
        network_max = std::max(network_max, r.max_rel_err);
      }
      const double overall = std::max(net::max_rel_err(rows), network_max);
      const bool pass = overall < 1e-4;
      std::printf("max relative error: %.3e -> %s\n", overall,
                  pass ? "PASS" : "FAIL");
      return pass ? 0 : 1;
    }

    // ---- dump
    if (dump_cmd->parsed()) {
      cfg_override(dump_cmd, cfg, "model", d_model_path);
      cfg_override(dump_cmd, cfg, "bank-a", d_data.bank_a);
      cfg_override(dump_cmd, cfg, "bank-b", d_data.bank_b);
      cfg_override(dump_cmd, cfg, "train-frac", d_data.train_frac);
      cfg_override(dump_cmd, cfg, "seed-data", d_data.seed_data);
      cfg_override(dump_cmd, cfg, "split", d_data.part);
      cfg_override(dump_cmd, cfg, "seed-mask", d_seed_mask);
      cfg_override(dump_cmd, cfg, "out", d_out);
      require_flag(!d_model_path.empty(), "--model");
      require_flag(!d_out.empty(), "--out");
      validate_part(d_data.part);

      auto m = model::Model::load(d_model_path);
      const auto loaded = load_paired(d_data);
      auto ds = select_part(loaded, d_data.part);
      if (d_mask_a || d_mask_b)
        ds = apply_cli_masks(ds, d_mask_a, d_mask_b, 0.0, d_seed_mask,
                             data::MaskPhase::test);
      eval::dump_block2_csv(m, ds, d_out);
      std::cerr << "embeddings written to " << d_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 64;
}
