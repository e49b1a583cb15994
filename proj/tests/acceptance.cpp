// Acceptance suite: one check per release criterion, each printed as a
// single [PASS]/[FAIL] line. Run all with no arguments or one criterion
// with `--criterion N`. Exits nonzero if any executed criterion fails.

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "modinv/data.hpp"
#include "modinv/eval.hpp"
#include "modinv/gradcheck.hpp"
#include "modinv/model.hpp"
#include "modinv/rng.hpp"
#include "modinv/switching.hpp"
#include "modinv/trainer.hpp"

using namespace modinv;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  std::vsnprintf(buf, sizeof(buf), pattern, args);
  va_end(args);
  return buf;
}

// ---------------------------------------------------------------------------
// shared fixtures

constexpr size_t kBenchLayerDim = 64;
constexpr uint64_t kBenchSplitSeed = 1;
constexpr uint64_t kBenchTrainSeeds[3] = {1, 2, 3};

data::PairedDataset benchmark_dataset() {
  data::SyntheticSpec spec;  // C=10, d=32, per_class=500, sigma=0.3, rho=0.5
  spec.seed = 7;
  const auto [bank_a, bank_b] = data::gen_synthetic(spec);
  return data::pair_banks(bank_a, bank_b);
}

model::ModelConfig benchmark_config(model::Arch arch, model::Fusion fusion,
                                    uint64_t seed) {
  model::ModelConfig cfg;
  cfg.arch = arch;
  cfg.fusion = fusion;
  cfg.input_dim = 32;
  cfg.layer_dim = kBenchLayerDim;
  cfg.num_classes = 10;
  cfg.p_drop = 0.5;
  cfg.seed = seed;
  return cfg;
}

train::TrainOptions benchmark_train_options(uint64_t seed) {
  train::TrainOptions opts;
  opts.epochs = 30;
  opts.batch_size = 256;
  opts.adam.lr = 0.01;
  opts.strategy = switching::SwitchStrategy::s1();
  opts.seed = seed;
  return opts;
}

data::PairedDataset mask_b_to(const data::PairedDataset& ds, double level,
                              uint64_t seed) {
  data::MaskSpec spec;
  spec.target = Modality::B;
  spec.availability = level;
  spec.seed = seed;
  return data::apply_mask(ds, spec);
}

// ---------------------------------------------------------------------------
// criteria

bool criterion_1_gradients(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(0xACC1);

  // Isolated layers at 1e-5 (ReLU checked away from the kink).
  std::vector<net::GradCheckEntry> layer_entries;
  {
    net::LinearLayer linear(16, 32);
    for (size_t i = 0; i < linear.weight().value.size(); ++i)
      linear.weight().value.data()[i] = rng.normal(0.0, 0.3);
    DenseMatrix x(8, 16);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    layer_entries.push_back(net::check_layer(linear, x, 1e-5, 11));
  }
  {
    net::BatchNormLayer bn(16);
    DenseMatrix x(8, 16);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    layer_entries.push_back(net::check_layer(bn, x, 1e-5, 12));
  }
  {
    net::ReluLayer relu;
    DenseMatrix x(8, 16);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    layer_entries.push_back(net::check_layer(relu, x, 1e-5, 13, 1e-2));
  }
  {
    net::DropoutLayer dropout(0.5);
    DenseMatrix x(8, 16);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    layer_entries.push_back(net::check_layer(dropout, x, 1e-5, 14));
  }
  {
    net::L2NormLayer l2;
    DenseMatrix x(8, 16);
    for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    layer_entries.push_back(net::check_layer(l2, x, 1e-5, 15));
  }
  layer_entries.push_back(net::check_softmax_ce(8, 5, 1e-5, 16));
  const double layer_max = net::max_rel_err(layer_entries);

  // Full stack: d=16, layer=32, C=5, batch 8, double precision.
  model::ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.layer_dim = 32;
  cfg.num_classes = 5;
  cfg.p_drop = 0.5;
  cfg.seed = 5;
  auto m = model::Model::build(cfg);
  DenseMatrix x(8, 16);
  for (size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<int> labels(8);
  for (auto& l : labels) l = static_cast<int>(rng.below(5));
  net::GradCheckOptions opts;
  opts.eps = 1e-5;
  opts.seed = 17;
  const auto network = net::check_network_params(m.trunk(), x, labels, opts);
  const double network_max = net::max_rel_err(network);

  const double elapsed = seconds_since(start);
  detail = fmt("network max %.2e (<1e-4), per-layer max %.2e (<1e-5), %.1fs",
               network_max, layer_max, elapsed);
  return network_max < 1e-4 && layer_max < 1e-5 && elapsed < 10.0;
}

bool criterion_2_delta_formula(std::string& detail) {
  const double delta = eval::degradation_delta(91.9, 65.9);
  const std::string printed = eval::delta_percent_string(delta);
  detail = fmt("degradation_delta(91.9, 65.9) prints %s", printed.c_str());
  return printed == "28.3%";
}

bool criterion_3_auroc_oracle(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(0xACC3);
  double worst = 0.0;
  size_t total_scores = 0, tied_scores = 0;

  for (int trial = 0; trial < 1000; ++trial) {
    const size_t n = 2 + rng.below(499);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
      // Coarse quantization so tied scores are frequent.
      scores[i] = std::floor(rng.uniform() * 25.0) / 25.0;
      labels[i] = rng.uniform() < 0.35 ? 1 : 0;
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos) labels[0] = 1;
    if (!has_neg) labels[n - 1] = 0;

    std::map<double, size_t> counts;
    for (double s : scores) counts[s] += 1;
    for (const auto& [score, count] : counts)
      if (count > 1) tied_scores += count;
    total_scores += n;

    // O(n^2) pairwise oracle with half-credit ties.
    double wins = 0.0;
    size_t pairs = 0;
    for (size_t i = 0; i < n; ++i) {
      if (labels[i] == 0) continue;
      for (size_t j = 0; j < n; ++j) {
        if (labels[j] != 0) continue;
        ++pairs;
        if (scores[i] > scores[j])
          wins += 1.0;
        else if (scores[i] == scores[j])
          wins += 0.5;
      }
    }
    const double oracle = wins / static_cast<double>(pairs);
    const double fast = eval::auroc(scores, labels).value;
    worst = std::max(worst, std::abs(fast - oracle));
  }

  const double tie_fraction =
      static_cast<double>(tied_scores) / static_cast<double>(total_scores);
  const double elapsed = seconds_since(start);
  detail = fmt("1000 instances, worst |diff| %.2e (<=1e-12), tie fraction "
               "%.0f%%, %.1fs",
               worst, tie_fraction * 100.0, elapsed);
  return worst <= 1e-12 && tie_fraction >= 0.10 && elapsed < 30.0;
}

bool criterion_4_synthetic_end_to_end(std::string& detail) {
  const auto start = Clock::now();
  const auto all = benchmark_dataset();
  const auto [trainset, testset] = data::split(all, 0.75, kBenchSplitSeed);

  double srmm_complete = 0.0, srmm_b0 = 0.0, tbn_b0 = 0.0, uni_b0 = 0.0;
  std::vector<double> mean_curve;
  const std::vector<double> grid{1.0, 0.9, 0.7, 0.5, 0.3, 0.1, 0.0};

  for (uint64_t seed : kBenchTrainSeeds) {
    auto srmm = model::Model::build(
        benchmark_config(model::Arch::single_branch, model::Fusion::none,
                         seed));
    train::train(srmm, trainset, benchmark_train_options(seed));

    auto tbn = model::Model::build(
        benchmark_config(model::Arch::two_branch, model::Fusion::early, seed));
    train::train(tbn, trainset, benchmark_train_options(seed));

    auto uni = model::Model::build(
        benchmark_config(model::Arch::single_branch, model::Fusion::none,
                         seed));
    train::train(uni, mask_b_to(trainset, 0.0, 31), benchmark_train_options(seed));

    const auto test_b0 = mask_b_to(testset, 0.0, 33);
    srmm_complete +=
        eval::evaluate(srmm, testset, eval::MetricKind::accuracy).value;
    srmm_b0 += eval::evaluate(srmm, test_b0, eval::MetricKind::accuracy).value;
    tbn_b0 += eval::evaluate(tbn, test_b0, eval::MetricKind::accuracy).value;
    uni_b0 += eval::evaluate(uni, test_b0, eval::MetricKind::accuracy).value;

    eval::SweepOptions sweep_opts;
    sweep_opts.seed = 35;
    const auto report =
        eval::sweep_missing(srmm, testset, Modality::B, grid, sweep_opts);
    if (mean_curve.empty()) mean_curve.assign(report.values.size(), 0.0);
    for (size_t i = 0; i < report.values.size(); ++i)
      mean_curve[i] += report.values[i];
  }
  srmm_complete /= 3.0;
  srmm_b0 /= 3.0;
  tbn_b0 /= 3.0;
  uni_b0 /= 3.0;
  for (auto& v : mean_curve) v /= 3.0;

  const bool a_ok = srmm_complete >= 0.95;
  const bool b_ok = srmm_b0 - tbn_b0 >= 0.05;
  const bool c_ok = std::abs(srmm_b0 - uni_b0) <= 0.05;
  bool d_ok = true;
  for (size_t i = 0; i + 1 < mean_curve.size(); ++i)
    if (mean_curve[i + 1] > mean_curve[i] + 0.005) d_ok = false;
  const double elapsed = seconds_since(start);

  detail = fmt("complete %.4f (a:%s), @B=0 srmm %.4f vs tbn-early %.4f "
               "(b:%s), unimodal-A %.4f (c:%s), curve %s (d:%s), %.0fs",
               srmm_complete, a_ok ? "ok" : "FAIL", srmm_b0, tbn_b0,
               b_ok ? "ok" : "FAIL", uni_b0, c_ok ? "ok" : "FAIL",
               d_ok ? "nonincreasing" : "NON-MONOTONE",
               d_ok ? "ok" : "FAIL", elapsed);
  return a_ok && b_ok && c_ok && d_ok && elapsed < 300.0;
}

bool criterion_5_corruption(std::string& detail) {
  const auto all = benchmark_dataset();
  const auto [trainset, testset] = data::split(all, 0.75, kBenchSplitSeed);
  auto srmm = model::Model::build(
      benchmark_config(model::Arch::single_branch, model::Fusion::none, 1));
  train::train(srmm, trainset, benchmark_train_options(1));

  const double clean =
      eval::evaluate(srmm, testset, eval::MetricKind::accuracy).value;
  eval::SweepOptions opts;
  opts.seed = 41;
  const std::vector<double> sigmas{0.0, 0.1, 0.5, 1.0};
  const auto report = eval::sweep_corruption(srmm, testset, sigmas, opts);

  const bool identity_ok = report.values[0] == clean;
  bool trend_ok = true;
  for (size_t i = 0; i + 1 < report.values.size(); ++i)
    if (report.values[i + 1] > report.values[i] + 0.005) trend_ok = false;

  detail = fmt("sigma grid {0, 0.1, 0.5, 1.0} -> {%.4f, %.4f, %.4f, %.4f}; "
               "sigma-0 %s clean %.4f; trend %s",
               report.values[0], report.values[1], report.values[2],
               report.values[3], identity_ok ? "==" : "!=", clean,
               trend_ok ? "nonincreasing" : "NON-MONOTONE");
  return identity_ok && trend_ok;
}

bool criterion_6_switching(std::string& detail) {
  // 500,000 instances in batches of 50: 10,000 planned batches per epoch.
  data::PairedDataset ds;
  ds.dim_a = ds.dim_b = 2;
  ds.num_classes = 2;
  ds.instances.reserve(500000);
  for (size_t i = 0; i < 500000; ++i) {
    data::PairedInstance inst;
    inst.id = static_cast<int64_t>(i);
    inst.label = static_cast<int>(i % 2);
    inst.vec_a = {1.0f, 0.0f};
    inst.vec_b = {0.0f, 1.0f};
    inst.avail_a = inst.avail_b = true;
    ds.instances.push_back(std::move(inst));
  }

  const auto p1 = switching::plan_epoch(ds, switching::SwitchStrategy::s1(),
                                        50, 0, 61);
  const auto s1 = switching::strategy_stats(p1);
  const bool s1_ok = s1.fraction_a() >= 0.494 && s1.fraction_a() <= 0.506;

  const auto p2 = switching::plan_epoch(ds, switching::SwitchStrategy::s2(),
                                        50, 0, 62);
  const auto s2 = switching::strategy_stats(p2);
  const bool s2_ok = s2.mixed_fraction() >= 0.485 &&
                     s2.mixed_fraction() <= 0.515 &&
                     p2.batches.size() == 10000;

  const auto p3 = switching::plan_epoch(ds, switching::SwitchStrategy::s3(),
                                        50, 0, 63);
  const auto s3 = switching::strategy_stats(p3);
  const bool s3_ok = s3.mixed_batches == 0;

  // Coverage: every instance exactly once, in each plan.
  bool coverage_ok = true;
  for (const auto* plan : {&p1, &p2, &p3}) {
    std::vector<char> seen(ds.size(), 0);
    size_t count = 0;
    for (const auto& batch : plan->batches)
      for (const auto& s : batch.samples) {
        if (seen[s.instance_index]) coverage_ok = false;
        seen[s.instance_index] = 1;
        ++count;
      }
    if (count != ds.size()) coverage_ok = false;
  }

  detail = fmt("S-1 fraction A %.4f in [.494,.506]:%s; S-2 multimodal %.4f "
               "in [.485,.515]:%s; S-3 mixed batches %zu:%s; coverage:%s",
               s1.fraction_a(), s1_ok ? "ok" : "FAIL", s2.mixed_fraction(),
               s2_ok ? "ok" : "FAIL", s3.mixed_batches, s3_ok ? "ok" : "FAIL",
               coverage_ok ? "ok" : "FAIL");
  return s1_ok && s2_ok && s3_ok && coverage_ok;
}

bool criterion_7_determinism(std::string& detail) {
  const auto tmp_dir = std::filesystem::temp_directory_path() /
                       ("modinv_acceptance_" + std::to_string(::getpid()));
  std::filesystem::create_directories(tmp_dir);
  const auto file = [&](const char* name) {
    return (tmp_dir / name).string();
  };
  const auto bytes_of = [](const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(is),
                       std::istreambuf_iterator<char>()};
  };

  // Small, fast training setup.
  data::SyntheticSpec spec;
  spec.num_classes = 5;
  spec.dim_a = spec.dim_b = 12;
  spec.per_class = 60;
  spec.seed = 71;
  const auto [bank_a, bank_b] = data::gen_synthetic(spec);
  const auto ds = data::pair_banks(bank_a, bank_b);

  model::ModelConfig cfg;
  cfg.input_dim = 12;
  cfg.layer_dim = 16;
  cfg.num_classes = 5;
  cfg.p_drop = 0.5;
  cfg.seed = 9;
  train::TrainOptions opts;
  opts.epochs = 5;
  opts.batch_size = 64;
  opts.seed = 9;

  auto m1 = model::Model::build(cfg);
  train::train(m1, ds, opts);
  m1.quantize_to_stored_precision();
  m1.save(file("m1.sbmd"));
  auto m2 = model::Model::build(cfg);
  train::train(m2, ds, opts);
  m2.quantize_to_stored_precision();
  m2.save(file("m2.sbmd"));
  const bool train_ok = bytes_of(file("m1.sbmd")) == bytes_of(file("m2.sbmd"));

  // Save/load round trip: identical files and identical predictions.
  auto loaded = model::Model::load(file("m1.sbmd"));
  loaded.save(file("m1_rt.sbmd"));
  const bool file_ok =
      bytes_of(file("m1.sbmd")) == bytes_of(file("m1_rt.sbmd"));
  auto reloaded = model::Model::load(file("m1_rt.sbmd"));
  const auto pred1 = eval::predict_dataset(loaded, ds);
  const auto pred2 = eval::predict_dataset(reloaded, ds);
  bool predict_ok = pred1.size() == pred2.size();
  for (size_t i = 0; predict_ok && i < pred1.size(); ++i)
    predict_ok = pred1[i].probs == pred2[i].probs &&
                 pred1[i].predicted_class == pred2[i].predicted_class;

  // SBEB round trip.
  data::write_bank(bank_a, file("bank.sbeb"));
  const auto bank_rt = data::read_bank(file("bank.sbeb"));
  data::write_bank(bank_rt, file("bank_rt.sbeb"));
  const bool bank_ok =
      bytes_of(file("bank.sbeb")) == bytes_of(file("bank_rt.sbeb"));

  std::error_code ec;
  std::filesystem::remove_all(tmp_dir, ec);

  detail = fmt("train-twice files %s; save/load predictions %s; SBEB round "
               "trip %s",
               train_ok ? "identical" : "DIFFER",
               predict_ok && file_ok ? "identical" : "DIFFER",
               bank_ok ? "identical" : "DIFFER");
  return train_ok && file_ok && predict_ok && bank_ok;
}

bool criterion_8_parameter_count(std::string& detail) {
  model::ModelConfig cfg;
  cfg.input_dim = 768;
  cfg.layer_dim = 768;
  cfg.num_classes = 101;
  cfg.p_drop = 0.5;
  cfg.seed = 1;
  auto m = model::Model::build(cfg);
  const size_t count = m.parameter_count();
  detail = fmt("config(768, 768, 101) reports %zu parameters (expected "
               "1258085; three biased FC layers + batchnorm gain/shift total "
               "590592 + 1536 + 590592 + 77669)",
               count);
  return count == 1258085u;
}

bool criterion_9_fusion_rule(std::string& detail) {
  const auto all = benchmark_dataset();
  const auto [trainset, testset] = data::split(all, 0.75, kBenchSplitSeed);
  auto srmm = model::Model::build(
      benchmark_config(model::Arch::single_branch, model::Fusion::none, 1));
  train::TrainOptions opts = benchmark_train_options(1);
  opts.epochs = 3;  // the rule is structural; a few epochs make it non-trivial
  train::train(srmm, trainset, opts);

  const auto fused = eval::predict_dataset(srmm, testset);

  // Single-modality views of the same instances.
  auto view_a = eval::make_batch_view(testset);
  std::fill(view_a.has_b.begin(), view_a.has_b.end(), 0);
  const auto only_a = srmm.predict_batch(view_a);
  auto view_b = eval::make_batch_view(testset);
  std::fill(view_b.has_a.begin(), view_b.has_a.end(), 0);
  const auto only_b = srmm.predict_batch(view_b);

  double worst_mean = 0.0, worst_sum = 0.0;
  size_t checked = 0;
  for (size_t i = 0; i < testset.size(); ++i) {
    const auto& inst = testset.instances[i];
    if (!inst.avail_a || !inst.avail_b) continue;
    ++checked;
    double sum = 0.0;
    for (size_t c = 0; c < fused[i].probs.size(); ++c) {
      const double mean = 0.5 * (only_a[i].probs[c] + only_b[i].probs[c]);
      worst_mean = std::max(worst_mean,
                            std::abs(fused[i].probs[c] - mean));
      sum += fused[i].probs[c];
    }
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  detail = fmt("%zu instances: max |fused - mean| %.2e (<=1e-12), max "
               "|sum-1| %.2e (<=1e-9)",
               checked, worst_mean, worst_sum);
  return checked > 0 && worst_mean <= 1e-12 && worst_sum <= 1e-9;
}

struct Criterion {
  int id;
  const char* title;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc)
      only = std::atoi(argv[++i]);
  }

  const std::vector<Criterion> criteria{
      {1, "gradient correctness", criterion_1_gradients},
      {2, "degradation formula", criterion_2_delta_formula},
      {3, "auroc oracle equivalence", criterion_3_auroc_oracle},
      {4, "synthetic end-to-end robustness", criterion_4_synthetic_end_to_end},
      {5, "corruption identity and trend", criterion_5_corruption},
      {6, "switching distribution", criterion_6_switching},
      {7, "determinism and persistence", criterion_7_determinism},
      {8, "parameter count", criterion_8_parameter_count},
      {9, "fusion rule", criterion_9_fusion_rule},
  };

  int failures = 0, executed = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    ++executed;
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", c.id,
                c.title, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (executed == 0) {
    std::fprintf(stderr, "no such criterion\n");
    return 64;
  }
  return failures == 0 ? 0 : 1;
}
