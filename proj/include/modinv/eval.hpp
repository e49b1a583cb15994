#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modinv/data.hpp"
#include "modinv/model.hpp"

namespace modinv::eval {

enum class MetricKind { accuracy, auroc };

struct MetricValue {
  MetricKind kind = MetricKind::accuracy;
  double value = 0.0;
  size_t n = 0;
};

MetricKind parse_metric(const std::string& name);
const char* metric_name(MetricKind kind);

// Fraction of predictions equal to the label.
MetricValue accuracy(std::span<const int> predictions,
                     std::span<const int> labels);

// Mann-Whitney rank AUC with midrank tie handling:
// (R_pos - n_pos(n_pos+1)/2) / (n_pos * n_neg). Labels are 0/1 and both
// classes must be present.
MetricValue auroc(std::span<const double> scores, std::span<const int> labels);

// (p_complete - p_missing) / p_complete. p_complete must be positive.
double degradation_delta(double p_complete, double p_missing);

// Formats the ratio as a percentage with one decimal, e.g. "28.3%".
std::string delta_percent_string(double delta);

// Dataset -> batched prediction input (honoring availability flags).
model::BatchView make_batch_view(const data::PairedDataset& dataset);

std::vector<model::Prediction> predict_dataset(
    model::Model& m, const data::PairedDataset& dataset,
    model::FusionSpace space = model::FusionSpace::prob);

// Runs prediction with the fallback rule and scores it. For AUROC the
// score is the fused probability of class 1 (binary tasks only).
MetricValue evaluate(model::Model& m, const data::PairedDataset& dataset,
                     MetricKind kind,
                     model::FusionSpace space = model::FusionSpace::prob);

enum class SweepType { missing, corruption };

struct SweepReport {
  SweepType type = SweepType::missing;
  std::vector<double> grid;  // availability levels, or sigmas
  MetricKind metric_kind = MetricKind::accuracy;
  std::vector<double> values;
  std::vector<double> deltas;  // vs the complete entry; ratio, not percent
  double sigma = 0.0;          // fixed corruption during a missing sweep
  std::string strategy;        // provenance echo from the CLI
  uint64_t seed = 0;
  std::string model_sha;
  std::string target;  // masked modality for missing sweeps
};

struct SweepOptions {
  uint64_t seed = 0;
  MetricKind metric = MetricKind::accuracy;
  model::FusionSpace space = model::FusionSpace::prob;
  size_t threads = 0;  // 0: MODINV_THREADS or hardware_concurrency
  std::string strategy;
  std::string model_sha;
};

// One metric per availability level; each level masks the test set with a
// level-derived seed and scores predictions under the fallback rule. The
// grid must contain 1.0, which anchors the deltas.
SweepReport sweep_missing(const model::Model& m,
                          const data::PairedDataset& test, Modality target,
                          std::span<const double> grid,
                          const SweepOptions& opts);

// One metric per sigma; both modalities corrupted at fraction 1.0.
// Sigma 0 reproduces the clean metric bit-exactly.
SweepReport sweep_corruption(const model::Model& m,
                             const data::PairedDataset& test,
                             std::span<const double> sigmas,
                             const SweepOptions& opts);

// `provenance_json` (optional) is a serialized JSON object merged into the
// report, used by the CLI to echo the model hyperparameters.
void write_sweep_json(const SweepReport& report, const std::string& path,
                      const std::string& provenance_json = "");
void write_sweep_csv(const SweepReport& report, const std::string& path);

// CSV rows id,label,modality,e0..e{k-1}: one row per available modality for
// the single branch and late fusion, one fused row for early/mid.
void dump_block2_csv(model::Model& m, const data::PairedDataset& dataset,
                     const std::string& path);

size_t sweep_thread_cap();  // MODINV_THREADS, defaulting to hardware cores

}  // namespace modinv::eval
