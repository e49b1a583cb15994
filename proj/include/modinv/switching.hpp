#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modinv/data.hpp"
#include "modinv/types.hpp"

namespace modinv::switching {

enum class StrategyTag { S1, S2, S3 };

// S-1: every batch multimodal, per-sample uniform choice.
// S-2: each batch is multimodal with probability 1/2, otherwise unimodal.
// S-3: every batch unimodal with a per-batch uniform modality.
struct SwitchStrategy {
  StrategyTag tag = StrategyTag::S1;
  double multimodal_batch_fraction = 1.0;

  static SwitchStrategy s1() { return {StrategyTag::S1, 1.0}; }
  static SwitchStrategy s2() { return {StrategyTag::S2, 0.5}; }
  static SwitchStrategy s3() { return {StrategyTag::S3, 0.0}; }
  static SwitchStrategy parse(const std::string& name);
  const char* name() const;
};

struct Assignment {
  int64_t instance_id;
  size_t instance_index;  // index into the dataset's instance list
  Modality modality;
};

struct Batch {
  std::vector<Assignment> samples;
};

// One epoch's ordered batches. Every training instance appears exactly
// once, and no sample is ever assigned an unavailable modality.
struct BatchPlan {
  std::vector<Batch> batches;
  uint64_t epoch_seed = 0;

  size_t total_samples() const;
};

BatchPlan plan_epoch(const data::PairedDataset& dataset,
                     const SwitchStrategy& strategy, size_t batch_size,
                     size_t epoch_index, uint64_t seed);

struct PlanStats {
  size_t total = 0;
  size_t count_a = 0;
  size_t count_b = 0;
  size_t mixed_batches = 0;  // contain both modalities
  size_t pure_batches = 0;   // single modality throughout
  std::vector<double> per_batch_fraction_a;

  double fraction_a() const {
    return total == 0 ? 0.0 : static_cast<double>(count_a) / total;
  }
  double mixed_fraction() const {
    const size_t batches = mixed_batches + pure_batches;
    return batches == 0 ? 0.0 : static_cast<double>(mixed_batches) / batches;
  }
};

PlanStats strategy_stats(const BatchPlan& plan);

}  // namespace modinv::switching
