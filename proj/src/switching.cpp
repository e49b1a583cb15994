#include "modinv/switching.hpp"

#include "modinv/error.hpp"
#include "modinv/rng.hpp"

namespace modinv::switching {

SwitchStrategy SwitchStrategy::parse(const std::string& name) {
  if (name == "s1" || name == "S1") return s1();
  if (name == "s2" || name == "S2") return s2();
  if (name == "s3" || name == "S3") return s3();
  throw_error(ErrorKind::config,
              "unknown switching strategy '" + name + "' (want s1|s2|s3)");
}

const char* SwitchStrategy::name() const {
  switch (tag) {
    case StrategyTag::S1:
      return "s1";
    case StrategyTag::S2:
      return "s2";
    case StrategyTag::S3:
      return "s3";
  }
  return "?";
}

size_t BatchPlan::total_samples() const {
  size_t n = 0;
  for (const auto& b : batches) n += b.samples.size();
  return n;
}

namespace {

Modality pick_available(const data::PairedInstance& inst, Modality wanted) {
  if (inst.avail(wanted)) return wanted;
  const Modality fallback = other(wanted);
  if (inst.avail(fallback)) return fallback;
  throw_error(ErrorKind::availability,
              "instance " + std::to_string(inst.id) +
                  " has no available modality");
}

Modality pick_uniform(const data::PairedInstance& inst, Rng& rng) {
  if (inst.avail_a && inst.avail_b)
    return rng.coin() ? Modality::A : Modality::B;
  return pick_available(inst, Modality::A);
}

}  // namespace

BatchPlan plan_epoch(const data::PairedDataset& dataset,
                     const SwitchStrategy& strategy, size_t batch_size,
                     size_t epoch_index, uint64_t seed) {
  if (batch_size < 1)
    throw_error(ErrorKind::config, "plan_epoch: batch_size must be >= 1");
  if (dataset.size() == 0)
    throw_error(ErrorKind::data, "plan_epoch: empty dataset");

  BatchPlan plan;
  plan.epoch_seed = derive_seed(seed, epoch_index);
  Rng rng(plan.epoch_seed);

  std::vector<size_t> order(dataset.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);

  const size_t num_batches = (dataset.size() + batch_size - 1) / batch_size;
  plan.batches.resize(num_batches);
  for (size_t b = 0; b < num_batches; ++b) {
    const size_t begin = b * batch_size;
    const size_t end = std::min(begin + batch_size, dataset.size());
    Batch& batch = plan.batches[b];
    batch.samples.reserve(end - begin);

    bool multimodal = false;
    switch (strategy.tag) {
      case StrategyTag::S1:
        multimodal = true;
        break;
      case StrategyTag::S2:
        multimodal = rng.coin();
        break;
      case StrategyTag::S3:
        multimodal = false;
        break;
    }

    if (multimodal) {
      for (size_t k = begin; k < end; ++k) {
        const auto& inst = dataset.instances[order[k]];
        batch.samples.push_back({inst.id, order[k], pick_uniform(inst, rng)});
      }
    } else {
      // Unimodal batch: one modality for everyone, with the per-sample
      // availability fallback.
      const Modality wanted = rng.coin() ? Modality::A : Modality::B;
      for (size_t k = begin; k < end; ++k) {
        const auto& inst = dataset.instances[order[k]];
        batch.samples.push_back(
            {inst.id, order[k], pick_available(inst, wanted)});
      }
    }
  }

  rng.shuffle(plan.batches);
  return plan;
}

PlanStats strategy_stats(const BatchPlan& plan) {
  PlanStats stats;
  for (const auto& batch : plan.batches) {
    size_t a = 0, b = 0;
    for (const auto& s : batch.samples)
      (s.modality == Modality::A ? a : b) += 1;
    stats.total += batch.samples.size();
    stats.count_a += a;
    stats.count_b += b;
    if (!batch.samples.empty()) {
      stats.per_batch_fraction_a.push_back(
          static_cast<double>(a) / batch.samples.size());
      if (a > 0 && b > 0)
        stats.mixed_batches += 1;
      else
        stats.pure_batches += 1;
    }
  }
  return stats;
}

}  // namespace modinv::switching
