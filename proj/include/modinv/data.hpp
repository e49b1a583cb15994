#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "modinv/types.hpp"

namespace modinv::data {

struct BankRecord {
  int64_t id = 0;
  int label = 0;
  std::vector<float> vec;  // stored at file precision
};

// All records of one modality: the artifact's ingestion unit.
struct EmbeddingBank {
  uint8_t modality_tag = 0;
  size_t dim = 0;
  size_t num_classes = 0;
  std::vector<BankRecord> records;

  // Unique ids, label ranges, vector lengths.
  void validate() const;
};

// Reads .sbeb (binary) or .csv by file extension.
EmbeddingBank read_bank(const std::string& path);
void write_bank(const EmbeddingBank& bank, const std::string& path);

struct PairedInstance {
  int64_t id = 0;
  int label = 0;
  // Stored payloads. Masking clears the availability flag but keeps the
  // payload, which is what makes re-masking with the same spec idempotent;
  // consumers must honor the flags.
  std::vector<float> vec_a;
  std::vector<float> vec_b;
  bool avail_a = false;
  bool avail_b = false;

  bool stored_a() const { return !vec_a.empty(); }
  bool stored_b() const { return !vec_b.empty(); }
  bool stored(Modality m) const {
    return m == Modality::A ? stored_a() : stored_b();
  }
  bool avail(Modality m) const {
    return m == Modality::A ? avail_a : avail_b;
  }
};

// Instance-aligned view over two banks, ordered by instance id.
struct PairedDataset {
  size_t dim_a = 0;
  size_t dim_b = 0;
  size_t num_classes = 0;
  std::vector<PairedInstance> instances;

  size_t size() const { return instances.size(); }
  size_t count_with(Modality m) const;
};

// Joins on instance id; ids present in only one bank become
// single-modality instances. Conflicting labels raise an integrity error.
PairedDataset pair_banks(const EmbeddingBank& bank_a,
                         const EmbeddingBank& bank_b);

enum class MaskPhase { train, test };

struct MaskSpec {
  Modality target = Modality::B;
  double availability = 1.0;  // fraction of target-modality instances kept
  uint64_t seed = 0;
  MaskPhase phase = MaskPhase::test;
};

// Keeps exactly round(availability * N_target) instances' target modality,
// chosen by a seeded uniform ranking over instance ids; clears the flag on
// the rest. Throws an availability error if an instance would be left with
// no modality. Applying the same spec twice equals applying it once.
PairedDataset apply_mask(const PairedDataset& dataset, const MaskSpec& spec);

struct NoiseSpec {
  double mu = 0.0;
  double sigma = 0.0;
  double fraction_corrupted = 1.0;
  uint64_t seed = 0;
};

// Adds iid Gaussian noise to every coordinate of the target modality for
// exactly round(fraction * N_target) instances. Flags are unchanged and
// vectors are not re-normalized.
PairedDataset corrupt(const PairedDataset& dataset, const NoiseSpec& spec,
                      Modality target);

struct SyntheticSpec {
  size_t num_classes = 10;
  size_t dim_a = 32;
  size_t dim_b = 32;
  size_t per_class = 500;
  double sigma_a = 0.3;
  double sigma_b = 0.3;
  double cross_modal_correlation = 0.5;  // rho
  uint64_t seed = 0;
};

// Unit-norm class centroids plus per-instance Gaussian noise; modality B's
// noise mixes rho of modality A's (projected), so the two modalities share
// instance-level information.
std::pair<EmbeddingBank, EmbeddingBank> gen_synthetic(
    const SyntheticSpec& spec);

// Stratified split; every class needs at least 2 instances.
std::pair<PairedDataset, PairedDataset> split(const PairedDataset& dataset,
                                              double train_fraction,
                                              uint64_t seed);

}  // namespace modinv::data
