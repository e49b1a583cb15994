#pragma once

#include <cstdint>
#include <vector>

#include "modinv/data.hpp"
#include "modinv/model.hpp"
#include "modinv/optim.hpp"
#include "modinv/switching.hpp"

namespace modinv::train {

struct TrainOptions {
  size_t epochs = 50;
  size_t batch_size = 256;
  net::AdamConfig adam;  // lr 0.01, betas 0.9/0.999, eps 1e-8
  switching::SwitchStrategy strategy = switching::SwitchStrategy::s1();
  uint64_t seed = 0;  // drives epoch plans and dropout streams
};

struct EpochLog {
  size_t epoch = 0;
  double loss = 0.0;            // sample-weighted mean cross-entropy
  double train_accuracy = 0.0;  // argmax accuracy under training noise
  size_t used_a = 0;            // samples fed from each modality
  size_t used_b = 0;
};

using TrainingLog = std::vector<EpochLog>;

// Mini-batch Adam on cross-entropy. Single-branch models stream one
// modality per sample as chosen by the switching strategy; two-branch
// models consume aligned pairs (zero vectors stand in for unavailable
// modalities). Deterministic for a fixed seed.
TrainingLog train(model::Model& m, const data::PairedDataset& trainset,
                  const TrainOptions& opts);

}  // namespace modinv::train
