#include "modinv/trainer.hpp"

#include <cstring>

#include "modinv/error.hpp"
#include "modinv/eval.hpp"
#include "modinv/kernels.hpp"
#include "modinv/rng.hpp"

namespace modinv::train {

namespace {

using model::Arch;
using model::Fusion;
using model::Model;
using net::ForwardCtx;
using net::Mode;

void check_dims(const Model& m, const data::PairedDataset& ds) {
  if (ds.size() == 0) throw_error(ErrorKind::data, "train: empty dataset");
  if (ds.num_classes != m.config().num_classes)
    throw_error(ErrorKind::shape,
                "train: dataset has " + std::to_string(ds.num_classes) +
                    " classes, model expects " +
                    std::to_string(m.config().num_classes));
  const size_t d = m.config().input_dim;
  if (ds.dim_a != d || ds.dim_b != d)
    throw_error(ErrorKind::shape,
                "train: modality dims " + std::to_string(ds.dim_a) + "/" +
                    std::to_string(ds.dim_b) + " must both equal input_dim " +
                    std::to_string(d));
}

void copy_row(DenseMatrix& dst, size_t row, const std::vector<float>& src) {
  double* out = dst.data() + row * dst.cols();
  for (size_t j = 0; j < src.size(); ++j) out[j] = src[j];
}

// Accuracy on the training set under the standard prediction rule
// (inference mode, fused with fallback).
double trainset_accuracy(Model& m, const data::PairedDataset& ds) {
  const auto predictions = m.predict_batch(eval::make_batch_view(ds));
  size_t correct = 0;
  for (size_t i = 0; i < ds.size(); ++i)
    if (predictions[i].predicted_class == ds.instances[i].label) ++correct;
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

EpochLog train_epoch_single(Model& m, const data::PairedDataset& ds,
                            const TrainOptions& opts, size_t epoch,
                            net::AdamOptimizer& optimizer) {
  const auto plan = switching::plan_epoch(ds, opts.strategy, opts.batch_size,
                                          epoch, opts.seed);
  Rng dropout_rng(derive_seed(opts.seed, 0xD0u, epoch));
  ForwardCtx ctx{Mode::train, &dropout_rng, true, false};

  EpochLog log;
  log.epoch = epoch;
  net::SoftmaxCrossEntropy loss;
  double loss_sum = 0.0;

  for (const auto& batch : plan.batches) {
    const size_t n = batch.samples.size();
    DenseMatrix x(n, m.config().input_dim);
    std::vector<int> labels(n);
    for (size_t k = 0; k < n; ++k) {
      const auto& sample = batch.samples[k];
      const auto& inst = ds.instances[sample.instance_index];
      copy_row(x, k,
               sample.modality == Modality::A ? inst.vec_a : inst.vec_b);
      labels[k] = inst.label;
      (sample.modality == Modality::A ? log.used_a : log.used_b) += 1;
    }

    const auto result = m.forward(x, ctx);
    const auto ce = loss.forward(result.logits, labels);
    m.trunk().backward(loss.backward());
    optimizer.step();

    loss_sum += ce.loss * static_cast<double>(n);
  }

  const auto total = static_cast<double>(plan.total_samples());
  log.loss = loss_sum / total;
  log.train_accuracy = trainset_accuracy(m, ds);
  return log;
}

EpochLog train_epoch_two_branch(Model& m, const data::PairedDataset& ds,
                                const TrainOptions& opts, size_t epoch,
                                net::AdamOptimizer& optimizer) {
  Rng rng(derive_seed(opts.seed, epoch));
  std::vector<size_t> order(ds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  Rng dropout_rng(derive_seed(opts.seed, 0xD0u, epoch));
  ForwardCtx ctx{Mode::train, &dropout_rng, true, false};

  EpochLog log;
  log.epoch = epoch;
  double loss_sum = 0.0;
  const size_t d = m.config().input_dim;
  const bool late = m.config().fusion == Fusion::late;

  for (size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
    const size_t end = std::min(begin + opts.batch_size, order.size());
    const size_t n = end - begin;
    DenseMatrix xa(n, d), xb(n, d);  // zero rows stand in for missing
    std::vector<int> labels(n);
    for (size_t k = 0; k < n; ++k) {
      const auto& inst = ds.instances[order[begin + k]];
      if (inst.avail_a) {
        copy_row(xa, k, inst.vec_a);
        log.used_a += 1;
      }
      if (inst.avail_b) {
        copy_row(xb, k, inst.vec_b);
        log.used_b += 1;
      }
      labels[k] = inst.label;
    }

    if (late) {
      // Each branch carries its own cross-entropy; the joint loss is their
      // mean, matching the prediction-time probability average.
      std::vector<DenseMatrix> taps_a, taps_b;
      m.branch_a().forward(xa, ctx, &taps_a);
      m.branch_b().forward(xb, ctx, &taps_b);
      net::SoftmaxCrossEntropy ce_a, ce_b;
      const auto ra = ce_a.forward(taps_a.back(), labels);
      const auto rb = ce_b.forward(taps_b.back(), labels);
      DenseMatrix da = ce_a.backward();
      DenseMatrix db = ce_b.backward();
      kernels::active().scale(da.data(), 0.5, da.size());
      kernels::active().scale(db.data(), 0.5, db.size());
      m.branch_a().backward(da);
      m.branch_b().backward(db);
      optimizer.step();

      const double batch_loss = 0.5 * (ra.loss + rb.loss);
      loss_sum += batch_loss * static_cast<double>(n);
    } else {
      const auto result = m.forward_pair(xa, xb, ctx);
      net::SoftmaxCrossEntropy ce;
      const auto r = ce.forward(result.logits, labels);
      DenseMatrix dlogits = ce.backward();
      if (m.config().fusion == Fusion::early) {
        m.trunk().backward(dlogits);
      } else {
        // Mid fusion: split the head's input gradient back to the branches.
        DenseMatrix dcat = m.head().backward(dlogits);
        const size_t h = m.config().layer_dim;
        DenseMatrix da(n, h), db(n, h);
        for (size_t r2 = 0; r2 < n; ++r2) {
          std::memcpy(da.data() + r2 * h, dcat.data() + r2 * 2 * h,
                      h * sizeof(double));
          std::memcpy(db.data() + r2 * h, dcat.data() + r2 * 2 * h + h,
                      h * sizeof(double));
        }
        m.branch_a().backward(da);
        m.branch_b().backward(db);
      }
      optimizer.step();
      loss_sum += r.loss * static_cast<double>(n);
    }
  }

  const auto total = static_cast<double>(ds.size());
  log.loss = loss_sum / total;
  log.train_accuracy = trainset_accuracy(m, ds);
  return log;
}

}  // namespace

TrainingLog train(Model& m, const data::PairedDataset& trainset,
                  const TrainOptions& opts) {
  check_dims(m, trainset);
  if (opts.batch_size < 1)
    throw_error(ErrorKind::config, "train: batch_size must be >= 1");

  TrainingLog log;
  if (opts.epochs == 0) return log;

  net::AdamOptimizer optimizer(m.params(), opts.adam);
  for (size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    if (m.config().arch == Arch::single_branch)
      log.push_back(train_epoch_single(m, trainset, opts, epoch, optimizer));
    else
      log.push_back(
          train_epoch_two_branch(m, trainset, opts, epoch, optimizer));
  }
  m.set_trained_epochs(m.trained_epochs() + opts.epochs);
  return log;
}

}  // namespace modinv::train
