#include <doctest.h>

#include <fstream>
#include <vector>

#include "modinv/error.hpp"
#include "modinv/eval.hpp"
#include "modinv/trainer.hpp"
#include "testutil.hpp"

using namespace modinv;

TEST_SUITE_BEGIN("trainer");

namespace {

data::PairedDataset separable_dataset(uint64_t seed, size_t per_class = 60) {
  data::SyntheticSpec spec;
  spec.num_classes = 10;
  spec.dim_a = spec.dim_b = 16;
  spec.per_class = per_class;
  spec.sigma_a = spec.sigma_b = 0.1;  // tight clusters, linearly separable
  spec.cross_modal_correlation = 0.5;
  spec.seed = seed;
  const auto [bank_a, bank_b] = data::gen_synthetic(spec);
  return data::pair_banks(bank_a, bank_b);
}

model::ModelConfig small_config(size_t d, size_t classes, uint64_t seed) {
  model::ModelConfig cfg;
  cfg.input_dim = d;
  cfg.layer_dim = 32;
  cfg.num_classes = classes;
  cfg.p_drop = 0.5;
  cfg.seed = seed;
  return cfg;
}

std::string file_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("separable clusters train to near-perfect accuracy") {
  const auto ds = separable_dataset(101, 500);
  auto m = model::Model::build(small_config(16, 10, 1));
  train::TrainOptions opts;
  opts.epochs = 30;
  opts.batch_size = 256;
  opts.seed = 2;
  const auto log = train::train(m, ds, opts);
  REQUIRE(log.size() == 30);
  CHECK(log.back().train_accuracy >= 0.99);
  CHECK(log.back().loss < log.front().loss);
  // The switch fed both modalities.
  CHECK(log.back().used_a > 0);
  CHECK(log.back().used_b > 0);
  CHECK(log.back().used_a + log.back().used_b == ds.size());
}

TEST_CASE("zero epochs change nothing and log nothing") {
  const auto ds = separable_dataset(102, 10);
  auto m = model::Model::build(small_config(16, 10, 3));
  const auto before = m.clone();
  train::TrainOptions opts;
  opts.epochs = 0;
  const auto log = train::train(m, ds, opts);
  CHECK(log.empty());
  auto pa = m.params();
  auto pb = const_cast<model::Model&>(before).params();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  testutil::TempDir tmp("repro");
  const auto ds = separable_dataset(103, 30);
  train::TrainOptions opts;
  opts.epochs = 5;
  opts.batch_size = 64;
  opts.seed = 7;

  auto m1 = model::Model::build(small_config(16, 10, 9));
  const auto log1 = train::train(m1, ds, opts);
  auto m2 = model::Model::build(small_config(16, 10, 9));
  const auto log2 = train::train(m2, ds, opts);

  CHECK(log1.back().loss == log2.back().loss);
  const auto p1 = tmp.file("m1.sbmd");
  const auto p2 = tmp.file("m2.sbmd");
  m1.save(p1);
  m2.save(p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
}

TEST_CASE("two-branch variants train and improve") {
  const auto ds = separable_dataset(104, 30);
  for (auto fusion :
       {model::Fusion::early, model::Fusion::mid, model::Fusion::late}) {
    auto m = model::build_two_branch(small_config(16, 10, 4), fusion);
    train::TrainOptions opts;
    opts.epochs = 10;
    opts.batch_size = 64;
    opts.seed = 5;
    const auto log = train::train(m, ds, opts);
    INFO(model::fusion_name(fusion));
    CHECK(log.back().loss < log.front().loss);
    CHECK(log.back().train_accuracy > 0.8);
  }
}

TEST_CASE("training-time availability restricts the switch's choices") {
  const auto ds = separable_dataset(105, 40);
  data::MaskSpec spec;
  spec.target = Modality::B;
  spec.availability = 0.3;
  spec.seed = 11;
  spec.phase = data::MaskPhase::train;
  const auto masked = data::apply_mask(ds, spec);

  auto m = model::Model::build(small_config(16, 10, 6));
  train::TrainOptions opts;
  opts.epochs = 3;
  opts.batch_size = 32;
  opts.seed = 13;
  const auto log = train::train(m, masked, opts);
  const size_t b_eligible = masked.count_with(Modality::B);
  CHECK(b_eligible == 120);  // 0.3 * 400
  for (const auto& epoch : log) {
    CHECK(epoch.used_b <= b_eligible);
    CHECK(epoch.used_a + epoch.used_b == ds.size());
  }
}

TEST_CASE("dimension and emptiness guards") {
  const auto ds = separable_dataset(106, 10);
  auto wrong_dim = model::Model::build(small_config(8, 10, 1));
  train::TrainOptions opts;
  opts.epochs = 1;
  CHECK_THROWS_AS(train::train(wrong_dim, ds, opts), Error);

  data::PairedDataset empty;
  empty.dim_a = empty.dim_b = 16;
  empty.num_classes = 10;
  auto m = model::Model::build(small_config(16, 10, 1));
  CHECK_THROWS_AS(train::train(m, empty, opts), Error);
}

TEST_SUITE_END();
