#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modinv/layers.hpp"
#include "modinv/matrix.hpp"
#include "modinv/types.hpp"

namespace modinv::model {

enum class Arch : uint8_t { single_branch = 0, two_branch = 1 };
enum class Fusion : uint8_t { none = 0, early = 1, mid = 2, late = 3 };

// Whether late fusion averages post-softmax probabilities or raw logits.
enum class FusionSpace { prob, logit };

enum class ModalityUsed : uint8_t { A = 0, B = 1, fused = 2 };

struct ModelConfig {
  Arch arch = Arch::single_branch;
  Fusion fusion = Fusion::none;
  size_t input_dim = 0;
  size_t layer_dim = 0;
  size_t num_classes = 0;
  double p_drop = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

struct Prediction {
  int64_t instance_id = 0;
  std::vector<double> probs;
  int predicted_class = 0;  // lowest index attaining the max
  ModalityUsed modality_used = ModalityUsed::fused;
};

struct ForwardResult {
  DenseMatrix logits;
  DenseMatrix probs;
  DenseMatrix block2;  // L2-normalized second-block output
};

// Batched prediction input. Rows of vec_a/vec_b are only read where the
// corresponding availability flag is set.
struct BatchView {
  std::vector<int64_t> ids;
  DenseMatrix vec_a;  // n x dim_a
  DenseMatrix vec_b;  // n x dim_b
  std::vector<uint8_t> has_a;
  std::vector<uint8_t> has_b;

  size_t size() const { return ids.size(); }
};

class Model {
 public:
  static Model build(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  size_t trained_epochs() const { return trained_epochs_; }
  void set_trained_epochs(size_t n) { trained_epochs_ = n; }

  size_t parameter_count() const;
  std::vector<net::Param*> params();

  // Single-branch / early-fusion trunk pass. For two-branch mid/late use
  // the pair variant below.
  ForwardResult forward(const DenseMatrix& batch, const net::ForwardCtx& ctx);

  // Two-branch training/eval pass over aligned modality pairs. For late
  // fusion the returned probs are the fused ones and block2 holds branch A's
  // embedding.
  ForwardResult forward_pair(const DenseMatrix& batch_a,
                             const DenseMatrix& batch_b,
                             const net::ForwardCtx& ctx,
                             FusionSpace space = FusionSpace::prob);

  // Inference over a batch of instances with per-instance availability.
  // Missing vectors: the single branch and two-branch late fusion fall back
  // to the available modality; early/mid fusion feed zeros in the missing
  // slot. Throws an availability error if an instance has no modality.
  std::vector<Prediction> predict_batch(const BatchView& view,
                                        FusionSpace space = FusionSpace::prob);

  Prediction predict(int64_t id, std::span<const double> vec_a, bool has_a,
                     std::span<const double> vec_b, bool has_b,
                     FusionSpace space = FusionSpace::prob);

  // Second-block embeddings for one modality's rows (single-branch and
  // two-branch late only; early/mid have a single fused embedding, use
  // forward/forward_pair).
  DenseMatrix block2_for(Modality m, const DenseMatrix& rows);

  // Deep copy with bit-identical parameters. Forward passes cache
  // intermediates in the layers, so concurrent sweep workers clone the
  // frozen model instead of sharing one instance.
  Model clone() const;

  void save(const std::string& path) const;
  static Model load(const std::string& path);

  // Rounds every tensor through f32, the precision SBMD stores. After this,
  // save/load reproduces the in-memory model bit-exactly.
  void quantize_to_stored_precision();

  net::Network& trunk() { return trunk_; }
  net::Network& branch_a() { return branch_a_; }
  net::Network& branch_b() { return branch_b_; }
  net::Network& head() { return head_; }

 private:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}

  std::vector<net::NamedTensor> named_tensors();
  DenseMatrix probs_of(const DenseMatrix& logits) const;

  ModelConfig config_;
  net::Network trunk_;     // single_branch; two_branch early (input 2d)
  net::Network branch_a_;  // two_branch mid (block 1) / late (full stack)
  net::Network branch_b_;
  net::Network head_;  // two_branch mid: blocks 2-3 over concatenated width
  size_t trained_epochs_ = 0;
};

// The two spec-facing constructors.
Model build_model(const ModelConfig& config);
Model build_two_branch(ModelConfig config, Fusion fusion);

// Argmax with lowest-index tie-break.
int argmax_lowest(std::span<const double> values);

const char* arch_name(Arch a);
const char* fusion_name(Fusion f);

}  // namespace modinv::model
