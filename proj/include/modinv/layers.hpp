#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modinv/matrix.hpp"
#include "modinv/rng.hpp"

namespace modinv::net {

enum class Mode { train, infer };

// Per-call forward options. update_running_stats and freeze_dropout exist
// for the finite-difference checker, which needs repeated forwards through
// an unchanging function of the parameters.
struct ForwardCtx {
  Mode mode = Mode::infer;
  Rng* rng = nullptr;
  bool update_running_stats = true;
  bool freeze_dropout = false;
};

// A trainable tensor: value plus the gradient written by the last backward.
struct Param {
  std::string name;
  DenseMatrix value;
  DenseMatrix grad;

  Param(std::string n, DenseMatrix v)
      : name(std::move(n)), value(std::move(v)),
        grad(value.rows(), value.cols()) {}
};

// Persistent tensor reference for serialization (params and running stats).
struct NamedTensor {
  std::string name;
  DenseMatrix* mat;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual const char* kind() const = 0;
  virtual DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) = 0;
  // Consumes the cache of the preceding forward; fills param grads and
  // returns dLoss/dInput.
  virtual DenseMatrix backward(const DenseMatrix& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<NamedTensor> tensors() { return {}; }
  // Deep copy. Forward/backward mutate layer caches, so concurrent
  // evaluation works on clones rather than a shared instance.
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class LinearLayer : public Layer {
 public:
  LinearLayer(size_t in_dim, size_t out_dim);
  const char* kind() const override { return "linear"; }
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) override;
  DenseMatrix backward(const DenseMatrix& dy) override;
  std::vector<Param*> params() override { return {&weight_, &bias_}; }
  std::vector<NamedTensor> tensors() override {
    return {{"weight", &weight_.value}, {"bias", &bias_.value}};
  }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<LinearLayer>(*this);
  }

  size_t in_dim() const { return in_dim_; }
  size_t out_dim() const { return out_dim_; }
  Param& weight() { return weight_; }
  Param& bias() { return bias_; }

 private:
  size_t in_dim_, out_dim_;
  Param weight_;  // in_dim x out_dim
  Param bias_;    // 1 x out_dim
  DenseMatrix cached_input_;
};

class BatchNormLayer : public Layer {
 public:
  explicit BatchNormLayer(size_t dim, double momentum = 0.1,
                          double epsilon = 1e-5);
  const char* kind() const override { return "batchnorm"; }
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) override;
  DenseMatrix backward(const DenseMatrix& dy) override;
  std::vector<Param*> params() override { return {&gain_, &shift_}; }
  std::vector<NamedTensor> tensors() override {
    return {{"gain", &gain_.value},
            {"shift", &shift_.value},
            {"running_mean", &running_mean_},
            {"running_var", &running_var_}};
  }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<BatchNormLayer>(*this);
  }

  size_t dim() const { return dim_; }
  double epsilon() const { return epsilon_; }
  DenseMatrix& running_mean() { return running_mean_; }
  DenseMatrix& running_var() { return running_var_; }

 private:
  size_t dim_;
  double momentum_, epsilon_;
  Param gain_;   // 1 x dim
  Param shift_;  // 1 x dim
  DenseMatrix running_mean_;  // 1 x dim
  DenseMatrix running_var_;   // 1 x dim, entries > 0

  // backward cache
  Mode cached_mode_ = Mode::infer;
  DenseMatrix cached_xhat_;
  DenseMatrix cached_rstd_;  // 1 x dim
};

class ReluLayer : public Layer {
 public:
  const char* kind() const override { return "relu"; }
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) override;
  DenseMatrix backward(const DenseMatrix& dy) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ReluLayer>(*this);
  }

 private:
  DenseMatrix cached_input_;
};

class DropoutLayer : public Layer {
 public:
  explicit DropoutLayer(double p_drop);
  const char* kind() const override { return "dropout"; }
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) override;
  DenseMatrix backward(const DenseMatrix& dy) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<DropoutLayer>(*this);
  }

  double p_drop() const { return p_drop_; }

 private:
  double p_drop_;
  bool applied_ = false;     // whether the last forward used a mask
  DenseMatrix cached_mask_;  // entries are 0 or 1/(1-p_drop)
};

class L2NormLayer : public Layer {
 public:
  explicit L2NormLayer(double norm_floor = 1e-12);
  const char* kind() const override { return "l2norm"; }
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx) override;
  DenseMatrix backward(const DenseMatrix& dy) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<L2NormLayer>(*this);
  }

 private:
  double norm_floor_;
  DenseMatrix cached_unit_;           // normalized rows
  std::vector<double> cached_norms_;  // post-floor row norms
  std::vector<char> cached_floored_;
};

// Softmax + mean cross-entropy head. Not a Layer: it consumes class labels.
class SoftmaxCrossEntropy {
 public:
  struct Result {
    double loss;
    DenseMatrix probs;
  };

  // labels[i] in [0, C); throws a label error naming the offending index.
  Result forward(const DenseMatrix& logits, std::span<const int> labels);
  // dLogits = (probs - onehot) / B for the preceding forward.
  DenseMatrix backward() const;

 private:
  DenseMatrix cached_probs_;
  std::vector<int> cached_labels_;
};

// An ordered layer stack with shared forward/backward plumbing.
class Network {
 public:
  Network() = default;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;

  void append(std::unique_ptr<Layer> layer) {
    layers_.push_back(std::move(layer));
  }
  Network clone() const {
    Network n;
    for (const auto& layer : layers_) n.append(layer->clone());
    return n;
  }
  size_t size() const { return layers_.size(); }
  Layer& layer(size_t i) { return *layers_[i]; }
  const Layer& layer(size_t i) const { return *layers_[i]; }

  // Runs all layers; when `taps` is non-null it receives every layer's
  // output in order (used for second-block embedding export).
  DenseMatrix forward(const DenseMatrix& x, const ForwardCtx& ctx,
                      std::vector<DenseMatrix>* taps = nullptr);
  DenseMatrix backward(const DenseMatrix& dy);

  std::vector<Param*> params();
  std::vector<NamedTensor> tensors(const std::string& prefix);

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace modinv::net
