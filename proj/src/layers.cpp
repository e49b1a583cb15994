#include "modinv/layers.hpp"

#include <cmath>
#include <cstring>

#include "modinv/error.hpp"
#include "modinv/kernels.hpp"

namespace modinv::net {

namespace {
const kernels::Table& K() { return kernels::active(); }
}  // namespace

// ---------------------------------------------------------------------------
// LinearLayer

LinearLayer::LinearLayer(size_t in_dim, size_t out_dim)
    : in_dim_(in_dim), out_dim_(out_dim),
      weight_("weight", DenseMatrix(in_dim, out_dim)),
      bias_("bias", DenseMatrix(1, out_dim)) {
  if (in_dim == 0 || out_dim == 0)
    throw_error(ErrorKind::config, "linear: zero dimension");
}

DenseMatrix LinearLayer::forward(const DenseMatrix& x, const ForwardCtx&) {
  if (x.cols() != in_dim_)
    throw_error(ErrorKind::shape, "linear: input " + x.shape_str() +
                                      " incompatible with weights " +
                                      weight_.value.shape_str());
  DenseMatrix y(x.rows(), out_dim_);
  K().matmul_nn(x.data(), x.rows(), in_dim_, weight_.value.data(), out_dim_,
                y.data());
  K().add_bias_rows(y.data(), y.rows(), out_dim_, bias_.value.data());
  cached_input_ = x;
  return y;
}

DenseMatrix LinearLayer::backward(const DenseMatrix& dy) {
  const size_t batch = cached_input_.rows();
  if (dy.rows() != batch || dy.cols() != out_dim_)
    throw_error(ErrorKind::shape, "linear backward: dY " + dy.shape_str() +
                                      " does not match forward output " +
                                      std::to_string(batch) + "x" +
                                      std::to_string(out_dim_));
  K().matmul_tn(cached_input_.data(), batch, in_dim_, dy.data(), out_dim_,
                weight_.grad.data());
  K().col_sums(dy.data(), batch, out_dim_, bias_.grad.data());
  DenseMatrix dx(batch, in_dim_);
  K().matmul_nt(dy.data(), batch, out_dim_, weight_.value.data(), in_dim_,
                dx.data());
  return dx;
}

// ---------------------------------------------------------------------------
// BatchNormLayer

BatchNormLayer::BatchNormLayer(size_t dim, double momentum, double epsilon)
    : dim_(dim), momentum_(momentum), epsilon_(epsilon),
      gain_("gain", DenseMatrix(1, dim)), shift_("shift", DenseMatrix(1, dim)),
      running_mean_(1, dim), running_var_(1, dim) {
  if (epsilon <= 0.0)
    throw_error(ErrorKind::config, "batchnorm: epsilon must be > 0");
  gain_.value.fill(1.0);
  running_var_.fill(1.0);
}

DenseMatrix BatchNormLayer::forward(const DenseMatrix& x,
                                    const ForwardCtx& ctx) {
  if (x.cols() != dim_)
    throw_error(ErrorKind::shape, "batchnorm: input " + x.shape_str() +
                                      " does not have width " +
                                      std::to_string(dim_));
  const size_t batch = x.rows();
  DenseMatrix y(batch, dim_);
  cached_mode_ = ctx.mode;

  DenseMatrix ones(1, dim_);
  ones.fill(1.0);
  DenseMatrix zeros(1, dim_);

  if (ctx.mode == Mode::train) {
    if (batch < 2)
      throw_error(ErrorKind::data,
                  "batchnorm: train mode needs a batch of at least 2 rows, "
                  "got " + std::to_string(batch));
    DenseMatrix mean(1, dim_);
    K().col_sums(x.data(), batch, dim_, mean.data());
    K().scale(mean.data(), 1.0 / static_cast<double>(batch), dim_);

    DenseMatrix var(1, dim_);
    K().col_sq_dev_sums(x.data(), batch, dim_, mean.data(), var.data());
    K().scale(var.data(), 1.0 / static_cast<double>(batch), dim_);

    cached_rstd_ = DenseMatrix(1, dim_);
    for (size_t j = 0; j < dim_; ++j)
      cached_rstd_.at(0, j) = 1.0 / std::sqrt(var.at(0, j) + epsilon_);

    cached_xhat_ = DenseMatrix(batch, dim_);
    K().normalize_cols_affine(x.data(), batch, dim_, mean.data(),
                              cached_rstd_.data(), ones.data(), zeros.data(),
                              cached_xhat_.data());
    K().normalize_cols_affine(cached_xhat_.data(), batch, dim_, zeros.data(),
                              ones.data(), gain_.value.data(),
                              shift_.value.data(), y.data());

    if (ctx.update_running_stats) {
      // EMA over biased batch statistics, so a momentum of 1.0 makes the
      // running stats equal the current batch exactly.
      for (size_t j = 0; j < dim_; ++j) {
        running_mean_.at(0, j) = (1.0 - momentum_) * running_mean_.at(0, j) +
                                 momentum_ * mean.at(0, j);
        running_var_.at(0, j) = (1.0 - momentum_) * running_var_.at(0, j) +
                                momentum_ * var.at(0, j);
      }
    }
  } else {
    cached_rstd_ = DenseMatrix(1, dim_);
    for (size_t j = 0; j < dim_; ++j)
      cached_rstd_.at(0, j) = 1.0 / std::sqrt(running_var_.at(0, j) + epsilon_);
    cached_xhat_ = DenseMatrix(batch, dim_);
    K().normalize_cols_affine(x.data(), batch, dim_, running_mean_.data(),
                              cached_rstd_.data(), ones.data(), zeros.data(),
                              cached_xhat_.data());
    K().normalize_cols_affine(cached_xhat_.data(), batch, dim_, zeros.data(),
                              ones.data(), gain_.value.data(),
                              shift_.value.data(), y.data());
  }
  return y;
}

DenseMatrix BatchNormLayer::backward(const DenseMatrix& dy) {
  const size_t batch = cached_xhat_.rows();
  require_same_shape(dy, cached_xhat_, "batchnorm backward");
  const size_t n = batch * dim_;

  // dGain = sum_rows(dy . xhat), dShift = sum_rows(dy)
  DenseMatrix dy_xhat(batch, dim_);
  K().mul_elems(dy.data(), cached_xhat_.data(), dy_xhat.data(), n);
  K().col_sums(dy_xhat.data(), batch, dim_, gain_.grad.data());
  K().col_sums(dy.data(), batch, dim_, shift_.grad.data());

  DenseMatrix ones(1, dim_);
  ones.fill(1.0);
  DenseMatrix zeros(1, dim_);

  // dxhat = dy * gain (column broadcast)
  DenseMatrix dxhat(batch, dim_);
  K().normalize_cols_affine(dy.data(), batch, dim_, zeros.data(), ones.data(),
                            gain_.value.data(), zeros.data(), dxhat.data());

  if (cached_mode_ == Mode::infer) {
    // Running statistics are constants: the map is a per-column affine.
    DenseMatrix dx(batch, dim_);
    K().normalize_cols_affine(dxhat.data(), batch, dim_, zeros.data(),
                              cached_rstd_.data(), ones.data(), zeros.data(),
                              dx.data());
    return dx;
  }

  // Full batch-coupled gradient:
  // dx = rstd/B * (B*dxhat - colsum(dxhat) - xhat * colsum(dxhat . xhat))
  DenseMatrix s1(1, dim_);
  K().col_sums(dxhat.data(), batch, dim_, s1.data());
  DenseMatrix dxhat_xhat(batch, dim_);
  K().mul_elems(dxhat.data(), cached_xhat_.data(), dxhat_xhat.data(), n);
  DenseMatrix s2(1, dim_);
  K().col_sums(dxhat_xhat.data(), batch, dim_, s2.data());

  DenseMatrix dx = dxhat;
  K().scale(dx.data(), static_cast<double>(batch), n);
  DenseMatrix neg_s1 = s1;
  K().scale(neg_s1.data(), -1.0, dim_);
  K().add_bias_rows(dx.data(), batch, dim_, neg_s1.data());
  // dx -= xhat * s2 (column broadcast)
  DenseMatrix xhat_s2(batch, dim_);
  K().normalize_cols_affine(cached_xhat_.data(), batch, dim_, zeros.data(),
                            ones.data(), s2.data(), zeros.data(),
                            xhat_s2.data());
  K().axpy(-1.0, xhat_s2.data(), dx.data(), n);
  // dx *= rstd / B (column broadcast)
  DenseMatrix rstd_over_b = cached_rstd_;
  K().scale(rstd_over_b.data(), 1.0 / static_cast<double>(batch), dim_);
  DenseMatrix out(batch, dim_);
  K().normalize_cols_affine(dx.data(), batch, dim_, zeros.data(),
                            rstd_over_b.data(), ones.data(), zeros.data(),
                            out.data());
  return out;
}

// ---------------------------------------------------------------------------
// ReluLayer

DenseMatrix ReluLayer::forward(const DenseMatrix& x, const ForwardCtx&) {
  DenseMatrix y(x.rows(), x.cols());
  K().relu_forward(x.data(), y.data(), x.size());
  cached_input_ = x;
  return y;
}

DenseMatrix ReluLayer::backward(const DenseMatrix& dy) {
  require_same_shape(dy, cached_input_, "relu backward");
  DenseMatrix dx(dy.rows(), dy.cols());
  K().relu_backward(cached_input_.data(), dy.data(), dx.data(), dy.size());
  return dx;
}

// ---------------------------------------------------------------------------
// DropoutLayer

DropoutLayer::DropoutLayer(double p_drop) : p_drop_(p_drop) {
  if (!(p_drop >= 0.0 && p_drop < 1.0))
    throw_error(ErrorKind::config, "dropout: p_drop must be in [0, 1), got " +
                                       std::to_string(p_drop));
}

DenseMatrix DropoutLayer::forward(const DenseMatrix& x, const ForwardCtx& ctx) {
  if (ctx.mode == Mode::infer || p_drop_ == 0.0) {
    applied_ = false;
    return x;
  }
  if (ctx.freeze_dropout && applied_ && cached_mask_.same_shape(x)) {
    DenseMatrix y(x.rows(), x.cols());
    K().mul_elems(x.data(), cached_mask_.data(), y.data(), x.size());
    return y;
  }
  if (ctx.rng == nullptr)
    throw_error(ErrorKind::contract, "dropout: train mode requires an rng");
  const double keep_scale = 1.0 / (1.0 - p_drop_);
  cached_mask_ = DenseMatrix(x.rows(), x.cols());
  for (size_t i = 0; i < x.size(); ++i)
    cached_mask_.data()[i] = ctx.rng->uniform() < p_drop_ ? 0.0 : keep_scale;
  applied_ = true;
  DenseMatrix y(x.rows(), x.cols());
  K().mul_elems(x.data(), cached_mask_.data(), y.data(), x.size());
  return y;
}

DenseMatrix DropoutLayer::backward(const DenseMatrix& dy) {
  if (!applied_) return dy;
  require_same_shape(dy, cached_mask_, "dropout backward");
  DenseMatrix dx(dy.rows(), dy.cols());
  K().mul_elems(dy.data(), cached_mask_.data(), dx.data(), dy.size());
  return dx;
}

// ---------------------------------------------------------------------------
// L2NormLayer

L2NormLayer::L2NormLayer(double norm_floor) : norm_floor_(norm_floor) {}

DenseMatrix L2NormLayer::forward(const DenseMatrix& x, const ForwardCtx&) {
  const size_t batch = x.rows(), d = x.cols();
  cached_unit_ = DenseMatrix(batch, d);
  cached_norms_.assign(batch, 0.0);
  cached_floored_.assign(batch, 0);
  for (size_t r = 0; r < batch; ++r) {
    const double* row = x.data() + r * d;
    const double norm = std::sqrt(K().dot(row, row, d));
    const bool floored = norm < norm_floor_;
    const double used = floored ? norm_floor_ : norm;
    cached_norms_[r] = used;
    cached_floored_[r] = floored ? 1 : 0;
    double* out = cached_unit_.data() + r * d;
    std::memcpy(out, row, d * sizeof(double));
    K().scale(out, 1.0 / used, d);
  }
  return cached_unit_;
}

DenseMatrix L2NormLayer::backward(const DenseMatrix& dy) {
  require_same_shape(dy, cached_unit_, "l2norm backward");
  const size_t batch = dy.rows(), d = dy.cols();
  DenseMatrix dx(batch, d);
  for (size_t r = 0; r < batch; ++r) {
    const double* u = cached_unit_.data() + r * d;
    const double* g = dy.data() + r * d;
    double* out = dx.data() + r * d;
    const double inv_norm = 1.0 / cached_norms_[r];
    if (cached_floored_[r]) {
      // Below the floor the map is x / floor: a plain scaling.
      std::memcpy(out, g, d * sizeof(double));
      K().scale(out, inv_norm, d);
      continue;
    }
    // (I - u u^T) g / ||x||
    const double proj = K().dot(u, g, d);
    for (size_t j = 0; j < d; ++j) out[j] = (g[j] - proj * u[j]) * inv_norm;
  }
  return dx;
}

// ---------------------------------------------------------------------------
// SoftmaxCrossEntropy

SoftmaxCrossEntropy::Result SoftmaxCrossEntropy::forward(
    const DenseMatrix& logits, std::span<const int> labels) {
  const size_t batch = logits.rows(), classes = logits.cols();
  if (batch == 0) throw_error(ErrorKind::data, "softmax_ce: empty batch");
  if (labels.size() != batch)
    throw_error(ErrorKind::shape,
                "softmax_ce: " + std::to_string(labels.size()) +
                    " labels for batch of " + std::to_string(batch));
  for (size_t i = 0; i < batch; ++i)
    if (labels[i] < 0 || static_cast<size_t>(labels[i]) >= classes)
      throw_error(ErrorKind::label,
                  "softmax_ce: label " + std::to_string(labels[i]) +
                      " out of range [0, " + std::to_string(classes) +
                      ") at index " + std::to_string(i));

  cached_probs_ = DenseMatrix(batch, classes);
  cached_labels_.assign(labels.begin(), labels.end());
  double loss = 0.0;
  for (size_t r = 0; r < batch; ++r) {
    const double* lrow = logits.data() + r * classes;
    double* prow = cached_probs_.data() + r * classes;
    double mx = lrow[0];
    for (size_t j = 1; j < classes; ++j) mx = std::max(mx, lrow[j]);
    double sum = 0.0;
    for (size_t j = 0; j < classes; ++j) {
      prow[j] = std::exp(lrow[j] - mx);
      sum += prow[j];
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < classes; ++j) prow[j] *= inv;
    // log-sum-exp form keeps the loss finite even when p[y] underflows.
    loss += std::log(sum) - (lrow[labels[r]] - mx);
  }
  loss /= static_cast<double>(batch);
  return {loss, cached_probs_};
}

DenseMatrix SoftmaxCrossEntropy::backward() const {
  const size_t batch = cached_probs_.rows(), classes = cached_probs_.cols();
  if (batch == 0)
    throw_error(ErrorKind::contract, "softmax_ce backward before forward");
  DenseMatrix dlogits = cached_probs_;
  const double inv_b = 1.0 / static_cast<double>(batch);
  for (size_t r = 0; r < batch; ++r) {
    dlogits.at(r, static_cast<size_t>(cached_labels_[r])) -= 1.0;
    double* row = dlogits.data() + r * classes;
    K().scale(row, inv_b, classes);
  }
  return dlogits;
}

// ---------------------------------------------------------------------------
// Network

DenseMatrix Network::forward(const DenseMatrix& x, const ForwardCtx& ctx,
                             std::vector<DenseMatrix>* taps) {
  if (taps) taps->clear();
  DenseMatrix cur = x;
  for (auto& layer : layers_) {
    cur = layer->forward(cur, ctx);
    if (taps) taps->push_back(cur);
  }
  return cur;
}

DenseMatrix Network::backward(const DenseMatrix& dy) {
  DenseMatrix cur = dy;
  for (size_t i = layers_.size(); i > 0; --i)
    cur = layers_[i - 1]->backward(cur);
  return cur;
}

std::vector<Param*> Network::params() {
  std::vector<Param*> out;
  for (auto& layer : layers_)
    for (Param* p : layer->params()) out.push_back(p);
  return out;
}

std::vector<NamedTensor> Network::tensors(const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (size_t i = 0; i < layers_.size(); ++i)
    for (auto& t : layers_[i]->tensors())
      out.push_back({prefix + "." + std::to_string(i) + "." + t.name, t.mat});
  return out;
}

}  // namespace modinv::net
