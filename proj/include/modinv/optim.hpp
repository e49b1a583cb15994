#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "modinv/error.hpp"
#include "modinv/kernels.hpp"
#include "modinv/layers.hpp"
#include "modinv/matrix.hpp"

namespace modinv::net {

struct AdamConfig {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Moment accumulators for one parameter tensor.
struct AdamState {
  DenseMatrix first_moment;
  DenseMatrix second_moment;
  size_t step_count = 0;
  double lr, beta1, beta2, epsilon;

  AdamState(size_t rows, size_t cols, const AdamConfig& cfg)
      : first_moment(rows, cols), second_moment(rows, cols), lr(cfg.lr),
        beta1(cfg.beta1), beta2(cfg.beta2), epsilon(cfg.epsilon) {}
};

// One bias-corrected Adam update on a single tensor.
inline void adam_step(DenseMatrix& params, const DenseMatrix& grads,
                      AdamState& state) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment))
    throw_error(ErrorKind::shape,
                "adam_step: params " + params.shape_str() + ", grads " +
                    grads.shape_str() + ", moments " +
                    state.first_moment.shape_str() + " must agree");
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double inv_bc1 = 1.0 / (1.0 - std::pow(state.beta1, t));
  const double inv_bc2 = 1.0 / (1.0 - std::pow(state.beta2, t));
  kernels::active().adam_update(params.data(), grads.data(),
                                state.first_moment.data(),
                                state.second_moment.data(), params.size(),
                                state.lr, state.beta1, state.beta2,
                                state.epsilon, inv_bc1, inv_bc2);
}

// Steps a whole parameter set; used by the training loop.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param*> params, const AdamConfig& cfg)
      : params_(std::move(params)) {
    states_.reserve(params_.size());
    for (Param* p : params_)
      states_.emplace_back(p->value.rows(), p->value.cols(), cfg);
  }

  void step() {
    for (size_t i = 0; i < params_.size(); ++i)
      adam_step(params_[i]->value, params_[i]->grad, states_[i]);
  }

  size_t step_count() const {
    return states_.empty() ? 0 : states_.front().step_count;
  }

 private:
  std::vector<Param*> params_;
  std::vector<AdamState> states_;
};

}  // namespace modinv::net
