#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modinv/layers.hpp"
#include "modinv/matrix.hpp"

namespace modinv::net {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  size_t coords_checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  size_t coords_per_tensor = 200;
  uint64_t seed = 1;
  // When >= 0, the analytic gradient of that parameter tensor is scaled by
  // corrupt_factor before comparison. Exercises the checker's sensitivity.
  int corrupt_tensor = -1;
  double corrupt_factor = 2.0;
};

// Compares analytic parameter gradients of `net` (under softmax
// cross-entropy on (x, labels)) against central finite differences
// (f(t+eps) - f(t-eps)) / 2eps, sampling coords_per_tensor coordinates per
// tensor. Dropout masks are frozen and running statistics are not updated,
// so the loss is a fixed function of the parameters.
//
// Relative error per coordinate is |a - n| / max(|a|, |n|). Coordinates
// whose magnitude is below 1% of the tensor's gradient infinity-norm are
// excluded: at that scale the central difference is rounding noise, not
// signal.
std::vector<GradCheckEntry> check_network_params(Network& net,
                                                 const DenseMatrix& x,
                                                 std::span<const int> labels,
                                                 const GradCheckOptions& opts);

// Isolated layer check: objective is sum(forward(x) * R) for a fixed
// random projection R. Verifies dX and every parameter gradient.
// Input coordinates with |x| <= input_exclusion are skipped (ReLU kink).
GradCheckEntry check_layer(Layer& layer, const DenseMatrix& x, double eps,
                           uint64_t seed, double input_exclusion = 0.0);

// dLogits of the softmax cross-entropy head against finite differences.
GradCheckEntry check_softmax_ce(size_t batch, size_t classes, double eps,
                                uint64_t seed);

double max_rel_err(const std::vector<GradCheckEntry>& entries);

}  // namespace modinv::net
