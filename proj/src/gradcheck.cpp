#include "modinv/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <unordered_set>

#include "modinv/kernels.hpp"
#include "modinv/rng.hpp"

namespace modinv::net {

namespace {

// Sampled coordinate indices, without replacement.
std::vector<size_t> sample_coords(size_t total, size_t want, Rng& rng) {
  if (want >= total) {
    std::vector<size_t> all(total);
    for (size_t i = 0; i < total; ++i) all[i] = i;
    return all;
  }
  std::unordered_set<size_t> picked;
  picked.reserve(want * 2);
  std::vector<size_t> out;
  out.reserve(want);
  while (out.size() < want) {
    const size_t idx = static_cast<size_t>(rng.below(total));
    if (picked.insert(idx).second) out.push_back(idx);
  }
  return out;
}

double tensor_inf_norm(const DenseMatrix& m) {
  double mx = 0.0;
  for (double v : m.values()) mx = std::max(mx, std::abs(v));
  return mx;
}

// Relative error with the noise-floor exclusion described in the header.
double coord_rel_err(double analytic, double numeric, double tau) {
  const double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom < tau) return 0.0;
  return std::abs(analytic - numeric) / denom;
}

GradCheckEntry check_tensor(DenseMatrix& values, const DenseMatrix& analytic,
                            const std::string& name,
                            const std::function<double()>& eval, double eps,
                            size_t coords, Rng& rng,
                            double corrupt_factor = 1.0) {
  GradCheckEntry entry{name, 0.0, 0};
  const double tau = std::max(0.01 * tensor_inf_norm(analytic), 1e-8);
  for (size_t idx : sample_coords(values.size(), coords, rng)) {
    const double saved = values.data()[idx];
    values.data()[idx] = saved + eps;
    const double f_plus = eval();
    values.data()[idx] = saved - eps;
    const double f_minus = eval();
    values.data()[idx] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    const double a = analytic.data()[idx] * corrupt_factor;
    entry.max_rel_err = std::max(entry.max_rel_err,
                                 coord_rel_err(a, numeric, tau));
    entry.coords_checked += 1;
  }
  return entry;
}

}  // namespace

std::vector<GradCheckEntry> check_network_params(Network& net,
                                                 const DenseMatrix& x,
                                                 std::span<const int> labels,
                                                 const GradCheckOptions& opts) {
  Rng rng(opts.seed);

  // Prime once with a live rng so dropout masks exist, then freeze.
  ForwardCtx prime{Mode::train, &rng, false, false};
  net.forward(x, prime);
  ForwardCtx frozen{Mode::train, nullptr, false, true};

  SoftmaxCrossEntropy loss;
  const auto eval = [&]() {
    return loss.forward(net.forward(x, frozen), labels).loss;
  };

  // Analytic pass.
  eval();
  net.backward(loss.backward());
  auto params = net.params();
  std::vector<DenseMatrix> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  std::vector<GradCheckEntry> report;
  for (size_t i = 0; i < params.size(); ++i) {
    const double factor =
        (static_cast<int>(i) == opts.corrupt_tensor) ? opts.corrupt_factor
                                                     : 1.0;
    report.push_back(check_tensor(params[i]->value, analytic[i],
                                  params[i]->name, eval, opts.eps,
                                  opts.coords_per_tensor, rng, factor));
  }
  return report;
}

GradCheckEntry check_layer(Layer& layer, const DenseMatrix& x, double eps,
                           uint64_t seed, double input_exclusion) {
  Rng rng(seed);

  // Fixed projection makes the objective scalar: f = sum(forward(x) * R).
  ForwardCtx prime{Mode::train, &rng, false, false};
  DenseMatrix y0 = layer.forward(x, prime);
  DenseMatrix projection(y0.rows(), y0.cols());
  for (size_t i = 0; i < projection.size(); ++i)
    projection.data()[i] = rng.uniform(-1.0, 1.0);

  ForwardCtx frozen{Mode::train, nullptr, false, true};
  DenseMatrix input = x;
  const auto eval = [&]() {
    const DenseMatrix y = layer.forward(input, frozen);
    return kernels::active().dot(y.data(), projection.data(), y.size());
  };

  eval();
  DenseMatrix dx = layer.backward(projection);

  GradCheckEntry entry{layer.kind(), 0.0, 0};
  const double tau_x = std::max(0.01 * tensor_inf_norm(dx), 1e-8);
  for (size_t idx = 0; idx < input.size(); ++idx) {
    if (std::abs(input.data()[idx]) <= input_exclusion) continue;
    const double saved = input.data()[idx];
    input.data()[idx] = saved + eps;
    const double f_plus = eval();
    input.data()[idx] = saved - eps;
    const double f_minus = eval();
    input.data()[idx] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    entry.max_rel_err = std::max(
        entry.max_rel_err, coord_rel_err(dx.data()[idx], numeric, tau_x));
    entry.coords_checked += 1;
  }

  // Re-establish caches for the unperturbed input, then check params.
  eval();
  layer.backward(projection);
  for (Param* p : layer.params()) {
    const DenseMatrix analytic = p->grad;
    const GradCheckEntry sub = check_tensor(p->value, analytic,
                                            std::string(layer.kind()) + "." +
                                                p->name,
                                            eval, eps, 200, rng);
    entry.max_rel_err = std::max(entry.max_rel_err, sub.max_rel_err);
    entry.coords_checked += sub.coords_checked;
  }
  return entry;
}

GradCheckEntry check_softmax_ce(size_t batch, size_t classes, double eps,
                                uint64_t seed) {
  Rng rng(seed);
  DenseMatrix logits(batch, classes);
  for (size_t i = 0; i < logits.size(); ++i)
    logits.data()[i] = rng.normal(0.0, 1.5);
  std::vector<int> labels(batch);
  for (auto& l : labels) l = static_cast<int>(rng.below(classes));

  SoftmaxCrossEntropy head;
  const auto eval = [&]() { return head.forward(logits, labels).loss; };
  eval();
  const DenseMatrix analytic = head.backward();

  GradCheckEntry entry{"softmax_ce", 0.0, 0};
  const double tau = std::max(0.01 * tensor_inf_norm(analytic), 1e-8);
  for (size_t idx = 0; idx < logits.size(); ++idx) {
    const double saved = logits.data()[idx];
    logits.data()[idx] = saved + eps;
    const double f_plus = eval();
    logits.data()[idx] = saved - eps;
    const double f_minus = eval();
    logits.data()[idx] = saved;
    const double numeric = (f_plus - f_minus) / (2.0 * eps);
    entry.max_rel_err = std::max(
        entry.max_rel_err, coord_rel_err(analytic.data()[idx], numeric, tau));
    entry.coords_checked += 1;
  }
  return entry;
}

double max_rel_err(const std::vector<GradCheckEntry>& entries) {
  double mx = 0.0;
  for (const auto& e : entries) mx = std::max(mx, e.max_rel_err);
  return mx;
}

}  // namespace modinv::net
