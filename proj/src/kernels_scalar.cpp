#include <algorithm>
#include <cmath>
#include <cstring>

#include "modinv/kernels.hpp"

// Scalar reference kernels. These define the semantics the SIMD variants
// are tested against; keep the loops simple and the accumulation order
// obvious.

namespace modinv::kernels {
namespace {

void matmul_nn_scalar(const double* a, size_t m, size_t k, const double* b,
                      size_t n, double* c) {
  std::memset(c, 0, m * n * sizeof(double));
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const double* brow = b + p * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt_scalar(const double* a, size_t m, size_t k, const double* b,
                      size_t n, double* c) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void matmul_tn_scalar(const double* a, size_t k, size_t m, const double* b,
                      size_t n, double* c) {
  std::memset(c, 0, m * n * sizeof(double));
  for (size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void add_bias_rows_scalar(double* c, size_t m, size_t n, const double* bias) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) crow[j] += bias[j];
  }
}

void col_sums_scalar(const double* a, size_t m, size_t n, double* out) {
  std::memset(out, 0, n * sizeof(double));
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (size_t j = 0; j < n; ++j) out[j] += arow[j];
  }
}

void col_sq_dev_sums_scalar(const double* a, size_t m, size_t n,
                            const double* mean, double* out) {
  std::memset(out, 0, n * sizeof(double));
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double d = arow[j] - mean[j];
      out[j] += d * d;
    }
  }
}

void normalize_cols_affine_scalar(const double* x, size_t m, size_t n,
                                  const double* mean, const double* rstd,
                                  const double* gain, const double* shift,
                                  double* y) {
  for (size_t i = 0; i < m; ++i) {
    const double* xrow = x + i * n;
    double* yrow = y + i * n;
    for (size_t j = 0; j < n; ++j)
      yrow[j] = (xrow[j] - mean[j]) * rstd[j] * gain[j] + shift[j];
  }
}

void relu_forward_scalar(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_scalar(const double* x, const double* dy, double* dx,
                          size_t n) {
  for (size_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void mul_elems_scalar(const double* a, const double* b, double* out,
                      size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

double dot_scalar(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void scale_scalar(double* x, double s, size_t n) {
  for (size_t i = 0; i < n; ++i) x[i] *= s;
}

void axpy_scalar(double alpha, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void softmax_rows_scalar(const double* logits, size_t m, size_t n,
                         double* probs) {
  for (size_t i = 0; i < m; ++i) {
    const double* lrow = logits + i * n;
    double* prow = probs + i * n;
    double mx = lrow[0];
    for (size_t j = 1; j < n; ++j) mx = std::max(mx, lrow[j]);
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      prow[j] = std::exp(lrow[j] - mx);
      sum += prow[j];
    }
    const double inv = 1.0 / sum;
    for (size_t j = 0; j < n; ++j) prow[j] *= inv;
  }
}

void adam_update_scalar(double* p, const double* g, double* m, double* v,
                        size_t n, double lr, double beta1, double beta2,
                        double eps, double inv_bc1, double inv_bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * inv_bc1;
    const double vhat = v[i] * inv_bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Table& scalar_table() {
  static const Table table = {
      matmul_nn_scalar,    matmul_nt_scalar,
      matmul_tn_scalar,    add_bias_rows_scalar,
      col_sums_scalar,     col_sq_dev_sums_scalar,
      normalize_cols_affine_scalar,
      relu_forward_scalar, relu_backward_scalar,
      mul_elems_scalar,    dot_scalar,
      scale_scalar,        axpy_scalar,
      softmax_rows_scalar, adam_update_scalar,
      "scalar",
  };
  return table;
}

}  // namespace modinv::kernels
