#pragma once

#include <cstddef>
#include <string>

namespace modinv::kernels {

// Dense numeric inner loops, dispatched at runtime. Every entry has a
// scalar reference implementation; on x86-64 hosts with AVX2+FMA an
// intrinsics variant is selected instead. The two backends are
// equivalence-tested against each other; results may differ by normal
// floating-point reassociation only.
struct Table {
  // c[m x n] = a[m x k] * b[k x n]
  void (*matmul_nn)(const double* a, size_t m, size_t k, const double* b,
                    size_t n, double* c);
  // c[m x n] = a[m x k] * b[n x k]^T
  void (*matmul_nt)(const double* a, size_t m, size_t k, const double* b,
                    size_t n, double* c);
  // c[m x n] = a[k x m]^T * b[k x n]
  void (*matmul_tn)(const double* a, size_t k, size_t m, const double* b,
                    size_t n, double* c);
  // c[r, :] += bias for every row r
  void (*add_bias_rows)(double* c, size_t m, size_t n, const double* bias);
  // out[j] = sum_r a[r, j]
  void (*col_sums)(const double* a, size_t m, size_t n, double* out);
  // out[j] = sum_r (a[r, j] - mean[j])^2
  void (*col_sq_dev_sums)(const double* a, size_t m, size_t n,
                          const double* mean, double* out);
  // y[r, c] = (x[r, c] - mean[c]) * rstd[c] * gain[c] + shift[c]
  void (*normalize_cols_affine)(const double* x, size_t m, size_t n,
                                const double* mean, const double* rstd,
                                const double* gain, const double* shift,
                                double* y);
  void (*relu_forward)(const double* x, double* y, size_t n);
  void (*relu_backward)(const double* x, const double* dy, double* dx,
                        size_t n);
  void (*mul_elems)(const double* a, const double* b, double* out, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
  void (*scale)(double* x, double s, size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, size_t n);
  // probs[r, :] = softmax(logits[r, :]) with row-max subtraction
  void (*softmax_rows)(const double* logits, size_t m, size_t n,
                       double* probs);
  // Bias-corrected Adam. inv_bc1 = 1/(1-beta1^t), inv_bc2 = 1/(1-beta2^t).
  void (*adam_update)(double* p, const double* g, double* m, double* v,
                      size_t n, double lr, double beta1, double beta2,
                      double eps, double inv_bc1, double inv_bc2);
  const char* name;
};

// Active backend. Chosen once: MODINV_KERNELS=scalar|avx2|auto overrides
// the CPU-feature probe (auto is the default).
const Table& active();

const Table& scalar_table();
// nullptr when the binary lacks the AVX2 build or the CPU lacks AVX2/FMA.
const Table* avx2_table();

std::string backend_name();

}  // namespace modinv::kernels
