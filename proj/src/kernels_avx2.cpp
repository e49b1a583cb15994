#include "modinv/kernels.hpp"

// AVX2+FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma on x86-64; nothing here may be called before the runtime
// CPU probe in kernels.cpp has confirmed support. Per-element accumulation
// order matches the scalar kernels except for FMA contraction and the
// 4-lane tree reduction in dot products, so results agree to a few ulps.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace modinv::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

void matmul_nn_avx2(const double* a, size_t m, size_t k, const double* b,
                    size_t n, double* c) {
  std::memset(c, 0, m * n * sizeof(double));
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_set1_pd(arow[p]);
      const double* brow = b + p * n;
      size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[p] * brow[j];
    }
  }
}

void matmul_nt_avx2(const double* a, size_t m, size_t k, const double* b,
                    size_t n, double* c) {
  const size_t k4 = k & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      __m256d acc = _mm256_setzero_pd();
      size_t p = 0;
      for (; p < k4; p += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p),
                              _mm256_loadu_pd(brow + p), acc);
      double s = hsum(acc);
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
}

void matmul_tn_avx2(const double* a, size_t k, size_t m, const double* b,
                    size_t n, double* c) {
  std::memset(c, 0, m * n * sizeof(double));
  const size_t n4 = n & ~size_t(3);
  for (size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (size_t i = 0; i < m; ++i) {
      const __m256d av = _mm256_set1_pd(arow[i]);
      double* crow = c + i * n;
      size_t j = 0;
      for (; j < n4; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(av, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += arow[i] * brow[j];
    }
  }
}

void add_bias_rows_avx2(double* c, size_t m, size_t n, const double* bias) {
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    size_t j = 0;
    for (; j < n4; j += 4)
      _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j),
                                               _mm256_loadu_pd(bias + j)));
    for (; j < n; ++j) crow[j] += bias[j];
  }
}

void col_sums_avx2(const double* a, size_t m, size_t n, double* out) {
  std::memset(out, 0, n * sizeof(double));
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    size_t j = 0;
    for (; j < n4; j += 4)
      _mm256_storeu_pd(out + j, _mm256_add_pd(_mm256_loadu_pd(out + j),
                                              _mm256_loadu_pd(arow + j)));
    for (; j < n; ++j) out[j] += arow[j];
  }
}

void col_sq_dev_sums_avx2(const double* a, size_t m, size_t n,
                          const double* mean, double* out) {
  std::memset(out, 0, n * sizeof(double));
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    size_t j = 0;
    for (; j < n4; j += 4) {
      const __m256d d =
          _mm256_sub_pd(_mm256_loadu_pd(arow + j), _mm256_loadu_pd(mean + j));
      _mm256_storeu_pd(out + j,
                       _mm256_fmadd_pd(d, d, _mm256_loadu_pd(out + j)));
    }
    for (; j < n; ++j) {
      const double d = arow[j] - mean[j];
      out[j] += d * d;
    }
  }
}

void normalize_cols_affine_avx2(const double* x, size_t m, size_t n,
                                const double* mean, const double* rstd,
                                const double* gain, const double* shift,
                                double* y) {
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* xrow = x + i * n;
    double* yrow = y + i * n;
    size_t j = 0;
    for (; j < n4; j += 4) {
      __m256d v =
          _mm256_sub_pd(_mm256_loadu_pd(xrow + j), _mm256_loadu_pd(mean + j));
      v = _mm256_mul_pd(v, _mm256_loadu_pd(rstd + j));
      v = _mm256_fmadd_pd(v, _mm256_loadu_pd(gain + j),
                          _mm256_loadu_pd(shift + j));
      _mm256_storeu_pd(yrow + j, v);
    }
    for (; j < n; ++j)
      yrow[j] = (xrow[j] - mean[j]) * rstd[j] * gain[j] + shift[j];
  }
}

void relu_forward_avx2(const double* x, double* y, size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward_avx2(const double* x, const double* dy, double* dx,
                        size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) {
    const __m256d mask =
        _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(dx + i, _mm256_and_pd(mask, _mm256_loadu_pd(dy + i)));
  }
  for (; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void mul_elems_avx2(const double* a, const double* b, double* out, size_t n) {
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(
        out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

double dot_avx2(const double* a, const double* b, size_t n) {
  const size_t n4 = n & ~size_t(3);
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i < n4; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void scale_avx2(double* x, double s, size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), sv));
  for (; i < n; ++i) x[i] *= s;
}

void axpy_avx2(double alpha, const double* x, double* y, size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void softmax_rows_avx2(const double* logits, size_t m, size_t n,
                       double* probs) {
  const size_t n4 = n & ~size_t(3);
  for (size_t i = 0; i < m; ++i) {
    const double* lrow = logits + i * n;
    double* prow = probs + i * n;
    double mx = lrow[0];
    if (n >= 4) {
      __m256d vmax = _mm256_loadu_pd(lrow);
      size_t j = 4;
      for (; j + 4 <= n; j += 4)
        vmax = _mm256_max_pd(vmax, _mm256_loadu_pd(lrow + j));
      alignas(32) double lanes[4];
      _mm256_store_pd(lanes, vmax);
      mx = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
      for (; j < n; ++j) mx = std::max(mx, lrow[j]);
    } else {
      for (size_t j = 1; j < n; ++j) mx = std::max(mx, lrow[j]);
    }
    double sum = 0.0;
    for (size_t j = 0; j < n; ++j) {
      prow[j] = std::exp(lrow[j] - mx);
      sum += prow[j];
    }
    const __m256d inv = _mm256_set1_pd(1.0 / sum);
    size_t j = 0;
    for (; j < n4; j += 4)
      _mm256_storeu_pd(prow + j, _mm256_mul_pd(_mm256_loadu_pd(prow + j), inv));
    for (; j < n; ++j) prow[j] *= 1.0 / sum;
  }
}

void adam_update_avx2(double* p, const double* g, double* m, double* v,
                      size_t n, double lr, double beta1, double beta2,
                      double eps, double inv_bc1, double inv_bc2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d bc1 = _mm256_set1_pd(inv_bc1);
  const __m256d bc2 = _mm256_set1_pd(inv_bc2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);
  const size_t n4 = n & ~size_t(3);
  size_t i = 0;
  for (; i < n4; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(b1c, gv));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(b2c, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d mhat = _mm256_mul_pd(mv, bc1);
    const __m256d vhat = _mm256_mul_pd(vv, bc2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom);
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double mhat = m[i] * inv_bc1;
    const double vhat = v[i] * inv_bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

const Table* avx2_table_compiled() {
  static const Table table = {
      matmul_nn_avx2,    matmul_nt_avx2,
      matmul_tn_avx2,    add_bias_rows_avx2,
      col_sums_avx2,     col_sq_dev_sums_avx2,
      normalize_cols_affine_avx2,
      relu_forward_avx2, relu_backward_avx2,
      mul_elems_avx2,    dot_avx2,
      scale_avx2,        axpy_avx2,
      softmax_rows_avx2, adam_update_avx2,
      "avx2",
  };
  return &table;
}

}  // namespace modinv::kernels

#else  // non-x86 build: no AVX2 variant available

namespace modinv::kernels {
const Table* avx2_table_compiled() { return nullptr; }
}  // namespace modinv::kernels

#endif
