// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after a runtime CPU check (see dispatch.cpp).
#include <immintrin.h>

#include <cmath>

#include "wsnip/kernels.hpp"

namespace wsnip::kernels {
namespace {

inline __m256d load_or_zero(bool accumulate, const double* p) {
  return accumulate ? _mm256_loadu_pd(p) : _mm256_setzero_pd();
}

double dot_tail(std::size_t k, const double* a, const double* b, std::size_t ldb) {
  double s = 0.0;
  for (std::size_t p = 0; p < k; ++p) s = std::fma(a[p], b[p * ldb], s);
  return s;
}

void matmul_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + (i + 0) * lda;
    const double* a1 = a + (i + 1) * lda;
    const double* a2 = a + (i + 2) * lda;
    const double* a3 = a + (i + 3) * lda;
    double* c0 = c + (i + 0) * ldc;
    double* c1 = c + (i + 1) * ldc;
    double* c2 = c + (i + 2) * ldc;
    double* c3 = c + (i + 3) * ldc;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d c00 = load_or_zero(accumulate, c0 + j), c01 = load_or_zero(accumulate, c0 + j + 4);
      __m256d c10 = load_or_zero(accumulate, c1 + j), c11 = load_or_zero(accumulate, c1 + j + 4);
      __m256d c20 = load_or_zero(accumulate, c2 + j), c21 = load_or_zero(accumulate, c2 + j + 4);
      __m256d c30 = load_or_zero(accumulate, c3 + j), c31 = load_or_zero(accumulate, c3 + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const double* brow = b + p * ldb + j;
        const __m256d b0 = _mm256_loadu_pd(brow);
        const __m256d b1 = _mm256_loadu_pd(brow + 4);
        __m256d av = _mm256_broadcast_sd(a0 + p);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(a1 + p);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(a2 + p);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(a3 + p);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
      }
      _mm256_storeu_pd(c0 + j, c00);
      _mm256_storeu_pd(c0 + j + 4, c01);
      _mm256_storeu_pd(c1 + j, c10);
      _mm256_storeu_pd(c1 + j + 4, c11);
      _mm256_storeu_pd(c2 + j, c20);
      _mm256_storeu_pd(c2 + j + 4, c21);
      _mm256_storeu_pd(c3 + j, c30);
      _mm256_storeu_pd(c3 + j + 4, c31);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d r0 = load_or_zero(accumulate, c0 + j);
      __m256d r1 = load_or_zero(accumulate, c1 + j);
      __m256d r2 = load_or_zero(accumulate, c2 + j);
      __m256d r3 = load_or_zero(accumulate, c3 + j);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d bv = _mm256_loadu_pd(b + p * ldb + j);
        r0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a0 + p), bv, r0);
        r1 = _mm256_fmadd_pd(_mm256_broadcast_sd(a1 + p), bv, r1);
        r2 = _mm256_fmadd_pd(_mm256_broadcast_sd(a2 + p), bv, r2);
        r3 = _mm256_fmadd_pd(_mm256_broadcast_sd(a3 + p), bv, r3);
      }
      _mm256_storeu_pd(c0 + j, r0);
      _mm256_storeu_pd(c1 + j, r1);
      _mm256_storeu_pd(c2 + j, r2);
      _mm256_storeu_pd(c3 + j, r3);
    }
    for (; j < n; ++j) {
      const double* bcol = b + j;
      c0[j] = (accumulate ? c0[j] : 0.0) + dot_tail(k, a0, bcol, ldb);
      c1[j] = (accumulate ? c1[j] : 0.0) + dot_tail(k, a1, bcol, ldb);
      c2[j] = (accumulate ? c2[j] : 0.0) + dot_tail(k, a2, bcol, ldb);
      c3[j] = (accumulate ? c3[j] : 0.0) + dot_tail(k, a3, bcol, ldb);
    }
  }
  for (; i < m; ++i) {
    const double* ar = a + i * lda;
    double* cr = c + i * ldc;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      __m256d r0 = load_or_zero(accumulate, cr + j);
      __m256d r1 = load_or_zero(accumulate, cr + j + 4);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d av = _mm256_broadcast_sd(ar + p);
        r0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), r0);
        r1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), r1);
      }
      _mm256_storeu_pd(cr + j, r0);
      _mm256_storeu_pd(cr + j + 4, r1);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d r0 = load_or_zero(accumulate, cr + j);
      for (std::size_t p = 0; p < k; ++p)
        r0 = _mm256_fmadd_pd(_mm256_broadcast_sd(ar + p), _mm256_loadu_pd(b + p * ldb + j), r0);
      _mm256_storeu_pd(cr + j, r0);
    }
    for (; j < n; ++j) cr[j] = (accumulate ? cr[j] : 0.0) + dot_tail(k, ar, b + j, ldb);
  }
}

void add_row_vector_avx2(std::size_t rows, std::size_t cols, const double* v, double* c) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* cr = c + r * cols;
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4)
      _mm256_storeu_pd(cr + j, _mm256_add_pd(_mm256_loadu_pd(cr + j), _mm256_loadu_pd(v + j)));
    for (; j < cols; ++j) cr[j] += v[j];
  }
}

void column_sums_avx2(std::size_t rows, std::size_t cols, const double* a, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) {
    __m256d s = _mm256_loadu_pd(out + j);
    for (std::size_t r = 0; r < rows; ++r) s = _mm256_add_pd(s, _mm256_loadu_pd(a + r * cols + j));
    _mm256_storeu_pd(out + j, s);
  }
  for (; j < cols; ++j)
    for (std::size_t r = 0; r < rows; ++r) out[j] += a[r * cols + j];
}

void hadamard_avx2(std::size_t n, const double* a, const double* b, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(av, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double dot_avx2(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Same operation order as the scalar kernel, so results are bit-identical.
void adam_update_avx2(std::size_t n, double* param, const double* grad, double* m, double* v,
                      const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1), b2 = _mm256_set1_pd(c.beta2);
  const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1), omb2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d bias1 = _mm256_set1_pd(c.bias1), bias2 = _mm256_set1_pd(c.bias2);
  const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d g = _mm256_loadu_pd(grad + i);
    const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(omb1, g));
    const __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                                     _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    const __m256d mhat = _mm256_div_pd(mi, bias1);
    const __m256d vhat = _mm256_div_pd(vi, bias2);
    const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
  }
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_m_b1 * g;
    v[i] = c.beta2 * v[i] + one_m_b2 * (g * g);
    const double mhat = m[i] / c.bias1;
    const double vhat = v[i] / c.bias2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
  static const KernelTable table{Isa::avx2,     matmul_avx2,   add_row_vector_avx2, column_sums_avx2,
                                 hadamard_avx2, axpy_avx2,     dot_avx2,            adam_update_avx2};
  return table;
}

}  // namespace wsnip::kernels
