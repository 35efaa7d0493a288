#include <cmath>
#include <cstring>

#include "wsnip/kernels.hpp"

namespace wsnip::kernels {
namespace {

void matmul_scalar(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                   const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    if (!accumulate) std::memset(crow, 0, n * sizeof(double));
    const double* arow = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = arow[p];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void add_row_vector_scalar(std::size_t rows, std::size_t cols, const double* v, double* c) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) c[r * cols + j] += v[j];
}

void column_sums_scalar(std::size_t rows, std::size_t cols, const double* a, double* out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) out[j] += a[r * cols + j];
}

void hadamard_scalar(std::size_t n, const double* a, const double* b, double* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double dot_scalar(std::size_t n, const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void adam_update_scalar(std::size_t n, double* param, const double* grad, double* m, double* v,
                        const AdamCoeffs& c) {
  const double one_m_b1 = 1.0 - c.beta1;
  const double one_m_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grad[i];
    m[i] = c.beta1 * m[i] + one_m_b1 * g;
    v[i] = c.beta2 * v[i] + one_m_b2 * (g * g);
    const double mhat = m[i] / c.bias1;
    const double vhat = v[i] / c.bias2;
    param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Isa::scalar,         matmul_scalar,   add_row_vector_scalar,
                                 column_sums_scalar,  hadamard_scalar, axpy_scalar,
                                 dot_scalar,          adam_update_scalar};
  return table;
}

}  // namespace wsnip::kernels
