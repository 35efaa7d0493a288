#include <cmath>

#include "wsnip/errors.hpp"
#include "wsnip/kernels.hpp"
#include "wsnip/net.hpp"

namespace wsnip {

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) t.data[c * a.rows + r] = a.data[r * a.cols + c];
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows)
    throw ShapeError("matmul: " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + " times " +
                     std::to_string(b.rows) + "x" + std::to_string(b.cols));
  Matrix c(a.rows, b.cols);
  if (c.size() == 0) return c;
  if (a.cols == 0) return c;
  kernels::active().matmul(a.rows, b.cols, a.cols, a.data.data(), a.cols, b.data.data(), b.cols, c.data.data(),
                           c.cols, false);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows) throw ShapeError("matmul_tn: row counts differ");
  return matmul(transpose(a), b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) throw ShapeError("matmul_nt: column counts differ");
  return matmul(a, transpose(b));
}

double ssp(double x) {
  // softplus(x) - ln 2, written to avoid overflow for large |x|.
  const double sp = x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return sp - M_LN2;
}

double ssp_derivative(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace wsnip
