#pragma once
// Dense arithmetic kernels used by the network code.
//
// Every kernel has a portable scalar reference implementation. On x86-64 an
// AVX2/FMA variant is compiled into its own translation unit and picked at
// runtime when the CPU supports it. WSNIP_SIMD=scalar|avx2 overrides the
// automatic choice. Variants are interchangeable up to floating-point
// reassociation: matmul differs in rounding (FMA), the elementwise kernels are
// bit-identical.

#include <cstddef>
#include <string_view>

namespace wsnip::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double bias1;  // 1 - beta1^t
  double bias2;  // 1 - beta2^t
};

struct KernelTable {
  Isa isa;
  // c[m x n] = (accumulate ? c : 0) + a[m x k] * b[k x n]; row-major with leading dims.
  void (*matmul)(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                 const double* b, std::size_t ldb, double* c, std::size_t ldc, bool accumulate);
  // c[r, :] += v for every row r.
  void (*add_row_vector)(std::size_t rows, std::size_t cols, const double* v, double* c);
  // out[j] += sum_r a[r, j].
  void (*column_sums)(std::size_t rows, std::size_t cols, const double* a, double* out);
  // out = a .* b
  void (*hadamard)(std::size_t n, const double* a, const double* b, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  double (*dot)(std::size_t n, const double* a, const double* b);
  void (*adam_update)(std::size_t n, double* param, const double* grad, double* m, double* v,
                      const AdamCoeffs& c);
};

const KernelTable& scalar_table();

// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

// The table used by the library. Chosen once on first use.
const KernelTable& active();

// Forces a variant (tests, benchmarks). Throws std::invalid_argument if the
// variant is unavailable on this machine.
void select(Isa isa);

}  // namespace wsnip::kernels
