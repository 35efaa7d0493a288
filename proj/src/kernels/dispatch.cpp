#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "wsnip/kernels.hpp"

namespace wsnip::kernels {

#if defined(WSNIP_HAVE_AVX2)
const KernelTable& avx2_table_unchecked();
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::scalar: return true;
    case Isa::avx2:
#if defined(WSNIP_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* avx2_table() {
#if defined(WSNIP_HAVE_AVX2)
  if (cpu_supports(Isa::avx2)) return &avx2_table_unchecked();
#endif
  return nullptr;
}

namespace {

const KernelTable* initial_table() {
  const char* env = std::getenv("WSNIP_SIMD");
  const std::string want = env ? env : "";
  if (want == "scalar") return &scalar_table();
  if (const KernelTable* t = avx2_table()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

void select(Isa isa) {
  const KernelTable* t = isa == Isa::scalar ? &scalar_table() : avx2_table();
  if (!t) throw std::invalid_argument("kernel variant '" + std::string(isa_name(isa)) + "' is unavailable");
  current().store(t, std::memory_order_release);
}

}  // namespace wsnip::kernels
