#include <cstdlib>
#include <string>

#include "prfrl/error.h"
#include "prfrl/kernels.h"

namespace prfrl::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend detect() {
  const bool avx2 = avx2_table() != nullptr && cpu_has_avx2();
  if (const char* env = std::getenv("PRFRL_SIMD")) {
    const std::string value(env);
    if (value == "scalar") return Backend::kScalar;
    if (value == "avx2" && avx2) return Backend::kAvx2;
  }
  return avx2 ? Backend::kAvx2 : Backend::kScalar;
}

Backend& current() {
  static Backend backend = detect();
  return backend;
}

}  // namespace

bool backend_available(Backend backend) {
  if (backend == Backend::kScalar) return true;
  return avx2_table() != nullptr && cpu_has_avx2();
}

Backend active_backend() { return current(); }

void set_backend(Backend backend) {
  if (!backend_available(backend)) {
    throw InvalidArgument("kernel backend not available: " +
                          std::string(backend_name(backend)));
  }
  current() = backend;
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

const KernelTable& active() {
  return current() == Backend::kAvx2 ? *avx2_table() : scalar_table();
}

}  // namespace prfrl::kernels
