#pragma once

// Dense double-precision kernels used by the encoder and the selector.
//
// Every kernel has a portable scalar reference implementation and, on x86-64,
// an AVX2+FMA variant. The variant is picked once at startup from CPUID and
// can be overridden with set_backend() or the PRFRL_SIMD environment variable
// ("scalar" or "avx2"). All matrices are row-major with explicit leading
// dimensions; the gemm kernels accumulate into C.

#include <cstddef>
#include <string_view>

namespace prfrl::kernels {

enum class Backend { kScalar, kAvx2 };

struct KernelTable {
  double (*dot)(std::size_t n, const double* x, const double* y);
  // y += a * x
  void (*axpy)(std::size_t n, double a, const double* x, double* y);
  // C[m x n] += A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);
  // C[m x n] += A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);
  // C[m x n] += A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);
};

const KernelTable& scalar_table();
// Null when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool backend_available(Backend backend);
Backend active_backend();
// Throws InvalidArgument if the backend is not supported on this CPU.
void set_backend(Backend backend);
std::string_view backend_name(Backend backend);

const KernelTable& active();

inline double dot(std::size_t n, const double* x, const double* y) {
  return active().dot(n, x, y);
}
inline void axpy(std::size_t n, double a, const double* x, double* y) {
  active().axpy(n, a, x, y);
}
inline void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  active().gemm_nn(m, n, k, a, lda, b, ldb, c, ldc);
}
inline void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  active().gemm_nt(m, n, k, a, lda, b, ldb, c, ldc);
}
inline void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
                    const double* a, std::size_t lda, const double* b,
                    std::size_t ldb, double* c, std::size_t ldc) {
  active().gemm_tn(m, n, k, a, lda, b, ldb, c, ldc);
}

}  // namespace prfrl::kernels
