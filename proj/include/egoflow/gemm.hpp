// Row-major double GEMM used by the convolution fast path.
//
// When OpenBLAS is available (EGOFLOW_USE_CBLAS) calls are forwarded to
// cblas_dgemm with the library pinned to one thread; the code parallelizes
// across samples instead, which keeps results independent of thread count.
// Without a BLAS the portable kernel below is used; it is ~10x slower but
// produces the same results up to floating-point reassociation.
#pragma once

#include <cstdlib>
#include <cstring>
#include <string_view>

#if EGOFLOW_USE_CBLAS
#include <cblas.h>
#if defined(__linux__)
#include <unistd.h>
#endif
#endif

namespace egoflow {

// Some virtualized CPUs report a model string OpenBLAS's dispatcher does not
// recognize, silently dropping it to generic SSE2 kernels (observed: >5x
// slowdown).  The dispatcher reads OPENBLAS_CORETYPE in an ELF constructor,
// before main() runs, so the only reliable in-process fix is to re-exec once
// with the variable pinned.  Call this first thing in main(); it is a no-op
// when the variable is already set, the detected core is modern, or the CPU
// lacks the instruction sets.  Returns only when no re-exec was needed.
inline void ensure_blas_core([[maybe_unused]] char** argv) {
#if EGOFLOW_USE_CBLAS && defined(__x86_64__) && defined(__GNUC__) && defined(__linux__)
  if (std::getenv("OPENBLAS_CORETYPE") || std::getenv("EGOFLOW_BLAS_BOOT")) {
    return;
  }
  __builtin_cpu_init();
  const char* want = nullptr;
  if (__builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512bw") &&
      __builtin_cpu_supports("avx512dq") && __builtin_cpu_supports("avx512vl")) {
    want = "SKYLAKEX";
  } else if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    want = "HASWELL";
  }
  if (want == nullptr) return;
  const std::string_view core = ::openblas_get_corename();
  for (std::string_view good :
       {"Haswell", "SkylakeX", "Cooperlake", "SapphireRapids", "Zen"}) {
    if (core == good) return;
  }
  ::setenv("OPENBLAS_CORETYPE", want, 1);
  ::setenv("EGOFLOW_BLAS_BOOT", "1", 1);  // never re-exec twice
  ::execv("/proc/self/exe", argv);
  // exec failed; continue with whatever kernels we have.
#endif
}

}  // namespace egoflow

namespace egoflow::detail {

#if EGOFLOW_USE_CBLAS
// The library parallelizes across samples; OpenBLAS itself must stay
// single-threaded both to avoid oversubscription and to keep results
// independent of machine thread count.
inline void tune_openblas_once() {
  static const bool done = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)done;
}
#endif

// C(m x n) = alpha * op(A) * B + beta * C, all row-major.
// op(A) = A (k columns) when trans_a is false, A^T (A stored k x m) otherwise.
inline void dgemm(bool trans_a, int m, int n, int k, double alpha,
                  const double* a, int lda, const double* b, int ldb,
                  double beta, double* c, int ldc) {
#if EGOFLOW_USE_CBLAS
  tune_openblas_once();
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, CblasNoTrans,
              m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
#else
  for (int i = 0; i < m; ++i) {
    double* crow = c + static_cast<std::size_t>(i) * ldc;
    if (beta == 0.0) {
      std::memset(crow, 0, sizeof(double) * n);
    } else if (beta != 1.0) {
      for (int j = 0; j < n; ++j) crow[j] *= beta;
    }
    for (int l = 0; l < k; ++l) {
      double aval = trans_a ? a[static_cast<std::size_t>(l) * lda + i]
                            : a[static_cast<std::size_t>(i) * lda + l];
      double scaled = alpha * aval;
      const double* brow = b + static_cast<std::size_t>(l) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += scaled * brow[j];
    }
  }
#endif
}

}  // namespace egoflow::detail
