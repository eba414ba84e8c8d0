#pragma once

// Dense arithmetic kernels used by the encoder and the optimizer.
//
// Every kernel has a portable scalar reference implementation and, where the
// target supports it, a vectorized variant (AVX2+FMA on x86-64, NEON on
// AArch64). The variant is chosen once at runtime from the CPU feature set;
// STREL_KERNELS=scalar|avx2|neon overrides the choice.
//
// Matrices are row-major with explicit leading dimensions, BLAS style.

#include <cstddef>
#include <string_view>
#include <vector>

namespace strel::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

// One decoupled-weight-decay Adam update. step_size = lr / (1 - beta1^t),
// bias_correction2_sqrt = sqrt(1 - beta2^t).
template <typename T>
struct AdamWStep {
  T lr;
  T beta1;
  T beta2;
  T eps;
  T weight_decay;
  T step_size;
  T bias_correction2_sqrt;
};

template <typename T>
struct KernelTable {
  Isa isa;

  T (*dot)(const T* a, const T* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  // x *= alpha
  void (*scale)(std::size_t n, T alpha, T* x);

  // C[m x n] (+)= A[m x k] * B[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);
  // C[m x n] (+)= A[m x k] * B[k x n]
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);
  // C[m x n] (+)= A[k x m]^T * B[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  std::size_t lda, const T* b, std::size_t ldb, T* c,
                  std::size_t ldc, bool accumulate);

  void (*adamw)(std::size_t n, T* param, const T* grad, T* m, T* v,
                const AdamWStep<T>& step);
};

template <typename T>
const KernelTable<T>& scalar_table();

// Throws std::invalid_argument when the ISA is not compiled in or not
// supported by the running CPU.
template <typename T>
const KernelTable<T>& table_for(Isa isa);

bool isa_available(Isa isa);
std::vector<Isa> available_isas();

// The ISA used by active(): best available, unless overridden by the
// environment or set_active_isa().
Isa active_isa();
void set_active_isa(Isa isa);

template <typename T>
const KernelTable<T>& active() {
  return table_for<T>(active_isa());
}

}  // namespace strel::kernels
