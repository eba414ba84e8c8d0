#include <cmath>

#include "strel/kernels.hpp"

namespace strel::kernels {
namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T sum = 0;
  for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(std::size_t n, T alpha, T* x) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a_row = a + i * lda;
    T* c_row = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) {
      const T* b_row = b + j * ldb;
      T sum = 0;
      for (std::size_t p = 0; p < k; ++p) sum += a_row[p] * b_row[p];
      c_row[j] = accumulate ? c_row[j] + sum : sum;
    }
  }
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* c_row = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = 0;
    }
    const T* a_row = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      const T alpha = a_row[p];
      const T* b_row = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += alpha * b_row[j];
    }
  }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a,
             std::size_t lda, const T* b, std::size_t ldb, T* c,
             std::size_t ldc, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0;
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* a_row = a + p * lda;
    const T* b_row = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      const T alpha = a_row[i];
      T* c_row = c + i * ldc;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += alpha * b_row[j];
    }
  }
}

template <typename T>
void adamw(std::size_t n, T* param, const T* grad, T* m, T* v,
           const AdamWStep<T>& s) {
  const T decay = T(1) - s.lr * s.weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    param[i] *= decay;
    m[i] = s.beta1 * m[i] + (T(1) - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (T(1) - s.beta2) * grad[i] * grad[i];
    const T denom = std::sqrt(v[i]) / s.bias_correction2_sqrt + s.eps;
    param[i] -= s.step_size * m[i] / denom;
  }
}

template <typename T>
constexpr KernelTable<T> make_table() {
  return KernelTable<T>{Isa::scalar,  &dot<T>,     &axpy<T>,    &scale<T>,
                        &gemm_nt<T>, &gemm_nn<T>, &gemm_tn<T>, &adamw<T>};
}

constexpr KernelTable<float> kScalarF32 = make_table<float>();
constexpr KernelTable<double> kScalarF64 = make_table<double>();

}  // namespace

template <>
const KernelTable<float>& scalar_table<float>() {
  return kScalarF32;
}

template <>
const KernelTable<double>& scalar_table<double>() {
  return kScalarF64;
}

}  // namespace strel::kernels
