// Compiled with -mavx2 -mfma. Only reached through the dispatch table after
// the CPU has reported AVX2 and FMA support; nothing in this translation
// unit may be shared with code that runs unconditionally.

#include <immintrin.h>

#include <cstddef>

#include "strel/kernels.hpp"
#include "tables.hpp"

namespace strel::kernels::detail {
namespace {

// Lane abstraction so the kernels below are written once per precision.
struct F32 {
  using T = float;
  using V = __m256;
  static constexpr std::size_t kLanes = 8;
  static V zero() { return _mm256_setzero_ps(); }
  static V set1(T x) { return _mm256_set1_ps(x); }
  static V load(const T* p) { return _mm256_loadu_ps(p); }
  static void store(T* p, V x) { _mm256_storeu_ps(p, x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_ps(a, b, c); }
  static V add(V a, V b) { return _mm256_add_ps(a, b); }
  static V sub(V a, V b) { return _mm256_sub_ps(a, b); }
  static V mul(V a, V b) { return _mm256_mul_ps(a, b); }
  static V div(V a, V b) { return _mm256_div_ps(a, b); }
  static V sqrt(V a) { return _mm256_sqrt_ps(a); }
  static T hsum(V x) {
    __m128 lo = _mm256_castps256_ps128(x);
    __m128 hi = _mm256_extractf128_ps(x, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
  static T scalar_sqrt(T x) { return _mm_cvtss_f32(_mm_sqrt_ss(_mm_set_ss(x))); }
};

struct F64 {
  using T = double;
  using V = __m256d;
  static constexpr std::size_t kLanes = 4;
  static V zero() { return _mm256_setzero_pd(); }
  static V set1(T x) { return _mm256_set1_pd(x); }
  static V load(const T* p) { return _mm256_loadu_pd(p); }
  static void store(T* p, V x) { _mm256_storeu_pd(p, x); }
  static V fmadd(V a, V b, V c) { return _mm256_fmadd_pd(a, b, c); }
  static V add(V a, V b) { return _mm256_add_pd(a, b); }
  static V sub(V a, V b) { return _mm256_sub_pd(a, b); }
  static V mul(V a, V b) { return _mm256_mul_pd(a, b); }
  static V div(V a, V b) { return _mm256_div_pd(a, b); }
  static V sqrt(V a) { return _mm256_sqrt_pd(a); }
  static T hsum(V x) {
    __m128d lo = _mm256_castpd256_pd128(x);
    __m128d hi = _mm256_extractf128_pd(x, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
  static T scalar_sqrt(T x) {
    __m128d v = _mm_set_sd(x);
    return _mm_cvtsd_f64(_mm_sqrt_sd(v, v));
  }
};

template <typename L>
typename L::T dot(const typename L::T* a, const typename L::T* b,
                  std::size_t n) {
  using T = typename L::T;
  constexpr std::size_t W = L::kLanes;
  auto acc0 = L::zero();
  auto acc1 = L::zero();
  std::size_t i = 0;
  for (; i + 2 * W <= n; i += 2 * W) {
    acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
    acc1 = L::fmadd(L::load(a + i + W), L::load(b + i + W), acc1);
  }
  for (; i + W <= n; i += W) {
    acc0 = L::fmadd(L::load(a + i), L::load(b + i), acc0);
  }
  T sum = L::hsum(L::add(acc0, acc1));
  for (; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

template <typename L>
void axpy(std::size_t n, typename L::T alpha, const typename L::T* x,
          typename L::T* y) {
  constexpr std::size_t W = L::kLanes;
  const auto va = L::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    L::store(y + i, L::fmadd(va, L::load(x + i), L::load(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename L>
void scale(std::size_t n, typename L::T alpha, typename L::T* x) {
  constexpr std::size_t W = L::kLanes;
  const auto va = L::set1(alpha);
  std::size_t i = 0;
  for (; i + W <= n; i += W) L::store(x + i, L::mul(va, L::load(x + i)));
  for (; i < n; ++i) x[i] *= alpha;
}

template <typename L>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const typename L::T* a, std::size_t lda, const typename L::T* b,
             std::size_t ldb, typename L::T* c, std::size_t ldc,
             bool accumulate) {
  using T = typename L::T;
  constexpr std::size_t W = L::kLanes;
  for (std::size_t i = 0; i < m; ++i) {
    const T* a_row = a + i * lda;
    T* c_row = c + i * ldc;
    std::size_t j = 0;
    // Four output columns share each load of the A row.
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + j * ldb;
      const T* b1 = b0 + ldb;
      const T* b2 = b1 + ldb;
      const T* b3 = b2 + ldb;
      auto s0 = L::zero();
      auto s1 = L::zero();
      auto s2 = L::zero();
      auto s3 = L::zero();
      std::size_t p = 0;
      for (; p + W <= k; p += W) {
        const auto va = L::load(a_row + p);
        s0 = L::fmadd(va, L::load(b0 + p), s0);
        s1 = L::fmadd(va, L::load(b1 + p), s1);
        s2 = L::fmadd(va, L::load(b2 + p), s2);
        s3 = L::fmadd(va, L::load(b3 + p), s3);
      }
      T r0 = L::hsum(s0);
      T r1 = L::hsum(s1);
      T r2 = L::hsum(s2);
      T r3 = L::hsum(s3);
      for (; p < k; ++p) {
        r0 += a_row[p] * b0[p];
        r1 += a_row[p] * b1[p];
        r2 += a_row[p] * b2[p];
        r3 += a_row[p] * b3[p];
      }
      if (accumulate) {
        c_row[j] += r0;
        c_row[j + 1] += r1;
        c_row[j + 2] += r2;
        c_row[j + 3] += r3;
      } else {
        c_row[j] = r0;
        c_row[j + 1] = r1;
        c_row[j + 2] = r2;
        c_row[j + 3] = r3;
      }
    }
    for (; j < n; ++j) {
      const T r = dot<L>(a_row, b + j * ldb, k);
      c_row[j] = accumulate ? c_row[j] + r : r;
    }
  }
}

template <typename L>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const typename L::T* a, std::size_t lda, const typename L::T* b,
             std::size_t ldb, typename L::T* c, std::size_t ldc,
             bool accumulate) {
  using T = typename L::T;
  for (std::size_t i = 0; i < m; ++i) {
    T* c_row = c + i * ldc;
    if (!accumulate) {
      for (std::size_t j = 0; j < n; ++j) c_row[j] = 0;
    }
    const T* a_row = a + i * lda;
    for (std::size_t p = 0; p < k; ++p) {
      axpy<L>(n, a_row[p], b + p * ldb, c_row);
    }
  }
}

template <typename L>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k,
             const typename L::T* a, std::size_t lda, const typename L::T* b,
             std::size_t ldb, typename L::T* c, std::size_t ldc,
             bool accumulate) {
  using T = typename L::T;
  if (!accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = 0;
    }
  }
  for (std::size_t p = 0; p < k; ++p) {
    const T* a_row = a + p * lda;
    const T* b_row = b + p * ldb;
    for (std::size_t i = 0; i < m; ++i) {
      axpy<L>(n, a_row[i], b_row, c + i * ldc);
    }
  }
}

template <typename L>
void adamw(std::size_t n, typename L::T* param, const typename L::T* grad,
           typename L::T* m, typename L::T* v,
           const AdamWStep<typename L::T>& s) {
  using T = typename L::T;
  constexpr std::size_t W = L::kLanes;
  const T decay = T(1) - s.lr * s.weight_decay;
  const auto vdecay = L::set1(decay);
  const auto vb1 = L::set1(s.beta1);
  const auto vb1c = L::set1(T(1) - s.beta1);
  const auto vb2 = L::set1(s.beta2);
  const auto vb2c = L::set1(T(1) - s.beta2);
  const auto vbc2 = L::set1(s.bias_correction2_sqrt);
  const auto veps = L::set1(s.eps);
  const auto vstep = L::set1(s.step_size);
  std::size_t i = 0;
  for (; i + W <= n; i += W) {
    const auto g = L::load(grad + i);
    const auto p = L::mul(L::load(param + i), vdecay);
    const auto mi = L::add(L::mul(vb1, L::load(m + i)), L::mul(vb1c, g));
    const auto vi =
        L::add(L::mul(vb2, L::load(v + i)), L::mul(L::mul(vb2c, g), g));
    const auto denom = L::add(L::div(L::sqrt(vi), vbc2), veps);
    L::store(m + i, mi);
    L::store(v + i, vi);
    L::store(param + i, L::sub(p, L::div(L::mul(vstep, mi), denom)));
  }
  for (; i < n; ++i) {
    param[i] *= decay;
    m[i] = s.beta1 * m[i] + (T(1) - s.beta1) * grad[i];
    v[i] = s.beta2 * v[i] + (T(1) - s.beta2) * grad[i] * grad[i];
    const T denom = L::scalar_sqrt(v[i]) / s.bias_correction2_sqrt + s.eps;
    param[i] -= s.step_size * m[i] / denom;
  }
}

template <typename L>
KernelTable<typename L::T> make_table() {
  return KernelTable<typename L::T>{Isa::avx2,  &dot<L>,     &axpy<L>,
                                    &scale<L>,  &gemm_nt<L>, &gemm_nn<L>,
                                    &gemm_tn<L>, &adamw<L>};
}

const KernelTable<float> kAvx2F32 = make_table<F32>();
const KernelTable<double> kAvx2F64 = make_table<F64>();

}  // namespace

const KernelTable<float>& avx2_table_f32() { return kAvx2F32; }
const KernelTable<double>& avx2_table_f64() { return kAvx2F64; }

}  // namespace strel::kernels::detail
