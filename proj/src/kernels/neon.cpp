// AArch64 Advanced SIMD variants. NEON is architecturally mandatory on
// AArch64, so no runtime feature probe is needed.

#include <arm_neon.h>

#include <cstddef>

#include "strel/kernels.hpp"
#include "tables.hpp"

namespace strel::kernels::detail {
namespace {

struct F32 {
  using T = float;
  using V = float32x4_t;
  static constexpr std::size_t kLanes = 4;
  static V zero() { return vdupq_n_f32(0.0f); }
  static V set1(T x) { return vdupq_n_f32(x); }
  static V load(const T* p) { return vld1q_f32(p); }
  static void store(T* p, V x) { vst1q_f32(p, x); }
  static V fmadd(V a, V b, V c) { return vfmaq_f32(c, a, b); }
  static V add(V a, V b) { return vaddq_f32(a, b); }
  static V sub(V a, V b) { return vsubq_f32(a, b); }
  static V mul(V a, V b) { return vmulq_f32(a, b); }
  static V div(V a, V b) { return vdivq_f32(a, b); }
  static V sqrt(V a) { return vsqrtq_f32(a); }
  static T hsum(V x) { return vaddvq_f32(x); }
  static T scalar_sqrt(T x) { return vget_lane_f32(vsqrt_f32(vdup_n_f32(x)), 0); }
};

struct F64 {
  using T = double;
  using V = float64x2_t;
  static constexpr std::size_t kLanes = 2;
  static V zero() { return vdupq_n_f64(0.0); }
  static V set1(T x) { return vdupq_n_f64(x); }
  static V load(const T* p) { return vld1q_f64(p); }
  static void store(T* p, V x) { vst1q_f64(p, x); }
  static V fmadd(V a, V b, V c) { return vfmaq_f64(c, a, b); }
  static V add(V a, V b) { return vaddq_f64(a, b); }
  static V sub(V a, V b) { return vsubq_f64(a, b); }
  static V mul(V a, V b) { return vmulq_f64(a, b); }
  static V div(V a, V b) { return vdivq_f64(a, b); }
  static V sqrt(V a) { return vsqrtq_f64(a); }
  static T hsum(V x) { return vaddvq_f64(x); }
  static T scalar_sqrt(T x) { return vget_lane_f64(vsqrt_f64(vdup_n_f64(x)), 0); }
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
  for (std::size_t i = 0; i < m; ++i) {
    const T* a_row = a + i * lda;
    T* c_row = c + i * ldc;
    for (std::size_t j = 0; j < n; ++j) {
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
  return KernelTable<typename L::T>{Isa::neon,  &dot<L>,     &axpy<L>,
                                    &scale<L>,  &gemm_nt<L>, &gemm_nn<L>,
                                    &gemm_tn<L>, &adamw<L>};
}

const KernelTable<float> kNeonF32 = make_table<F32>();
const KernelTable<double> kNeonF64 = make_table<F64>();

}  // namespace

const KernelTable<float>& neon_table_f32() { return kNeonF32; }
const KernelTable<double>& neon_table_f64() { return kNeonF64; }

}  // namespace strel::kernels::detail
