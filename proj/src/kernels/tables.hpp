#pragma once

#include "strel/kernels.hpp"

namespace strel::kernels::detail {

#if defined(STREL_HAVE_AVX2)
const KernelTable<float>& avx2_table_f32();
const KernelTable<double>& avx2_table_f64();
#endif

#if defined(STREL_HAVE_NEON)
const KernelTable<float>& neon_table_f32();
const KernelTable<double>& neon_table_f64();
#endif

}  // namespace strel::kernels::detail
