#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "strel/kernels.hpp"
#include "tables.hpp"

namespace strel::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(STREL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect_best() {
#if defined(STREL_HAVE_NEON)
  return Isa::neon;
#else
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
#endif
}

Isa initial_isa() {
  if (const char* env = std::getenv("STREL_KERNELS"); env && *env) {
    const Isa requested = parse_isa(env);
    if (!isa_available(requested)) {
      throw std::invalid_argument(std::string("STREL_KERNELS=") + env +
                                  " is not available on this machine");
    }
    return requested;
  }
  return detect_best();
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{initial_isa()};
  return slot;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  if (name == "neon") return Isa::neon;
  throw std::invalid_argument("unknown kernel ISA '" + std::string(name) + "'");
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
      return cpu_has_avx2();
    case Isa::neon:
#if defined(STREL_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

std::vector<Isa> available_isas() {
  std::vector<Isa> out;
  for (Isa isa : {Isa::scalar, Isa::avx2, Isa::neon}) {
    if (isa_available(isa)) out.push_back(isa);
  }
  return out;
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA '" + std::string(isa_name(isa)) +
                                "' is not available on this machine");
  }
  active_slot().store(isa, std::memory_order_relaxed);
}

template <>
const KernelTable<float>& table_for<float>(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA '" + std::string(isa_name(isa)) +
                                "' is not available on this machine");
  }
  switch (isa) {
#if defined(STREL_HAVE_AVX2)
    case Isa::avx2:
      return detail::avx2_table_f32();
#endif
#if defined(STREL_HAVE_NEON)
    case Isa::neon:
      return detail::neon_table_f32();
#endif
    default:
      return scalar_table<float>();
  }
}

template <>
const KernelTable<double>& table_for<double>(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("kernel ISA '" + std::string(isa_name(isa)) +
                                "' is not available on this machine");
  }
  switch (isa) {
#if defined(STREL_HAVE_AVX2)
    case Isa::avx2:
      return detail::avx2_table_f64();
#endif
#if defined(STREL_HAVE_NEON)
    case Isa::neon:
      return detail::neon_table_f64();
#endif
    default:
      return scalar_table<double>();
  }
}

}  // namespace strel::kernels
