#include "critwalk/simd/kernels.hpp"

#include <algorithm>
#include <cstdlib>
#include <string_view>

namespace critwalk::simd {

#if defined(CRITWALK_HAVE_AVX2)
const Kernels& avx2_kernels_impl();
#endif

const Kernels* avx2_kernels() {
#if defined(CRITWALK_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  if (supported) return &avx2_kernels_impl();
#endif
  return nullptr;
}

const Kernels& active_kernels() {
  static const Kernels* chosen = [] {
    const char* env = std::getenv("CRITWALK_SIMD");
    if (env != nullptr && std::string_view(env) == "scalar") return &scalar_kernels();
    if (const Kernels* k = avx2_kernels()) return k;
    return &scalar_kernels();
  }();
  return *chosen;
}

Spill lattice_convolve(const Kernels& k, std::span<const double> in, std::span<double> out,
                       std::span<const std::int64_t> shifts, std::span<const double> probs) {
  const auto n = static_cast<std::int64_t>(in.size());
  std::fill(out.begin(), out.end(), 0.0);
  Spill spill;
  for (std::size_t j = 0; j < shifts.size(); ++j) {
    const std::int64_t s = shifts[j];
    const double p = probs[j];
    if (p == 0.0) continue;
    // Source indices i with 0 <= i + s < n.
    const std::int64_t src_begin = std::max<std::int64_t>(0, -s);
    const std::int64_t src_end = std::min<std::int64_t>(n, n - s);
    if (src_begin < src_end) {
      k.axpy(p, in.data() + src_begin, out.data() + src_begin + s,
             static_cast<std::size_t>(src_end - src_begin));
    }
    if (s > 0) {
      const std::int64_t from = std::max<std::int64_t>(0, n - s);
      spill.above += p * k.sum(in.data() + from, static_cast<std::size_t>(n - from));
    } else if (s < 0) {
      const std::int64_t to = std::min<std::int64_t>(n, -s);
      spill.below += p * k.sum(in.data(), static_cast<std::size_t>(to));
    }
  }
  return spill;
}

void lattice_correlate(const Kernels& k, std::span<const double> in, std::span<double> out,
                       std::span<const std::int64_t> shifts, std::span<const double> probs,
                       double outside_value) {
  const auto n = static_cast<std::int64_t>(in.size());
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t j = 0; j < shifts.size(); ++j) {
    const std::int64_t s = shifts[j];
    const double p = probs[j];
    if (p == 0.0) continue;
    // Destination i reads in[i + s]; valid for 0 <= i + s < n.
    const std::int64_t dst_begin = std::max<std::int64_t>(0, -s);
    const std::int64_t dst_end = std::min<std::int64_t>(n, n - s);
    if (dst_begin < dst_end) {
      k.axpy(p, in.data() + dst_begin + s, out.data() + dst_begin,
             static_cast<std::size_t>(dst_end - dst_begin));
    }
    const double add = p * outside_value;
    if (add == 0.0) continue;
    for (std::int64_t i = 0; i < std::min(dst_begin, n); ++i) out[i] += add;
    for (std::int64_t i = std::max<std::int64_t>(dst_end, 0); i < n; ++i) out[i] += add;
  }
}

}  // namespace critwalk::simd
