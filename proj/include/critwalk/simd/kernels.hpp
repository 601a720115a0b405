#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

namespace critwalk::simd {

/// Inner loops of the lattice dynamic programs. Every entry has a scalar
/// reference implementation; vector variants must agree with it to rounding.
struct Kernels {
  const char* name;
  /// y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// sum of x[i]
  double (*sum)(const double* x, std::size_t n);
  /// sum of w[i] * x[i]
  double (*dot)(const double* w, const double* x, std::size_t n);
  /// x[i] = 0 for i < n, returning the mass removed
  double (*clear)(double* x, std::size_t n);
};

const Kernels& scalar_kernels();
/// nullptr when the build or the CPU lacks AVX2+FMA.
const Kernels* avx2_kernels();
/// AVX2 when available unless CRITWALK_SIMD=scalar is set in the environment.
const Kernels& active_kernels();

/// out[i] = sum_j probs[j] * in[i - shifts[j]] over the window [0, out.size()),
/// with in.size() == out.size(). Returns the mass that left the window above
/// (index >= size) and below (index < 0).
struct Spill {
  double below = 0.0;
  double above = 0.0;
};
Spill lattice_convolve(const Kernels& k, std::span<const double> in, std::span<double> out,
                       std::span<const std::int64_t> shifts, std::span<const double> probs);

/// out[i] = sum_j probs[j] * g(i + shifts[j]) where g = in inside the window
/// and g = outside_value beyond it.
void lattice_correlate(const Kernels& k, std::span<const double> in, std::span<double> out,
                       std::span<const std::int64_t> shifts, std::span<const double> probs,
                       double outside_value);

}  // namespace critwalk::simd
