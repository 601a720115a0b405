#include "critwalk/simd/kernels.hpp"

namespace critwalk::simd {

namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double dot_scalar(const double* w, const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += w[i] * x[i];
  return s;
}

double clear_scalar(double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += x[i];
    x[i] = 0.0;
  }
  return s;
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", axpy_scalar, sum_scalar, dot_scalar, clear_scalar};
  return k;
}

}  // namespace critwalk::simd
