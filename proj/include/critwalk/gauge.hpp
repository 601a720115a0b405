#pragma once

#include "critwalk/tree.hpp"
#include "critwalk/verdict.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace critwalk {

/// phi(n) = n^-alpha
struct PowerGauge {
  double alpha = 0.5;
};
/// phi(n) = e^{-beta n}
struct ExpGauge {
  double beta = 0.0;
};
/// values[n-1] = phi(n)
struct TabulatedGauge {
  std::vector<double> values;
};

/// Positive nonincreasing level weight with phi(0) = 1.
class Gauge {
 public:
  using Variant = std::variant<PowerGauge, ExpGauge, TabulatedGauge>;

  Gauge() = default;
  template <class T>
    requires std::is_constructible_v<Variant, T>
  Gauge(T v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  /// "pow:A", "exp:B", "tab:V1,V2,..." or "tab:@file.csv" (one value per
  /// line or comma separated).
  static Gauge parse(const std::string& spec);

  double operator()(int n) const;
  double inverse(int n) const { return 1.0 / (*this)(n); }
  std::string describe() const;
  const Variant& variant() const { return v_; }

  /// Throws std::invalid_argument unless phi is positive and nonincreasing
  /// on [0, depth].
  void validate(int depth) const;

 private:
  Variant v_ = PowerGauge{};
};

/// Probability weights on the deepest level, in id order.
struct BoundaryMeasure {
  std::vector<double> weight;
};

CutsetResult hausdorff_content(const ExplicitTree& tree, const Gauge& gauge, int min_level);

/// Content for every min_level in [1, depth].
std::vector<double> content_by_min_level(const ExplicitTree& tree, const Gauge& gauge);

/// Effective conductance of the network with a unit root resistor and
/// resistance 1/phi(k) - 1/phi(k-1) on every level-k edge.
double capacity_network(const ExplicitTree& tree, const Gauge& gauge);

/// I(mu) = sum over leaf pairs of mu mu / phi(depth of meet).
double energy(const ExplicitTree& tree, const Gauge& gauge, const BoundaryMeasure& mu);

struct EnergyResult {
  double capacity = 0.0;
  double energy = 0.0;
  BoundaryMeasure measure;
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kEnergyTolerance = 1e-12;
inline constexpr int kEnergyMaxIterations = 100000;

/// Minimizes the energy over the simplex by accelerated projected gradient
/// with restarts. Stops once the Frank-Wolfe gap is below tolerance * energy;
/// otherwise returns the best iterate with converged = false.
EnergyResult capacity_energy(const ExplicitTree& tree, const Gauge& gauge, double tolerance = kEnergyTolerance,
                             int max_iterations = kEnergyMaxIterations);

struct RpResult {
  double rp = 0.0;
  double bound = 0.0;  // 2 / rp
  bool virtual_profile = false;
};

/// R = 1/(p_N lambda_N) + sum_{i<N} (1/lambda_i - 1/lambda_{i+1}) / p_i over
/// p[0..N], lambda[0..N]. Zero entries of p give an infinite R.
double rp_formula(std::span<const double> p, std::span<const double> lambda);

RpResult rp_symmetric(const GrowthProfile& profile, const Gauge& gauge);

/// |Gamma_n| as a function of n, with the growth exponent when known.
struct LevelSizes {
  std::function<double(std::int64_t)> size;
  std::optional<double> exponent;
  std::string label;

  /// "poly:G" (n+1)^G, "ceilpow:G" ceil(n^G), "envelope:G" largest power of
  /// two <= (n+1)^G, "path".
  static LevelSizes parse(const std::string& spec);
  static LevelSizes from_profile(const GrowthProfile& profile);
};

struct SeriesReport {
  /// sum n^{-1/2} / |Gamma_n|
  Verdict capacity_series = Verdict::Undetermined;
  /// sum n^{-3/2} log |Gamma_n|
  Verdict regularity = Verdict::Undetermined;
  std::vector<double> capacity_partial;  // at n = 2^i
  std::vector<double> regularity_partial;
  /// "transient", "recurrent" or "undetermined".
  std::string prediction;
};

SeriesReport criterion_series(const LevelSizes& sizes, std::int64_t horizon);

}  // namespace critwalk
