#pragma once

#include "critwalk/rational.hpp"
#include "critwalk/rng.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace critwalk {

struct LawError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Atoms value[i] * unit with exact probabilities.
struct FiniteLattice {
  std::vector<std::int64_t> values;
  std::vector<Rational> probs;
  double unit = 1.0;
};

struct Gaussian {
  double mean = 0.0;
  double sd = 1.0;
};

/// Characteristic function exp(-|scale * t|^alpha), alpha in (1, 2].
struct SymmetricStable {
  double alpha = 2.0;
  double scale = 1.0;
};

/// log(E1 / E2) for independent unit exponentials (standard logistic).
struct LogExponentialRatio {};

/// Uniform on [lo, hi]; rational endpoints keep interval probabilities exact.
struct Uniform {
  Rational lo = 0;
  Rational hi = 1;
};

/// Common law of the i.i.d. labels X(sigma).
class IncrementLaw {
 public:
  using Variant = std::variant<FiniteLattice, Gaussian, SymmetricStable, LogExponentialRatio, Uniform>;

  IncrementLaw(Variant v);  // NOLINT(google-explicit-constructor)

  static IncrementLaw rademacher();
  static IncrementLaw constant(double c);
  static IncrementLaw lattice(std::vector<std::int64_t> values, std::vector<Rational> probs, double unit = 1.0);

  /// "rademacher", "const:C", "lattice:V:P,V:P[,...][;unit=U]", "gauss:MEAN:SD",
  /// "stable:ALPHA[:SCALE]", "logexp", "uniform:LO:HI".
  static IncrementLaw parse(const std::string& spec);

  const Variant& variant() const { return v_; }
  std::string describe() const;

  bool is_lattice() const { return std::holds_alternative<FiniteLattice>(v_); }
  const FiniteLattice& lattice() const;
  /// Lattice probabilities as doubles (empty for non-lattice laws).
  const std::vector<double>& lattice_probs() const { return probs_double_; }

  bool has_mean() const;
  double mean() const;
  /// Standard deviation; infinite for stable laws with alpha < 2.
  double sd() const;

  double sample(StreamRng& rng) const;

  double cdf(double x) const;
  /// P(lo <= X <= hi); nullopt bounds are infinite.
  double interval_prob(std::optional<double> lo, std::optional<double> hi) const;
  /// Exact P(lo <= X <= hi) when the law and bounds allow it.
  std::optional<Rational> interval_prob_exact(const std::optional<Rational>& lo,
                                              const std::optional<Rational>& hi) const;
  /// Whether interval probabilities are available as exact rationals.
  bool is_exact() const;

  /// E exp(lambda X); +inf when divergent.
  double mgf(double lambda) const;

  /// Lattice approximation with `atoms` atoms, symmetric about the median
  /// for symmetric laws (mean exactly 0 there). Lattice laws are returned as is.
  IncrementLaw quantize(int atoms) const;

 private:
  Variant v_;
  std::vector<double> probs_double_;
};

/// Tail P(X > x) of the standard symmetric stable law (scale 1), by Nolan's
/// finite-interval integral representation.
double stable_tail(double alpha, double x);

/// Chambers-Mallows-Stuck sample of the standard symmetric stable law.
double sample_symmetric_stable(double alpha, StreamRng& rng);

}  // namespace critwalk
