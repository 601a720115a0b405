#pragma once

#include "critwalk/law.hpp"
#include "critwalk/verdict.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

namespace critwalk::walk1d {

/// Boundary sequences f(n), n >= 1.
struct ZeroBoundary {};
struct PowerBoundary {
  double a = 1.0;
  double b = 0.5;
};
/// a * n^b * log(n+1)^c
struct PowerLogBoundary {
  double a = 1.0;
  double b = 0.5;
  double c = 0.0;
};
/// values[n-1] = f(n); constant beyond the table.
struct TabulatedBoundary {
  std::vector<double> values;
};

class BoundaryFn {
 public:
  using Variant = std::variant<ZeroBoundary, PowerBoundary, PowerLogBoundary, TabulatedBoundary>;

  BoundaryFn() = default;
  template <class T>
    requires std::is_constructible_v<Variant, T>
  BoundaryFn(T v) : v_(std::move(v)) {}  // NOLINT(google-explicit-constructor)

  /// "zero", "pow:A:B", "powlog:A:B:C", "tab:V1,V2,...".
  static BoundaryFn parse(const std::string& spec);

  double operator()(std::int64_t n) const;
  const Variant& variant() const { return v_; }
  std::string describe() const;

  /// Throws std::invalid_argument unless f is nonnegative and nondecreasing
  /// on [1, horizon].
  void validate(std::int64_t horizon) const;

 private:
  Variant v_;
};

using critwalk::Verdict;
using critwalk::to_string;

struct SummabilityReport {
  Verdict verdict = Verdict::Undetermined;
  /// partial_sums[i] = sum over n <= 2^i of n^{-3/2} f(n).
  std::vector<double> partial_sums;
};

/// Convergence of sum n^{-3/2} f(n): analytic for the power families,
/// partial sums only for tabulated boundaries.
SummabilityReport summability_verdict(const BoundaryFn& f, std::int64_t horizon);

struct ProbBracket {
  double lower = 0.0;
  double upper = 0.0;
  double width() const { return upper - lower; }
  double mid() const { return 0.5 * (lower + upper); }
};

inline constexpr double kDefaultCapMultiplier = 12.0;
inline constexpr double kBracketWarnWidth = 1e-9;

struct DpResult {
  ProbBracket prob;
  /// Set when the bracket is wider than kBracketWarnWidth.
  std::optional<std::string> warning;
};

/// P(S_k >= f(k) for all k in [a, n]) by exact lattice DP; the boundary is
/// rounded up onto the lattice. State space truncated at K * sd * sqrt(n).
DpResult dp_stay_above(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a, std::int64_t n,
                       double cap_multiplier = kDefaultCapMultiplier);

/// P(T_h > n) with T_h = min{k >= 1 : S_k < -h}.
DpResult dp_hitting_tail(const IncrementLaw& law, double h, std::int64_t n,
                         double cap_multiplier = kDefaultCapMultiplier);

/// P(S_k >= -f(k) for all k in [1, n]); the boundary is rounded toward zero.
DpResult dp_stay_above_negative(const IncrementLaw& law, const BoundaryFn& f, std::int64_t n,
                                double cap_multiplier = kDefaultCapMultiplier);

/// E(S_n^power | T_0 > n), power in {1, 2}.
double dp_conditional_moment(const IncrementLaw& law, std::int64_t n, int power,
                             double cap_multiplier = kDefaultCapMultiplier);

/// One DP pass evaluated at several horizons. barrier(k) is the lattice-unit
/// lower bound at step k (nullopt: unconstrained).
struct Checkpoint {
  std::int64_t n = 0;
  ProbBracket prob;
  /// E(S_n | survival) and E(S_n^2 | survival) in real units, over the
  /// tracked surviving mass.
  double mean = 0.0;
  double second_moment = 0.0;
};

struct BarrierSpec {
  /// Indexed by k = 1..n_max; entry 0 unused.
  std::vector<std::optional<std::int64_t>> barrier;
};

BarrierSpec barrier_above(const FiniteLattice& lat, const BoundaryFn& f, std::int64_t a, std::int64_t n);
BarrierSpec barrier_below(const FiniteLattice& lat, const BoundaryFn& f, std::int64_t n);

std::vector<Checkpoint> run_barrier_dp(const IncrementLaw& law, const BarrierSpec& spec,
                                       const std::vector<std::int64_t>& checkpoints,
                                       double cap_multiplier = kDefaultCapMultiplier);

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t successes = 0;
  std::uint64_t episodes = 0;
};

/// Frequency of {S_k >= f(k), k in [a, n]} over `episodes` independent walks.
/// Episode e draws from stream (seed, e); results do not depend on `threads`.
McEstimate mc_stay_above(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a, std::int64_t n,
                         std::uint64_t episodes, std::uint64_t seed, unsigned threads = 1);

/// Sequence of estimates at every grid horizon from one set of episodes.
std::vector<McEstimate> mc_stay_above_grid(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a,
                                           const std::vector<std::int64_t>& grid, std::uint64_t episodes,
                                           std::uint64_t seed, unsigned threads = 1);

/// -log min_{0<=lambda<=1} E exp(lambda X).
double backward_push(const IncrementLaw& law);

struct NfScan {
  std::int64_t n_f = 1;
  bool found = false;
};

/// Smallest power of two n_f <= max_n_f whose sqrt(n) P(A(f; n_f, n)) sequence
/// has settled: s(4 n_f) >= 0.9 s(2 n_f). Falls back to n_f = 1.
NfScan find_n_f(const IncrementLaw& law, const BoundaryFn& f, std::int64_t max_n_f = 1024,
                double cap_multiplier = kDefaultCapMultiplier);

struct AsymptoticsRow {
  std::int64_t n = 0;
  ProbBracket above;     // P(A(f; n_f, n))
  ProbBracket tail;      // P(T_0 > n)
  ProbBracket below;     // P(A(-f; 1, n))
  double sqrt_n_above() const { return std::sqrt(static_cast<double>(n)) * above.mid(); }
  double sqrt_n_tail() const { return std::sqrt(static_cast<double>(n)) * tail.mid(); }
  double sqrt_n_below() const { return std::sqrt(static_cast<double>(n)) * below.mid(); }
};

struct AsymptoticsReport {
  std::int64_t n_f = 1;
  bool n_f_found = false;
  std::vector<AsymptoticsRow> rows;
};

/// n_f < 0 requests a scan with find_n_f.
AsymptoticsReport asymptotics_report(const IncrementLaw& law, const BoundaryFn& f,
                                     const std::vector<std::int64_t>& grid, std::int64_t n_f = -1,
                                     double cap_multiplier = kDefaultCapMultiplier);

}  // namespace critwalk::walk1d
