#pragma once

#include "critwalk/law.hpp"
#include "critwalk/rational.hpp"
#include "critwalk/walk1d.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace critwalk {

/// lower[k-1] <= S_k <= upper[k-1]; nullopt is unbounded.
struct SumBand {
  std::vector<std::optional<Rational>> lower;
  std::vector<std::optional<Rational>> upper;
};

/// Coordinate k is retained with probability retain[k-1], i.e. X_k <= b_k
/// with P(X <= b_k) = retain[k-1].
struct Box {
  std::vector<Rational> retain;
};

/// Closed interval; nullopt ends are infinite.
struct Interval {
  std::optional<Rational> lo;
  std::optional<Rational> hi;
  bool contains(const Rational& x) const { return (!lo || *lo <= x) && (!hi || x <= *hi); }
};

/// Union of coordinate boxes; boxes[b][k-1] constrains X_k.
struct UnionOfBoxes {
  std::vector<std::vector<Interval>> boxes;
};

/// S_k >= f(k) for every k >= n_f.
struct HalfSpaceFrom {
  walk1d::BoundaryFn f;
  std::int64_t n_f = 1;
};

class TargetSet {
 public:
  using Variant = std::variant<SumBand, Box, UnionOfBoxes, HalfSpaceFrom>;

  TargetSet() = default;
  template <class T>
    requires std::is_constructible_v<Variant, T>
  TargetSet(T v) : v_(std::move(v)) {  // NOLINT(google-explicit-constructor)
    validate();
  }

  /// "b0" (S_k >= 0), "half:BOUNDARY@NF", "box:Q1,Q2,...",
  /// "band:L1:U1,L2:U2,..." ("-inf"/"inf" allowed),
  /// "union:[a,b]x[c,d];[e,f]x[g,h]", "counterexample:EPS".
  static TargetSet parse(const std::string& spec);

  /// S_k >= 0 for all k.
  static TargetSet nonnegative_sums() { return HalfSpaceFrom{walk1d::ZeroBoundary{}, 1}; }

  const Variant& variant() const { return v_; }
  std::string describe() const;
  /// Number of constrained coordinates; nullopt when unlimited.
  std::optional<int> length() const;

 private:
  void validate() const;
  Variant v_ = Box{};
};

/// The target of the symmetrization counterexample:
/// ([0,1/2] x [2e,1] x [0,1]) u ([1/2,1] x [0,1] x [4e,1]).
TargetSet counterexample_target(const Rational& eps);

/// Per-level automaton of a target under a law: a prefix of length k is
/// summarized by one of states[k] states, and the next coordinate falls in
/// one of the value-ordered cells of level k+1.
struct CompiledTarget {
  static constexpr std::int32_t kDead = -1;

  int depth = 0;
  /// states[k], k = 0..depth; states[0] = 1.
  std::vector<std::size_t> states;
  /// Indexed by level k-1: probability and a representative value of each cell.
  std::vector<std::vector<double>> prob;
  std::vector<std::vector<double>> cell_value;
  /// Present when every cell probability is an exact rational.
  std::optional<std::vector<std::vector<Rational>>> prob_exact;
  /// Indexed by level k-1: next[s * cells + c] is the state at level k or kDead.
  std::vector<std::vector<std::int32_t>> next;

  std::size_t cells(int k) const { return prob.at(k - 1).size(); }
  std::size_t total_states() const;
};

inline constexpr std::size_t kDefaultMaxStates = 2'000'000;

/// Throws std::invalid_argument when the law cannot drive the target
/// (sum targets need lattice laws) or when the state count exceeds max_states.
CompiledTarget compile_target(const IncrementLaw& law, const TargetSet& target, int depth,
                              std::size_t max_states = kDefaultMaxStates);

}  // namespace critwalk
