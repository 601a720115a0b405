#pragma once

#include "critwalk/rational.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace critwalk {

using VertexId = std::int32_t;

struct TreeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kDefaultMaxDegree = 64;

/// Rooted finite tree in which every maximal path has length exactly depth().
///
/// Vertices are numbered breadth-first starting from the root (id 0), so each
/// level is a contiguous id range and the children of a vertex are contiguous.
/// Immutable after construction.
class ExplicitTree {
 public:
  /// Child counts of every non-leaf vertex in breadth-first order, grouped by
  /// level: counts[k][i] is the number of children of the i-th vertex at depth k.
  static ExplicitTree from_level_counts(const std::vector<std::vector<int>>& counts,
                                        int max_degree = kDefaultMaxDegree);

  VertexId root() const { return 0; }
  VertexId size() const { return static_cast<VertexId>(parent_.size()); }
  int depth() const { return static_cast<int>(level_offset_.size()) - 2; }

  VertexId parent(VertexId v) const { return parent_[check(v)]; }
  int depth_of(VertexId v) const { return depth_[check(v)]; }
  int child_count(VertexId v) const { return first_child_[check(v) + 1] - first_child_[v]; }
  VertexId first_child(VertexId v) const { return first_child_[check(v)]; }
  bool is_leaf(VertexId v) const { return child_count(v) == 0; }

  /// First id at depth k; level k spans [level_begin(k), level_begin(k + 1)).
  VertexId level_begin(int k) const { return level_offset_.at(k); }
  VertexId level_size(int k) const { return level_offset_.at(k + 1) - level_offset_.at(k); }
  std::vector<std::int64_t> level_sizes() const;

  std::span<const VertexId> parents() const { return parent_; }
  std::span<const int> depths() const { return depth_; }

  /// Child counts per level, the inverse of from_level_counts.
  std::vector<std::vector<int>> level_counts() const;

  /// Re-checks every structural invariant; throws TreeError with the first
  /// violation found.
  void validate() const;

  /// Subtree of all vertices at depth <= n.
  ExplicitTree truncate(int n) const;

 private:
  VertexId check(VertexId v) const {
    if (v < 0 || v >= size()) throw TreeError("unknown vertex id " + std::to_string(v));
    return v;
  }

  std::vector<VertexId> parent_;
  std::vector<VertexId> first_child_;  // size()+1 entries
  std::vector<int> depth_;
  std::vector<VertexId> level_offset_;  // depth()+2 entries
};

/// Growth numbers f(1..N) of a (possibly virtual) spherically symmetric tree.
class GrowthProfile {
 public:
  GrowthProfile() = default;
  explicit GrowthProfile(std::vector<Rational> growth);
  static GrowthProfile from_doubles(const std::vector<double>& growth);
  static GrowthProfile constant(int value, int depth);
  /// |Gamma_n| = largest power of two not exceeding (n+1)^gamma. Integer
  /// growth numbers, level sizes Theta(n^gamma).
  static GrowthProfile power_of_two_envelope(double gamma, int depth);

  int depth() const { return static_cast<int>(growth_.size()); }
  /// f(n), n in [1, depth()].
  const Rational& growth(int n) const { return growth_.at(n - 1); }
  double growth_double(int n) const { return to_double(growth(n)); }
  /// lambda_k = f(1)...f(k), lambda_0 = 1.
  const Rational& level_size(int k) const { return level_size_.at(k); }
  double level_size_double(int k) const { return level_size_double_.at(k); }
  bool is_integral() const;
  const std::vector<Rational>& growth() const { return growth_; }

  GrowthProfile prefix(int n) const;

 private:
  std::vector<Rational> growth_;
  std::vector<Rational> level_size_;
  std::vector<double> level_size_double_;
};

/// Antichain of vertices meeting every root-to-leaf path.
struct Cutset {
  std::vector<VertexId> vertices;
};

ExplicitTree build_symmetric(const GrowthProfile& profile, int depth,
                             int max_degree = kDefaultMaxDegree);
ExplicitTree build_explicit(const std::vector<std::vector<int>>& counts,
                            int max_degree = kDefaultMaxDegree);

/// Offspring law on {1..K}: weights[j] is the (unnormalized) weight of j+1
/// children. A zero-children entry is not representable, which keeps the
/// generated trees leafless below the truncation depth.
struct OffspringLaw {
  std::vector<double> weights;
  double mean() const;
};

ExplicitTree build_galton_watson(const OffspringLaw& law, int depth, std::uint64_t seed,
                                 int max_degree = kDefaultMaxDegree);

/// f(n) = |Gamma_n| / |Gamma_{n-1}|, exact.
GrowthProfile symmetrize_tree(const ExplicitTree& tree);

VertexId meet(const ExplicitTree& tree, VertexId a, VertexId b);

struct CutsetResult {
  double value = 0.0;
  Cutset cutset;
};

/// Minimum of sum w(v) over cutsets whose members all have depth >= min_level.
/// Ties prefer the shallower vertex.
CutsetResult min_cutset(const ExplicitTree& tree, std::span<const double> weight, int min_level);

bool is_cutset(const ExplicitTree& tree, const Cutset& cutset);

}  // namespace critwalk
