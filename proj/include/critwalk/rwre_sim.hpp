#pragma once

#include "critwalk/law.hpp"
#include "critwalk/rational.hpp"
#include "critwalk/tree.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

namespace critwalk {

/// Environment grown on demand. A vertex is identified by its path id
/// (root = 0, child j of v = derive_seed(v, j + 1)); its children and their
/// labels are a pure function of (master seed, path id).
class LazyEnvironment {
 public:
  using Shape = std::variant<GrowthProfile, OffspringLaw>;

  LazyEnvironment(Shape shape, IncrementLaw law, std::uint64_t master_seed);

  struct Node {
    std::uint64_t path_id = 0;
    int depth = 0;
    std::int32_t parent = -1;
    double log_conductance = 0.0;  // edge to the parent
    std::int32_t first_child = -1;  // -1 until expanded
    std::int32_t child_count = 0;
  };

  static constexpr std::int32_t kRoot = 0;

  const Node& node(std::int32_t i) const { return nodes_.at(static_cast<std::size_t>(i)); }
  /// Expands i if needed and returns it.
  const Node& expand(std::int32_t i);
  std::optional<std::int32_t> lookup(std::uint64_t path_id) const;
  std::size_t expanded_size() const { return nodes_.size(); }

  /// Order-independent digest of every expanded vertex.
  std::uint64_t digest() const;

 private:
  Shape shape_;
  IncrementLaw law_;
  std::uint64_t seed_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint64_t, std::int32_t> index_;
};

enum class EpisodeTag { ReturnedToRoot, ReachedDepth, Exhausted };
std::string to_string(EpisodeTag t);

struct EpisodeOutcome {
  EpisodeTag tag = EpisodeTag::Exhausted;
  std::int64_t steps = 0;
  int max_depth = 0;
};

/// Nearest-neighbour walk with probabilities proportional to conductances,
/// started at the root (which moves to a child).
EpisodeOutcome walk_episode(LazyEnvironment& env, int target_depth, std::int64_t max_steps, std::uint64_t seed);

struct EscapeEstimate {
  std::uint64_t episodes = 0;
  std::uint64_t reached = 0;
  std::uint64_t exhausted = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
};

/// Episodes e = 0..episodes-1 on one environment, episode e seeded by (seed, e).
EscapeEstimate escape_mc(const LazyEnvironment& env, int target_depth, std::int64_t max_steps,
                         std::uint64_t episodes, std::uint64_t seed, unsigned threads = 1);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

Quartiles quartiles(std::vector<double> values);

struct ScalingRow {
  int depth = 0;
  Quartiles conductance;
  Quartiles escape;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  /// median C_eff at the largest depth / median at the smallest.
  double ratio = 0.0;
  /// "transient-like", "recurrent-like" or "inconclusive".
  std::string verdict;
  std::vector<std::vector<double>> conductances;  // [depth index][environment]
};

inline constexpr std::int64_t kMaxScalingVertices = 1 << 24;

/// Exact effective conductance of M seeded environments (environment m uses
/// seed derive_seed(seed, m)) at every depth of the grid, on nested
/// truncations of one symmetric tree.
ScalingReport conductance_scaling_mc(const GrowthProfile& profile, const IncrementLaw& law,
                                     const std::vector<int>& depths, std::uint64_t environments, std::uint64_t seed,
                                     unsigned threads = 1);

/// Crossing counts per edge (indexed by the child vertex); weight = 1 + number
/// of completed out-and-back trips = 1 + crossings / 2.
struct UrnState {
  std::vector<std::int64_t> crossings;
  std::int64_t weight(VertexId v) const { return 1 + crossings.at(static_cast<std::size_t>(v)) / 2; }
  /// Whether the last crossing of the edge is still waiting for its return.
  bool pending(VertexId v) const { return crossings.at(static_cast<std::size_t>(v)) % 2 == 1; }
};

struct ReinforcedTrace {
  UrnState urn;
  /// exits[v]: neighbours chosen on successive departures from v.
  std::vector<std::vector<VertexId>> exits;
  std::int64_t steps = 0;
  std::int64_t root_returns = 0;
  int max_depth = 0;
};

/// Unbiased edge-reinforced walk from the root for `steps` steps.
ReinforcedTrace reinforced_episode(const ExplicitTree& tree, std::int64_t steps, std::uint64_t seed);

/// Colours are 1..d.
Rational polya_sequence_prob(int d, const std::vector<int>& colors);
Rational dirichlet_exit_prob(int d, const std::vector<int>& colors);

struct EquivalenceReport {
  int degree = 0;
  int length = 0;
  std::uint64_t episodes = 0;
  std::vector<Rational> table;  // exact probability per sequence, lexicographic
  std::vector<std::uint64_t> reinforced_counts;
  std::vector<std::uint64_t> rwre_counts;
  int dof = 0;
  double reinforced_chi2 = 0.0;
  double reinforced_p = 0.0;
  double rwre_chi2 = 0.0;
  double rwre_p = 0.0;
  /// P(first two exits equal) = 2/(d+1); only with length >= 2.
  double same_first_two_expected = 0.0;
  double reinforced_same = 0.0;
  double reinforced_same_se = 0.0;
  double rwre_same = 0.0;
  double rwre_same_se = 0.0;
  bool passes(double alpha = 1e-3) const { return reinforced_p > alpha && rwre_p > alpha; }
};

/// Exit sequences of length k from the centre of a d-leaf star: reinforced
/// walk versus a walk in a fixed environment of normalized i.i.d. Exp(1) weights.
EquivalenceReport equivalence_test(int degree, int length, std::uint64_t episodes, std::uint64_t seed,
                                   unsigned threads = 1);

struct DecayPoint {
  std::int64_t n = 0;
  std::uint64_t survivors = 0;
  double estimate = 0.0;
  double stderr_ = 0.0;
  double ci_low = 0.0;  // Wilson 95%
  double ci_high = 0.0;
};

struct DecayReport {
  double alpha = 0.0;
  double drift = 0.0;
  std::uint64_t episodes = 0;
  std::vector<DecayPoint> points;
  /// Weighted least-squares slope of log P against log n over grid points with
  /// survivors; NaN when fewer than two such points.
  double slope = 0.0;
  double slope_se = 0.0;
  int fitted_points = 0;
};

/// P(S_k > c k for all k <= n) for symmetric alpha-stable increments.
DecayReport stable_ray_decay(double alpha, double drift, const std::vector<std::int64_t>& grid,
                             std::uint64_t episodes, std::uint64_t seed, unsigned threads = 1);

}  // namespace critwalk
