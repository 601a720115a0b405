#pragma once

#include "critwalk/law.hpp"
#include "critwalk/tree.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace critwalk {

/// Edge conductances of a tree, one per non-root vertex (the edge to its
/// parent). Stored as logarithms so deep drifting environments stay finite.
class ConductanceMap {
 public:
  ConductanceMap() = default;
  /// log_c[0] is ignored; every other entry must be finite.
  static ConductanceMap from_log(const ExplicitTree& tree, std::vector<double> log_c);
  /// c[0] is ignored; every other entry must be positive and finite.
  static ConductanceMap from_values(const ExplicitTree& tree, std::span<const double> c);

  std::size_t size() const { return log_c_.size(); }
  double log_conductance(VertexId v) const { return log_c_.at(v); }
  double conductance(VertexId v) const { return std::exp(log_c_.at(v)); }
  const std::vector<double>& logs() const { return log_c_; }

  /// Every conductance multiplied by e^shift.
  ConductanceMap shifted(double shift) const;

 private:
  std::vector<double> log_c_;
};

/// I.i.d. labels X(v) for every non-root vertex; vertex v uses stream
/// (seed, v), so a truncation of the tree sees the same labels.
std::vector<double> sample_labels(const ExplicitTree& tree, const IncrementLaw& law, std::uint64_t seed);

/// log C(v) = sum of labels on the root path to v.
ConductanceMap environment_from_labels(const ExplicitTree& tree, std::span<const double> labels);

ConductanceMap sample_environment(const ExplicitTree& tree, const IncrementLaw& law, std::uint64_t seed);

/// Root to deepest level, by series/parallel reduction.
double effective_conductance(const ExplicitTree& tree, const ConductanceMap& cond);
double log_effective_conductance(const ExplicitTree& tree, const ConductanceMap& cond);

/// Root to deepest level with edge resistances r[v] >= 0 (r[0] ignored).
/// Zero-resistance edges are short circuits.
double effective_resistance(const ExplicitTree& tree, std::span<const double> resistance);

/// Probability that the walk from the root reaches the deepest level before
/// returning to the root.
double escape_probability(const ExplicitTree& tree, const ConductanceMap& cond);

struct BottleneckResult {
  double value = 0.0;
  Cutset cutset;
  /// U(v): minimum conductance along the root path to v (U(root) unused).
  std::vector<double> prefix_min;
};

BottleneckResult bottleneck_bound(const ExplicitTree& tree, const ConductanceMap& cond);

/// Nearest-neighbour transition probabilities proportional to conductances.
/// The root moves only to its children. Rows list the parent first (when
/// present), then the children in id order.
class TransitionKernel {
 public:
  std::span<const VertexId> neighbors(VertexId v) const;
  std::span<const double> probs(VertexId v) const;
  /// q(from, to); zero when not adjacent.
  double prob(VertexId from, VertexId to) const;
  VertexId size() const { return static_cast<VertexId>(offset_.size()) - 1; }

 private:
  friend TransitionKernel transition_kernel(const ExplicitTree&, const ConductanceMap&);
  std::vector<std::size_t> offset_;
  std::vector<VertexId> nbr_;
  std::vector<double> prob_;
};

TransitionKernel transition_kernel(const ExplicitTree& tree, const ConductanceMap& cond);

/// X(v) = log(q(v', v) / q(v', v'')) for depth >= 2; NaN at depths 0 and 1.
std::vector<double> recover_X(const ExplicitTree& tree, const TransitionKernel& kernel);

}  // namespace critwalk
