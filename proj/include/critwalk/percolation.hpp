#pragma once

#include "critwalk/gauge.hpp"
#include "critwalk/law.hpp"
#include "critwalk/target.hpp"
#include "critwalk/tree.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace critwalk {

enum class Arithmetic { Auto, Double, Exact };

struct PercolationOptions {
  Arithmetic arithmetic = Arithmetic::Auto;
  std::size_t max_states = kDefaultMaxStates;
  /// Auto switches to rationals only below these sizes.
  std::size_t exact_state_limit = 10'000;
  std::size_t exact_vertex_limit = 4'096;
};

struct SurvivalReport {
  double survival = 0.0;
  std::optional<Rational> survival_exact;
  /// p(B; n) for n = 0..N, p(B; 0) = 1.
  std::vector<double> marginals;
  std::optional<std::vector<Rational>> marginals_exact;
  /// "exact-dp", "psi" or "mc".
  std::string method;
};

/// P(some depth-N vertex survives) on an explicit tree, by a leaf-up DP over
/// (vertex, target state).
SurvivalReport survival_exact(const ExplicitTree& tree, const IncrementLaw& law, const TargetSet& target,
                              const PercolationOptions& opts = {});

/// Survival on the (possibly virtual) symmetric tree with growth f(1..N):
/// survival = 1 - Psi. Non-integer growth forces floating point.
SurvivalReport psi_symmetric(const GrowthProfile& profile, const IncrementLaw& law, const TargetSet& target,
                             const PercolationOptions& opts = {});

struct Marginals {
  std::vector<double> p;  // p[0..N], p[0] = 1
  std::optional<std::vector<Rational>> exact;
};

Marginals marginals(const IncrementLaw& law, const TargetSet& target, int depth, const PercolationOptions& opts = {});

/// Box target with retention p(B;i)/p(B;i-1); throws on a zero marginal.
TargetSet symmetrize_target(const IncrementLaw& law, const TargetSet& target, int depth,
                            const PercolationOptions& opts = {});

struct ChainRecord {
  double p_b_gamma = 0.0;      // P(B; Gamma)
  double p_b_sgamma = 0.0;     // P(B; S(Gamma))
  double p_sb_sgamma = 0.0;    // P(S(B); S(Gamma))
  double cap_bound = 0.0;      // 2 / R_p
  double p_sb_gamma = 0.0;     // P(S(B); Gamma)
  std::optional<Rational> p_b_gamma_exact;
  std::optional<Rational> p_sb_gamma_exact;
  bool chain_holds = false;
  bool swap_counterexample = false;
  bool virtual_profile = false;
};

inline constexpr double kChainSlack = 1e-10;

ChainRecord comparison_chain(const ExplicitTree& tree, const IncrementLaw& law, const TargetSet& target,
                                const PercolationOptions& opts = {});

struct PairSurvival {
  double joint = 0.0;  // P(root connects to both of two depth-n vertices meeting at depth k)
  double ratio = 0.0;  // joint / p(n)^2
};

PairSurvival pair_survival(const IncrementLaw& law, const TargetSet& target, int n, int k,
                           const PercolationOptions& opts = {});

/// Gauge p(n) = p(B; n) over [1, N].
Gauge marginal_gauge(const IncrementLaw& law, const TargetSet& target, int depth, const PercolationOptions& opts = {});

/// g(k) = min over n in [k, N] of p(n)^2 / joint(n, k), made nonincreasing;
/// any pair of depth-n vertices then satisfies joint <= p(n)^2 / g(k).
Gauge certified_pair_gauge(const IncrementLaw& law, const TargetSet& target, int depth,
                           const PercolationOptions& opts = {});

struct MomentBounds {
  double first_moment_upper = 0.0;   // content in gauge p
  double second_moment_lower = 0.0;  // Cap_g
  Cutset content_cutset;
};

MomentBounds moment_bounds(const ExplicitTree& tree, const Gauge& p, const Gauge& g);

struct Tp2Witness {
  int level = 0;            // k
  std::size_t state = 0;    // prefix state at level k-1
  double x = 0.0;           // lower row value
  double y = 0.0;           // upper row value
  int i = 0;                // columns i < j
  int j = 0;
  double lhs = 0.0;         // M_xi M_yj
  double rhs = 0.0;         // M_yi M_xj
};

struct Tp2Result {
  bool holds = true;
  std::optional<Tp2Witness> witness;
  std::size_t matrices = 0;
};

/// Checks every 2x2 minor of the matrices M[y][j] = P(prefix survives to
/// level j | coordinate k = y), one matrix per level k and reachable prefix state.
Tp2Result tp2_check(const IncrementLaw& law, const TargetSet& target, int depth, double tolerance = 1e-12);

struct ConvexityProbe {
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  double max_excess = 0.0;
};

/// h(z) = P(no survival to level n) for the product target with cumulative
/// retention z_1 >= ... >= z_n on the symmetric tree with growth f.
double h_function(std::span<const double> growth, std::span<const double> z);

ConvexityProbe h_convexity_probe(std::span<const double> growth, std::uint64_t trials, std::uint64_t seed);

/// The four-leaf tree: root, one child, two grandchildren with 2 and 1 children.
ExplicitTree counterexample_tree();

struct CounterexampleReport {
  Rational eps;
  Rational p_b_gamma;        // from the DP
  Rational p_sb_gamma;       // from the DP
  Rational formula_b;        // 1 - 2e^2 - 32e^3
  Rational formula_sb;       // 1 - 3e^2 - 12e^3/(1-e)
  Rational claimed_bound_sb;   // 1 - 3e^2
  ChainRecord chain;
};

CounterexampleReport counterexample(const Rational& eps);

/// A random small instance: tree of depth <= max_depth with <= max_children
/// children, lattice law with <= 3 atoms, Box or SumBand target with p(N) > 0.
struct RandomInstance {
  ExplicitTree tree;
  IncrementLaw law;
  TargetSet target;
};

RandomInstance random_instance(std::uint64_t seed, int max_depth = 4, int max_children = 3, bool symmetric = false);

}  // namespace critwalk
