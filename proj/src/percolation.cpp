#include "critwalk/percolation.hpp"

#include "critwalk/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace critwalk {

namespace {

template <class Num>
const std::vector<Num>& level_probs(const CompiledTarget& ct, int k) {
  if constexpr (std::is_same_v<Num, double>) {
    return ct.prob.at(k - 1);
  } else {
    return ct.prob_exact->at(k - 1);
  }
}

bool choose_exact(const CompiledTarget& ct, const PercolationOptions& o, double size_hint) {
  if (o.arithmetic == Arithmetic::Double) return false;
  if (!ct.prob_exact) {
    if (o.arithmetic == Arithmetic::Exact) {
      throw std::invalid_argument("exact arithmetic requested but the law has no exact interval probabilities");
    }
    return false;
  }
  if (o.arithmetic == Arithmetic::Exact) return true;
  return ct.total_states() <= o.exact_state_limit && size_hint <= static_cast<double>(o.exact_vertex_limit);
}

Rational int_pow(Rational base, unsigned e) {
  Rational r = 1;
  while (e > 0) {
    if (e & 1u) r *= base;
    e >>= 1;
    if (e) base *= base;
  }
  return r;
}

/// Probability that no depth-N vertex survives, seen from the root.
template <class Num>
Num root_nonsurvival(const ExplicitTree& tree, const CompiledTarget& ct) {
  const int n = tree.depth();
  std::vector<Num> below(static_cast<std::size_t>(tree.level_size(n)) * ct.states[n], Num(0));
  for (int d = n - 1; d >= 0; --d) {
    const std::size_t s_here = ct.states[d];
    const std::size_t s_below = ct.states[d + 1];
    const std::size_t cells = ct.cells(d + 1);
    const auto& p = level_probs<Num>(ct, d + 1);
    const auto& nx = ct.next[d];
    const VertexId begin = tree.level_begin(d);
    const VertexId begin_below = tree.level_begin(d + 1);
    std::vector<Num> cur(static_cast<std::size_t>(tree.level_size(d)) * s_here, Num(1));
    for (VertexId v = begin; v < begin + tree.level_size(d); ++v) {
      const std::size_t vi = static_cast<std::size_t>(v - begin);
      for (VertexId c = tree.first_child(v); c < tree.first_child(v) + tree.child_count(v); ++c) {
        const std::size_t ci = static_cast<std::size_t>(c - begin_below);
        for (std::size_t s = 0; s < s_here; ++s) {
          Num inner(0);
          for (std::size_t cell = 0; cell < cells; ++cell) {
            const auto t = nx[s * cells + cell];
            if (t == CompiledTarget::kDead) {
              inner += p[cell];
            } else {
              inner += p[cell] * below[ci * s_below + static_cast<std::size_t>(t)];
            }
          }
          cur[vi * s_here + s] *= inner;
        }
      }
    }
    below = std::move(cur);
  }
  return below[0];
}

template <class Num>
std::vector<Num> forward_marginals(const CompiledTarget& ct) {
  std::vector<Num> p{Num(1)};
  std::vector<Num> mass{Num(1)};
  for (int k = 1; k <= ct.depth; ++k) {
    const std::size_t cells = ct.cells(k);
    const auto& pr = level_probs<Num>(ct, k);
    std::vector<Num> next(ct.states[k], Num(0));
    for (std::size_t s = 0; s < mass.size(); ++s) {
      if (mass[s] == 0) continue;
      for (std::size_t c = 0; c < cells; ++c) {
        const auto t = ct.next[k - 1][s * cells + c];
        if (t != CompiledTarget::kDead) next[static_cast<std::size_t>(t)] += mass[s] * pr[c];
      }
    }
    mass = std::move(next);
    Num total(0);
    for (const auto& m : mass) total += m;
    p.push_back(total);
  }
  return p;
}

/// mass[k][s]: probability that the prefix of length k survives in state s.
std::vector<std::vector<double>> forward_masses(const CompiledTarget& ct) {
  std::vector<std::vector<double>> mass{{1.0}};
  for (int k = 1; k <= ct.depth; ++k) {
    const std::size_t cells = ct.cells(k);
    const auto& pr = ct.prob[k - 1];
    std::vector<double> next(ct.states[k], 0.0);
    for (std::size_t s = 0; s < mass.back().size(); ++s) {
      for (std::size_t c = 0; c < cells; ++c) {
        const auto t = ct.next[k - 1][s * cells + c];
        if (t != CompiledTarget::kDead) next[static_cast<std::size_t>(t)] += mass.back()[s] * pr[c];
      }
    }
    mass.push_back(std::move(next));
  }
  return mass;
}

/// tail[m][s] = P(survive to level j | state s at level m), for m = 0..j.
std::vector<std::vector<double>> backward_tails(const CompiledTarget& ct, int j) {
  std::vector<std::vector<double>> tail(j + 1);
  tail[j].assign(ct.states[j], 1.0);
  for (int m = j - 1; m >= 0; --m) {
    const std::size_t cells = ct.cells(m + 1);
    const auto& pr = ct.prob[m];
    tail[m].assign(ct.states[m], 0.0);
    for (std::size_t s = 0; s < ct.states[m]; ++s) {
      double acc = 0.0;
      for (std::size_t c = 0; c < cells; ++c) {
        const auto t = ct.next[m][s * cells + c];
        if (t != CompiledTarget::kDead) acc += pr[c] * tail[m + 1][static_cast<std::size_t>(t)];
      }
      tail[m][s] = acc;
    }
  }
  return tail;
}

void fill_marginals(SurvivalReport& r, const CompiledTarget& ct, bool exact) {
  if (exact) {
    auto m = forward_marginals<Rational>(ct);
    for (const auto& x : m) r.marginals.push_back(to_double(x));
    r.marginals_exact = std::move(m);
  } else {
    r.marginals = forward_marginals<double>(ct);
  }
}

}  // namespace

SurvivalReport survival_exact(const ExplicitTree& tree, const IncrementLaw& law, const TargetSet& target,
                              const PercolationOptions& opts) {
  if (tree.depth() < 1) throw TreeError("survival needs a tree of depth >= 1");
  const auto ct = compile_target(law, target, tree.depth(), opts.max_states);
  const bool exact = choose_exact(ct, opts, static_cast<double>(tree.size()));
  SurvivalReport r;
  r.method = "exact-dp";
  if (exact) {
    const Rational s = 1 - root_nonsurvival<Rational>(tree, ct);
    r.survival = to_double(s);
    r.survival_exact = s;
  } else {
    r.survival = 1.0 - root_nonsurvival<double>(tree, ct);
  }
  fill_marginals(r, ct, exact);
  return r;
}

SurvivalReport psi_symmetric(const GrowthProfile& profile, const IncrementLaw& law, const TargetSet& target,
                             const PercolationOptions& opts) {
  const int n = profile.depth();
  if (n < 1) throw std::invalid_argument("growth profile must have depth >= 1");
  const auto ct = compile_target(law, target, n, opts.max_states);
  bool exact = choose_exact(ct, opts, profile.level_size_double(n));
  if (exact && !profile.is_integral()) {
    if (opts.arithmetic == Arithmetic::Exact) {
      throw std::invalid_argument("exact Psi needs integer growth numbers");
    }
    exact = false;
  }
  SurvivalReport r;
  r.method = "psi";
  if (exact) {
    std::vector<Rational> g(ct.states[n], Rational(0));
    for (int k = n - 1; k >= 0; --k) {
      const std::size_t cells = ct.cells(k + 1);
      const auto& p = level_probs<Rational>(ct, k + 1);
      const unsigned f = profile.growth(k + 1).convert_to<unsigned>();
      std::vector<Rational> cur(ct.states[k]);
      for (std::size_t s = 0; s < ct.states[k]; ++s) {
        Rational inner = 0;
        for (std::size_t c = 0; c < cells; ++c) {
          const auto t = ct.next[k][s * cells + c];
          inner += t == CompiledTarget::kDead ? p[c] : p[c] * g[static_cast<std::size_t>(t)];
        }
        cur[s] = int_pow(inner, f);
      }
      g = std::move(cur);
    }
    r.survival_exact = 1 - g[0];
    r.survival = to_double(*r.survival_exact);
  } else {
    std::vector<double> g(ct.states[n], 0.0);
    for (int k = n - 1; k >= 0; --k) {
      const std::size_t cells = ct.cells(k + 1);
      const auto& p = ct.prob[k];
      const double f = profile.growth_double(k + 1);
      std::vector<double> cur(ct.states[k]);
      for (std::size_t s = 0; s < ct.states[k]; ++s) {
        double inner = 0.0;
        for (std::size_t c = 0; c < cells; ++c) {
          const auto t = ct.next[k][s * cells + c];
          inner += t == CompiledTarget::kDead ? p[c] : p[c] * g[static_cast<std::size_t>(t)];
        }
        inner = std::min(inner, 1.0);
        cur[s] = inner > 0.0 ? std::exp(f * std::log(inner)) : 0.0;
      }
      g = std::move(cur);
    }
    r.survival = 1.0 - g[0];
  }
  fill_marginals(r, ct, exact);
  return r;
}

Marginals marginals(const IncrementLaw& law, const TargetSet& target, int depth, const PercolationOptions& opts) {
  const auto ct = compile_target(law, target, depth, opts.max_states);
  Marginals m;
  if (choose_exact(ct, opts, 0.0)) {
    auto e = forward_marginals<Rational>(ct);
    for (const auto& x : e) m.p.push_back(to_double(x));
    m.exact = std::move(e);
  } else {
    m.p = forward_marginals<double>(ct);
  }
  return m;
}

TargetSet symmetrize_target(const IncrementLaw& law, const TargetSet& target, int depth,
                            const PercolationOptions& opts) {
  if (const auto* box = std::get_if<Box>(&target.variant())) {
    return Box{std::vector<Rational>(box->retain.begin(), box->retain.begin() + depth)};
  }
  const auto m = marginals(law, target, depth, opts);
  Box out;
  for (int i = 1; i <= depth; ++i) {
    if (!(m.p[i] > 0.0) && !(m.exact && (*m.exact)[i] > 0)) {
      throw std::invalid_argument(fmt::format("marginal p(B;{}) is zero; the target cannot be symmetrized", i));
    }
    if (m.exact) {
      out.retain.push_back((*m.exact)[i] / (*m.exact)[i - 1]);
    } else {
      out.retain.push_back(from_double(std::min(1.0, m.p[i] / m.p[i - 1])));
    }
  }
  return out;
}

ChainRecord comparison_chain(const ExplicitTree& tree, const IncrementLaw& law, const TargetSet& target,
                                const PercolationOptions& opts) {
  ChainRecord rec;
  const int n = tree.depth();
  const auto pb = survival_exact(tree, law, target, opts);
  rec.p_b_gamma = pb.survival;
  rec.p_b_gamma_exact = pb.survival_exact;
  const auto profile = symmetrize_tree(tree);
  rec.virtual_profile = !profile.is_integral();
  PercolationOptions psi_opts = opts;
  if (psi_opts.arithmetic == Arithmetic::Exact && rec.virtual_profile) psi_opts.arithmetic = Arithmetic::Auto;
  rec.p_b_sgamma = psi_symmetric(profile, law, target, psi_opts).survival;
  if (!(pb.marginals[n] > 0.0)) {
    // Nothing survives to depth N in any of the comparison percolations.
    rec.chain_holds = rec.p_b_gamma <= kChainSlack && rec.p_b_sgamma <= kChainSlack;
    return rec;
  }
  const auto sb = symmetrize_target(law, target, n, opts);
  rec.p_sb_sgamma = psi_symmetric(profile, law, sb, psi_opts).survival;
  std::vector<double> lambda(n + 1);
  for (int k = 0; k <= n; ++k) lambda[k] = profile.level_size_double(k);
  rec.cap_bound = 2.0 / rp_formula(pb.marginals, lambda);
  const auto psb = survival_exact(tree, law, sb, opts);
  rec.p_sb_gamma = psb.survival;
  rec.p_sb_gamma_exact = psb.survival_exact;
  rec.chain_holds = rec.p_b_gamma <= rec.p_b_sgamma + kChainSlack &&
                    rec.p_b_sgamma <= rec.p_sb_sgamma + kChainSlack && rec.p_sb_sgamma <= rec.cap_bound + kChainSlack;
  if (rec.p_b_gamma_exact && rec.p_sb_gamma_exact) {
    rec.swap_counterexample = *rec.p_sb_gamma_exact < *rec.p_b_gamma_exact;
  } else {
    rec.swap_counterexample = rec.p_sb_gamma < rec.p_b_gamma;
  }
  return rec;
}

PairSurvival pair_survival(const IncrementLaw& law, const TargetSet& target, int n, int k,
                           const PercolationOptions& opts) {
  if (n < 1 || k < 0 || k > n) throw std::invalid_argument("pair survival needs n >= 1 and 0 <= k <= n");
  const auto ct = compile_target(law, target, n, opts.max_states);
  const auto mass = forward_masses(ct);
  const auto tail = backward_tails(ct, n);
  PairSurvival out;
  for (std::size_t s = 0; s < ct.states[k]; ++s) out.joint += mass[k][s] * tail[k][s] * tail[k][s];
  double pn = 0.0;
  for (double m : mass[n]) pn += m;
  out.ratio = pn > 0.0 ? out.joint / (pn * pn) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Gauge marginal_gauge(const IncrementLaw& law, const TargetSet& target, int depth, const PercolationOptions& opts) {
  const auto m = marginals(law, target, depth, opts);
  return TabulatedGauge{std::vector<double>(m.p.begin() + 1, m.p.end())};
}

Gauge certified_pair_gauge(const IncrementLaw& law, const TargetSet& target, int depth,
                           const PercolationOptions& opts) {
  const auto ct = compile_target(law, target, depth, opts.max_states);
  const auto mass = forward_masses(ct);
  std::vector<double> p(depth + 1, 0.0);
  for (int n = 0; n <= depth; ++n) {
    for (double m : mass[n]) p[n] += m;
  }
  // joint[n][k] from one backward pass per horizon n.
  std::vector<double> g(depth + 1, std::numeric_limits<double>::infinity());
  g[0] = 1.0;
  for (int n = 1; n <= depth; ++n) {
    if (!(p[n] > 0.0)) continue;
    const auto tail = backward_tails(ct, n);
    for (int k = 1; k <= n; ++k) {
      double joint = 0.0;
      for (std::size_t s = 0; s < ct.states[k]; ++s) joint += mass[k][s] * tail[k][s] * tail[k][s];
      if (joint > 0.0) g[k] = std::min(g[k], p[n] * p[n] / joint);
    }
  }
  for (int k = 1; k <= depth; ++k) {
    if (!std::isfinite(g[k])) g[k] = g[k - 1];
    g[k] = std::min(g[k], g[k - 1]);
  }
  return TabulatedGauge{std::vector<double>(g.begin() + 1, g.end())};
}

MomentBounds moment_bounds(const ExplicitTree& tree, const Gauge& p, const Gauge& g) {
  MomentBounds mb;
  auto content = hausdorff_content(tree, p, 1);
  mb.first_moment_upper = content.value;
  mb.content_cutset = std::move(content.cutset);
  mb.second_moment_lower = capacity_network(tree, g);
  return mb;
}

Tp2Result tp2_check(const IncrementLaw& law, const TargetSet& target, int depth, double tolerance) {
  const auto ct = compile_target(law, target, depth);
  // tails[j][m][s]
  std::vector<std::vector<std::vector<double>>> tails(depth + 1);
  for (int j = 1; j <= depth; ++j) tails[j] = backward_tails(ct, j);
  Tp2Result out;
  for (int k = 1; k <= depth; ++k) {
    const std::size_t cells = ct.cells(k);
    const int cols = depth - k + 1;
    std::vector<double> m(cells * static_cast<std::size_t>(cols));
    for (std::size_t s = 0; s < ct.states[k - 1]; ++s) {
      ++out.matrices;
      for (std::size_t y = 0; y < cells; ++y) {
        const auto t = ct.next[k - 1][s * cells + y];
        for (int j = k; j <= depth; ++j) {
          m[y * cols + (j - k)] = t == CompiledTarget::kDead ? 0.0 : tails[j][k][static_cast<std::size_t>(t)];
        }
      }
      for (std::size_t x = 0; x < cells; ++x) {
        for (std::size_t y = x + 1; y < cells; ++y) {
          for (int i = 0; i < cols; ++i) {
            for (int j = i + 1; j < cols; ++j) {
              const double lhs = m[x * cols + i] * m[y * cols + j];
              const double rhs = m[y * cols + i] * m[x * cols + j];
              if (lhs < rhs - tolerance) {
                out.holds = false;
                out.witness = Tp2Witness{k,   s,       ct.cell_value[k - 1][x], ct.cell_value[k - 1][y],
                                         i + k, j + k, lhs,                     rhs};
                return out;
              }
            }
          }
        }
      }
    }
  }
  return out;
}

double h_function(std::span<const double> growth, std::span<const double> z) {
  const std::size_t n = z.size();
  if (n == 0 || n > growth.size()) throw std::invalid_argument("h needs 1 <= len(z) <= len(growth)");
  double g = 0.0;
  for (std::size_t k = n; k-- > 0;) {
    const double prev = k == 0 ? 1.0 : z[k - 1];
    const double q = prev > 0.0 ? std::clamp(z[k] / prev, 0.0, 1.0) : 0.0;
    const double inner = (1.0 - q) + q * g;
    g = inner > 0.0 ? std::pow(inner, growth[k]) : 0.0;
  }
  return g;
}

ConvexityProbe h_convexity_probe(std::span<const double> growth, std::uint64_t trials, std::uint64_t seed) {
  const std::size_t n = growth.size();
  if (n < 1 || n > 8) throw std::invalid_argument("convexity probe supports 1 to 8 levels");
  for (double f : growth) {
    if (!(f > 0.0)) throw std::invalid_argument("growth numbers must be positive");
  }
  ConvexityProbe out;
  out.trials = trials;
  std::vector<double> z(n);
  std::vector<double> w(n);
  std::vector<double> mid(n);
  for (std::uint64_t t = 0; t < trials; ++t) {
    StreamRng rng(seed, t);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.uniform();
      w[i] = rng.uniform();
    }
    std::sort(z.begin(), z.end(), std::greater<>());
    std::sort(w.begin(), w.end(), std::greater<>());
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (z[i] + w[i]);
    const double excess = h_function(growth, mid) - 0.5 * (h_function(growth, z) + h_function(growth, w));
    out.max_excess = std::max(out.max_excess, excess);
    if (excess > 1e-12) ++out.violations;
  }
  return out;
}

ExplicitTree counterexample_tree() { return build_explicit({{1}, {2}, {2, 1}}); }

CounterexampleReport counterexample(const Rational& eps) {
  CounterexampleReport r;
  r.eps = eps;
  const IncrementLaw law(Uniform{Rational(0), Rational(1)});
  PercolationOptions opts;
  opts.arithmetic = Arithmetic::Exact;
  r.chain = comparison_chain(counterexample_tree(), law, counterexample_target(eps), opts);
  r.p_b_gamma = *r.chain.p_b_gamma_exact;
  r.p_sb_gamma = *r.chain.p_sb_gamma_exact;
  const Rational e2 = eps * eps;
  const Rational e3 = e2 * eps;
  r.formula_b = 1 - 2 * e2 - 32 * e3;
  r.formula_sb = 1 - 3 * e2 - 12 * e3 / (1 - eps);
  r.claimed_bound_sb = 1 - 3 * e2;
  return r;
}

RandomInstance random_instance(std::uint64_t seed, int max_depth, int max_children, bool symmetric) {
  if (max_depth < 1 || max_children < 1) throw std::invalid_argument("random instance bounds must be >= 1");
  for (std::uint64_t attempt = 0;; ++attempt) {
    StreamRng rng(seed, attempt);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
    const int depth = pick(1, max_depth);
    std::vector<std::vector<int>> counts;
    int width = 1;
    for (int d = 0; d < depth; ++d) {
      std::vector<int> level;
      const int shared = pick(1, max_children);
      int next_width = 0;
      for (int v = 0; v < width; ++v) {
        const int c = symmetric ? shared : pick(1, max_children);
        level.push_back(c);
        next_width += c;
      }
      counts.push_back(std::move(level));
      width = next_width;
    }
    const int atoms = pick(1, 3);
    std::vector<std::int64_t> values;
    while (static_cast<int>(values.size()) < atoms) {
      const std::int64_t v = pick(-2, 2);
      if (std::find(values.begin(), values.end(), v) == values.end()) values.push_back(v);
    }
    std::vector<int> weights;
    int total = 0;
    for (int i = 0; i < atoms; ++i) {
      weights.push_back(pick(1, 4));
      total += weights.back();
    }
    std::vector<Rational> probs;
    for (int w : weights) probs.emplace_back(w, total);
    IncrementLaw law = IncrementLaw::lattice(values, probs);
    TargetSet target;
    if (pick(0, 1) == 0) {
      Box b;
      for (int k = 0; k < depth; ++k) b.retain.emplace_back(pick(1, 4), 4);
      target = b;
    } else {
      SumBand band;
      for (int k = 0; k < depth; ++k) {
        std::optional<Rational> lo;
        std::optional<Rational> hi;
        if (pick(0, 3) > 0) lo = Rational(pick(-2, 1));
        if (pick(0, 1) == 0) hi = Rational(lo ? static_cast<int>(lo->convert_to<double>()) + pick(0, 3) : pick(-1, 3));
        band.lower.push_back(lo);
        band.upper.push_back(hi);
      }
      target = band;
    }
    const auto m = marginals(law, target, depth);
    if (m.p[depth] > 0.0) return RandomInstance{build_explicit(counts), std::move(law), std::move(target)};
  }
}

}  // namespace critwalk
