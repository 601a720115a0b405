#include "critwalk/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace critwalk {

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

void check_size(const ExplicitTree& tree, std::size_t n, const char* what) {
  if (n != static_cast<std::size_t>(tree.size())) {
    throw TreeError(std::string(what) + " has " + std::to_string(n) + " entries, tree has " +
                    std::to_string(tree.size()) + " vertices");
  }
}

VertexId children_end(const ExplicitTree& tree, VertexId v) { return tree.first_child(v) + tree.child_count(v); }

}  // namespace

ConductanceMap ConductanceMap::from_log(const ExplicitTree& tree, std::vector<double> log_c) {
  check_size(tree, log_c.size(), "conductance map");
  for (std::size_t v = 1; v < log_c.size(); ++v) {
    if (!std::isfinite(log_c[v])) throw TreeError("non-finite log-conductance at vertex " + std::to_string(v));
  }
  log_c[0] = 0.0;
  ConductanceMap m;
  m.log_c_ = std::move(log_c);
  return m;
}

ConductanceMap ConductanceMap::from_values(const ExplicitTree& tree, std::span<const double> c) {
  check_size(tree, c.size(), "conductance map");
  std::vector<double> logs(c.size(), 0.0);
  for (std::size_t v = 1; v < c.size(); ++v) {
    if (!(c[v] > 0.0) || !std::isfinite(c[v])) {
      throw TreeError("conductance at vertex " + std::to_string(v) + " must be positive and finite");
    }
    logs[v] = std::log(c[v]);
  }
  return from_log(tree, std::move(logs));
}

ConductanceMap ConductanceMap::shifted(double shift) const {
  ConductanceMap m = *this;
  for (std::size_t v = 1; v < m.log_c_.size(); ++v) m.log_c_[v] += shift;
  return m;
}

std::vector<double> sample_labels(const ExplicitTree& tree, const IncrementLaw& law, std::uint64_t seed) {
  std::vector<double> x(tree.size(), 0.0);
  for (VertexId v = 1; v < tree.size(); ++v) {
    StreamRng rng(seed, static_cast<std::uint64_t>(v));
    x[v] = law.sample(rng);
  }
  return x;
}

ConductanceMap environment_from_labels(const ExplicitTree& tree, std::span<const double> labels) {
  check_size(tree, labels.size(), "label vector");
  std::vector<double> logs(tree.size(), 0.0);
  for (VertexId v = 1; v < tree.size(); ++v) logs[v] = logs[tree.parent(v)] + labels[v];
  return ConductanceMap::from_log(tree, std::move(logs));
}

ConductanceMap sample_environment(const ExplicitTree& tree, const IncrementLaw& law, std::uint64_t seed) {
  return environment_from_labels(tree, sample_labels(tree, law, seed));
}

double log_effective_conductance(const ExplicitTree& tree, const ConductanceMap& cond) {
  check_size(tree, cond.size(), "conductance map");
  if (tree.depth() < 1) throw TreeError("effective conductance needs depth >= 1");
  const auto& lc = cond.logs();
  // sub[v]: log conductance from parent(v) to the deepest level through v.
  std::vector<double> sub(tree.size(), 0.0);
  const double ninf = -std::numeric_limits<double>::infinity();
  for (VertexId v = tree.size() - 1; v >= 1; --v) {
    if (tree.is_leaf(v)) {
      sub[v] = lc[v];
      continue;
    }
    double par = ninf;
    for (VertexId c = tree.first_child(v); c < children_end(tree, v); ++c) par = log_add(par, sub[c]);
    // series of c(v) and par: 1 / (1/c + 1/par)
    sub[v] = -log_add(-lc[v], -par);
  }
  double total = ninf;
  for (VertexId c = tree.first_child(0); c < children_end(tree, 0); ++c) total = log_add(total, sub[c]);
  return total;
}

double effective_conductance(const ExplicitTree& tree, const ConductanceMap& cond) {
  check_size(tree, cond.size(), "conductance map");
  if (tree.depth() < 1) throw TreeError("effective conductance needs depth >= 1");
  const auto& lc = cond.logs();
  const bool moderate = std::all_of(lc.begin(), lc.end(), [](double x) { return std::abs(x) <= 500.0; });
  if (!moderate) return std::exp(log_effective_conductance(tree, cond));
  std::vector<double> sub(tree.size(), 0.0);
  for (VertexId v = tree.size() - 1; v >= 1; --v) {
    const double c = std::exp(lc[v]);
    if (tree.is_leaf(v)) {
      sub[v] = c;
      continue;
    }
    double par = 0.0;
    for (VertexId k = tree.first_child(v); k < children_end(tree, v); ++k) par += sub[k];
    sub[v] = 1.0 / (1.0 / c + 1.0 / par);
  }
  double total = 0.0;
  for (VertexId k = tree.first_child(0); k < children_end(tree, 0); ++k) total += sub[k];
  return total;
}

double effective_resistance(const ExplicitTree& tree, std::span<const double> resistance) {
  check_size(tree, resistance.size(), "resistance vector");
  if (tree.depth() < 1) throw TreeError("effective resistance needs depth >= 1");
  for (VertexId v = 1; v < tree.size(); ++v) {
    if (!(resistance[v] >= 0.0) || !std::isfinite(resistance[v])) {
      throw TreeError("resistance at vertex " + std::to_string(v) + " must be finite and nonnegative");
    }
  }
  auto parallel = [&](VertexId v, const std::vector<double>& sub) {
    double inv = 0.0;
    for (VertexId c = tree.first_child(v); c < children_end(tree, v); ++c) {
      if (sub[c] == 0.0) return 0.0;
      inv += 1.0 / sub[c];
    }
    return 1.0 / inv;
  };
  std::vector<double> sub(tree.size(), 0.0);
  for (VertexId v = tree.size() - 1; v >= 1; --v) {
    sub[v] = resistance[v] + (tree.is_leaf(v) ? 0.0 : parallel(v, sub));
  }
  return parallel(0, sub);
}

double escape_probability(const ExplicitTree& tree, const ConductanceMap& cond) {
  const double log_ceff = log_effective_conductance(tree, cond);
  double log_root = -std::numeric_limits<double>::infinity();
  for (VertexId c = tree.first_child(0); c < children_end(tree, 0); ++c) {
    log_root = log_add(log_root, cond.log_conductance(c));
  }
  return std::min(1.0, std::exp(log_ceff - log_root));
}

BottleneckResult bottleneck_bound(const ExplicitTree& tree, const ConductanceMap& cond) {
  check_size(tree, cond.size(), "conductance map");
  BottleneckResult out;
  std::vector<double> log_u(tree.size(), std::numeric_limits<double>::infinity());
  out.prefix_min.assign(tree.size(), 0.0);
  for (VertexId v = 1; v < tree.size(); ++v) {
    log_u[v] = std::min(log_u[tree.parent(v)], cond.log_conductance(v));
    out.prefix_min[v] = std::exp(log_u[v]);
  }
  auto cut = min_cutset(tree, out.prefix_min, 1);
  out.value = cut.value;
  out.cutset = std::move(cut.cutset);
  return out;
}

std::span<const VertexId> TransitionKernel::neighbors(VertexId v) const {
  return std::span<const VertexId>(nbr_).subspan(offset_.at(v), offset_.at(v + 1) - offset_.at(v));
}

std::span<const double> TransitionKernel::probs(VertexId v) const {
  return std::span<const double>(prob_).subspan(offset_.at(v), offset_.at(v + 1) - offset_.at(v));
}

double TransitionKernel::prob(VertexId from, VertexId to) const {
  const auto n = neighbors(from);
  const auto p = probs(from);
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] == to) return p[i];
  }
  return 0.0;
}

TransitionKernel transition_kernel(const ExplicitTree& tree, const ConductanceMap& cond) {
  check_size(tree, cond.size(), "conductance map");
  if (tree.child_count(0) < 1) throw TreeError("root needs at least one child");
  TransitionKernel k;
  k.offset_.reserve(tree.size() + 1);
  k.offset_.push_back(0);
  std::vector<double> logs;
  for (VertexId v = 0; v < tree.size(); ++v) {
    logs.clear();
    if (v != 0) {
      k.nbr_.push_back(tree.parent(v));
      logs.push_back(cond.log_conductance(v));
    }
    for (VertexId c = tree.first_child(v); c < children_end(tree, v); ++c) {
      k.nbr_.push_back(c);
      logs.push_back(cond.log_conductance(c));
    }
    const double m = *std::max_element(logs.begin(), logs.end());
    double z = 0.0;
    for (double l : logs) z += std::exp(l - m);
    for (double l : logs) k.prob_.push_back(std::exp(l - m) / z);
    k.offset_.push_back(k.nbr_.size());
  }
  return k;
}

std::vector<double> recover_X(const ExplicitTree& tree, const TransitionKernel& kernel) {
  if (kernel.size() != tree.size()) throw TreeError("kernel and tree sizes differ");
  std::vector<double> x(tree.size(), std::numeric_limits<double>::quiet_NaN());
  for (VertexId v = 1; v < tree.size(); ++v) {
    if (tree.depth_of(v) < 2) continue;
    const VertexId up = tree.parent(v);
    x[v] = std::log(kernel.prob(up, v) / kernel.prob(up, tree.parent(up)));
  }
  return x;
}

}  // namespace critwalk
