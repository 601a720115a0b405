#include "critwalk/tree.hpp"

#include "critwalk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace critwalk {

ExplicitTree ExplicitTree::from_level_counts(const std::vector<std::vector<int>>& counts,
                                             int max_degree) {
  ExplicitTree t;
  t.parent_.push_back(-1);
  t.depth_.push_back(0);
  t.level_offset_.push_back(0);
  VertexId level_begin = 0;
  VertexId level_end = 1;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const auto& row = counts[k];
    if (static_cast<VertexId>(row.size()) != level_end - level_begin) {
      throw TreeError("level " + std::to_string(k) + " lists " + std::to_string(row.size()) +
                      " child counts but has " + std::to_string(level_end - level_begin) +
                      " vertices");
    }
    t.level_offset_.push_back(level_end);
    for (std::size_t i = 0; i < row.size(); ++i) {
      const int c = row[i];
      if (c < 1) {
        throw TreeError("vertex " + std::to_string(level_begin + static_cast<VertexId>(i)) +
                        " at depth " + std::to_string(k) +
                        " has no children above the truncation depth (ragged depths)");
      }
      if (c > max_degree) {
        throw TreeError("child count " + std::to_string(c) + " exceeds the degree bound " +
                        std::to_string(max_degree));
      }
      const auto parent = level_begin + static_cast<VertexId>(i);
      for (int j = 0; j < c; ++j) {
        t.parent_.push_back(parent);
        t.depth_.push_back(static_cast<int>(k) + 1);
      }
    }
    if (t.parent_.size() > static_cast<std::size_t>(std::numeric_limits<VertexId>::max())) {
      throw TreeError("tree exceeds the vertex id range");
    }
    level_begin = level_end;
    level_end = static_cast<VertexId>(t.parent_.size());
  }
  t.level_offset_.push_back(level_end);

  // Children are contiguous because parents are emitted in id order.
  t.first_child_.assign(t.parent_.size() + 1, 0);
  std::vector<VertexId> child_count(t.parent_.size(), 0);
  for (VertexId v = 1; v < t.size(); ++v) ++child_count[t.parent_[v]];
  VertexId next = 1;
  for (VertexId v = 0; v < t.size(); ++v) {
    t.first_child_[v] = next;
    next += child_count[v];
  }
  t.first_child_[t.size()] = next;
  return t;
}

std::vector<std::int64_t> ExplicitTree::level_sizes() const {
  std::vector<std::int64_t> out(depth() + 1);
  for (int k = 0; k <= depth(); ++k) out[k] = level_size(k);
  return out;
}

std::vector<std::vector<int>> ExplicitTree::level_counts() const {
  std::vector<std::vector<int>> counts(depth());
  for (int k = 0; k < depth(); ++k) {
    for (VertexId v = level_begin(k); v < level_begin(k + 1); ++v) counts[k].push_back(child_count(v));
  }
  return counts;
}

void ExplicitTree::validate() const {
  if (parent_.empty() || parent_[0] != -1) throw TreeError("vertex 0 must be the unique root");
  const int n = depth();
  for (VertexId v = 1; v < size(); ++v) {
    const VertexId p = parent_[v];
    if (p < 0 || p >= v) throw TreeError("vertex " + std::to_string(v) + " has invalid parent");
    if (depth_[v] != depth_[p] + 1) throw TreeError("depth mismatch at vertex " + std::to_string(v));
    if (v < first_child_[p] || v >= first_child_[p + 1]) {
      throw TreeError("parent/child lists disagree at vertex " + std::to_string(v));
    }
  }
  for (VertexId v = 0; v < size(); ++v) {
    const bool leaf = is_leaf(v);
    if (depth_[v] < n && leaf) throw TreeError("leaf above truncation depth at " + std::to_string(v));
    if (depth_[v] == n && !leaf) throw TreeError("vertex below truncation depth at " + std::to_string(v));
    for (VertexId c = first_child_[v]; c < first_child_[v + 1]; ++c) {
      if (parent_[c] != v) throw TreeError("child list of " + std::to_string(v) + " is inconsistent");
    }
    if (level_offset_[depth_[v]] > v || level_offset_[depth_[v] + 1] <= v) {
      throw TreeError("vertex " + std::to_string(v) + " lies outside its level range");
    }
  }
}

ExplicitTree ExplicitTree::truncate(int n) const {
  if (n < 0 || n > depth()) throw TreeError("truncation depth out of range");
  auto counts = level_counts();
  counts.resize(n);
  return from_level_counts(counts, std::numeric_limits<int>::max());
}

GrowthProfile::GrowthProfile(std::vector<Rational> growth) : growth_(std::move(growth)) {
  level_size_.reserve(growth_.size() + 1);
  level_size_.emplace_back(1);
  for (std::size_t i = 0; i < growth_.size(); ++i) {
    if (growth_[i] < 1) {
      throw TreeError("growth number f(" + std::to_string(i + 1) + ") = " + to_string(growth_[i]) +
                      " is below 1");
    }
    level_size_.push_back(level_size_.back() * growth_[i]);
  }
  level_size_double_.reserve(level_size_.size());
  double acc = 1.0;
  level_size_double_.push_back(acc);
  for (const auto& f : growth_) {
    acc *= to_double(f);
    level_size_double_.push_back(acc);
  }
}

GrowthProfile GrowthProfile::from_doubles(const std::vector<double>& growth) {
  std::vector<Rational> g;
  g.reserve(growth.size());
  for (double f : growth) g.push_back(from_double(f));
  return GrowthProfile(std::move(g));
}

GrowthProfile GrowthProfile::constant(int value, int depth) {
  return GrowthProfile(std::vector<Rational>(depth, Rational(value)));
}

GrowthProfile GrowthProfile::power_of_two_envelope(double gamma, int depth) {
  auto log2_size = [gamma](int n) {
    return static_cast<int>(std::floor(gamma * std::log2(static_cast<double>(n) + 1.0) + 1e-12));
  };
  std::vector<Rational> g;
  for (int n = 1; n <= depth; ++n) {
    const int step = log2_size(n) - log2_size(n - 1);
    g.emplace_back(boost::multiprecision::cpp_int(1) << step);
  }
  return GrowthProfile(std::move(g));
}

bool GrowthProfile::is_integral() const {
  return std::all_of(growth_.begin(), growth_.end(), [](const Rational& f) { return is_integer(f); });
}

GrowthProfile GrowthProfile::prefix(int n) const {
  if (n < 0 || n > depth()) throw TreeError("profile prefix out of range");
  return GrowthProfile(std::vector<Rational>(growth_.begin(), growth_.begin() + n));
}

ExplicitTree build_symmetric(const GrowthProfile& profile, int depth, int max_degree) {
  if (depth > profile.depth()) {
    throw TreeError("depth " + std::to_string(depth) + " exceeds profile length " +
                    std::to_string(profile.depth()));
  }
  std::vector<std::vector<int>> counts;
  std::int64_t width = 1;
  for (int n = 1; n <= depth; ++n) {
    const Rational& f = profile.growth(n);
    if (!is_integer(f)) {
      throw TreeError("growth number f(" + std::to_string(n) + ") = " + to_string(f) +
                      " is not an integer; virtual profiles are only valid for Psi and R_p");
    }
    const int fi = static_cast<int>(f);
    counts.emplace_back(static_cast<std::size_t>(width), fi);
    width *= fi;
  }
  return ExplicitTree::from_level_counts(counts, max_degree);
}

ExplicitTree build_explicit(const std::vector<std::vector<int>>& counts, int max_degree) {
  return ExplicitTree::from_level_counts(counts, max_degree);
}

double OffspringLaw::mean() const {
  double total = 0.0;
  double m = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    total += weights[j];
    m += weights[j] * static_cast<double>(j + 1);
  }
  return m / total;
}

ExplicitTree build_galton_watson(const OffspringLaw& law, int depth, std::uint64_t seed,
                                 int max_degree) {
  if (law.weights.empty()) throw TreeError("offspring law is empty");
  for (double w : law.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw TreeError("offspring weights must be finite and >= 0");
  }
  std::vector<double> cumulative(law.weights.size());
  std::partial_sum(law.weights.begin(), law.weights.end(), cumulative.begin());
  if (!(cumulative.back() > 0.0)) throw TreeError("offspring law has zero total weight");

  std::vector<std::vector<int>> counts;
  std::int64_t width = 1;
  std::uint64_t id = 0;
  for (int k = 0; k < depth; ++k) {
    std::vector<int> row(static_cast<std::size_t>(width));
    std::int64_t next_width = 0;
    for (auto& c : row) {
      StreamRng rng(seed, id++);
      const double u = rng.uniform() * cumulative.back();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      c = static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(),
                                                    static_cast<std::ptrdiff_t>(cumulative.size()) - 1)) + 1;
      next_width += c;
    }
    counts.push_back(std::move(row));
    width = next_width;
  }
  return ExplicitTree::from_level_counts(counts, max_degree);
}

GrowthProfile symmetrize_tree(const ExplicitTree& tree) {
  std::vector<Rational> g;
  for (int n = 1; n <= tree.depth(); ++n) g.emplace_back(tree.level_size(n), tree.level_size(n - 1));
  return GrowthProfile(std::move(g));
}

VertexId meet(const ExplicitTree& tree, VertexId a, VertexId b) {
  int da = tree.depth_of(a);
  int db = tree.depth_of(b);
  while (da > db) {
    a = tree.parent(a);
    --da;
  }
  while (db > da) {
    b = tree.parent(b);
    --db;
  }
  while (a != b) {
    a = tree.parent(a);
    b = tree.parent(b);
  }
  return a;
}

CutsetResult min_cutset(const ExplicitTree& tree, std::span<const double> weight, int min_level) {
  const int n = tree.depth();
  if (min_level < 1) throw TreeError("min_level must be at least 1");
  if (min_level > n) {
    throw TreeError("min_level " + std::to_string(min_level) + " exceeds tree depth " + std::to_string(n));
  }
  if (weight.size() != static_cast<std::size_t>(tree.size())) {
    throw TreeError("weight vector has " + std::to_string(weight.size()) + " entries, tree has " +
                    std::to_string(tree.size()) + " vertices");
  }
  std::vector<double> best(tree.size());
  std::vector<char> take(tree.size(), 0);
  for (VertexId v = tree.size() - 1; v >= 1; --v) {
    const int d = tree.depth_of(v);
    if (d == n) {
      best[v] = weight[v];
      take[v] = 1;
      continue;
    }
    double below = 0.0;
    const VertexId c0 = tree.first_child(v);
    for (VertexId c = c0; c < c0 + tree.child_count(v); ++c) below += best[c];
    if (d >= min_level && weight[v] <= below) {
      best[v] = weight[v];
      take[v] = 1;
    } else {
      best[v] = below;
    }
  }
  CutsetResult out;
  std::vector<VertexId> stack;
  for (VertexId c = tree.first_child(0); c < tree.first_child(0) + tree.child_count(0); ++c) {
    out.value += best[c];
    stack.push_back(c);
  }
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    if (take[v]) {
      out.cutset.vertices.push_back(v);
      continue;
    }
    for (VertexId c = tree.first_child(v); c < tree.first_child(v) + tree.child_count(v); ++c) stack.push_back(c);
  }
  std::sort(out.cutset.vertices.begin(), out.cutset.vertices.end());
  return out;
}

bool is_cutset(const ExplicitTree& tree, const Cutset& cutset) {
  std::vector<char> in(tree.size(), 0);
  for (VertexId v : cutset.vertices) {
    if (v < 0 || v >= tree.size()) return false;
    in[v] = 1;
  }
  // covered[v]: some vertex on the root path of v (inclusive) is in the set.
  std::vector<char> covered(tree.size(), 0);
  covered[0] = in[0];
  for (VertexId v = 1; v < tree.size(); ++v) {
    const bool above = covered[tree.parent(v)];
    if (above && in[v]) return false;  // not an antichain
    covered[v] = above || in[v];
  }
  for (VertexId v = tree.level_begin(tree.depth()); v < tree.size(); ++v) {
    if (!covered[v]) return false;
  }
  return true;
}

}  // namespace critwalk
