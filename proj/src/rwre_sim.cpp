#include "critwalk/rwre_sim.hpp"

#include "critwalk/network.hpp"
#include "critwalk/parallel.hpp"
#include "critwalk/rng.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace critwalk {

LazyEnvironment::LazyEnvironment(Shape shape, IncrementLaw law, std::uint64_t master_seed)
    : shape_(std::move(shape)), law_(std::move(law)), seed_(master_seed) {
  if (const auto* p = std::get_if<GrowthProfile>(&shape_)) {
    if (!p->is_integral()) throw TreeError("lazy environments need integer growth numbers");
    if (p->depth() < 1) throw TreeError("lazy environment profile must have depth >= 1");
  } else {
    const auto& w = std::get<OffspringLaw>(shape_).weights;
    if (w.empty() || !(std::accumulate(w.begin(), w.end(), 0.0) > 0.0)) {
      throw TreeError("offspring law needs positive total weight");
    }
  }
  nodes_.push_back(Node{});
  index_.emplace(0, kRoot);
}

const LazyEnvironment::Node& LazyEnvironment::expand(std::int32_t i) {
  if (nodes_.at(static_cast<std::size_t>(i)).first_child >= 0) return nodes_[static_cast<std::size_t>(i)];
  const Node parent = nodes_[static_cast<std::size_t>(i)];
  int children = 0;
  if (const auto* p = std::get_if<GrowthProfile>(&shape_)) {
    if (parent.depth >= p->depth()) {
      throw TreeError(fmt::format("environment profile has depth {}; cannot expand below it", p->depth()));
    }
    children = p->growth(parent.depth + 1).convert_to<int>();
  } else {
    const auto& w = std::get<OffspringLaw>(shape_).weights;
    StreamRng rng(derive_seed(seed_, parent.path_id, 0));
    double u = rng.uniform() * std::accumulate(w.begin(), w.end(), 0.0);
    children = static_cast<int>(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
      if (u < w[j]) {
        children = static_cast<int>(j) + 1;
        break;
      }
      u -= w[j];
    }
  }
  const auto first = static_cast<std::int32_t>(nodes_.size());
  for (int j = 0; j < children; ++j) {
    Node c;
    c.path_id = derive_seed(parent.path_id, static_cast<std::uint64_t>(j) + 1);
    c.depth = parent.depth + 1;
    c.parent = i;
    StreamRng rng(derive_seed(seed_, c.path_id, 1));
    c.log_conductance = (i == kRoot ? 0.0 : parent.log_conductance) + law_.sample(rng);
    index_.emplace(c.path_id, static_cast<std::int32_t>(nodes_.size()));
    nodes_.push_back(c);
  }
  nodes_[static_cast<std::size_t>(i)].first_child = first;
  nodes_[static_cast<std::size_t>(i)].child_count = children;
  return nodes_[static_cast<std::size_t>(i)];
}

std::optional<std::int32_t> LazyEnvironment::lookup(std::uint64_t path_id) const {
  const auto it = index_.find(path_id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint64_t LazyEnvironment::digest() const {
  std::uint64_t h = 0;
  for (const auto& n : nodes_) {
    h += splitmix64(n.path_id ^ splitmix64(std::bit_cast<std::uint64_t>(n.log_conductance)) ^
                    (static_cast<std::uint64_t>(n.depth) << 32));
  }
  return h;
}

std::string to_string(EpisodeTag t) {
  switch (t) {
    case EpisodeTag::ReturnedToRoot: return "returned";
    case EpisodeTag::ReachedDepth: return "reached";
    case EpisodeTag::Exhausted: return "exhausted";
  }
  return "exhausted";
}

EpisodeOutcome walk_episode(LazyEnvironment& env, int target_depth, std::int64_t max_steps, std::uint64_t seed) {
  if (target_depth < 1) throw std::invalid_argument("target depth must be >= 1");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  StreamRng rng(seed);
  EpisodeOutcome out;
  std::int32_t cur = LazyEnvironment::kRoot;
  std::vector<std::int32_t> nbr;
  std::vector<double> logw;
  while (out.steps < max_steps) {
    const LazyEnvironment::Node here = env.expand(cur);
    nbr.clear();
    logw.clear();
    if (cur != LazyEnvironment::kRoot) {
      nbr.push_back(here.parent);
      logw.push_back(here.log_conductance);
    }
    for (std::int32_t c = here.first_child; c < here.first_child + here.child_count; ++c) {
      nbr.push_back(c);
      logw.push_back(env.node(c).log_conductance);
    }
    const double m = *std::max_element(logw.begin(), logw.end());
    double total = 0.0;
    for (double& l : logw) {
      l = std::exp(l - m);
      total += l;
    }
    double u = rng.uniform() * total;
    std::size_t pick = nbr.size() - 1;
    for (std::size_t j = 0; j < nbr.size(); ++j) {
      if (u < logw[j]) {
        pick = j;
        break;
      }
      u -= logw[j];
    }
    cur = nbr[pick];
    ++out.steps;
    const int d = env.node(cur).depth;
    out.max_depth = std::max(out.max_depth, d);
    if (cur == LazyEnvironment::kRoot) {
      out.tag = EpisodeTag::ReturnedToRoot;
      return out;
    }
    if (d == target_depth) {
      out.tag = EpisodeTag::ReachedDepth;
      return out;
    }
  }
  out.tag = EpisodeTag::Exhausted;
  return out;
}

EscapeEstimate escape_mc(const LazyEnvironment& env, int target_depth, std::int64_t max_steps,
                         std::uint64_t episodes, std::uint64_t seed, unsigned threads) {
  constexpr std::uint64_t kBlock = 1024;
  const std::uint64_t blocks = (episodes + kBlock - 1) / kBlock;
  std::vector<std::uint64_t> reached(blocks, 0);
  std::vector<std::uint64_t> exhausted(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    LazyEnvironment local = env;
    for (std::uint64_t e = b * kBlock; e < std::min(episodes, (b + 1) * kBlock); ++e) {
      const auto o = walk_episode(local, target_depth, max_steps, derive_seed(seed, e));
      if (o.tag == EpisodeTag::ReachedDepth) ++reached[b];
      if (o.tag == EpisodeTag::Exhausted) ++exhausted[b];
    }
  });
  EscapeEstimate est;
  est.episodes = episodes;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    est.reached += reached[b];
    est.exhausted += exhausted[b];
  }
  if (episodes > 0) {
    est.estimate = static_cast<double>(est.reached) / static_cast<double>(episodes);
    est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(episodes));
  }
  return est;
}

Quartiles quartiles(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("quartiles of an empty sample");
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {at(0.25), at(0.5), at(0.75)};
}

ScalingReport conductance_scaling_mc(const GrowthProfile& profile, const IncrementLaw& law,
                                     const std::vector<int>& depths, std::uint64_t environments, std::uint64_t seed,
                                     unsigned threads) {
  if (depths.empty()) throw std::invalid_argument("depth grid is empty");
  if (environments < 1) throw std::invalid_argument("need at least one environment");
  std::vector<int> grid = depths;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  if (grid.front() < 1) throw std::invalid_argument("depths must be >= 1");
  const int n_max = grid.back();
  if (n_max > profile.depth()) {
    throw std::invalid_argument(fmt::format("depth {} exceeds the profile depth {}", n_max, profile.depth()));
  }
  double vertices = 0.0;
  int max_growth = 1;
  for (int k = 0; k <= n_max; ++k) vertices += profile.level_size_double(k);
  for (int k = 1; k <= n_max; ++k) max_growth = std::max(max_growth, static_cast<int>(profile.growth_double(k)));
  if (vertices > static_cast<double>(kMaxScalingVertices)) {
    throw std::invalid_argument(
        fmt::format("tree of depth {} has {:.3g} vertices, above the limit {}", n_max, vertices, kMaxScalingVertices));
  }
  const ExplicitTree full = build_symmetric(profile, n_max, std::max(kDefaultMaxDegree, max_growth));
  std::vector<ExplicitTree> trees;
  for (int d : grid) trees.push_back(d == n_max ? full : full.truncate(d));

  ScalingReport rep;
  rep.conductances.assign(grid.size(), std::vector<double>(environments));
  std::vector<std::vector<double>> escapes(grid.size(), std::vector<double>(environments));
  parallel_for(environments, threads, [&](std::size_t m) {
    const auto labels = sample_labels(full, law, derive_seed(seed, m));
    std::vector<double> logs(labels.size(), 0.0);
    for (VertexId v = 1; v < full.size(); ++v) logs[v] = logs[full.parent(v)] + labels[v];
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& t = trees[i];
      const auto cond = ConductanceMap::from_log(t, std::vector<double>(logs.begin(), logs.begin() + t.size()));
      rep.conductances[i][m] = effective_conductance(t, cond);
      escapes[i][m] = escape_probability(t, cond);
    }
  });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    rep.rows.push_back({grid[i], quartiles(rep.conductances[i]), quartiles(escapes[i])});
  }
  const double first = rep.rows.front().conductance.median;
  rep.ratio = first > 0.0 ? rep.rows.back().conductance.median / first : std::numeric_limits<double>::quiet_NaN();
  if (rep.ratio >= 0.25) {
    rep.verdict = "transient-like";
  } else if (rep.ratio <= 0.05) {
    rep.verdict = "recurrent-like";
  } else {
    rep.verdict = "inconclusive";
  }
  return rep;
}

ReinforcedTrace reinforced_episode(const ExplicitTree& tree, std::int64_t steps, std::uint64_t seed) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (tree.depth() < 1) throw TreeError("reinforced walk needs depth >= 1");
  StreamRng rng(seed);
  ReinforcedTrace tr;
  tr.urn.crossings.assign(tree.size(), 0);
  tr.exits.assign(tree.size(), {});
  VertexId cur = 0;
  std::vector<VertexId> nbr;
  std::vector<std::int64_t> w;
  for (std::int64_t t = 0; t < steps; ++t) {
    nbr.clear();
    w.clear();
    if (cur != 0) {
      nbr.push_back(tree.parent(cur));
      w.push_back(tr.urn.weight(cur));
    }
    for (VertexId c = tree.first_child(cur); c < tree.first_child(cur) + tree.child_count(cur); ++c) {
      nbr.push_back(c);
      w.push_back(tr.urn.weight(c));
    }
    const std::int64_t total = std::accumulate(w.begin(), w.end(), std::int64_t{0});
    auto u = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(total));
    std::size_t pick = nbr.size() - 1;
    for (std::size_t j = 0; j < nbr.size(); ++j) {
      if (u < w[j]) {
        pick = j;
        break;
      }
      u -= w[j];
    }
    const VertexId next = nbr[pick];
    tr.exits[cur].push_back(next);
    const VertexId edge = (cur != 0 && next == tree.parent(cur)) ? cur : next;
    ++tr.urn.crossings[edge];
    cur = next;
    ++tr.steps;
    if (cur == 0) ++tr.root_returns;
    tr.max_depth = std::max(tr.max_depth, tree.depth_of(cur));
  }
  return tr;
}

namespace {

void check_colors(int d, const std::vector<int>& colors) {
  if (d < 1) throw std::invalid_argument("urn needs d >= 1");
  for (int c : colors) {
    if (c < 1 || c > d) throw std::invalid_argument(fmt::format("colour {} outside [1, {}]", c, d));
  }
}

Rational factorial(int n) {
  Rational r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

}  // namespace

Rational polya_sequence_prob(int d, const std::vector<int>& colors) {
  check_colors(d, colors);
  std::vector<int> w(static_cast<std::size_t>(d), 1);
  Rational p = 1;
  for (std::size_t t = 0; t < colors.size(); ++t) {
    p *= Rational(w[colors[t] - 1], d + static_cast<int>(t));
    ++w[colors[t] - 1];
  }
  return p;
}

Rational dirichlet_exit_prob(int d, const std::vector<int>& colors) {
  check_colors(d, colors);
  std::vector<int> counts(static_cast<std::size_t>(d), 0);
  for (int c : colors) ++counts[c - 1];
  Rational num = factorial(d - 1);
  for (int c : counts) num *= factorial(c);
  return num / factorial(d - 1 + static_cast<int>(colors.size()));
}

EquivalenceReport equivalence_test(int degree, int length, std::uint64_t episodes, std::uint64_t seed,
                                   unsigned threads) {
  if (degree < 2) throw std::invalid_argument("star degree must be >= 2");
  if (length < 1) throw std::invalid_argument("sequence length must be >= 1");
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  std::size_t cells = 1;
  for (int i = 0; i < length; ++i) {
    cells *= static_cast<std::size_t>(degree);
    if (cells > 1024) throw std::invalid_argument("degree^length must be <= 1024");
  }
  EquivalenceReport rep;
  rep.degree = degree;
  rep.length = length;
  rep.episodes = episodes;
  rep.table.resize(cells);
  for (std::size_t idx = 0; idx < cells; ++idx) {
    std::vector<int> seq(static_cast<std::size_t>(length));
    std::size_t r = idx;
    for (int t = length - 1; t >= 0; --t) {
      seq[t] = static_cast<int>(r % degree) + 1;
      r /= degree;
    }
    rep.table[idx] = polya_sequence_prob(degree, seq);
  }

  const ExplicitTree star = build_explicit({{degree}});
  constexpr std::uint64_t kBlock = 4096;
  const std::uint64_t blocks = (episodes + kBlock - 1) / kBlock;
  std::vector<std::vector<std::uint64_t>> reinf(blocks, std::vector<std::uint64_t>(cells, 0));
  std::vector<std::vector<std::uint64_t>> rwre(blocks, std::vector<std::uint64_t>(cells, 0));
  std::vector<std::uint64_t> reinf_same(blocks, 0);
  std::vector<std::uint64_t> rwre_same(blocks, 0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    std::vector<double> u(static_cast<std::size_t>(degree));
    for (std::uint64_t e = b * kBlock; e < std::min(episodes, (b + 1) * kBlock); ++e) {
      const auto tr = reinforced_episode(star, 2 * static_cast<std::int64_t>(length) - 1, derive_seed(seed, 0, e));
      std::size_t idx = 0;
      for (int t = 0; t < length; ++t) idx = idx * degree + static_cast<std::size_t>(tr.exits[0][t] - 1);
      ++reinf[b][idx];
      if (length >= 2 && tr.exits[0][0] == tr.exits[0][1]) ++reinf_same[b];

      StreamRng rng(derive_seed(seed, 1, e));
      double total = 0.0;
      for (auto& x : u) {
        x = rng.exponential();
        total += x;
      }
      idx = 0;
      int first = -1;
      bool same = false;
      for (int t = 0; t < length; ++t) {
        double v = rng.uniform() * total;
        int c = degree - 1;
        for (int j = 0; j < degree; ++j) {
          if (v < u[j]) {
            c = j;
            break;
          }
          v -= u[j];
        }
        idx = idx * degree + static_cast<std::size_t>(c);
        if (t == 0) first = c;
        if (t == 1) same = c == first;
      }
      ++rwre[b][idx];
      if (same) ++rwre_same[b];
    }
  });
  rep.reinforced_counts.assign(cells, 0);
  rep.rwre_counts.assign(cells, 0);
  std::uint64_t rs = 0;
  std::uint64_t ws = 0;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    for (std::size_t i = 0; i < cells; ++i) {
      rep.reinforced_counts[i] += reinf[b][i];
      rep.rwre_counts[i] += rwre[b][i];
    }
    rs += reinf_same[b];
    ws += rwre_same[b];
  }
  const auto m = static_cast<double>(episodes);
  auto chi2 = [&](const std::vector<std::uint64_t>& obs) {
    double s = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
      const double expect = m * to_double(rep.table[i]);
      const double diff = static_cast<double>(obs[i]) - expect;
      s += diff * diff / expect;
    }
    return s;
  };
  rep.dof = static_cast<int>(cells) - 1;
  rep.reinforced_chi2 = chi2(rep.reinforced_counts);
  rep.rwre_chi2 = chi2(rep.rwre_counts);
  if (rep.dof > 0) {
    const boost::math::chi_squared dist(rep.dof);
    rep.reinforced_p = boost::math::cdf(boost::math::complement(dist, rep.reinforced_chi2));
    rep.rwre_p = boost::math::cdf(boost::math::complement(dist, rep.rwre_chi2));
  } else {
    rep.reinforced_p = 1.0;
    rep.rwre_p = 1.0;
  }
  if (length >= 2) {
    rep.same_first_two_expected = 2.0 / (degree + 1.0);
    rep.reinforced_same = static_cast<double>(rs) / m;
    rep.rwre_same = static_cast<double>(ws) / m;
    rep.reinforced_same_se = std::sqrt(rep.reinforced_same * (1.0 - rep.reinforced_same) / m);
    rep.rwre_same_se = std::sqrt(rep.rwre_same * (1.0 - rep.rwre_same) / m);
  }
  return rep;
}

DecayReport stable_ray_decay(double alpha, double drift, const std::vector<std::int64_t>& grid,
                             std::uint64_t episodes, std::uint64_t seed, unsigned threads) {
  if (!(alpha > 1.0 && alpha <= 2.0)) throw std::invalid_argument("alpha must lie in (1, 2]");
  if (!(drift > 0.0)) throw std::invalid_argument("drift must be positive");
  if (grid.empty()) throw std::invalid_argument("n grid is empty");
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  std::vector<std::int64_t> ns = grid;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  if (ns.front() < 1) throw std::invalid_argument("grid entries must be >= 1");
  const std::int64_t n_max = ns.back();

  constexpr std::uint64_t kBlock = 8192;
  const std::uint64_t blocks = (episodes + kBlock - 1) / kBlock;
  std::vector<std::vector<std::uint64_t>> surv(blocks, std::vector<std::uint64_t>(ns.size(), 0));
  parallel_for(blocks, threads, [&](std::size_t b) {
    for (std::uint64_t e = b * kBlock; e < std::min(episodes, (b + 1) * kBlock); ++e) {
      StreamRng rng(seed, e);
      double s = 0.0;
      std::int64_t ok = 0;
      for (std::int64_t k = 1; k <= n_max; ++k) {
        s += sample_symmetric_stable(alpha, rng);
        if (!(s > drift * static_cast<double>(k))) break;
        ok = k;
      }
      for (std::size_t i = 0; i < ns.size(); ++i) {
        if (ok >= ns[i]) ++surv[b][i];
      }
    }
  });
  DecayReport rep;
  rep.alpha = alpha;
  rep.drift = drift;
  rep.episodes = episodes;
  const auto m = static_cast<double>(episodes);
  constexpr double z = 1.959963984540054;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    DecayPoint pt;
    pt.n = ns[i];
    for (std::uint64_t b = 0; b < blocks; ++b) pt.survivors += surv[b][i];
    const double p = static_cast<double>(pt.survivors) / m;
    pt.estimate = p;
    pt.stderr_ = std::sqrt(p * (1.0 - p) / m);
    const double denom = 1.0 + z * z / m;
    const double centre = (p + z * z / (2.0 * m)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / m + z * z / (4.0 * m * m)) / denom;
    pt.ci_low = std::max(0.0, centre - half);
    pt.ci_high = std::min(1.0, centre + half);
    rep.points.push_back(pt);
  }
  // Weighted least squares with var(log p) ~ (1 - p) / (M p).
  double sw = 0.0;
  double sx = 0.0;
  double sy = 0.0;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> ws;
  for (const auto& pt : rep.points) {
    if (pt.survivors == 0) continue;
    const double var = std::max((1.0 - pt.estimate) / (m * pt.estimate), 1.0 / (m * m));
    xs.push_back(std::log(static_cast<double>(pt.n)));
    ys.push_back(std::log(pt.estimate));
    ws.push_back(1.0 / var);
    sw += ws.back();
    sx += ws.back() * xs.back();
    sy += ws.back() * ys.back();
  }
  rep.fitted_points = static_cast<int>(xs.size());
  if (xs.size() < 2) {
    rep.slope = std::numeric_limits<double>::quiet_NaN();
    rep.slope_se = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  const double xbar = sx / sw;
  const double ybar = sy / sw;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += ws[i] * (xs[i] - xbar) * (xs[i] - xbar);
    sxy += ws[i] * (xs[i] - xbar) * (ys[i] - ybar);
  }
  rep.slope = sxy / sxx;
  rep.slope_se = std::sqrt(1.0 / sxx);
  return rep;
}

}  // namespace critwalk
