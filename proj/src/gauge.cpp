#include "critwalk/gauge.hpp"

#include "critwalk/network.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace critwalk {

namespace {

double parse_num(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number '" + s + "' in '" + spec + "'");
  }
}

std::vector<double> parse_list(const std::string& text, const std::string& spec) {
  std::vector<double> out;
  std::string token;
  auto flush = [&] {
    const auto b = token.find_first_not_of(" \t\r");
    if (b != std::string::npos) {
      const auto e = token.find_last_not_of(" \t\r");
      out.push_back(parse_num(token.substr(b, e - b + 1), spec));
    }
    token.clear();
  };
  for (char ch : text) {
    if (ch == ',' || ch == '\n') {
      flush();
    } else {
      token += ch;
    }
  }
  flush();
  return out;
}

void check_tree(const ExplicitTree& tree) {
  if (tree.depth() < 1) throw TreeError("tree must have depth >= 1");
}

}  // namespace

Gauge Gauge::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown gauge spec '" + spec + "'");
  const std::string head = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (head == "pow") {
    const double a = parse_num(arg, spec);
    if (!(a >= 0.0)) throw std::invalid_argument("power gauge exponent must be >= 0");
    return PowerGauge{a};
  }
  if (head == "exp") {
    const double b = parse_num(arg, spec);
    if (!(b >= 0.0)) throw std::invalid_argument("exponential gauge rate must be >= 0");
    return ExpGauge{b};
  }
  if (head == "tab") {
    TabulatedGauge t;
    if (!arg.empty() && arg[0] == '@') {
      std::ifstream in(arg.substr(1));
      if (!in) throw std::invalid_argument("cannot read gauge table '" + arg.substr(1) + "'");
      std::stringstream buf;
      buf << in.rdbuf();
      t.values = parse_list(buf.str(), spec);
    } else {
      t.values = parse_list(arg, spec);
    }
    if (t.values.empty()) throw std::invalid_argument("empty gauge table");
    return t;
  }
  throw std::invalid_argument("unknown gauge spec '" + spec + "'");
}

double Gauge::operator()(int n) const {
  if (n < 0) throw std::invalid_argument("gauge level must be >= 0");
  if (n == 0) return 1.0;
  return std::visit(
      [n](const auto& g) -> double {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PowerGauge>) {
          return std::pow(static_cast<double>(n), -g.alpha);
        } else if constexpr (std::is_same_v<T, ExpGauge>) {
          return std::exp(-g.beta * n);
        } else {
          if (static_cast<std::size_t>(n) > g.values.size()) {
            throw std::invalid_argument(fmt::format("gauge table has {} levels, level {} requested", g.values.size(), n));
          }
          return g.values[n - 1];
        }
      },
      v_);
}

std::string Gauge::describe() const {
  return std::visit(
      [](const auto& g) -> std::string {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, PowerGauge>) {
          return fmt::format("pow:{:.17g}", g.alpha);
        } else if constexpr (std::is_same_v<T, ExpGauge>) {
          return fmt::format("exp:{:.17g}", g.beta);
        } else {
          std::string s = "tab:";
          for (std::size_t i = 0; i < g.values.size(); ++i) s += (i ? "," : "") + fmt::format("{:.17g}", g.values[i]);
          return s;
        }
      },
      v_);
}

void Gauge::validate(int depth) const {
  double prev = 1.0;
  for (int n = 1; n <= depth; ++n) {
    const double v = (*this)(n);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(fmt::format("gauge {} is not positive at level {}", describe(), n));
    }
    if (v > prev) throw std::invalid_argument(fmt::format("gauge {} increases at level {}", describe(), n));
    prev = v;
  }
}

CutsetResult hausdorff_content(const ExplicitTree& tree, const Gauge& gauge, int min_level) {
  check_tree(tree);
  std::vector<double> w(tree.size());
  for (VertexId v = 0; v < tree.size(); ++v) w[v] = gauge(tree.depth_of(v));
  return min_cutset(tree, w, min_level);
}

std::vector<double> content_by_min_level(const ExplicitTree& tree, const Gauge& gauge) {
  check_tree(tree);
  std::vector<double> out;
  for (int m = 1; m <= tree.depth(); ++m) out.push_back(hausdorff_content(tree, gauge, m).value);
  return out;
}

double capacity_network(const ExplicitTree& tree, const Gauge& gauge) {
  check_tree(tree);
  gauge.validate(tree.depth());
  std::vector<double> level_r(tree.depth() + 1, 0.0);
  for (int k = 1; k <= tree.depth(); ++k) level_r[k] = std::max(0.0, gauge.inverse(k) - gauge.inverse(k - 1));
  std::vector<double> r(tree.size(), 0.0);
  for (VertexId v = 1; v < tree.size(); ++v) r[v] = level_r[tree.depth_of(v)];
  return 1.0 / (1.0 + effective_resistance(tree, r));
}

namespace {

/// Level increments of 1/phi: weight[0] = 1, weight[k] = 1/phi(k) - 1/phi(k-1).
std::vector<double> kernel_increments(const ExplicitTree& tree, const Gauge& gauge) {
  std::vector<double> w(tree.depth() + 1, 1.0);
  for (int k = 1; k <= tree.depth(); ++k) w[k] = gauge.inverse(k) - gauge.inverse(k - 1);
  return w;
}

/// Subtree masses M(v) from leaf weights.
void subtree_mass(const ExplicitTree& tree, std::span<const double> leaf, std::vector<double>& mass) {
  const VertexId first_leaf = tree.level_begin(tree.depth());
  std::fill(mass.begin(), mass.end(), 0.0);
  for (std::size_t i = 0; i < leaf.size(); ++i) mass[first_leaf + i] = leaf[i];
  for (VertexId v = first_leaf - 1; v >= 0; --v) {
    double s = 0.0;
    for (VertexId c = tree.first_child(v); c < tree.first_child(v) + tree.child_count(v); ++c) s += mass[c];
    mass[v] = s;
  }
}

double energy_from_mass(const ExplicitTree& tree, const std::vector<double>& inc, const std::vector<double>& mass) {
  double e = 0.0;
  for (VertexId v = 0; v < tree.size(); ++v) e += inc[tree.depth_of(v)] * mass[v] * mass[v];
  return e;
}

/// (K mu)_leaf = sum_k inc[k] * M(ancestor at depth k).
void kernel_apply(const ExplicitTree& tree, const std::vector<double>& inc, const std::vector<double>& mass,
                  std::vector<double>& acc, std::span<double> out) {
  acc[0] = inc[0] * mass[0];
  for (VertexId v = 1; v < tree.size(); ++v) acc[v] = acc[tree.parent(v)] + inc[tree.depth_of(v)] * mass[v];
  const VertexId first_leaf = tree.level_begin(tree.depth());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = acc[first_leaf + i];
}

/// Euclidean projection onto the probability simplex.
void project_simplex(std::vector<double>& x, std::vector<double>& scratch) {
  scratch = x;
  std::sort(scratch.begin(), scratch.end(), std::greater<>());
  double cum = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < scratch.size(); ++i) {
    cum += scratch[i];
    const double t = (cum - 1.0) / static_cast<double>(i + 1);
    if (scratch[i] - t > 0.0) theta = t;
  }
  for (double& v : x) v = std::max(0.0, v - theta);
}

}  // namespace

double energy(const ExplicitTree& tree, const Gauge& gauge, const BoundaryMeasure& mu) {
  check_tree(tree);
  const auto leaves = static_cast<std::size_t>(tree.level_size(tree.depth()));
  if (mu.weight.size() != leaves) throw std::invalid_argument("measure size does not match the leaf count");
  std::vector<double> mass(tree.size());
  subtree_mass(tree, mu.weight, mass);
  return energy_from_mass(tree, kernel_increments(tree, gauge), mass);
}

EnergyResult capacity_energy(const ExplicitTree& tree, const Gauge& gauge, double tolerance, int max_iterations) {
  check_tree(tree);
  gauge.validate(tree.depth());
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  const auto inc = kernel_increments(tree, gauge);
  const int n = tree.depth();
  const auto leaves = static_cast<std::size_t>(tree.level_size(n));

  // Gershgorin: row sums of K bound its largest eigenvalue.
  std::vector<double> leaf_count(tree.size(), 0.0);
  std::vector<double> ones(leaves, 1.0);
  subtree_mass(tree, ones, leaf_count);
  std::vector<double> acc(tree.size());
  std::vector<double> rows(leaves);
  kernel_apply(tree, inc, leaf_count, acc, rows);
  const double lipschitz = 2.0 * *std::max_element(rows.begin(), rows.end());
  const double step = 1.0 / lipschitz;

  std::vector<double> x(leaves, 1.0 / static_cast<double>(leaves));
  std::vector<double> y = x;
  std::vector<double> x_prev = x;
  std::vector<double> mass(tree.size());
  std::vector<double> grad(leaves);
  std::vector<double> scratch;

  EnergyResult best;
  best.energy = std::numeric_limits<double>::infinity();
  double t = 1.0;
  double f_prev = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    // Convergence test at x.
    subtree_mass(tree, x, mass);
    const double fx = energy_from_mass(tree, inc, mass);
    kernel_apply(tree, inc, mass, acc, grad);
    double dot = 0.0;
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < leaves; ++i) {
      dot += grad[i] * x[i];
      gmin = std::min(gmin, grad[i]);
    }
    const double gap = 2.0 * (dot - gmin);
    if (fx < best.energy) {
      best.energy = fx;
      best.measure.weight = x;
    }
    best.iterations = it;
    if (gap <= tolerance * fx) {
      best.converged = true;
      break;
    }
    if (fx > f_prev) {
      t = 1.0;
      y = x;
    }
    f_prev = fx;
    // Gradient step from y.
    subtree_mass(tree, y, mass);
    kernel_apply(tree, inc, mass, acc, grad);
    x_prev = x;
    for (std::size_t i = 0; i < leaves; ++i) x[i] = y[i] - step * 2.0 * grad[i];
    project_simplex(x, scratch);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double beta = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < leaves; ++i) y[i] = x[i] + beta * (x[i] - x_prev[i]);
    t = t_next;
  }
  best.capacity = 1.0 / best.energy;
  return best;
}

double rp_formula(std::span<const double> p, std::span<const double> lambda) {
  if (p.size() != lambda.size() || p.empty()) throw std::invalid_argument("p and lambda must both have N+1 entries");
  const std::size_t n = p.size() - 1;
  for (std::size_t i = 0; i <= n; ++i) {
    if (!(lambda[i] > 0.0)) throw std::invalid_argument("level sizes must be positive");
    if (!(p[i] >= 0.0)) throw std::invalid_argument("gauge values must be nonnegative");
  }
  auto inv = [](double v) { return v > 0.0 ? 1.0 / v : std::numeric_limits<double>::infinity(); };
  double r = inv(p[n]) / lambda[n];
  for (std::size_t i = 0; i < n; ++i) {
    const double d = 1.0 / lambda[i] - 1.0 / lambda[i + 1];
    if (d != 0.0) r += inv(p[i]) * d;
  }
  return r;
}

RpResult rp_symmetric(const GrowthProfile& profile, const Gauge& gauge) {
  const int n = profile.depth();
  std::vector<double> p(n + 1);
  std::vector<double> lambda(n + 1);
  for (int k = 0; k <= n; ++k) {
    p[k] = gauge(k);
    lambda[k] = profile.level_size_double(k);
  }
  RpResult r;
  r.rp = rp_formula(p, lambda);
  r.bound = 2.0 / r.rp;
  r.virtual_profile = !profile.is_integral();
  return r;
}

LevelSizes LevelSizes::parse(const std::string& spec) {
  LevelSizes s;
  s.label = spec;
  if (spec == "path") {
    s.size = [](std::int64_t) { return 1.0; };
    s.exponent = 0.0;
    return s;
  }
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown level-size spec '" + spec + "'");
  const std::string head = spec.substr(0, colon);
  const double g = parse_num(spec.substr(colon + 1), spec);
  if (!(g >= 0.0)) throw std::invalid_argument("growth exponent must be >= 0");
  s.exponent = g;
  if (head == "poly") {
    s.size = [g](std::int64_t n) { return std::pow(static_cast<double>(n + 1), g); };
  } else if (head == "ceilpow") {
    s.size = [g](std::int64_t n) { return std::ceil(std::pow(static_cast<double>(n), g)); };
  } else if (head == "envelope") {
    s.size = [g](std::int64_t n) { return std::exp2(std::floor(g * std::log2(static_cast<double>(n + 1)) + 1e-12)); };
  } else {
    throw std::invalid_argument("unknown level-size spec '" + spec + "'");
  }
  return s;
}

LevelSizes LevelSizes::from_profile(const GrowthProfile& profile) {
  LevelSizes s;
  s.label = "profile";
  s.size = [profile](std::int64_t n) {
    if (n > profile.depth()) {
      throw std::invalid_argument(fmt::format("profile has depth {}, level {} requested", profile.depth(), n));
    }
    return profile.level_size_double(static_cast<int>(n));
  };
  return s;
}

SeriesReport criterion_series(const LevelSizes& sizes, std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  SeriesReport r;
  double cap = 0.0;
  double reg = 0.0;
  std::int64_t next = 1;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double size = sizes.size(n);
    if (!(size >= 1.0)) throw std::invalid_argument(fmt::format("level size at n={} is below 1", n));
    const double x = static_cast<double>(n);
    cap += 1.0 / (std::sqrt(x) * size);
    reg += std::log(size) / (x * std::sqrt(x));
    if (n == next) {
      r.capacity_partial.push_back(cap);
      r.regularity_partial.push_back(reg);
      next *= 2;
    }
  }
  if (sizes.exponent) {
    r.capacity_series = *sizes.exponent > 0.5 ? Verdict::Converges : Verdict::Diverges;
    r.regularity = Verdict::Converges;
  }
  if (r.capacity_series == Verdict::Converges) {
    r.prediction = "transient";
  } else if (r.capacity_series == Verdict::Diverges && r.regularity == Verdict::Converges) {
    r.prediction = "recurrent";
  } else {
    r.prediction = "undetermined";
  }
  return r;
}

}  // namespace critwalk
