#include "critwalk/network.hpp"
#include "critwalk/rng.hpp"
#include "critwalk/tree.hpp"

#include <Eigen/Sparse>
#include <doctest.h>

#include <cmath>

using namespace critwalk;

namespace {

ExplicitTree path(int n) { return build_symmetric(GrowthProfile::constant(1, n), n); }
ExplicitTree binary(int n) { return build_symmetric(GrowthProfile::constant(2, n), n); }

ExplicitTree random_tree(StreamRng& rng, int max_depth, int max_children) {
  return build_galton_watson(OffspringLaw{std::vector<double>(static_cast<std::size_t>(max_children), 1.0)},
                             1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_depth)), rng());
}

ConductanceMap random_env(const ExplicitTree& t, StreamRng& rng) {
  return sample_environment(t, IncrementLaw::parse("gauss:0:1"), rng());
}

// Escape probability from the harmonic equations: h = 0 at the root, 1 on
// the deepest level, and h(x) = sum_y q(x, y) h(y) elsewhere.
double harmonic_escape(const ExplicitTree& t, const ConductanceMap& cond) {
  const int n = t.depth();
  const VertexId first = 1;
  const VertexId last = t.level_begin(n);
  const auto m = static_cast<int>(last - first);
  double start = 0.0;
  double root_total = 0.0;
  for (VertexId c = t.first_child(0); c < t.first_child(0) + t.child_count(0); ++c) root_total += cond.conductance(c);
  if (m == 0) return 1.0;
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (VertexId v = first; v < last; ++v) {
    const int row = static_cast<int>(v - first);
    double total = cond.conductance(v);
    for (VertexId c = t.first_child(v); c < t.first_child(v) + t.child_count(v); ++c) total += cond.conductance(c);
    trip.emplace_back(row, row, total);
    if (t.parent(v) != 0) trip.emplace_back(row, static_cast<int>(t.parent(v) - first), -cond.conductance(v));
    for (VertexId c = t.first_child(v); c < t.first_child(v) + t.child_count(v); ++c) {
      if (c >= last) {
        rhs[row] += cond.conductance(c);
      } else {
        trip.emplace_back(row, static_cast<int>(c - first), -cond.conductance(c));
      }
    }
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(a);
  const Eigen::VectorXd h = lu.solve(rhs);
  for (VertexId c = t.first_child(0); c < t.first_child(0) + t.child_count(0); ++c) {
    const double hc = c >= last ? 1.0 : h[static_cast<int>(c - first)];
    start += cond.conductance(c) / root_total * hc;
  }
  return start;
}

ConductanceMap ones(const ExplicitTree& t) { return ConductanceMap::from_log(t, std::vector<double>(t.size(), 0.0)); }

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("environment sampling") {
    const auto t = binary(5);
    const auto zero = sample_environment(t, IncrementLaw::constant(0.0), 1);
    for (VertexId v = 1; v < t.size(); ++v) CHECK(zero.conductance(v) == 1.0);
    const auto drift = sample_environment(t, IncrementLaw::constant(0.3), 1);
    for (VertexId v = 1; v < t.size(); ++v) {
      CHECK(drift.log_conductance(v) == doctest::Approx(0.3 * t.depth_of(v)).epsilon(1e-12));
    }
    const auto star = build_symmetric(GrowthProfile::constant(40, 1), 1);
    std::uint64_t ups = 0;
    std::uint64_t total = 0;
    for (std::uint64_t s = 0; s < 250; ++s) {
      const auto env = sample_environment(star, IncrementLaw::rademacher(), s);
      for (VertexId v = 1; v < star.size(); ++v) {
        const double c = env.conductance(v);
        const bool up = std::abs(c - std::exp(1.0)) < 1e-12;
        CHECK((up || std::abs(c - std::exp(-1.0)) < 1e-12));
        ups += up ? 1 : 0;
        ++total;
      }
    }
    const double freq = static_cast<double>(ups) / static_cast<double>(total);
    CHECK(std::abs(freq - 0.5) < 3 * std::sqrt(0.25 / static_cast<double>(total)));
    const auto a = sample_environment(t, IncrementLaw::parse("gauss:0:1"), 42);
    const auto b = sample_environment(t, IncrementLaw::parse("gauss:0:1"), 42);
    CHECK(a.logs() == b.logs());
  }

  TEST_CASE("labels are shared with truncations") {
    const auto t = binary(6);
    const auto law = IncrementLaw::parse("logexp");
    const auto full = sample_labels(t, law, 3);
    const auto cut = sample_labels(t.truncate(4), law, 3);
    for (std::size_t v = 1; v < cut.size(); ++v) CHECK(cut[v] == full[v]);
  }

  TEST_CASE("conductance map validation") {
    const auto t = path(2);
    CHECK_THROWS(ConductanceMap::from_values(t, std::vector<double>{0.0, 1.0, -1.0}));
    CHECK_THROWS(ConductanceMap::from_log(t, std::vector<double>{0.0, INFINITY, 0.0}));
    CHECK_THROWS(ConductanceMap::from_log(t, std::vector<double>{0.0, 0.0}));
  }

  TEST_CASE("effective conductance examples") {
    const auto edge = path(1);
    CHECK(effective_conductance(edge, ConductanceMap::from_values(edge, std::vector<double>{0, 2.5})) ==
          doctest::Approx(2.5));
    CHECK(effective_conductance(path(2), ones(path(2))) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(effective_conductance(binary(2), ones(binary(2))) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    for (int n = 1; n <= 16; ++n) {
      const auto t = binary(n);
      const double r = 1.0 - std::pow(2.0, -n);
      CHECK(effective_conductance(t, ones(t)) == doctest::Approx(1.0 / r).epsilon(1e-12));
      CHECK(log_effective_conductance(t, ones(t)) == doctest::Approx(-std::log(r)).epsilon(1e-9));
    }
  }

  TEST_CASE("effective resistance with short circuits") {
    const auto t = binary(2);
    std::vector<double> r(t.size(), 1.0);
    r[1] = r[2] = 0.0;
    CHECK(effective_resistance(t, r) == doctest::Approx(0.25));
    std::fill(r.begin(), r.end(), 0.0);
    CHECK(effective_resistance(t, r) == 0.0);
  }

  TEST_CASE("escape probability examples") {
    CHECK(escape_probability(path(2), ones(path(2))) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(escape_probability(binary(2), ones(binary(2))) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    StreamRng rng(8);
    for (int i = 0; i < 20; ++i) {
      const auto t = random_tree(rng, 6, 3);
      const auto env = random_env(t, rng);
      const double p = escape_probability(t, env);
      CHECK(escape_probability(t, env.shifted(2.7)) == doctest::Approx(p).epsilon(1e-12));
    }
  }

  TEST_CASE("escape probability matches a harmonic solve") {
    StreamRng rng(21);
    for (int i = 0; i < 60; ++i) {
      const auto t = random_tree(rng, 8, 3);
      if (t.size() > 10000) continue;
      const auto env = random_env(t, rng);
      const double p = escape_probability(t, env);
      CHECK(p > 0.0);
      CHECK(p <= 1.0);
      CHECK(std::abs(p - harmonic_escape(t, env)) < 1e-10);
    }
  }

  TEST_CASE("bottleneck examples") {
    const auto p = bottleneck_bound(path(2), ones(path(2)));
    CHECK(p.value == doctest::Approx(1.0));
    const auto b = bottleneck_bound(binary(2), ones(binary(2)));
    CHECK(b.value == doctest::Approx(2.0));
    CHECK(b.cutset.vertices.size() == 2);
    const double eps = 1e-3;
    const auto t = path(5);
    std::vector<double> c(t.size(), 1.0);
    c[3] = eps;
    const auto cond = ConductanceMap::from_values(t, c);
    const auto r = bottleneck_bound(t, cond);
    CHECK(r.value == doctest::Approx(eps));
    CHECK(effective_conductance(t, cond) <= eps);
    CHECK(r.prefix_min[5] == doctest::Approx(eps));
  }

  TEST_CASE("bottleneck dominates the effective conductance") {
    StreamRng rng(31);
    for (int i = 0; i < 1000; ++i) {
      const auto t = random_tree(rng, 6, 3);
      const auto env = random_env(t, rng);
      const auto b = bottleneck_bound(t, env);
      CHECK(effective_conductance(t, env) <= b.value * (1 + 1e-12));
      CHECK(is_cutset(t, b.cutset));
    }
  }

  TEST_CASE("raising one conductance never lowers the effective conductance") {
    StreamRng rng(41);
    for (int i = 0; i < 100; ++i) {
      const auto t = random_tree(rng, 6, 3);
      const auto env = random_env(t, rng);
      auto logs = env.logs();
      const auto v = static_cast<VertexId>(1 + rng() % static_cast<std::uint64_t>(t.size() - 1));
      logs[v] += 0.5;
      const auto bumped = ConductanceMap::from_log(t, logs);
      CHECK(effective_conductance(t, bumped) >= effective_conductance(t, env) * (1 - 1e-12));
    }
  }

  TEST_CASE("transition kernel") {
    const auto t = build_explicit({{1}, {3}});
    const auto k = transition_kernel(t, ones(t));
    REQUIRE(k.neighbors(1).size() == 4);
    for (double q : k.probs(1)) CHECK(q == doctest::Approx(0.25));
    const auto s = build_explicit({{3}});
    const auto ks = transition_kernel(s, ones(s));
    for (double q : ks.probs(0)) CHECK(q == doctest::Approx(1.0 / 3.0));
    CHECK(ks.prob(1, 0) == 1.0);
    CHECK(ks.prob(1, 2) == 0.0);
    StreamRng rng(51);
    for (int i = 0; i < 50; ++i) {
      const auto tr = random_tree(rng, 6, 3);
      const auto env = random_env(tr, rng);
      const auto kernel = transition_kernel(tr, env);
      const auto doubled = transition_kernel(tr, env.shifted(std::log(2.0)));
      for (VertexId v = 0; v < tr.size(); ++v) {
        double total = 0.0;
        const auto probs = kernel.probs(v);
        for (std::size_t j = 0; j < probs.size(); ++j) {
          CHECK(probs[j] > 0.0);
          CHECK(doubled.probs(v)[j] == doctest::Approx(probs[j]).epsilon(1e-12));
          total += probs[j];
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("labels are recovered from the kernel") {
    StreamRng rng(61);
    for (int i = 0; i < 50; ++i) {
      const auto t = random_tree(rng, 6, 3);
      const auto labels = sample_labels(t, IncrementLaw::parse("gauss:0.2:1.5"), rng());
      const auto env = environment_from_labels(t, labels);
      const auto x = recover_X(t, transition_kernel(t, env));
      for (VertexId v = 0; v < t.size(); ++v) {
        if (t.depth_of(v) >= 2) {
          CHECK(std::abs(x[v] - labels[v]) < 1e-12);
        } else {
          CHECK(std::isnan(x[v]));
        }
      }
    }
  }
}
