#include "critwalk/network.hpp"
#include "critwalk/rng.hpp"
#include "critwalk/rwre_sim.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace critwalk;

namespace {

// P(X > x) for the law with characteristic function exp(-|t|^alpha), by
// Simpson's rule on the Gil-Pelaez integral.
double fourier_tail(double alpha, double x) {
  const double upper = 40.0;
  const int n = 400000;
  const double h = upper / n;
  const auto g = [&](double t) { return t == 0.0 ? x : std::sin(t * x) / t * std::exp(-std::pow(t, alpha)); };
  double s = g(0.0) + g(upper);
  for (int i = 1; i < n; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * g(i * h);
  return 0.5 - s * h / 3.0 / M_PI;
}

LazyEnvironment flat_path(int depth) {
  return LazyEnvironment(GrowthProfile::constant(1, depth), IncrementLaw::constant(0.0), 1);
}

std::vector<std::vector<int>> all_sequences(int d, int len) {
  std::vector<std::vector<int>> out{{}};
  for (int k = 0; k < len; ++k) {
    std::vector<std::vector<int>> next;
    for (const auto& s : out) {
      for (int c = 1; c <= d; ++c) {
        auto t = s;
        t.push_back(c);
        next.push_back(std::move(t));
      }
    }
    out = std::move(next);
  }
  return out;
}

}  // namespace

TEST_SUITE("rwre_sim") {
  TEST_CASE("lazy environment is a pure function of seed and path") {
    const GrowthProfile prof = GrowthProfile::constant(3, 6);
    const auto law = IncrementLaw::parse("gauss:0:1");
    LazyEnvironment a(prof, law, 17);
    LazyEnvironment b(prof, law, 17);
    // a expands breadth first, b follows a different order.
    for (std::int32_t i = 0; i < 40; ++i) a.expand(i);
    for (std::int32_t i = 0; i < 13; ++i) b.expand(i);
    for (std::int32_t i = 39; i >= 13; --i) {
      const auto pid = a.node(i).path_id;
      const auto where = b.lookup(pid);
      REQUIRE(where.has_value());
      b.expand(*where);
    }
    CHECK(a.expanded_size() == b.expanded_size());
    CHECK(a.digest() == b.digest());
    for (std::int32_t i = 0; i < static_cast<std::int32_t>(a.expanded_size()); ++i) {
      const auto& na = a.node(i);
      const auto j = b.lookup(na.path_id);
      REQUIRE(j.has_value());
      CHECK(b.node(*j).log_conductance == na.log_conductance);
    }
    LazyEnvironment c(prof, law, 18);
    c.expand(0);
    a.expand(0);
    CHECK(c.node(c.node(0).first_child).log_conductance != a.node(a.node(0).first_child).log_conductance);
  }

  TEST_CASE("conductances accumulate labels along the path") {
    LazyEnvironment env(GrowthProfile::constant(2, 5), IncrementLaw::constant(0.25), 3);
    for (std::int32_t i = 0; i < 31; ++i) env.expand(i);
    for (std::int32_t i = 1; i < 31; ++i) {
      CHECK(env.node(i).log_conductance == doctest::Approx(0.25 * env.node(i).depth).epsilon(1e-14));
    }
    LazyEnvironment gw(OffspringLaw{{1.0, 1.0, 1.0}}, IncrementLaw::rademacher(), 5);
    const auto& root = gw.expand(0);
    CHECK(root.child_count >= 1);
    CHECK(root.child_count <= 3);
    LazyEnvironment shallow(GrowthProfile::constant(1, 2), IncrementLaw::constant(0.0), 1);
    shallow.expand(0);
    shallow.expand(1);
    CHECK_THROWS(shallow.expand(2));
  }

  TEST_CASE("gambler's ruin on a flat path") {
    for (const int d : {4, 16, 64}) {
      const auto env = flat_path(d);
      const auto est = escape_mc(env, d, 1 << 20, 100000, derive_seed(9, d));
      CAPTURE(d);
      CHECK(est.exhausted == 0);
      CHECK(std::abs(est.estimate - 1.0 / d) < 3 * est.stderr_);
    }
  }

  TEST_CASE("escape on a flat binary tree") {
    const LazyEnvironment env(GrowthProfile::constant(2, 2), IncrementLaw::constant(0.0), 1);
    const auto est = escape_mc(env, 2, 1000, 100000, 4);
    CHECK(std::abs(est.estimate - 2.0 / 3.0) < 3 * est.stderr_);
    const auto same = escape_mc(env, 2, 1000, 100000, 4, 3);
    CHECK(same.reached == est.reached);
  }

  TEST_CASE("episode outcomes are consistent") {
    auto env = flat_path(8);
    for (std::uint64_t s = 0; s < 200; ++s) {
      const auto one = walk_episode(env, 2, 1, s);
      CHECK(one.tag != EpisodeTag::ReachedDepth);
      const auto o = walk_episode(env, 8, 10000, s);
      if (o.tag == EpisodeTag::ReachedDepth) CHECK(o.max_depth == 8);
      if (o.tag == EpisodeTag::ReturnedToRoot) CHECK(o.max_depth < 8);
      CHECK(o.steps >= 1);
    }
    CHECK(to_string(EpisodeTag::ReturnedToRoot) == "returned");
  }

  TEST_CASE("escape matches the network value in a random environment") {
    const GrowthProfile prof = GrowthProfile::constant(2, 4);
    const auto law = IncrementLaw::parse("lattice:-1:1/2,1:1/2");
    LazyEnvironment env(prof, law, 23);
    // Copy the expanded environment into an explicit tree, level by level.
    std::vector<std::int32_t> order{0};
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (env.node(order[i]).depth < 4) {
        const auto& n = env.expand(order[i]);
        for (std::int32_t c = 0; c < n.child_count; ++c) order.push_back(n.first_child + c);
      }
    }
    const auto tree = build_symmetric(prof, 4);
    REQUIRE(static_cast<VertexId>(order.size()) == tree.size());
    std::vector<double> logs(order.size(), 0.0);
    for (std::size_t i = 1; i < order.size(); ++i) logs[i] = env.node(order[i]).log_conductance;
    const double exact = escape_probability(tree, ConductanceMap::from_log(tree, logs));
    const auto est = escape_mc(env, 4, 1 << 20, 100000, 31);
    CHECK(std::abs(est.estimate - exact) < 3 * est.stderr_);
  }

  TEST_CASE("quartiles") {
    const auto q = quartiles({4.0, 1.0, 3.0, 2.0});
    CHECK(q.q1 == doctest::Approx(1.75));
    CHECK(q.median == doctest::Approx(2.5));
    CHECK(q.q3 == doctest::Approx(3.25));
    const auto single = quartiles({7.0});
    CHECK(single.q1 == 7.0);
    CHECK(single.q3 == 7.0);
  }

  TEST_CASE("conductance scaling without randomness") {
    const auto rep = conductance_scaling_mc(GrowthProfile::constant(2, 8), IncrementLaw::constant(0.0), {2, 4, 8}, 5, 1);
    REQUIRE(rep.rows.size() == 3);
    CHECK(rep.rows[0].conductance.median == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
    CHECK(rep.rows[1].conductance.median == doctest::Approx(16.0 / 15.0).epsilon(1e-13));
    CHECK(rep.rows[2].conductance.median == doctest::Approx(256.0 / 255.0).epsilon(1e-13));
    for (const auto& row : rep.rows) {
      CHECK(row.conductance.q1 == row.conductance.q3);
      CHECK(row.escape.median == doctest::Approx(row.conductance.median / 2.0).epsilon(1e-13));
    }
    CHECK(rep.verdict == "transient-like");
  }

  TEST_CASE("conductance scaling is thread independent") {
    const auto law = IncrementLaw::rademacher();
    const auto a = conductance_scaling_mc(GrowthProfile::constant(1, 64), law, {16, 64}, 50, 3, 1);
    const auto b = conductance_scaling_mc(GrowthProfile::constant(1, 64), law, {16, 64}, 50, 3, 4);
    CHECK(a.conductances == b.conductances);
    CHECK(a.ratio == b.ratio);
    CHECK_THROWS(conductance_scaling_mc(GrowthProfile::constant(2, 40), law, {40}, 1, 3));
  }

  TEST_CASE("reinforced walk bookkeeping") {
    const auto edge = build_symmetric(GrowthProfile::constant(1, 1), 1);
    for (const std::int64_t steps : {1, 2, 5, 10}) {
      const auto tr = reinforced_episode(edge, steps, 1);
      CHECK(tr.urn.crossings[1] == steps);
      CHECK(tr.urn.weight(1) == 1 + steps / 2);
      CHECK(tr.urn.pending(1) == (steps % 2 == 1));
      CHECK(tr.root_returns == steps / 2);
    }
    const auto star = build_symmetric(GrowthProfile::constant(2, 1), 1);
    std::uint64_t first_one = 0;
    std::uint64_t same = 0;
    const std::uint64_t m = 100000;
    for (std::uint64_t e = 0; e < m; ++e) {
      const auto tr = reinforced_episode(star, 3, derive_seed(77, e));
      REQUIRE(tr.exits[0].size() == 2);
      first_one += tr.exits[0][0] == 1 ? 1 : 0;
      same += tr.exits[0][0] == tr.exits[0][1] ? 1 : 0;
    }
    const double f = static_cast<double>(first_one) / m;
    const double s = static_cast<double>(same) / m;
    CHECK(std::abs(f - 0.5) < 3 * std::sqrt(0.25 / m));
    CHECK(std::abs(s - 2.0 / 3.0) < 3 * std::sqrt(2.0 / 9.0 / m));
  }

  TEST_CASE("urn probabilities") {
    CHECK(polya_sequence_prob(2, {1, 1}) == Rational(1, 3));
    CHECK(polya_sequence_prob(3, {1, 2}) == Rational(1, 12));
    for (int d = 1; d <= 6; ++d) CHECK(polya_sequence_prob(d, {d}) == Rational(1, d));
    CHECK(dirichlet_exit_prob(2, {1, 1}) == Rational(1, 3));
    CHECK(dirichlet_exit_prob(2, {1, 2, 1}) == dirichlet_exit_prob(2, {1, 1, 2}));
    CHECK(dirichlet_exit_prob(2, {1, 1}) + dirichlet_exit_prob(2, {2, 2}) == Rational(2, 3));
    CHECK_THROWS(polya_sequence_prob(2, {3}));
  }

  TEST_CASE("urn and Dirichlet mixture agree exhaustively") {
    for (int d = 1; d <= 5; ++d) {
      for (int len = 1; len <= 6; ++len) {
        Rational total = 0;
        std::map<std::vector<int>, Rational> by_counts;
        for (const auto& seq : all_sequences(d, len)) {
          const Rational p = polya_sequence_prob(d, seq);
          CHECK(p == dirichlet_exit_prob(d, seq));
          std::vector<int> counts(static_cast<std::size_t>(d), 0);
          for (int c : seq) ++counts[static_cast<std::size_t>(c - 1)];
          const auto [it, fresh] = by_counts.emplace(counts, p);
          if (!fresh) CHECK(it->second == p);
          total += p;
        }
        CHECK(total == 1);
      }
    }
  }

  TEST_CASE("equivalence test tables and statistics") {
    const auto small = equivalence_test(2, 2, 2000, 1);
    CHECK(small.table == std::vector<Rational>{Rational(1, 3), Rational(1, 6), Rational(1, 6), Rational(1, 3)});
    const auto uni = equivalence_test(3, 1, 2000, 1);
    CHECK(uni.table == std::vector<Rational>(3, Rational(1, 3)));
    const auto rep = equivalence_test(2, 3, 100000, 12);
    CHECK(rep.passes());
    CHECK(rep.dof == 7);
    CHECK(rep.same_first_two_expected == doctest::Approx(2.0 / 3.0));
    CHECK(std::abs(rep.reinforced_same - 2.0 / 3.0) < 3 * rep.reinforced_same_se);
    CHECK(std::abs(rep.rwre_same - 2.0 / 3.0) < 3 * rep.rwre_same_se);
    const auto again = equivalence_test(2, 3, 100000, 12, 3);
    CHECK(again.reinforced_counts == rep.reinforced_counts);
    CHECK(again.rwre_counts == rep.rwre_counts);
  }

  TEST_CASE("stable tail against the Fourier integral") {
    for (const double alpha : {1.2, 1.5, 1.8, 2.0}) {
      for (const double x : {0.3, 1.0, 2.5}) {
        CAPTURE(alpha);
        CAPTURE(x);
        CHECK(stable_tail(alpha, x) == doctest::Approx(fourier_tail(alpha, x)).epsilon(1e-7));
      }
    }
    CHECK(stable_tail(2.0, 1.0) == doctest::Approx(0.5 * std::erfc(0.5)).epsilon(1e-10));
    CHECK(stable_tail(1.5, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
  }

  TEST_CASE("stable decay single step and monotonicity") {
    const auto one = stable_ray_decay(1.5, 1.0, {1}, 200000, 5);
    REQUIRE(one.points.size() == 1);
    const auto& p = one.points[0];
    CHECK(std::abs(p.estimate - stable_tail(1.5, 1.0)) < 3 * p.stderr_);
    CHECK(p.ci_low <= p.estimate);
    CHECK(p.estimate <= p.ci_high);
    std::uint64_t prev = ~0ULL;
    for (const double c : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      const auto r = stable_ray_decay(1.5, c, {2}, 20000, 6);
      CHECK(r.points[0].survivors <= prev);
      prev = r.points[0].survivors;
    }
    const auto t1 = stable_ray_decay(1.5, 1.0, {5, 10}, 30000, 7, 1);
    const auto t3 = stable_ray_decay(1.5, 1.0, {5, 10}, 30000, 7, 3);
    CHECK(t1.points[1].survivors == t3.points[1].survivors);
    CHECK(t1.slope == t3.slope);
    const auto none = stable_ray_decay(1.5, 50.0, {10, 20}, 1000, 8);
    CHECK(std::isnan(none.slope));
    CHECK(none.points[1].ci_high > 0.0);
  }
}
