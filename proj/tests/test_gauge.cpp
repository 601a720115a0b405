#include "critwalk/gauge.hpp"
#include "critwalk/rng.hpp"
#include "critwalk/tree.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace critwalk;

namespace {

ExplicitTree path(int n) { return build_symmetric(GrowthProfile::constant(1, n), n); }
ExplicitTree binary(int n) { return build_symmetric(GrowthProfile::constant(2, n), n); }

// Level k has k+1 vertices: the first vertex of each level splits in two.
ExplicitTree comb(int n) {
  std::vector<std::vector<int>> counts;
  for (int k = 0; k < n; ++k) {
    std::vector<int> row(static_cast<std::size_t>(k + 1), 1);
    row[0] = 2;
    counts.push_back(row);
  }
  return build_explicit(counts);
}

ExplicitTree random_tree(StreamRng& rng, int max_depth, int max_children) {
  const int depth = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_depth));
  std::vector<std::vector<int>> counts;
  int width = 1;
  for (int k = 0; k < depth; ++k) {
    std::vector<int> row(static_cast<std::size_t>(width));
    int next = 0;
    for (auto& c : row) {
      c = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_children));
      next += c;
    }
    counts.push_back(row);
    width = next;
  }
  return build_explicit(counts);
}

Gauge random_gauge(StreamRng& rng) {
  if (rng() % 2 == 0) return PowerGauge{0.25 + rng.uniform()};
  return ExpGauge{0.1 + rng.uniform()};
}

}  // namespace

TEST_SUITE("gauge_cap") {
  TEST_CASE("gauge values and parsing") {
    const Gauge p = PowerGauge{0.5};
    CHECK(p(0) == 1.0);
    CHECK(p(4) == doctest::Approx(0.5));
    const Gauge e = Gauge::parse("exp:0.6931471805599453");
    CHECK(e(3) == doctest::Approx(0.125));
    const Gauge t = Gauge::parse("tab:0.9,0.5,0.5");
    CHECK(t(0) == 1.0);
    CHECK(t(2) == 0.5);
    CHECK_NOTHROW(t.validate(3));
    CHECK_THROWS(Gauge::parse("tab:0.5,0.9").validate(2));
    CHECK_THROWS(Gauge::parse("tab:0.5,-0.1").validate(2));
    CHECK_THROWS(Gauge::parse("nope:1"));
  }

  TEST_CASE("hausdorff content examples") {
    const auto b = binary(8);
    CHECK(hausdorff_content(b, ExpGauge{std::log(2.0)}, 1).value == doctest::Approx(1.0).epsilon(1e-12));
    const auto p = path(9);
    // The deepest single vertex is always an admissible cutset of a path.
    for (int m = 1; m <= 9; ++m) {
      CHECK(hausdorff_content(p, PowerGauge{0.5}, m).value == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    const auto c = comb(12);
    CHECK(c.level_size(12) == 13);
    const auto seq = content_by_min_level(c, PowerGauge{0.5});
    REQUIRE(seq.size() == 12);
    // Raising min_level removes cutsets from the minimum.
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] >= seq[i - 1] - 1e-12);
    // Paths hanging off the spine are cheapest to cut at the bottom.
    CHECK(seq.back() == doctest::Approx(13.0 / std::sqrt(12.0)).epsilon(1e-12));
    const auto res = hausdorff_content(c, PowerGauge{0.5}, 3);
    CHECK(is_cutset(c, res.cutset));
  }

  TEST_CASE("network capacity examples") {
    CHECK(capacity_network(path(4), PowerGauge{0.5}) == doctest::Approx(0.5).epsilon(1e-12));
    for (int n = 1; n <= 8; ++n) {
      CHECK(capacity_network(path(n), PowerGauge{0.5}) == doctest::Approx(1.0 / std::sqrt(n)).epsilon(1e-12));
      CHECK(capacity_network(binary(n), ExpGauge{std::log(2.0)}) == doctest::Approx(1.0 / (1.0 + n / 2.0)).epsilon(1e-12));
    }
    CHECK(capacity_network(binary(2), PowerGauge{0.5}) ==
          doctest::Approx(1.0 / (1.0 + (std::sqrt(2.0) - 1.0) / 4.0)).epsilon(1e-12));
    CHECK(capacity_network(binary(2), PowerGauge{0.5}) == doctest::Approx(0.9061).epsilon(1e-4));
    CHECK_THROWS(capacity_network(path(3), Gauge::parse("tab:0.5,0.9,0.4")));
  }

  TEST_CASE("energy of explicit measures") {
    const auto b = binary(3);
    BoundaryMeasure uniform{std::vector<double>(8, 1.0 / 8)};
    const Gauge g = ExpGauge{std::log(2.0)};
    // Meet at depth k with probability 2^-k - 2^-(k+1), at depth 3 with 1/8.
    double expect = 0.0;
    for (int k = 0; k < 3; ++k) expect += (std::pow(2.0, -k) - std::pow(2.0, -(k + 1))) / g(k);
    expect += 0.125 / g(3);
    CHECK(energy(b, g, uniform) == doctest::Approx(expect).epsilon(1e-12));
    BoundaryMeasure point{std::vector<double>(8, 0.0)};
    point.weight[5] = 1.0;
    CHECK(energy(b, g, point) == doctest::Approx(8.0).epsilon(1e-12));
  }

  TEST_CASE("energy minimizer examples") {
    const auto r = capacity_energy(path(4), PowerGauge{0.5});
    CHECK(r.converged);
    CHECK(r.capacity == doctest::Approx(0.5).epsilon(1e-9));
    REQUIRE(r.measure.weight.size() == 1);
    CHECK(r.measure.weight[0] == doctest::Approx(1.0));
    const auto s = build_symmetric(GrowthProfile(std::vector<Rational>{2, 3, 1, 2}), 4);
    const auto e = capacity_energy(s, PowerGauge{0.5});
    CHECK(e.converged);
    for (double w : e.measure.weight) CHECK(w == doctest::Approx(1.0 / 12).epsilon(1e-6));
    CHECK(e.capacity == doctest::Approx(capacity_network(s, PowerGauge{0.5})).epsilon(1e-9));
    const double total = std::accumulate(e.measure.weight.begin(), e.measure.weight.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("energy and network capacity agree on random trees") {
    StreamRng rng(77);
    for (int i = 0; i < 100; ++i) {
      const auto t = random_tree(rng, 6, 3);
      const auto g = random_gauge(rng);
      const auto e = capacity_energy(t, g, 1e-12, 200000);
      const double c = capacity_network(t, g);
      CAPTURE(i);
      CHECK(std::abs(e.capacity - c) <= 1e-6 * c);
      for (double w : e.measure.weight) CHECK(w >= 0.0);
    }
  }

  TEST_CASE("uniform measure energy on symmetric trees has a closed form") {
    StreamRng rng(5);
    for (int i = 0; i < 20; ++i) {
      std::vector<Rational> growth;
      const int depth = 1 + static_cast<int>(rng() % 5);
      for (int k = 0; k < depth; ++k) growth.emplace_back(static_cast<int>(1 + rng() % 3));
      const GrowthProfile prof(growth);
      const auto t = build_symmetric(prof, depth);
      const auto g = random_gauge(rng);
      const auto leaves = static_cast<std::size_t>(t.level_size(depth));
      BoundaryMeasure mu{std::vector<double>(leaves, 1.0 / static_cast<double>(leaves))};
      double expect = 0.0;
      for (int k = 0; k < depth; ++k) {
        expect += (1.0 / prof.level_size_double(k) - 1.0 / prof.level_size_double(k + 1)) / g(k);
      }
      expect += 1.0 / (prof.level_size_double(depth) * g(depth));
      CHECK(energy(t, g, mu) == doctest::Approx(expect).epsilon(1e-12));
    }
  }

  TEST_CASE("truncation monotonicity") {
    StreamRng rng(9);
    for (int i = 0; i < 30; ++i) {
      const auto t = random_tree(rng, 7, 3);
      if (t.depth() < 3) continue;
      const auto g = random_gauge(rng);
      double prev_cap = 2.0;
      double prev_content = 1e300;
      for (int n = 1; n <= t.depth(); ++n) {
        const auto tn = t.truncate(n);
        const double cap = capacity_network(tn, g);
        const double content = hausdorff_content(tn, g, 1).value;
        CHECK(cap <= prev_cap + 1e-12);
        CHECK(content <= prev_content + 1e-12);
        prev_cap = cap;
        prev_content = content;
      }
    }
  }

  TEST_CASE("rp formula examples") {
    const auto path_rp = rp_symmetric(GrowthProfile::constant(1, 4), PowerGauge{0.5});
    CHECK(path_rp.rp == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(path_rp.bound == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(path_rp.virtual_profile);
    const auto bin = rp_symmetric(GrowthProfile::constant(2, 4), ExpGauge{std::log(2.0)});
    CHECK(bin.rp == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(bin.bound == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    const auto virt = rp_symmetric(GrowthProfile(std::vector<Rational>{Rational(3, 2), 2}), PowerGauge{0.5});
    CHECK(virt.virtual_profile);
    CHECK(std::isfinite(virt.rp));
    const std::vector<double> p{1.0, 0.0, 0.5};
    const std::vector<double> lam{1.0, 2.0, 4.0};
    CHECK(std::isinf(rp_formula(p, lam)));
  }

  TEST_CASE("rp bound equals twice the network capacity on symmetric trees") {
    StreamRng rng(13);
    for (int i = 0; i < 50; ++i) {
      std::vector<Rational> growth;
      const int depth = 1 + static_cast<int>(rng() % 8);
      for (int k = 0; k < depth; ++k) growth.emplace_back(static_cast<int>(1 + rng() % 3));
      const GrowthProfile prof(growth);
      const auto g = random_gauge(rng);
      const auto rp = rp_symmetric(prof, g);
      const double cap = capacity_network(build_symmetric(prof, depth), g);
      CHECK(rp.bound == doctest::Approx(2.0 * cap).epsilon(1e-12));
    }
  }

  TEST_CASE("series criteria") {
    const auto quad = criterion_series(LevelSizes::parse("poly:2"), 1 << 16);
    CHECK(quad.capacity_series == Verdict::Converges);
    CHECK(quad.regularity == Verdict::Converges);
    CHECK(quad.prediction == "transient");
    const auto line = criterion_series(LevelSizes::parse("path"), 1 << 16);
    CHECK(line.capacity_series == Verdict::Diverges);
    CHECK(line.prediction == "recurrent");
    const auto root = criterion_series(LevelSizes::parse("ceilpow:0.5"), 1 << 16);
    CHECK(root.capacity_series == Verdict::Diverges);
    CHECK(criterion_series(LevelSizes::parse("envelope:2"), 1 << 16).capacity_series == Verdict::Converges);
    for (std::size_t i = 1; i < quad.capacity_partial.size(); ++i) {
      CHECK(quad.capacity_partial[i] >= quad.capacity_partial[i - 1]);
    }
  }
}
