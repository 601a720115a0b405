#include "critwalk/rng.hpp"
#include "critwalk/walk1d.hpp"

#include <doctest.h>

#include <cmath>
#include <map>

using namespace critwalk;
using namespace critwalk::walk1d;

namespace {

// Direct path enumeration; prunes as soon as the path leaves the region.
double enumerate_paths(const std::vector<std::int64_t>& vals, const std::vector<double>& probs,
                       const BoundaryFn& f, std::int64_t a, std::int64_t n, std::int64_t k = 0,
                       std::int64_t s = 0) {
  if (k == n) return 1.0;
  double total = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const std::int64_t next = s + vals[i];
    if (k + 1 >= a && static_cast<double>(next) < f(k + 1)) continue;
    total += probs[i] * enumerate_paths(vals, probs, f, a, n, k + 1, next);
  }
  return total;
}

// Untruncated DP over a map of reachable sums.
double map_dp(const std::vector<std::int64_t>& vals, const std::vector<double>& probs, const BoundaryFn& f,
              std::int64_t a, std::int64_t n) {
  std::map<std::int64_t, double> cur{{0, 1.0}};
  for (std::int64_t k = 1; k <= n; ++k) {
    std::map<std::int64_t, double> next;
    for (const auto& [s, p] : cur) {
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const std::int64_t t = s + vals[i];
        if (k >= a && static_cast<double>(t) < f(k)) continue;
        next[t] += p * probs[i];
      }
    }
    cur = std::move(next);
  }
  double total = 0.0;
  for (const auto& [s, p] : cur) total += p;
  return total;
}

double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n + 1)) - std::lgamma(static_cast<double>(k + 1)) -
         std::lgamma(static_cast<double>(n - k + 1));
}

// P(lo <= S_n <= hi) for the simple symmetric walk.
double srw_window(std::int64_t n, std::int64_t lo, std::int64_t hi) {
  double total = 0.0;
  for (std::int64_t up = 0; up <= n; ++up) {
    const std::int64_t s = 2 * up - n;
    if (s < lo || s > hi) continue;
    total += std::exp(log_choose(n, up) - static_cast<double>(n) * std::log(2.0));
  }
  return total;
}

IncrementLaw random_small_lattice(StreamRng& rng) {
  const int atoms = 2 + static_cast<int>(rng() % 2);
  std::vector<std::int64_t> vals;
  while (static_cast<int>(vals.size()) < atoms) {
    const std::int64_t v = static_cast<std::int64_t>(rng() % 5) - 2;
    if (std::find(vals.begin(), vals.end(), v) == vals.end()) vals.push_back(v);
  }
  std::vector<Rational> probs;
  std::vector<int> w(vals.size());
  int total = 0;
  for (auto& x : w) {
    x = 1 + static_cast<int>(rng() % 6);
    total += x;
  }
  for (int x : w) probs.emplace_back(Rational(x, total));
  return IncrementLaw::lattice(vals, probs);
}

}  // namespace

TEST_SUITE("walk1d") {
  TEST_CASE("boundary parsing and validation") {
    CHECK(BoundaryFn::parse("zero")(7) == 0.0);
    CHECK(BoundaryFn::parse("pow:2:0.5")(4) == doctest::Approx(4.0));
    CHECK(BoundaryFn::parse("powlog:1:0.5:-2")(3) == doctest::Approx(std::sqrt(3.0) / std::pow(std::log(4.0), 2)));
    const auto tab = BoundaryFn::parse("tab:0,1,1,2");
    CHECK(tab(1) == 0.0);
    CHECK(tab(4) == 2.0);
    CHECK(tab(100) == 2.0);
    CHECK_THROWS(BoundaryFn::parse("tab:0,2,1").validate(3));
    CHECK_THROWS(BoundaryFn::parse("pow:-1:0.5").validate(3));
    CHECK_THROWS(BoundaryFn::parse("bogus"));
  }

  TEST_CASE("summability verdicts") {
    CHECK(summability_verdict(PowerBoundary{1, 0.25}, 1 << 20).verdict == Verdict::Converges);
    CHECK(summability_verdict(PowerBoundary{1, 0.5}, 1 << 20).verdict == Verdict::Diverges);
    CHECK(summability_verdict(PowerLogBoundary{1, 0.5, -2}, 1 << 20).verdict == Verdict::Converges);
    CHECK(summability_verdict(PowerLogBoundary{1, 0.5, -1}, 1 << 20).verdict == Verdict::Diverges);
    CHECK(summability_verdict(ZeroBoundary{}, 1 << 20).verdict == Verdict::Converges);
    CHECK_THROWS(summability_verdict(PowerBoundary{-1, 0.5}, 16));
    const auto rep = summability_verdict(PowerBoundary{1, 0.25}, 1 << 10);
    CHECK(rep.partial_sums.size() == 11);
    for (std::size_t i = 1; i < rep.partial_sums.size(); ++i) CHECK(rep.partial_sums[i] >= rep.partial_sums[i - 1]);
  }

  TEST_CASE("stay above zero for the fair coin") {
    const auto law = IncrementLaw::rademacher();
    const auto p1 = dp_stay_above(law, ZeroBoundary{}, 1, 1).prob;
    const auto p2 = dp_stay_above(law, ZeroBoundary{}, 1, 2).prob;
    const auto p4 = dp_stay_above(law, ZeroBoundary{}, 1, 4).prob;
    CHECK(p1.mid() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p2.mid() == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(p4.mid() == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(p4.width() < 1e-12);
  }

  TEST_CASE("hitting tail examples") {
    const auto law = IncrementLaw::rademacher();
    CHECK(dp_hitting_tail(law, 1, 2).prob.mid() == doctest::Approx(0.75).epsilon(1e-14));
    for (std::int64_t n = 1; n <= 8; ++n) {
      CHECK(dp_hitting_tail(law, static_cast<double>(n), n).prob.mid() == doctest::Approx(1.0).epsilon(1e-14));
    }
    for (const std::int64_t n : {1, 5, 17, 64}) {
      const auto a = dp_hitting_tail(law, 0, n).prob;
      const auto b = dp_stay_above(law, ZeroBoundary{}, 1, n).prob;
      CHECK(a.lower == b.lower);
      CHECK(a.upper == b.upper);
    }
  }

  TEST_CASE("conditional moments") {
    const auto law = IncrementLaw::rademacher();
    CHECK(dp_conditional_moment(law, 1, 2) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(dp_conditional_moment(law, 2, 2) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(dp_conditional_moment(law, 2, 1) == doctest::Approx(1.0).epsilon(1e-13));
    // n = 4 survivors: paths to 4 (1/16), 2 (3/16), 0 (2/16) out of 6/16.
    CHECK(dp_conditional_moment(law, 4, 1) == doctest::Approx(10.0 / 6.0).epsilon(1e-13));
    CHECK(dp_conditional_moment(law, 4, 2) == doctest::Approx(28.0 / 6.0).epsilon(1e-13));
    CHECK_THROWS(dp_conditional_moment(law, 4, 3));
  }

  TEST_CASE("central binomial oracle for the fair coin") {
    const auto law = IncrementLaw::rademacher();
    for (const std::int64_t m : {1, 2, 8, 50, 512, 2048}) {
      const double expect = std::exp(log_choose(2 * m, m) - static_cast<double>(2 * m) * std::log(2.0));
      const auto got = dp_stay_above(law, ZeroBoundary{}, 1, 2 * m).prob;
      CHECK(got.mid() == doctest::Approx(expect).epsilon(1e-10));
    }
  }

  TEST_CASE("reflection oracle for the hitting tail") {
    const auto law = IncrementLaw::rademacher();
    for (const std::int64_t h : {1, 2, 4, 9}) {
      for (const std::int64_t n : {10, 256, 1024, 4096}) {
        const double expect = srw_window(n, -h, h + 1);
        const auto got = dp_hitting_tail(law, static_cast<double>(h), n).prob;
        CHECK(std::abs(got.mid() - expect) < 1e-12);
      }
    }
  }

  TEST_CASE("exhaustive enumeration matches the lattice DP") {
    StreamRng rng(4242);
    const std::vector<BoundaryFn> boundaries = {ZeroBoundary{}, PowerBoundary{0.7, 0.5}, PowerBoundary{1, 0.25},
                                                TabulatedBoundary{{0, 0, 1, 1, 1, 2, 2, 3}}};
    int cases = 0;
    for (int trial = 0; trial < 30; ++trial) {
      const auto law = random_small_lattice(rng);
      const auto& lat = law.lattice();
      const auto& probs = law.lattice_probs();
      for (const auto& f : boundaries) {
        for (const std::int64_t a : {1, 2, 4}) {
          for (std::int64_t n = a; n <= 20; n += 3) {
            const double oracle = std::pow(static_cast<double>(lat.values.size()), static_cast<double>(n)) <= 2e5
                                      ? enumerate_paths(lat.values, probs, f, a, n)
                                      : map_dp(lat.values, probs, f, a, n);
            const auto got = dp_stay_above(law, f, a, n).prob;
            CHECK(got.lower <= oracle + 1e-12);
            CHECK(got.upper >= oracle - 1e-12);
            CHECK(got.width() < 1e-9);
            ++cases;
          }
        }
      }
    }
    CHECK(cases > 1000);
  }

  TEST_CASE("enumeration and map DP agree") {
    const auto law = IncrementLaw::parse("lattice:-2:1/3,1:1/3,2:1/3");
    const auto& lat = law.lattice();
    for (std::int64_t n = 1; n <= 9; ++n) {
      CHECK(enumerate_paths(lat.values, law.lattice_probs(), PowerBoundary{1, 0.5}, 1, n) ==
            doctest::Approx(map_dp(lat.values, law.lattice_probs(), PowerBoundary{1, 0.5}, 1, n)).epsilon(1e-13));
    }
  }

  TEST_CASE("monotone in horizon and boundary") {
    const auto law = IncrementLaw::parse("gauss:0:1").quantize(41);
    double prev = 1.0;
    for (const std::int64_t n : {1, 2, 4, 16, 64, 256}) {
      const double p = dp_stay_above(law, PowerBoundary{1, 0.25}, 1, n).prob.mid();
      CHECK(p <= prev + 1e-12);
      prev = p;
    }
    const double lo = dp_stay_above(law, PowerBoundary{0.5, 0.5}, 1, 128).prob.mid();
    const double hi = dp_stay_above(law, PowerBoundary{1.0, 0.5}, 1, 128).prob.mid();
    CHECK(hi <= lo);
    const double neg_small = dp_stay_above_negative(law, PowerBoundary{0.5, 0.5}, 128).prob.mid();
    const double neg_big = dp_stay_above_negative(law, PowerBoundary{1.0, 0.5}, 128).prob.mid();
    CHECK(neg_small <= neg_big);
    CHECK(dp_stay_above(law, ZeroBoundary{}, 1, 128).prob.mid() <= neg_small);
  }

  TEST_CASE("checkpoints from one pass match separate runs") {
    const auto law = IncrementLaw::rademacher();
    const auto spec = barrier_above(law.lattice(), ZeroBoundary{}, 1, 64);
    const auto cps = run_barrier_dp(law, spec, {4, 16, 64});
    REQUIRE(cps.size() == 3);
    CHECK(cps[0].prob.mid() == doctest::Approx(0.375).epsilon(1e-14));
    CHECK(cps[0].mean == doctest::Approx(10.0 / 6.0).epsilon(1e-13));
    CHECK(cps[2].prob.mid() == doctest::Approx(dp_stay_above(law, ZeroBoundary{}, 1, 64).prob.mid()).epsilon(1e-13));
  }

  TEST_CASE("narrow state window reports a warning and still brackets") {
    const auto law = IncrementLaw::parse("gauss:0:1").quantize(41);
    const auto wide = dp_stay_above(law, ZeroBoundary{}, 1, 1024);
    const auto narrow = dp_stay_above(law, ZeroBoundary{}, 1, 1024, 4.0);
    CHECK_FALSE(wide.warning.has_value());
    CHECK(narrow.warning.has_value());
    CHECK(narrow.prob.lower <= wide.prob.lower + 1e-12);
    CHECK(narrow.prob.upper >= wide.prob.upper - 1e-12);
  }

  TEST_CASE("monte carlo agrees with exact values") {
    const auto gauss = IncrementLaw::parse("gauss:0:1");
    const auto one = mc_stay_above(gauss, ZeroBoundary{}, 1, 1, 100000, 11);
    CHECK(std::abs(one.estimate - 0.5) < 3 * one.stderr_);
    const auto coin = mc_stay_above(IncrementLaw::rademacher(), ZeroBoundary{}, 1, 4, 100000, 12);
    CHECK(std::abs(coin.estimate - 0.375) < 3 * coin.stderr_);
    CHECK(coin.episodes == 100000);
  }

  TEST_CASE("monte carlo does not depend on thread count") {
    const auto law = IncrementLaw::parse("logexp");
    const auto a = mc_stay_above(law, PowerBoundary{1, 0.25}, 1, 64, 20000, 99, 1);
    const auto b = mc_stay_above(law, PowerBoundary{1, 0.25}, 1, 64, 20000, 99, 4);
    CHECK(a.successes == b.successes);
    CHECK(a.estimate == b.estimate);
    const auto ga = mc_stay_above_grid(law, ZeroBoundary{}, 1, {4, 16, 64}, 5000, 7, 1);
    const auto gb = mc_stay_above_grid(law, ZeroBoundary{}, 1, {4, 16, 64}, 5000, 7, 3);
    REQUIRE(ga.size() == 3);
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga[i].successes == gb[i].successes);
    CHECK(ga[2].successes <= ga[1].successes);
    CHECK(ga[1].successes <= ga[0].successes);
  }

  TEST_CASE("square-root scaling under a summable boundary") {
    const auto law = IncrementLaw::parse("gauss:0:1");
    const auto est = mc_stay_above_grid(law, PowerBoundary{1, 0.25}, 1, {1024, 4096}, 40000, 5, 1);
    REQUIRE(est.size() == 2);
    const double s1 = std::sqrt(1024.0) * est[0].estimate;
    const double s2 = std::sqrt(4096.0) * est[1].estimate;
    const double se = std::hypot(std::sqrt(1024.0) * est[0].stderr_, std::sqrt(4096.0) * est[1].stderr_);
    CHECK(std::abs(s1 - s2) < 4 * se);
  }

  TEST_CASE("backward push") {
    CHECK(backward_push(IncrementLaw::rademacher()) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(backward_push(IncrementLaw::parse("gauss:0:2"))) < 1e-9);
    CHECK(std::abs(backward_push(IncrementLaw::parse("uniform:-1:1"))) < 1e-9);
    CHECK(backward_push(IncrementLaw::constant(-0.75)) == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(backward_push(IncrementLaw::parse("lattice:1:1/3,-1:2/3")) ==
          doctest::Approx(std::log(3.0 / (2.0 * std::sqrt(2.0)))).epsilon(1e-9));
    CHECK(backward_push(IncrementLaw::parse("gauss:-1:1")) == doctest::Approx(0.5).epsilon(1e-9));
    // Adding an atom at zero can only shrink the push.
    const double beta = backward_push(IncrementLaw::parse("lattice:1:1/4,-1:3/4"));
    const double mixed = backward_push(IncrementLaw::parse("lattice:1:1/8,-1:3/8,0:1/2"));
    CHECK(mixed <= beta + 1e-12);
    CHECK(mixed > 0.0);
    CHECK_THROWS(backward_push(IncrementLaw::parse("stable:1.5")));
  }

  TEST_CASE("asymptotics report rows") {
    const auto rep = asymptotics_report(IncrementLaw::rademacher(), ZeroBoundary{}, {4, 16}, 1);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.n_f == 1);
    CHECK(rep.rows[0].sqrt_n_above() == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(rep.rows[0].sqrt_n_tail() == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(rep.rows[0].below.mid() == doctest::Approx(0.375).epsilon(1e-13));
  }
}
