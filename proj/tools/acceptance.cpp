#include "acceptance.hpp"

#include "cli.hpp"
#include "emit.hpp"

#include "critwalk/gauge.hpp"
#include "critwalk/network.hpp"
#include "critwalk/percolation.hpp"
#include "critwalk/rng.hpp"
#include "critwalk/rwre_sim.hpp"
#include "critwalk/walk1d.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

namespace critwalk::acceptance {
namespace {

struct Check {
  bool passed = false;
  std::string detail;
};

using walk1d::BoundaryFn;

const IncrementLaw& rademacher() {
  static const IncrementLaw law = IncrementLaw::rademacher();
  return law;
}

// 1 ------------------------------------------------------------------------
Check counterexample_exactness(const Options&) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run({"counterexample", "--eps", "0.01", "--format", "json"}, out, err);
  if (code != 0) return {false, "counterexample exited with " + std::to_string(code) + ": " + err.str()};
  const auto doc = cli::Json::parse(out.str()).at("results");
  const Rational pb = parse_rational(doc.at("p_b_gamma").get<std::string>());
  const Rational psb = parse_rational(doc.at("p_sb_gamma").get<std::string>());
  const Rational eps(1, 100);
  const Rational formula = 1 - 2 * eps * eps - 32 * eps * eps * eps;
  const Rational bound = 1 - 3 * eps * eps;
  const bool ok = pb == formula && pb == Rational(124971, 125000) && psb <= bound && psb < pb;
  return {ok, fmt::format("P(B;T)={} ({}), P(S(B);T)={} ({}), bound 1-3e^2={}", to_string(pb),
                          cli::format_double(to_double(pb)), to_string(psb), cli::format_double(to_double(psb)),
                          to_string(bound))};
}

// 2 ------------------------------------------------------------------------
Check chain(const Options& o) {
  int failures = 0;
  std::uint64_t first_failure = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (std::uint64_t i = 0; i < 500; ++i) {
    const auto inst = random_instance(derive_seed(o.seed, 2, i));
    const auto r = comparison_chain(inst.tree, inst.law, inst.target);
    min_margin = std::min({min_margin, r.p_b_sgamma - r.p_b_gamma, r.p_sb_sgamma - r.p_b_sgamma,
                           r.cap_bound - r.p_sb_sgamma});
    if (!r.chain_holds) {
      if (failures == 0) first_failure = i;
      ++failures;
    }
  }
  return {failures == 0, fmt::format("500 instances, {} violations{}, smallest step {:.3g}", failures,
                                     failures ? fmt::format(" (first: instance {})", first_failure) : "",
                                     min_margin)};
}

// 3 ------------------------------------------------------------------------
Check feller(const Options&) {
  const auto r = walk1d::dp_hitting_tail(rademacher(), 0.0, 4096);
  const double value = 64.0 * r.prob.mid();
  const double target = std::sqrt(2.0 / std::numbers::pi);
  const double rel = std::abs(value - target) / target;
  return {rel <= 0.03, fmt::format("sqrt(n) P(T_0>n) = {:.6f} at n=4096, sqrt(2/pi) = {:.6f}, rel. diff {:.4f}",
                                   value, target, rel)};
}

// 4, 5 -----------------------------------------------------------------------
Check boundary_ratio(const std::string& boundary, std::int64_t n1, std::int64_t n2, bool convergent) {
  const auto rep = walk1d::asymptotics_report(rademacher(), BoundaryFn::parse(boundary), {n1, n2});
  const double s1 = rep.rows[0].sqrt_n_above();
  const double s2 = rep.rows[1].sqrt_n_above();
  const std::string d = fmt::format("f={} n_f={}: sqrt(n)P = {:.6g} at 2^{}, {:.6g} at 2^{} (ratio {:.4f})", boundary,
                                    rep.n_f, s1, std::log2(n1), s2, std::log2(n2), s2 / s1);
  return {convergent ? s2 >= 0.5 * s1 : s1 >= 2.0 * s2, d};
}

// 6 ------------------------------------------------------------------------
Check conditional_moment(const Options&) {
  std::vector<double> v;
  for (std::int64_t n : {256, 1024, 4096}) {
    v.push_back(walk1d::dp_conditional_moment(rademacher(), n, 2) / static_cast<double>(n));
  }
  const bool ok = v[2] >= 1.5 && v[2] <= 2.05 && v[0] < v[1] && v[1] < v[2];
  return {ok, fmt::format("E(S_n^2|T_0>n)/n = {:.5f}, {:.5f}, {:.5f} at n = 2^8, 2^10, 2^12", v[0], v[1], v[2])};
}

// 7 ------------------------------------------------------------------------
Check sandwich(const Options&) {
  bool ok = true;
  std::string d;
  for (double h : {1.0, 2.0, 4.0}) {
    const auto r = walk1d::dp_hitting_tail(rademacher(), h, 4096);
    const double v = 64.0 * r.prob.mid() / h;
    ok = ok && v >= 0.55 && v <= 1.1;
    d += fmt::format("{}h={}: {:.4f}", d.empty() ? "" : ", ", h, v);
  }
  return {ok, "sqrt(n) P(T_h>n)/h at n=4096, " + d + " (band [0.55, 1.1])"};
}

// 8 ------------------------------------------------------------------------
IncrementLaw pick_law(std::uint64_t k) {
  switch (k % 4) {
    case 0: return IncrementLaw::rademacher();
    case 1: return IncrementLaw::parse("gauss:0:1");
    case 2: return IncrementLaw::parse("stable:1.5");
    default: return IncrementLaw::parse("logexp");
  }
}

ExplicitTree random_tree(StreamRng& rng, std::uint64_t seed, int max_depth) {
  const int depth = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_depth));
  std::vector<double> w(3);
  for (auto& x : w) x = 0.05 + rng.uniform();
  return build_galton_watson(OffspringLaw{w}, depth, seed);
}

Check bottleneck(const Options& o) {
  int violations = 0;
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    StreamRng rng(derive_seed(o.seed, 8, i));
    const ExplicitTree tree = random_tree(rng, rng(), 6);
    const auto env = sample_environment(tree, pick_law(rng()), rng());
    const double c = effective_conductance(tree, env);
    const double b = bottleneck_bound(tree, env).value;
    worst = std::max(worst, c / b);
    if (c > b * (1.0 + 1e-12)) ++violations;
  }
  return {violations == 0, fmt::format("1000 instances, {} violations, max C_eff/bound = {:.6f}", violations, worst)};
}

// 9 ------------------------------------------------------------------------
Check capacity_consistency(const Options& o) {
  double worst_energy = 0.0;
  double worst_rp = 0.0;
  int symmetric = 0;
  int unconverged = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    StreamRng rng(derive_seed(o.seed, 9, i));
    const int depth = 1 + static_cast<int>(rng() % 6);
    const Gauge gauge = (i % 2 == 0) ? Gauge(PowerGauge{0.2 + 1.3 * rng.uniform()})
                                     : Gauge(ExpGauge{0.1 + 0.9 * rng.uniform()});
    std::optional<GrowthProfile> profile;
    ExplicitTree tree;
    if (i % 3 == 0) {
      std::vector<Rational> g(static_cast<std::size_t>(depth));
      for (auto& x : g) x = 1 + static_cast<int>(rng() % 3);
      profile = GrowthProfile(g);
      tree = build_symmetric(*profile, depth);
    } else {
      tree = random_tree(rng, rng(), 6);
    }
    const double cn = capacity_network(tree, gauge);
    const auto ce = capacity_energy(tree, gauge);
    if (!ce.converged) ++unconverged;
    worst_energy = std::max(worst_energy, std::abs(cn - ce.capacity) / cn);
    if (profile) {
      ++symmetric;
      const auto rp = rp_symmetric(*profile, gauge);
      worst_rp = std::max(worst_rp, std::abs(rp.bound - 2.0 * cn) / (2.0 * cn));
    }
  }
  const bool ok = worst_energy <= 1e-6 && worst_rp <= 1e-12;
  return {ok, fmt::format("100 trees: max rel |network - energy| = {:.3g} ({} not converged); {} symmetric: max rel "
                          "|2/R_p - 2 Cap| = {:.3g}",
                          worst_energy, unconverged, symmetric, worst_rp)};
}

// 10 -----------------------------------------------------------------------
Check moment_methods(const Options&) {
  const ExplicitTree tree = build_symmetric(GrowthProfile::constant(2, 8), 8);
  bool ok = true;
  std::string d;
  const std::vector<std::pair<std::string, TargetSet>> cases = {
      {"Bernoulli 3/4", Box{std::vector<Rational>(8, Rational(3, 4))}},
      {"Rademacher B0", TargetSet::nonnegative_sums()},
  };
  for (const auto& [name, target] : cases) {
    const double s = survival_exact(tree, rademacher(), target).survival;
    const auto mb = moment_bounds(tree, marginal_gauge(rademacher(), target, 8),
                                  certified_pair_gauge(rademacher(), target, 8));
    ok = ok && mb.second_moment_lower <= s * (1 + 1e-12) && s <= mb.first_moment_upper * (1 + 1e-12);
    d += fmt::format("{}{}: {:.6f} <= {:.6f} <= {:.6f}", d.empty() ? "" : "; ", name, mb.second_moment_lower, s,
                     mb.first_moment_upper);
  }
  return {ok, d};
}

// 11 -----------------------------------------------------------------------
Check dichotomy(const Options& o) {
  const std::vector<int> depths = {16, 64, 256};
  const auto quad = conductance_scaling_mc(GrowthProfile::power_of_two_envelope(2.0, 256), rademacher(), depths, 200,
                                           derive_seed(o.seed, 11, 0), o.threads);
  const auto path = conductance_scaling_mc(GrowthProfile::constant(1, 256), rademacher(), depths, 200,
                                           derive_seed(o.seed, 11, 1), o.threads);
  const bool ok = quad.ratio >= 0.25 && path.ratio <= 0.05;
  return {ok, fmt::format("|T_n|~n^2: median C_eff {:.4g} -> {:.4g}, ratio {:.4f} ({}); path: {:.4g} -> {:.4g}, ratio "
                          "{:.3g} ({})",
                          quad.rows.front().conductance.median, quad.rows.back().conductance.median, quad.ratio,
                          quad.verdict, path.rows.front().conductance.median, path.rows.back().conductance.median,
                          path.ratio, path.verdict)};
}

// 12 -----------------------------------------------------------------------
Check reinforced(const Options& o) {
  std::uint64_t sequences = 0;
  int mismatches = 0;
  for (int d = 1; d <= 5; ++d) {
    for (int len = 1; len <= 6; ++len) {
      std::vector<int> seq(static_cast<std::size_t>(len), 1);
      for (;;) {
        ++sequences;
        if (polya_sequence_prob(d, seq) != dirichlet_exit_prob(d, seq)) ++mismatches;
        int t = len - 1;
        while (t >= 0 && seq[t] == d) seq[t--] = 1;
        if (t < 0) break;
        ++seq[t];
      }
    }
  }
  const auto r = equivalence_test(2, 3, 100000, derive_seed(o.seed, 12), o.threads);
  const bool same_ok = std::abs(r.reinforced_same - 2.0 / 3.0) <= 3 * r.reinforced_same_se &&
                       std::abs(r.rwre_same - 2.0 / 3.0) <= 3 * r.rwre_same_se;
  const bool ok = mismatches == 0 && r.passes() && same_ok;
  return {ok, fmt::format("{} sequences, {} urn/Dirichlet mismatches; chi-square p: reinforced {:.4f}, RWRE {:.4f}; "
                          "P(first two equal): {:.4f}+-{:.4f}, {:.4f}+-{:.4f} vs 2/3",
                          sequences, mismatches, r.reinforced_p, r.rwre_p, r.reinforced_same, r.reinforced_same_se,
                          r.rwre_same, r.rwre_same_se)};
}

// 13 -----------------------------------------------------------------------
Check psi_consistency(const Options& o) {
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto inst = random_instance(derive_seed(o.seed, 13, i), 4, 3, true);
    const double a = survival_exact(inst.tree, inst.law, inst.target).survival;
    const double b = psi_symmetric(symmetrize_tree(inst.tree), inst.law, inst.target).survival;
    worst = std::max(worst, std::abs(a - b));
  }
  PercolationOptions exact;
  exact.arithmetic = Arithmetic::Exact;
  const auto r = psi_symmetric(GrowthProfile::constant(2, 2), rademacher(), TargetSet::nonnegative_sums(), exact);
  const bool three_quarters = r.survival_exact && *r.survival_exact == Rational(3, 4);
  return {worst <= 1e-12 && three_quarters,
          fmt::format("200 symmetric instances, max |Psi - DP| = {:.3g}; binary depth 2 B0 = {}", worst,
                      r.survival_exact ? to_string(*r.survival_exact) : "n/a")};
}

// 14 -----------------------------------------------------------------------
Check stable_decay(const Options& o) {
  const auto r = stable_ray_decay(1.5, 1.0, {10, 20, 40, 80}, 1000000, derive_seed(o.seed, 14), o.threads);
  std::string ps;
  for (const auto& p : r.points) ps += fmt::format("{}{:.3g}", ps.empty() ? "" : ", ", p.estimate);
  return {r.slope >= -2.0 && r.slope <= -1.0,
          fmt::format("P at n=10,20,40,80: {}; slope {:.4f} +- {:.4f}", ps, r.slope, r.slope_se)};
}

// 15 -----------------------------------------------------------------------
Check determinism(const Options& o) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / fmt::format("critwalk-accept-{:016x}", derive_seed(o.seed, 15));
  fs::create_directories(dir);
  const fs::path tree_file = dir / "tree.json";
  cli::write_file(tree_file.string(),
                  cli::dump_json(cli::tree_to_json(build_galton_watson(OffspringLaw{{1.0, 2.0, 1.0}}, 4, 15))));
  const std::string tree = tree_file.string();
  const std::string seed = std::to_string(derive_seed(o.seed, 15, 1));
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"walk1d-dp", {"walk1d", "--boundary", "pow:1:0.5", "--grid", "64,256"}},
      {"walk1d-mc", {"walk1d", "--boundary", "pow:1:0.5", "--grid", "16,64", "--method", "mc", "--episodes", "20000"}},
      {"capacity", {"capacity", "--tree", tree, "--gauge", "pow:0.5"}},
      {"network", {"network", "--tree", tree, "--environments", "50"}},
      {"percolate", {"percolate", "--tree", tree, "--target", "b0", "--tp2"}},
      {"thm42-check", {"thm42-check", "--tree", tree, "--target", "b0"}},
      {"counterexample", {"counterexample", "--eps", "0.01"}},
      {"rwre", {"rwre", "--profile", "envelope:2:32", "--depths", "8,16,32", "--environments", "40"}},
      {"rwre-walk", {"rwre", "--mode", "walk", "--profile", "const:2:16", "--depths", "4,8", "--episodes", "2000"}},
      {"reinforced", {"reinforced", "--degree", "2", "--length", "3", "--episodes", "20000"}},
      {"reinforced-walk", {"reinforced", "--mode", "walk", "--tree", tree, "--steps", "200", "--episodes", "500"}},
      {"stable", {"stable", "--episodes", "50000", "--format", "json"}},
      {"accept", {"accept", "--only", "1,3,13"}},
  };
  std::vector<std::string> problems;
  for (const auto& [name, base] : runs) {
    std::vector<std::string> outputs;
    for (const std::string threads : {"1", "3", "0"}) {
      const std::string path = (dir / fmt::format("{}-t{}.out", name, threads)).string();
      auto args = base;
      args.insert(args.end(), {"--seed", seed, "--threads", threads, "--out", path});
      std::ostringstream out;
      std::ostringstream err;
      const int code = cli::run(args, out, err);
      if (code != 0) {
        problems.push_back(fmt::format("{} exited {}", name, code));
        break;
      }
      outputs.push_back(cli::read_file(path));
      const auto manifest = cli::Json::parse(cli::read_file(path + ".manifest.json"));
      const std::string digest = manifest.at("config_digest").get<std::string>();
      if (cli::config_digest(manifest.at("config")) != digest || outputs.back().find(digest) == std::string::npos) {
        problems.push_back(name + " digest mismatch");
      }
    }
    for (std::size_t i = 1; i < outputs.size(); ++i) {
      if (outputs[i] != outputs[0]) problems.push_back(name + " differs across thread counts");
    }
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  std::string d = fmt::format("{} subcommand runs x threads {{1,3,all}}", runs.size());
  for (const auto& p : problems) d += "; " + p;
  if (problems.empty()) d += ", byte-identical, digests verified";
  return {problems.empty(), d};
}

struct Spec {
  const char* title;
  double limit_seconds;
  Check (*fn)(const Options&);
};

Check criterion4(const Options&) { return boundary_ratio("pow:1:0.25", 1 << 10, 1 << 17, true); }
Check criterion5(const Options&) { return boundary_ratio("pow:1:0.5", 1 << 10, 1 << 16, false); }

const Spec kSpecs[kCriterionCount] = {
    {"counterexample exactness", 1, counterexample_exactness},
    {"symmetrization chain", 60, chain},
    {"Feller asymptotics", 10, feller},
    {"convergent boundary", 300, criterion4},
    {"divergent boundary", 300, criterion5},
    {"conditional second moment", 60, conditional_moment},
    {"hitting-tail sandwich", 60, sandwich},
    {"bottleneck bound", 60, bottleneck},
    {"capacity consistency", 120, capacity_consistency},
    {"moment-method bounds", 60, moment_methods},
    {"transience dichotomy", 600, dichotomy},
    {"reinforced walk equivalence", 300, reinforced},
    {"Psi consistency", 60, psi_consistency},
    {"stable decay slope", 600, stable_decay},
    {"determinism", 300, determinism},
};

}  // namespace

std::string title(int id) {
  return kSpecs[id - 1].title;
}

std::vector<CriterionResult> run(const Options& opts) {
  std::vector<int> ids = opts.only;
  if (ids.empty()) {
    for (int i = 1; i <= kCriterionCount; ++i) ids.push_back(i);
  }
  std::vector<CriterionResult> results;
  for (int id : ids) {
    if (id < 1 || id > kCriterionCount) throw std::invalid_argument(fmt::format("no criterion {}", id));
    const Spec& spec = kSpecs[id - 1];
    CriterionResult r;
    r.id = id;
    r.title = spec.title;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Check c = spec.fn(opts);
      r.passed = c.passed;
      r.detail = c.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (r.seconds > spec.limit_seconds) {
      r.passed = false;
      r.detail += fmt::format("; over the {} s budget", spec.limit_seconds);
    }
    if (opts.on_result) opts.on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_line(const CriterionResult& r, bool with_time) {
  std::string line = fmt::format("[{}] {:>2} {}: {}", r.passed ? "PASS" : "FAIL", r.id, r.title, r.detail);
  if (with_time) line += fmt::format(" ({:.2f} s)", r.seconds);
  return line;
}

}  // namespace critwalk::acceptance
