#include "cli.hpp"

#include "acceptance.hpp"
#include "emit.hpp"

#include "critwalk/gauge.hpp"
#include "critwalk/network.hpp"
#include "critwalk/parallel.hpp"
#include "critwalk/percolation.hpp"
#include "critwalk/rng.hpp"
#include "critwalk/rwre_sim.hpp"
#include "critwalk/walk1d.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>

namespace critwalk::cli {
namespace {

/// Bad user input; the message names the flag.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class F>
auto checked(const std::string& flag, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("--{}: {}", flag, e.what()));
  }
}

struct Common {
  unsigned threads = 1;
  std::string seed;
  std::string out = "-";
  std::string format;
  std::string config;
};

struct Output {
  std::optional<Table> table;
  Json doc = Json::object();
};

struct Command {
  CLI::App* app = nullptr;
  std::string default_format;
  /// Parses option values into domain objects and returns the resolved
  /// parameters; throws ConfigError.
  std::function<Json(std::uint64_t seed)> resolve;
  std::function<Output(std::uint64_t seed, unsigned threads)> compute;
  /// Exit code override (accept returns 1 on a failed criterion).
  std::function<int(const Output&)> exit_code;
};

std::uint64_t resolve_seed(const std::string& text) {
  std::string s = text;
  if (s.empty()) {
    if (const char* env = std::getenv(kSeedEnv); env != nullptr && *env != '\0') {
      s = env;
      return checked("seed", [&] {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used, 0);
        if (used != s.size()) throw std::invalid_argument(fmt::format("{}='{}' is not an integer", kSeedEnv, s));
        return static_cast<std::uint64_t>(v);
      });
    }
    return kDefaultSeed;
  }
  return checked("seed", [&] {
    std::size_t used = 0;
    if (!s.empty() && s[0] == '-') throw std::invalid_argument("'" + s + "' is negative");
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size()) throw std::invalid_argument("'" + s + "' is not an integer");
    return static_cast<std::uint64_t>(v);
  });
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("--threads", c.threads, "Worker threads (0 = all cores); results do not depend on it");
  app->add_option("--seed", c.seed, fmt::format("Master seed (default ${} or {})", kSeedEnv, kDefaultSeed));
  app->add_option("--out", c.out, "Output file ('-' = stdout); a manifest is written next to it");
  app->add_option("--format", c.format, "csv or json");
  app->add_option("--config", c.config, "JSON file whose keys are flag names");
}

// Tree sources shared by several subcommands.
struct TreeSource {
  std::string tree_file;
  std::string profile;
  std::string galton_watson;
  int depth = 0;
  int max_degree = kDefaultMaxDegree;

  void add(CLI::App* app) {
    app->add_option("--tree", tree_file, "Tree JSON file {\"children\": [[...]], \"depth\": N}");
    app->add_option("--profile", profile, "Symmetric profile: const:K:N, list:F1,F2,..., envelope:G:N");
    app->add_option("--galton-watson", galton_watson, "Offspring weights W1,W2,... for 1,2,... children");
    app->add_option("--depth", depth, "Depth for --galton-watson; truncation depth otherwise");
    app->add_option("--max-degree", max_degree, "Largest allowed child count");
  }

  struct Resolved {
    std::optional<ExplicitTree> tree;
    std::optional<GrowthProfile> profile;
    Json params;
  };

  /// Explicit trees are built here; a profile is kept as is when `allow_virtual`.
  Resolved resolve(std::uint64_t seed, bool allow_virtual = false) const {
    const int given = !tree_file.empty() + !profile.empty() + !galton_watson.empty();
    if (given != 1) throw ConfigError("--tree: give exactly one of --tree, --profile, --galton-watson");
    Resolved r;
    r.params = Json::object();
    if (!tree_file.empty()) {
      r.tree = checked("tree", [&] {
        ExplicitTree t = read_tree_file(tree_file, max_degree);
        return depth > 0 ? t.truncate(depth) : t;
      });
      r.params["tree"] = tree_to_json(*r.tree);
    } else if (!profile.empty()) {
      GrowthProfile p = checked("profile", [&] {
        GrowthProfile g = parse_profile(profile);
        return depth > 0 ? g.prefix(depth) : g;
      });
      r.params["profile"] = profile;
      if (allow_virtual && !p.is_integral()) {
        r.profile = std::move(p);
      } else {
        r.tree = checked("profile", [&] { return build_symmetric(p, p.depth(), max_degree); });
        r.profile = std::move(p);
      }
    } else {
      if (depth < 1) throw ConfigError("--depth: --galton-watson needs --depth >= 1");
      const auto w = checked("galton-watson", [&] { return parse_double_list(galton_watson, "weights"); });
      r.tree = checked("galton-watson", [&] { return build_galton_watson(OffspringLaw{w}, depth, seed, max_degree); });
      r.params["galton_watson"] = w;
    }
    if (depth > 0) r.params["depth"] = depth;
    r.params["max_degree"] = max_degree;
    return r;
  }
};

bool is_symmetric(const ExplicitTree& t) {
  for (const auto& level : t.level_counts()) {
    if (std::adjacent_find(level.begin(), level.end(), std::not_equal_to<>()) != level.end()) return false;
  }
  return true;
}

IncrementLaw resolve_law(const std::string& spec, int quantize) {
  IncrementLaw law = checked("law", [&] { return IncrementLaw::parse(spec); });
  if (quantize > 0) law = checked("quantize", [&] { return law.quantize(quantize); });
  return law;
}

Json optional_rational(const std::optional<Rational>& r) {
  return r ? Json(to_string(*r)) : Json(nullptr);
}

Json verdict_json(const SeriesReport& s) {
  Json j = Json::object();
  j["capacity_series"] = to_string(s.capacity_series);
  j["regularity"] = to_string(s.regularity);
  j["prediction"] = s.prediction;
  j["capacity_partial_sums"] = s.capacity_partial;
  j["regularity_partial_sums"] = s.regularity_partial;
  return j;
}

// ---------------------------------------------------------------- walk1d

Command walk1d_command(CLI::App& root) {
  struct Opts {
    std::string law = "rademacher";
    int quantize = 0;
    std::string boundary = "zero";
    std::string event = "above";
    std::int64_t start = -1;
    double h = 0.0;
    std::string grid = "256,1024,4096";
    double cap_multiplier = walk1d::kDefaultCapMultiplier;
    std::string method = "auto";
    std::uint64_t episodes = 100000;
  };
  auto o = std::make_shared<Opts>();
  struct State {
    IncrementLaw law = IncrementLaw::rademacher();
    walk1d::BoundaryFn f;
    std::vector<std::int64_t> grid;
    bool use_dp = true;
  };
  auto st = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("walk1d", "Boundary-crossing probabilities of a one-dimensional walk");
  c.app->add_option("--law", o->law, "Increment law: rademacher, lattice:V:P,..., gauss:M:S, stable:A, uniform:A:B, logexp");
  c.app->add_option("--quantize", o->quantize, "Replace a continuous law by a lattice law with this many atoms");
  c.app->add_option("--boundary", o->boundary, "zero, pow:A:B, powlog:A:B:C, tab:V1,V2,...");
  c.app->add_option("--event", o->event, "above: S_k >= f(k) on [start, n]; below: S_k >= -f(k); tail: T_h > n");
  c.app->add_option("--start", o->start, "First constrained step for 'above' (-1 = scan for n_f)");
  c.app->add_option("--level", o->h, "Level h for 'tail'");
  c.app->add_option("--grid", o->grid, "Horizons n, comma separated");
  c.app->add_option("--cap-multiplier", o->cap_multiplier, "DP window half-width in units of sd*sqrt(n)");
  c.app->add_option("--method", o->method, "auto, dp or mc");
  c.app->add_option("--episodes", o->episodes, "Monte Carlo episodes");
  c.default_format = "csv";
  c.resolve = [o, st](std::uint64_t) {
    st->law = resolve_law(o->law, o->quantize);
    st->f = checked("boundary", [&] { return walk1d::BoundaryFn::parse(o->boundary); });
    st->grid = checked("grid", [&] { return parse_int_list(o->grid, "grid"); });
    for (auto n : st->grid) {
      if (n < 1) throw ConfigError("--grid: horizons must be >= 1");
    }
    std::sort(st->grid.begin(), st->grid.end());
    st->grid.erase(std::unique(st->grid.begin(), st->grid.end()), st->grid.end());
    checked("boundary", [&] { st->f.validate(st->grid.back()); return 0; });
    if (o->event != "above" && o->event != "below" && o->event != "tail") {
      throw ConfigError("--event: expected above, below or tail, got '" + o->event + "'");
    }
    if (o->method == "auto") {
      st->use_dp = st->law.is_lattice();
    } else if (o->method == "dp" || o->method == "mc") {
      st->use_dp = o->method == "dp";
    } else {
      throw ConfigError("--method: expected auto, dp or mc, got '" + o->method + "'");
    }
    if (st->use_dp && !st->law.is_lattice()) {
      throw ConfigError("--law: the DP needs a lattice law; pass --quantize N or --method mc");
    }
    if (!st->use_dp && o->event != "above") throw ConfigError("--method: Monte Carlo supports --event above only");
    if (!(o->cap_multiplier > 0.0)) throw ConfigError("--cap-multiplier: must be positive");
    if (o->h < 0.0) throw ConfigError("--level: must be >= 0");
    Json p = Json::object();
    p["law"] = st->law.describe();
    p["boundary"] = st->f.describe();
    p["event"] = o->event;
    p["start"] = o->start;
    p["h"] = o->h;
    p["grid"] = st->grid;
    p["cap_multiplier"] = o->cap_multiplier;
    p["method"] = st->use_dp ? "dp" : "mc";
    if (!st->use_dp) p["episodes"] = o->episodes;
    return p;
  };
  c.compute = [o, st](std::uint64_t seed, unsigned threads) {
    Output out;
    Table t;
    t.columns = {"n", "p_lower", "p_upper", "sqrt_n_p", "stderr"};
    std::int64_t start = o->start;
    if (o->event == "above" && start < 0) {
      if (st->use_dp) {
        const auto scan = walk1d::find_n_f(st->law, st->f, 1024, o->cap_multiplier);
        start = scan.n_f;
        out.doc["n_f_found"] = scan.found;
      } else {
        start = 1;
      }
    }
    if (o->event == "above") out.doc["start"] = start;
    Json warnings = Json::array();
    if (st->use_dp) {
      for (auto n : st->grid) {
        walk1d::DpResult r;
        if (o->event == "above") {
          r = walk1d::dp_stay_above(st->law, st->f, start, n, o->cap_multiplier);
        } else if (o->event == "below") {
          r = walk1d::dp_stay_above_negative(st->law, st->f, n, o->cap_multiplier);
        } else {
          r = walk1d::dp_hitting_tail(st->law, o->h, n, o->cap_multiplier);
        }
        if (r.warning) warnings.push_back(fmt::format("n={}: {}", n, *r.warning));
        t.add({n, r.prob.lower, r.prob.upper, std::sqrt(static_cast<double>(n)) * r.prob.mid(), 0.0});
      }
    } else {
      const auto est = walk1d::mc_stay_above_grid(st->law, st->f, start, st->grid, o->episodes, seed, threads);
      for (std::size_t i = 0; i < st->grid.size(); ++i) {
        const double rt = std::sqrt(static_cast<double>(st->grid[i]));
        t.add({st->grid[i], est[i].estimate, est[i].estimate, rt * est[i].estimate, rt * est[i].stderr_});
      }
    }
    if (o->event != "tail") {
      const auto s = walk1d::summability_verdict(st->f, std::max<std::int64_t>(st->grid.back(), 1 << 20));
      out.doc["summability"] = to_string(s.verdict);
    }
    out.doc["warnings"] = warnings;
    out.table = std::move(t);
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- capacity

Command capacity_command(CLI::App& root) {
  struct Opts {
    TreeSource source;
    std::string gauge = "pow:0.5";
    std::string sizes;
    std::int64_t horizon = 1 << 20;
    double tolerance = kEnergyTolerance;
    int max_iterations = kEnergyMaxIterations;
  };
  auto o = std::make_shared<Opts>();
  struct State {
    TreeSource::Resolved src;
    Gauge gauge;
    std::optional<LevelSizes> sizes;
  };
  auto st = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("capacity", "Capacity, Hausdorff content and the series criteria of a tree");
  o->source.add(c.app);
  c.app->add_option("--gauge", o->gauge, "pow:A, exp:B, tab:V1,V2,... or tab:@file.csv");
  c.app->add_option("--sizes", o->sizes, "Level sizes for the series test: path, poly:G, ceilpow:G, envelope:G");
  c.app->add_option("--horizon", o->horizon, "Series horizon for --sizes");
  c.app->add_option("--tolerance", o->tolerance, "Relative duality-gap tolerance of the energy minimizer");
  c.app->add_option("--max-iterations", o->max_iterations, "Iteration cap of the energy minimizer");
  c.default_format = "json";
  c.resolve = [o, st](std::uint64_t seed) {
    st->src = o->source.resolve(seed);
    st->gauge = checked("gauge", [&] { return Gauge::parse(o->gauge); });
    checked("gauge", [&] { st->gauge.validate(st->src.tree->depth()); return 0; });
    if (!o->sizes.empty()) st->sizes = checked("sizes", [&] { return LevelSizes::parse(o->sizes); });
    if (o->horizon < 1) throw ConfigError("--horizon: must be >= 1");
    if (!(o->tolerance > 0.0)) throw ConfigError("--tolerance: must be positive");
    Json p = st->src.params;
    p["gauge"] = st->gauge.describe();
    if (st->sizes) {
      p["sizes"] = o->sizes;
      p["horizon"] = o->horizon;
    }
    p["tolerance"] = o->tolerance;
    p["max_iterations"] = o->max_iterations;
    return p;
  };
  c.compute = [o, st](std::uint64_t, unsigned) {
    Output out;
    const ExplicitTree& tree = *st->src.tree;
    out.doc["cap_network"] = capacity_network(tree, st->gauge);
    const auto e = capacity_energy(tree, st->gauge, o->tolerance, o->max_iterations);
    out.doc["cap_energy"] = e.capacity;
    out.doc["content_by_min_level"] = content_by_min_level(tree, st->gauge);
    const bool symmetric = is_symmetric(tree);
    out.doc["rp"] = symmetric ? Json(rp_symmetric(symmetrize_tree(tree), st->gauge).rp) : Json(nullptr);
    if (st->sizes) {
      out.doc["series_verdicts"] = verdict_json(criterion_series(*st->sizes, o->horizon));
    } else {
      const auto profile = symmetrize_tree(tree);
      out.doc["series_verdicts"] = verdict_json(criterion_series(LevelSizes::from_profile(profile), tree.depth()));
    }
    out.doc["energy_iterations"] = e.iterations;
    out.doc["energy_converged"] = e.converged;
    out.doc["vertices"] = tree.size();
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- network

Command network_command(CLI::App& root) {
  struct Opts {
    TreeSource source;
    std::string law = "rademacher";
    std::uint64_t environments = 10;
  };
  auto o = std::make_shared<Opts>();
  struct State {
    TreeSource::Resolved src;
    IncrementLaw law = IncrementLaw::rademacher();
  };
  auto st = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("network", "Effective conductance, escape probability and bottleneck bound");
  o->source.add(c.app);
  c.app->add_option("--law", o->law, "Increment law of the labels");
  c.app->add_option("--environments", o->environments, "Number of environments; environment m uses seed H(seed, m)");
  c.default_format = "csv";
  c.resolve = [o, st](std::uint64_t seed) {
    st->src = o->source.resolve(seed);
    st->law = resolve_law(o->law, 0);
    if (o->environments < 1) throw ConfigError("--environments: must be >= 1");
    Json p = st->src.params;
    p["law"] = st->law.describe();
    p["environments"] = o->environments;
    return p;
  };
  c.compute = [o, st](std::uint64_t seed, unsigned threads) {
    const ExplicitTree& tree = *st->src.tree;
    std::vector<std::array<double, 3>> vals(o->environments);
    parallel_for(o->environments, threads, [&](std::size_t m) {
      const auto env = sample_environment(tree, st->law, derive_seed(seed, m));
      vals[m] = {effective_conductance(tree, env), escape_probability(tree, env), bottleneck_bound(tree, env).value};
    });
    Output out;
    Table t;
    t.columns = {"seed", "C_eff", "escape_p", "bottleneck"};
    for (std::uint64_t m = 0; m < o->environments; ++m) t.add({derive_seed(seed, m), vals[m][0], vals[m][1], vals[m][2]});
    out.table = std::move(t);
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- percolation

struct PercolationOpts {
  TreeSource source;
  std::string law = "rademacher";
  int quantize = 0;
  std::string target = "b0";
  std::string arithmetic = "auto";

  void add(CLI::App* app) {
    source.add(app);
    app->add_option("--law", law, "Increment law of the labels");
    app->add_option("--quantize", quantize, "Lattice approximation with this many atoms");
    app->add_option("--target", target,
                    "b0, half:BOUNDARY@NF, box:Q1,Q2,..., band:L:U,..., union:[a,b]x[c,d];..., counterexample:EPS");
    app->add_option("--arithmetic", arithmetic, "auto, double or exact");
  }
};

struct PercolationState {
  TreeSource::Resolved src;
  IncrementLaw law = IncrementLaw::rademacher();
  std::optional<TargetSet> target;
  PercolationOptions popts;
};

Json resolve_percolation(const PercolationOpts& o, PercolationState& st, std::uint64_t seed, bool allow_virtual) {
  st.src = o.source.resolve(seed, allow_virtual);
  st.law = resolve_law(o.law, o.quantize);
  st.target = checked("target", [&] { return TargetSet::parse(o.target); });
  if (o.arithmetic == "auto") {
    st.popts.arithmetic = Arithmetic::Auto;
  } else if (o.arithmetic == "double") {
    st.popts.arithmetic = Arithmetic::Double;
  } else if (o.arithmetic == "exact") {
    st.popts.arithmetic = Arithmetic::Exact;
  } else {
    throw ConfigError("--arithmetic: expected auto, double or exact, got '" + o.arithmetic + "'");
  }
  Json p = st.src.params;
  p["law"] = st.law.describe();
  p["target"] = st.target->describe();
  p["arithmetic"] = o.arithmetic;
  return p;
}

Command percolate_command(CLI::App& root) {
  struct Opts {
    PercolationOpts perc;
    std::string method = "auto";
    bool tp2 = false;
    bool moments = false;
  };
  auto o = std::make_shared<Opts>();
  auto st = std::make_shared<PercolationState>();
  Command c;
  c.app = root.add_subcommand("percolate", "Survival probability of a target percolation");
  o->perc.add(c.app);
  c.app->add_option("--method", o->method, "auto, exact-dp or psi");
  c.app->add_flag("--tp2", o->tp2, "Also run the TP2 check on the target");
  c.app->add_flag("--moments", o->moments, "Also report the first/second moment bounds");
  c.default_format = "json";
  c.resolve = [o, st](std::uint64_t seed) {
    Json p = resolve_percolation(o->perc, *st, seed, true);
    if (o->method != "auto" && o->method != "exact-dp" && o->method != "psi") {
      throw ConfigError("--method: expected auto, exact-dp or psi, got '" + o->method + "'");
    }
    if (o->method == "exact-dp" && !st->src.tree) throw ConfigError("--method: exact-dp needs an integer profile or tree");
    if (o->method == "psi" && !st->src.profile && !is_symmetric(*st->src.tree)) {
      throw ConfigError("--method: psi needs a spherically symmetric tree");
    }
    if (o->moments && !st->src.tree) throw ConfigError("--moments: needs an explicit tree");
    p["method"] = o->method;
    p["tp2"] = o->tp2;
    p["moments"] = o->moments;
    return p;
  };
  c.compute = [o, st](std::uint64_t, unsigned) {
    const bool psi = o->method == "psi" || (o->method == "auto" && !st->src.tree);
    SurvivalReport r;
    int depth = 0;
    if (psi) {
      const GrowthProfile profile = st->src.profile ? *st->src.profile : symmetrize_tree(*st->src.tree);
      r = psi_symmetric(profile, st->law, *st->target, st->popts);
      depth = profile.depth();
    } else {
      r = survival_exact(*st->src.tree, st->law, *st->target, st->popts);
      depth = st->src.tree->depth();
    }
    Output out;
    out.doc["survival"] = r.survival;
    out.doc["survival_exact"] = optional_rational(r.survival_exact);
    out.doc["marginals"] = r.marginals;
    Json me = nullptr;
    if (r.marginals_exact) {
      me = Json::array();
      for (const auto& m : *r.marginals_exact) me.push_back(to_string(m));
    }
    out.doc["marginals_exact"] = me;
    out.doc["method"] = r.method;
    if (o->tp2) {
      const auto t = tp2_check(st->law, *st->target, depth);
      Json j = Json::object();
      j["holds"] = t.holds;
      j["matrices"] = t.matrices;
      if (t.witness) {
        const auto& w = *t.witness;
        j["witness"] = {{"level", w.level}, {"state", w.state}, {"x", w.x}, {"y", w.y}, {"i", w.i},
                        {"j", w.j},         {"lhs", w.lhs},     {"rhs", w.rhs}};
      }
      out.doc["tp2"] = j;
    }
    if (o->moments) {
      const auto p = marginal_gauge(st->law, *st->target, depth, st->popts);
      const auto g = certified_pair_gauge(st->law, *st->target, depth, st->popts);
      const auto mb = moment_bounds(*st->src.tree, p, g);
      out.doc["first_moment_upper"] = mb.first_moment_upper;
      out.doc["second_moment_lower"] = mb.second_moment_lower;
    }
    return out;
  };
  return c;
}

Json chain_json(const ChainRecord& r) {
  Json j = Json::object();
  j["p_b_gamma"] = r.p_b_gamma;
  j["p_b_sgamma"] = r.p_b_sgamma;
  j["p_sb_sgamma"] = r.p_sb_sgamma;
  j["cap_bound"] = r.cap_bound;
  j["chain_holds"] = r.chain_holds;
  j["swap_counterexample"] = r.swap_counterexample;
  j["p_sb_gamma"] = r.p_sb_gamma;
  j["p_b_gamma_exact"] = optional_rational(r.p_b_gamma_exact);
  j["p_sb_gamma_exact"] = optional_rational(r.p_sb_gamma_exact);
  j["virtual_profile"] = r.virtual_profile;
  return j;
}

Command chain_command(CLI::App& root) {
  auto o = std::make_shared<PercolationOpts>();
  auto st = std::make_shared<PercolationState>();
  Command c;
  c.app = root.add_subcommand("thm42-check", "Symmetrization chain P(B;T) <= P(B;S(T)) <= P(S(B);S(T)) <= 2/R_p");
  o->add(c.app);
  c.default_format = "json";
  c.resolve = [o, st](std::uint64_t seed) { return resolve_percolation(*o, *st, seed, false); };
  c.compute = [st](std::uint64_t, unsigned) {
    Output out;
    out.doc = chain_json(comparison_chain(*st->src.tree, st->law, *st->target, st->popts));
    return out;
  };
  return c;
}

Command counterexample_command(CLI::App& root) {
  auto eps_text = std::make_shared<std::string>("1/100");
  auto eps = std::make_shared<Rational>();
  Command c;
  c.app = root.add_subcommand("counterexample", "The four-leaf tree where symmetrizing the target lowers survival");
  c.app->add_option("--eps", *eps_text, "Rational epsilon in (0, 1/8]");
  c.default_format = "json";
  c.resolve = [eps_text, eps](std::uint64_t) {
    *eps = checked("eps", [&] { return parse_rational(*eps_text); });
    if (*eps <= 0 || *eps > Rational(1, 8)) throw ConfigError("--eps: must lie in (0, 1/8]");
    Json p = Json::object();
    p["eps"] = to_string(*eps);
    return p;
  };
  c.compute = [eps](std::uint64_t, unsigned) {
    const auto r = counterexample(*eps);
    Output out;
    out.doc["eps"] = to_string(r.eps);
    out.doc["p_b_gamma"] = to_string(r.p_b_gamma);
    out.doc["p_b_gamma_float"] = to_double(r.p_b_gamma);
    out.doc["p_sb_gamma"] = to_string(r.p_sb_gamma);
    out.doc["p_sb_gamma_float"] = to_double(r.p_sb_gamma);
    out.doc["formula_b"] = to_string(r.formula_b);
    out.doc["formula_sb"] = to_string(r.formula_sb);
    out.doc["bound_sb"] = to_string(r.claimed_bound_sb);
    out.doc["bound_sb_float"] = to_double(r.claimed_bound_sb);
    out.doc["matches_formula_b"] = r.p_b_gamma == r.formula_b;
    out.doc["matches_formula_sb"] = r.p_sb_gamma == r.formula_sb;
    out.doc["sb_below_b"] = r.p_sb_gamma < r.p_b_gamma;
    out.doc["chain"] = chain_json(r.chain);
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- rwre

Command rwre_command(CLI::App& root) {
  struct Opts {
    std::string profile = "envelope:2:256";
    std::string law = "rademacher";
    std::string depths = "16,64,256";
    std::uint64_t environments = 200;
    std::string mode = "scaling";
    std::uint64_t episodes = 10000;
    std::int64_t max_steps = 1000000;
  };
  auto o = std::make_shared<Opts>();
  struct State {
    GrowthProfile profile;
    IncrementLaw law = IncrementLaw::rademacher();
    std::vector<int> depths;
  };
  auto st = std::make_shared<State>();
  Command c;
  c.app = root.add_subcommand("rwre", "Random walk in random environment on a symmetric tree");
  c.app->add_option("--profile", o->profile, "const:K:N, list:F1,..., envelope:G:N");
  c.app->add_option("--law", o->law, "Increment law of the labels");
  c.app->add_option("--depths", o->depths, "Depth grid, comma separated");
  c.app->add_option("--environments", o->environments, "Environments per depth (scaling mode)");
  c.app->add_option("--mode", o->mode, "scaling (exact conductances) or walk (escape episodes)");
  c.app->add_option("--episodes", o->episodes, "Walk episodes per depth (walk mode)");
  c.app->add_option("--max-steps", o->max_steps, "Step budget per episode (walk mode)");
  c.default_format = "csv";
  c.resolve = [o, st](std::uint64_t) {
    st->profile = checked("profile", [&] { return parse_profile(o->profile); });
    if (!st->profile.is_integral()) throw ConfigError("--profile: growth numbers must be integers");
    st->law = resolve_law(o->law, 0);
    const auto d = checked("depths", [&] { return parse_int_list(o->depths, "depths"); });
    st->depths.clear();
    for (auto x : d) {
      if (x < 1 || x > st->profile.depth()) {
        throw ConfigError(fmt::format("--depths: {} outside [1, {}] (the profile depth)", x, st->profile.depth()));
      }
      st->depths.push_back(static_cast<int>(x));
    }
    std::sort(st->depths.begin(), st->depths.end());
    st->depths.erase(std::unique(st->depths.begin(), st->depths.end()), st->depths.end());
    if (o->mode != "scaling" && o->mode != "walk") throw ConfigError("--mode: expected scaling or walk");
    if (o->mode == "scaling" && o->environments < 1) throw ConfigError("--environments: must be >= 1");
    if (o->mode == "walk" && o->max_steps < 1) throw ConfigError("--max-steps: must be >= 1");
    Json p = Json::object();
    p["profile"] = o->profile;
    p["law"] = st->law.describe();
    p["depths"] = st->depths;
    p["mode"] = o->mode;
    if (o->mode == "scaling") {
      p["environments"] = o->environments;
    } else {
      p["episodes"] = o->episodes;
      p["max_steps"] = o->max_steps;
    }
    return p;
  };
  c.compute = [o, st](std::uint64_t seed, unsigned threads) {
    Output out;
    Table t;
    if (o->mode == "scaling") {
      const auto r = conductance_scaling_mc(st->profile, st->law, st->depths, o->environments, seed, threads);
      t.columns = {"depth", "c_eff_q1", "c_eff_median", "c_eff_q3", "escape_q1", "escape_median", "escape_q3"};
      for (const auto& row : r.rows) {
        t.add({static_cast<std::int64_t>(row.depth), row.conductance.q1, row.conductance.median, row.conductance.q3,
               row.escape.q1, row.escape.median, row.escape.q3});
      }
      out.doc["ratio"] = r.ratio;
      out.doc["verdict"] = r.verdict;
    } else {
      const LazyEnvironment env(st->profile, st->law, derive_seed(seed, 0));
      t.columns = {"depth", "episodes", "reached", "exhausted", "estimate", "stderr"};
      for (int d : st->depths) {
        const auto e = escape_mc(env, d, o->max_steps, o->episodes, derive_seed(seed, 1, d), threads);
        t.add({static_cast<std::int64_t>(d), e.episodes, e.reached, e.exhausted, e.estimate, e.stderr_});
      }
    }
    out.table = std::move(t);
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- reinforced

Command reinforced_command(CLI::App& root) {
  struct Opts {
    std::string mode = "equivalence";
    int degree = 2;
    int length = 3;
    std::uint64_t episodes = 100000;
    std::string tree;
    std::int64_t steps = 1000;
  };
  auto o = std::make_shared<Opts>();
  auto tree = std::make_shared<std::optional<ExplicitTree>>();
  Command c;
  c.app = root.add_subcommand("reinforced", "Unbiased edge-reinforced walk and its urn/RWRE equivalence");
  c.app->add_option("--mode", o->mode, "equivalence (star exit sequences) or walk (trajectories on --tree)");
  c.app->add_option("--degree", o->degree, "Star degree d");
  c.app->add_option("--length", o->length, "Exit-sequence length k (d^k <= 1024)");
  c.app->add_option("--episodes", o->episodes, "Episodes");
  c.app->add_option("--tree", o->tree, "Tree JSON file (walk mode)");
  c.app->add_option("--steps", o->steps, "Steps per episode (walk mode)");
  c.default_format = "json";
  c.resolve = [o, tree](std::uint64_t) {
    if (o->mode != "equivalence" && o->mode != "walk") throw ConfigError("--mode: expected equivalence or walk");
    if (o->episodes < 1) throw ConfigError("--episodes: must be >= 1");
    Json p = Json::object();
    p["mode"] = o->mode;
    p["episodes"] = o->episodes;
    if (o->mode == "equivalence") {
      if (o->degree < 2) throw ConfigError("--degree: must be >= 2");
      if (o->length < 1) throw ConfigError("--length: must be >= 1");
      if (std::pow(static_cast<double>(o->degree), o->length) > 1024.0) throw ConfigError("--length: d^k exceeds 1024");
      p["degree"] = o->degree;
      p["length"] = o->length;
    } else {
      if (o->tree.empty()) throw ConfigError("--tree: walk mode needs a tree file");
      if (o->steps < 1) throw ConfigError("--steps: must be >= 1");
      *tree = checked("tree", [&] { return read_tree_file(o->tree); });
      p["tree"] = tree_to_json(**tree);
      p["steps"] = o->steps;
    }
    return p;
  };
  c.compute = [o, tree](std::uint64_t seed, unsigned threads) {
    Output out;
    if (o->mode == "equivalence") {
      const auto r = equivalence_test(o->degree, o->length, o->episodes, seed, threads);
      Json table = Json::array();
      for (std::size_t i = 0; i < r.table.size(); ++i) {
        std::string seq;
        std::size_t x = i;
        for (int t = r.length - 1; t >= 0; --t) {
          seq.insert(0, (t ? "," : "") + std::to_string(x % r.degree + 1));
          x /= r.degree;
        }
        table.push_back({{"sequence", seq},
                         {"probability", to_string(r.table[i])},
                         {"reinforced", r.reinforced_counts[i]},
                         {"rwre", r.rwre_counts[i]}});
      }
      out.doc["degree"] = r.degree;
      out.doc["length"] = r.length;
      out.doc["episodes"] = r.episodes;
      out.doc["dof"] = r.dof;
      out.doc["reinforced_chi2"] = r.reinforced_chi2;
      out.doc["reinforced_p"] = r.reinforced_p;
      out.doc["rwre_chi2"] = r.rwre_chi2;
      out.doc["rwre_p"] = r.rwre_p;
      out.doc["passes"] = r.passes();
      if (r.length >= 2) {
        out.doc["same_first_two_expected"] = r.same_first_two_expected;
        out.doc["reinforced_same"] = r.reinforced_same;
        out.doc["reinforced_same_se"] = r.reinforced_same_se;
        out.doc["rwre_same"] = r.rwre_same;
        out.doc["rwre_same_se"] = r.rwre_same_se;
      }
      out.doc["table"] = table;
      return out;
    }
    const ExplicitTree& t = **tree;
    struct Stat {
      std::int64_t returns = 0;
      int max_depth = 0;
      VertexId first_exit = 0;
    };
    std::vector<Stat> stats(o->episodes);
    parallel_for(o->episodes, threads, [&](std::size_t e) {
      const auto tr = reinforced_episode(t, o->steps, derive_seed(seed, e));
      stats[e] = {tr.root_returns, tr.max_depth, tr.exits[0].front()};
    });
    double returns = 0.0;
    double depth = 0.0;
    std::vector<std::uint64_t> first(static_cast<std::size_t>(t.child_count(0)), 0);
    for (const auto& s : stats) {
      returns += static_cast<double>(s.returns);
      depth += s.max_depth;
      ++first[static_cast<std::size_t>(s.first_exit - t.first_child(0))];
    }
    const auto m = static_cast<double>(o->episodes);
    out.doc["mean_root_returns"] = returns / m;
    out.doc["mean_max_depth"] = depth / m;
    out.doc["first_exit_counts"] = first;
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- stable

Command stable_command(CLI::App& root) {
  struct Opts {
    double alpha = 1.5;
    double drift = 1.0;
    std::string grid = "10,20,40,80";
    std::uint64_t episodes = 1000000;
  };
  auto o = std::make_shared<Opts>();
  auto grid = std::make_shared<std::vector<std::int64_t>>();
  Command c;
  c.app = root.add_subcommand("stable", "Decay of P(S_k > c k for all k <= n) with stable increments");
  c.app->add_option("--alpha", o->alpha, "Stability index in (1, 2]");
  c.app->add_option("--drift", o->drift, "Slope c > 0");
  c.app->add_option("--grid", o->grid, "Horizons n, comma separated");
  c.app->add_option("--episodes", o->episodes, "Monte Carlo episodes");
  c.default_format = "csv";
  c.resolve = [o, grid](std::uint64_t) {
    if (!(o->alpha > 1.0 && o->alpha <= 2.0)) throw ConfigError("--alpha: must lie in (1, 2]");
    if (!(o->drift > 0.0)) throw ConfigError("--drift: must be positive");
    if (o->episodes < 1) throw ConfigError("--episodes: must be >= 1");
    *grid = checked("grid", [&] { return parse_int_list(o->grid, "grid"); });
    for (auto n : *grid) {
      if (n < 1) throw ConfigError("--grid: horizons must be >= 1");
    }
    std::sort(grid->begin(), grid->end());
    grid->erase(std::unique(grid->begin(), grid->end()), grid->end());
    Json p = Json::object();
    p["alpha"] = o->alpha;
    p["drift"] = o->drift;
    p["grid"] = *grid;
    p["episodes"] = o->episodes;
    return p;
  };
  c.compute = [o, grid](std::uint64_t seed, unsigned threads) {
    const auto r = stable_ray_decay(o->alpha, o->drift, *grid, o->episodes, seed, threads);
    Output out;
    Table t;
    t.columns = {"n", "survivors", "estimate", "stderr", "ci_low", "ci_high"};
    for (const auto& p : r.points) t.add({p.n, p.survivors, p.estimate, p.stderr_, p.ci_low, p.ci_high});
    out.table = std::move(t);
    out.doc["slope"] = r.slope;
    out.doc["slope_se"] = r.slope_se;
    out.doc["fitted_points"] = r.fitted_points;
    return out;
  };
  return c;
}

// ---------------------------------------------------------------- accept

Command accept_command(CLI::App& root, std::ostream& err) {
  struct Opts {
    std::string suite = "primary";
    std::string only;
  };
  auto o = std::make_shared<Opts>();
  auto ids = std::make_shared<std::vector<int>>();
  Command c;
  c.app = root.add_subcommand("accept", "Run the acceptance criteria");
  c.app->add_option("--suite", o->suite, "primary");
  c.app->add_option("--only", o->only, "Criterion ids, comma separated");
  c.default_format = "csv";
  c.resolve = [o, ids](std::uint64_t) {
    if (o->suite != "primary") throw ConfigError("--suite: only 'primary' exists");
    ids->clear();
    if (!o->only.empty()) {
      for (auto x : checked("only", [&] { return parse_int_list(o->only, "only"); })) {
        if (x < 1 || x > acceptance::kCriterionCount) {
          throw ConfigError(fmt::format("--only: no criterion {}", x));
        }
        ids->push_back(static_cast<int>(x));
      }
      std::sort(ids->begin(), ids->end());
      ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
    }
    Json p = Json::object();
    p["suite"] = o->suite;
    p["only"] = *ids;
    return p;
  };
  c.compute = [ids, &err](std::uint64_t seed, unsigned threads) {
    acceptance::Options opts;
    opts.only = *ids;
    opts.seed = seed;
    opts.threads = threads;
    opts.on_result = [&err](const acceptance::CriterionResult& r) { err << acceptance::format_line(r) << '\n'; };
    const auto results = acceptance::run(opts);
    Output out;
    Table t;
    t.columns = {"id", "title", "passed", "detail"};
    bool all = true;
    for (const auto& r : results) {
      t.add({static_cast<std::int64_t>(r.id), r.title, std::string(r.passed ? "true" : "false"), r.detail});
      all = all && r.passed;
    }
    out.table = std::move(t);
    out.doc["all_passed"] = all;
    return out;
  };
  c.exit_code = [](const Output& o) { return o.doc.value("all_passed", false) ? kOk : kComputeError; };
  return c;
}

// ---------------------------------------------------------------- driver

void flatten(const Json& j, const std::string& prefix, Table& t) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) flatten(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), t);
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "." + std::to_string(i), t);
  } else if (j.is_number_float()) {
    t.add({prefix, format_double(j.get<double>())});
  } else if (j.is_string()) {
    t.add({prefix, j.get<std::string>()});
  } else {
    t.add({prefix, j.dump()});
  }
}

std::string render(const Output& o, const std::string& format, const std::string& command, const Json& config,
                   const std::string& digest) {
  if (format == "json") {
    Json doc = Json::object();
    doc["command"] = command;
    doc["config_digest"] = digest;
    doc["config"] = config;
    if (o.table) {
      Json results = Json::object();
      results["rows"] = o.table->to_json();
      for (auto it = o.doc.begin(); it != o.doc.end(); ++it) results[it.key()] = it.value();
      doc["results"] = results;
    } else {
      doc["results"] = o.doc;
    }
    return dump_json(doc) + "\n";
  }
  std::string s;
  if (o.table) {
    s = o.table->to_csv();
    for (auto it = o.doc.begin(); it != o.doc.end(); ++it) {
      const auto& v = it.value();
      if (v.is_array() && v.empty()) continue;
      s += "# " + it.key() + "=" + (v.is_number_float() ? format_double(v.get<double>()) : v.is_string() ? v.get<std::string>() : dump_json(v, 0)) + "\n";
    }
  } else {
    Table t;
    t.columns = {"key", "value"};
    flatten(o.doc, "", t);
    s = t.to_csv();
  }
  return s + "# config_digest=" + digest + "\n";
}

/// Turns a strict JSON config into flag arguments for `app`.
std::vector<std::string> config_args(const std::string& path, CLI::App* app) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("--config: {}: {}", path, e.what()));
  }
  if (!j.is_object()) throw ConfigError("--config: " + path + " must hold a JSON object");
  std::vector<std::string> args;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (key == "config" || key == "help" || opt == nullptr) {
      throw ConfigError(fmt::format("--config: unknown key '{}' in {}", key, path));
    }
    const Json& v = it.value();
    auto scalar = [&](const Json& x) -> std::string {
      if (x.is_string()) return x.get<std::string>();
      if (x.is_number_integer() || x.is_number_unsigned()) return x.dump();
      if (x.is_number_float()) return format_double(x.get<double>());
      throw ConfigError(fmt::format("--config: key '{}' has an unsupported value {}", key, x.dump()));
    };
    if (opt->get_type_size() == 0) {
      if (!v.is_boolean()) throw ConfigError(fmt::format("--config: key '{}' must be true or false", key));
      if (v.get<bool>()) args.push_back("--" + key);
    } else if (v.is_array()) {
      std::string joined;
      for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? "," : "") + scalar(v[i]);
      args.push_back("--" + key);
      args.push_back(joined);
    } else {
      args.push_back("--" + key);
      args.push_back(scalar(v));
    }
  }
  return args;
}

std::optional<std::string> find_config_flag(const std::vector<std::string>& args) {
  std::optional<std::string> path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"critwalk: critical random walks, capacities and percolation on trees", "critwalk"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Common common;
  std::map<std::string, Command> commands;
  for (auto&& c : {walk1d_command(app), capacity_command(app), network_command(app), percolate_command(app),
                   chain_command(app), counterexample_command(app), rwre_command(app), reinforced_command(app),
                   stable_command(app), accept_command(app, err)}) {
    add_common(c.app, common);
    commands.emplace(c.app->get_name(), c);
  }

  std::vector<std::string> full = args;
  try {
    if (!args.empty() && commands.count(args[0]) != 0) {
      if (const auto cfg = find_config_flag(args)) {
        auto extra = config_args(*cfg, commands.at(args[0]).app);
        full.insert(full.begin() + 1, extra.begin(), extra.end());
      }
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  std::vector<std::string> reversed(full.rbegin(), full.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  Command& cmd = commands.at(sub->get_name());
  Json config;
  std::uint64_t seed = 0;
  std::string format;
  try {
    seed = resolve_seed(common.seed);
    format = common.format.empty() ? cmd.default_format : common.format;
    if (format != "csv" && format != "json") throw ConfigError("--format: expected csv or json, got '" + format + "'");
    Json params = cmd.resolve(seed);
    config = Json::object();
    config["command"] = sub->get_name();
    config["seed"] = seed;
    config["format"] = format;
    config["params"] = params;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string digest = config_digest(config);

  const auto t0 = std::chrono::steady_clock::now();
  Output result;
  try {
    result = cmd.compute(seed, common.threads);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kComputeError;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::string text = render(result, format, sub->get_name(), config, digest);
  try {
    if (common.out.empty() || common.out == "-") {
      out << text;
    } else {
      write_file(common.out, text);
      Json manifest = Json::object();
      manifest["tool"] = "critwalk";
      manifest["version"] = kToolVersion;
      manifest["config_digest"] = digest;
      manifest["config"] = config;
      manifest["output"] = common.out;
      manifest["threads"] = resolve_threads(common.threads);
      manifest["wall_clock_seconds"] = seconds;
      if (sub->get_name() == "accept" && result.table) manifest["criteria"] = result.table->to_json();
      write_file(common.out + ".manifest.json", dump_json(manifest) + "\n");
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kComputeError;
  }
  for (const auto& w : result.doc.value("warnings", Json::array())) err << "warning: " << w.get<std::string>() << '\n';
  return cmd.exit_code ? cmd.exit_code(result) : kOk;
}

}  // namespace critwalk::cli
