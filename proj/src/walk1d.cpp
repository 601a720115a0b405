#include "critwalk/walk1d.hpp"

#include "critwalk/parallel.hpp"
#include "critwalk/simd/kernels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace critwalk::walk1d {

namespace {

double parse_num(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad number '" + s + "' in boundary spec '" + spec + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

BoundaryFn BoundaryFn::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const auto args = colon == std::string::npos ? std::vector<std::string>{} : split(spec.substr(colon + 1), ':');
  if (head == "zero" && args.empty()) return ZeroBoundary{};
  if (head == "pow" && args.size() == 2) return PowerBoundary{parse_num(args[0], spec), parse_num(args[1], spec)};
  if (head == "powlog" && args.size() == 3) {
    return PowerLogBoundary{parse_num(args[0], spec), parse_num(args[1], spec), parse_num(args[2], spec)};
  }
  if (head == "tab" && args.size() == 1) {
    TabulatedBoundary t;
    for (const auto& v : split(args[0], ',')) t.values.push_back(parse_num(v, spec));
    if (t.values.empty()) throw std::invalid_argument("empty tabulated boundary");
    return t;
  }
  throw std::invalid_argument("unknown boundary spec '" + spec + "'");
}

double BoundaryFn::operator()(std::int64_t n) const {
  const double x = static_cast<double>(n);
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ZeroBoundary>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, PowerBoundary>) {
          return f.a * std::pow(x, f.b);
        } else if constexpr (std::is_same_v<T, PowerLogBoundary>) {
          return f.a * std::pow(x, f.b) * std::pow(std::log(x + 1.0), f.c);
        } else {
          const auto i = static_cast<std::size_t>(std::max<std::int64_t>(n, 1) - 1);
          return f.values[std::min(i, f.values.size() - 1)];
        }
      },
      v_);
}

std::string BoundaryFn::describe() const {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, ZeroBoundary>) {
          return "zero";
        } else if constexpr (std::is_same_v<T, PowerBoundary>) {
          return fmt::format("pow:{:.17g}:{:.17g}", f.a, f.b);
        } else if constexpr (std::is_same_v<T, PowerLogBoundary>) {
          return fmt::format("powlog:{:.17g}:{:.17g}:{:.17g}", f.a, f.b, f.c);
        } else {
          std::string s = "tab:";
          for (std::size_t i = 0; i < f.values.size(); ++i) s += (i ? "," : "") + fmt::format("{:.17g}", f.values[i]);
          return s;
        }
      },
      v_);
}

void BoundaryFn::validate(std::int64_t horizon) const {
  double prev = (*this)(1);
  if (!(prev >= 0.0)) throw std::invalid_argument("boundary " + describe() + " is negative at n=1");
  for (std::int64_t n = 2; n <= horizon; ++n) {
    const double v = (*this)(n);
    if (!(v >= 0.0)) throw std::invalid_argument("boundary " + describe() + " is negative at n=" + std::to_string(n));
    if (v < prev) throw std::invalid_argument("boundary " + describe() + " decreases at n=" + std::to_string(n));
    prev = v;
  }
}

SummabilityReport summability_verdict(const BoundaryFn& f, std::int64_t horizon) {
  if (horizon < 1) throw std::invalid_argument("summability horizon must be >= 1");
  SummabilityReport r;
  r.verdict = std::visit(
      [](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ZeroBoundary>) {
          return Verdict::Converges;
        } else if constexpr (std::is_same_v<T, PowerBoundary>) {
          return (g.a == 0.0 || g.b < 0.5) ? Verdict::Converges : Verdict::Diverges;
        } else if constexpr (std::is_same_v<T, PowerLogBoundary>) {
          if (g.a == 0.0 || g.b < 0.5) return Verdict::Converges;
          if (g.b == 0.5 && g.c < -1.0) return Verdict::Converges;
          return Verdict::Diverges;
        } else {
          return Verdict::Undetermined;
        }
      },
      f.variant());
  double s = 0.0;
  std::int64_t next = 1;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const double v = f(n);
    if (!(v >= 0.0)) throw std::invalid_argument("boundary " + f.describe() + " is negative at n=" + std::to_string(n));
    s += v / (static_cast<double>(n) * std::sqrt(static_cast<double>(n)));
    if (n == next) {
      r.partial_sums.push_back(s);
      next *= 2;
    }
  }
  return r;
}

BarrierSpec barrier_above(const FiniteLattice& lat, const BoundaryFn& f, std::int64_t a, std::int64_t n) {
  if (a < 1 || a > n) throw std::invalid_argument("need 1 <= a <= n");
  BarrierSpec spec;
  spec.barrier.assign(static_cast<std::size_t>(n) + 1, std::nullopt);
  for (std::int64_t k = a; k <= n; ++k) {
    spec.barrier[k] = static_cast<std::int64_t>(std::ceil(f(k) / lat.unit));
  }
  return spec;
}

BarrierSpec barrier_below(const FiniteLattice& lat, const BoundaryFn& f, std::int64_t n) {
  if (n < 1) throw std::invalid_argument("need n >= 1");
  BarrierSpec spec;
  spec.barrier.assign(static_cast<std::size_t>(n) + 1, std::nullopt);
  for (std::int64_t k = 1; k <= n; ++k) {
    spec.barrier[k] = -static_cast<std::int64_t>(std::floor(f(k) / lat.unit));
  }
  return spec;
}

std::vector<Checkpoint> run_barrier_dp(const IncrementLaw& law, const BarrierSpec& spec,
                                       const std::vector<std::int64_t>& checkpoints, double cap_multiplier) {
  const FiniteLattice& lat = law.lattice();
  if (cap_multiplier < 4.0) throw std::invalid_argument("cap multiplier must be at least 4");
  const auto n_max = static_cast<std::int64_t>(spec.barrier.size()) - 1;
  if (n_max < 1) throw std::invalid_argument("empty horizon");
  for (auto c : checkpoints) {
    if (c < 1 || c > n_max) throw std::invalid_argument("checkpoint " + std::to_string(c) + " outside [1, n]");
  }

  std::int64_t max_step = 0;
  for (auto v : lat.values) max_step = std::max<std::int64_t>(max_step, std::abs(v));
  const double sd_units = law.sd() / lat.unit;
  const auto reach = max_step * n_max;
  // The window follows the drift: [min(0, mu n), max(0, mu n)] widened by K sd sqrt(n).
  const double drift = law.mean() / lat.unit * static_cast<double>(n_max);
  const double spread = cap_multiplier * sd_units * std::sqrt(static_cast<double>(n_max));
  const auto cap = std::min<std::int64_t>(reach, static_cast<std::int64_t>(std::ceil(std::max(0.0, drift) + spread)));

  // Lower edge: the lowest barrier when every step is constrained, else the
  // bottom of the window.
  std::int64_t lo = std::max<std::int64_t>(-reach, static_cast<std::int64_t>(std::floor(std::min(0.0, drift) - spread)));
  bool all_constrained = true;
  std::int64_t min_barrier = std::numeric_limits<std::int64_t>::max();
  for (std::int64_t k = 1; k <= n_max; ++k) {
    if (!spec.barrier[k]) {
      all_constrained = false;
    } else {
      min_barrier = std::min(min_barrier, *spec.barrier[k]);
    }
  }
  if (all_constrained) lo = std::max(lo, min_barrier);
  lo = std::min<std::int64_t>(lo, 0);
  const std::int64_t hi = std::max<std::int64_t>(cap, 0);
  const auto width = static_cast<std::size_t>(hi - lo + 1);

  std::vector<std::int64_t> shifts(lat.values.begin(), lat.values.end());
  const auto& probs = law.lattice_probs();
  const auto& kern = simd::active_kernels();

  std::vector<double> cur(width, 0.0);
  std::vector<double> next(width, 0.0);
  cur[static_cast<std::size_t>(-lo)] = 1.0;
  double escaped = 0.0;

  std::vector<Checkpoint> out;
  std::vector<std::int64_t> sorted = checkpoints;
  std::sort(sorted.begin(), sorted.end());
  std::size_t next_checkpoint = 0;

  for (std::int64_t k = 1; k <= n_max; ++k) {
    const auto spill = simd::lattice_convolve(kern, cur, next, shifts, probs);
    escaped += spill.above;
    const auto& b = spec.barrier[k];
    if (!(b && *b >= lo)) escaped += spill.below;
    if (b && *b > lo) {
      const auto cut = static_cast<std::size_t>(std::min<std::int64_t>(*b - lo, static_cast<std::int64_t>(width)));
      kern.clear(next.data(), cut);
    }
    std::swap(cur, next);
    while (next_checkpoint < sorted.size() && sorted[next_checkpoint] == k) {
      Checkpoint c;
      c.n = k;
      const double alive = kern.sum(cur.data(), width);
      c.prob = {alive, std::min(1.0, alive + escaped)};
      if (alive > 0.0) {
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::size_t i = 0; i < width; ++i) {
          if (cur[i] == 0.0) continue;
          const double x = static_cast<double>(static_cast<std::int64_t>(i) + lo) * lat.unit;
          m1 += x * cur[i];
          m2 += x * x * cur[i];
        }
        c.mean = m1 / alive;
        c.second_moment = m2 / alive;
      }
      out.push_back(c);
      ++next_checkpoint;
    }
  }
  return out;
}

namespace {

DpResult single(const IncrementLaw& law, const BarrierSpec& spec, std::int64_t n, double cap_multiplier) {
  const auto cps = run_barrier_dp(law, spec, {n}, cap_multiplier);
  DpResult r{cps.front().prob, std::nullopt};
  if (r.prob.width() > kBracketWarnWidth) {
    r.warning = fmt::format("bracket width {:.3g} exceeds {:.0e}; retry with cap multiplier {:.0f}",
                            r.prob.width(), kBracketWarnWidth, 2.0 * cap_multiplier);
  }
  return r;
}

}  // namespace

DpResult dp_stay_above(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a, std::int64_t n,
                       double cap_multiplier) {
  return single(law, barrier_above(law.lattice(), f, a, n), n, cap_multiplier);
}

DpResult dp_hitting_tail(const IncrementLaw& law, double h, std::int64_t n, double cap_multiplier) {
  if (!(h >= 0.0)) throw std::invalid_argument("h must be nonnegative");
  if (n < 1) throw std::invalid_argument("need n >= 1");
  const FiniteLattice& lat = law.lattice();
  // S_k < -h fails; on the lattice S_k >= ceil(-h / unit) survives.
  BarrierSpec spec;
  spec.barrier.assign(static_cast<std::size_t>(n) + 1, static_cast<std::int64_t>(std::ceil(-h / lat.unit)));
  spec.barrier[0] = std::nullopt;
  return single(law, spec, n, cap_multiplier);
}

DpResult dp_stay_above_negative(const IncrementLaw& law, const BoundaryFn& f, std::int64_t n,
                                double cap_multiplier) {
  return single(law, barrier_below(law.lattice(), f, n), n, cap_multiplier);
}

double dp_conditional_moment(const IncrementLaw& law, std::int64_t n, int power, double cap_multiplier) {
  if (power != 1 && power != 2) throw std::invalid_argument("conditional moment power must be 1 or 2");
  const auto cps = run_barrier_dp(law, barrier_above(law.lattice(), ZeroBoundary{}, 1, n), {n}, cap_multiplier);
  if (!(cps.front().prob.lower > 0.0)) throw std::invalid_argument("P(T_0 > n) is zero");
  return power == 1 ? cps.front().mean : cps.front().second_moment;
}

std::vector<McEstimate> mc_stay_above_grid(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a,
                                           const std::vector<std::int64_t>& grid, std::uint64_t episodes,
                                           std::uint64_t seed, unsigned threads) {
  if (episodes < 1) throw std::invalid_argument("need at least one episode");
  if (grid.empty()) throw std::invalid_argument("empty grid");
  std::vector<std::int64_t> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  const std::int64_t n_max = sorted.back();
  if (a < 1 || a > sorted.front()) throw std::invalid_argument("need 1 <= a <= min grid");
  std::vector<double> boundary(static_cast<std::size_t>(n_max) + 1, 0.0);
  for (std::int64_t k = a; k <= n_max; ++k) boundary[k] = f(k);

  constexpr std::uint64_t kBlock = 4096;
  const std::uint64_t blocks = (episodes + kBlock - 1) / kBlock;
  // survived_to[b][i]: episodes of block b that survive through sorted[i].
  std::vector<std::vector<std::uint64_t>> survived(blocks, std::vector<std::uint64_t>(sorted.size(), 0));
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::uint64_t begin = b * kBlock;
    const std::uint64_t end = std::min(episodes, begin + kBlock);
    for (std::uint64_t e = begin; e < end; ++e) {
      StreamRng rng(seed, e);
      double s = 0.0;
      std::int64_t last_ok = 0;
      for (std::int64_t k = 1; k <= n_max; ++k) {
        s += law.sample(rng);
        if (k >= a && s < boundary[k]) break;
        last_ok = k;
      }
      for (std::size_t i = 0; i < sorted.size(); ++i) {
        if (last_ok >= sorted[i]) ++survived[b][i];
      }
    }
  });
  std::vector<McEstimate> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    McEstimate est;
    est.episodes = episodes;
    for (std::uint64_t b = 0; b < blocks; ++b) est.successes += survived[b][i];
    est.estimate = static_cast<double>(est.successes) / static_cast<double>(episodes);
    est.stderr_ = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(episodes));
    out.push_back(est);
  }
  return out;
}

McEstimate mc_stay_above(const IncrementLaw& law, const BoundaryFn& f, std::int64_t a, std::int64_t n,
                         std::uint64_t episodes, std::uint64_t seed, unsigned threads) {
  return mc_stay_above_grid(law, f, a, {n}, episodes, seed, threads).front();
}

double backward_push(const IncrementLaw& law) {
  auto m = [&](double lambda) { return law.mgf(lambda); };
  if (!std::isfinite(m(0.5)) || !std::isfinite(m(1e-3))) {
    throw std::invalid_argument("moment generating function of " + law.describe() + " diverges on (0, 1]");
  }
  // Golden-section search on the convex function lambda -> E exp(lambda X).
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0;
  double b = 1.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = m(c);
  double fd = m(d);
  while (b - a > 1e-12) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = m(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = m(d);
    }
  }
  double best = std::min({m(0.5 * (a + b)), m(0.0)});
  if (const double at_one = m(1.0); std::isfinite(at_one)) best = std::min(best, at_one);
  return -std::log(best);
}

NfScan find_n_f(const IncrementLaw& law, const BoundaryFn& f, std::int64_t max_n_f, double cap_multiplier) {
  const FiniteLattice& lat = law.lattice();
  for (std::int64_t nf = 1; nf <= max_n_f; nf *= 2) {
    const auto cps = run_barrier_dp(law, barrier_above(lat, f, nf, 4 * nf), {2 * nf, 4 * nf}, cap_multiplier);
    const double s2 = std::sqrt(2.0 * static_cast<double>(nf)) * cps[0].prob.mid();
    const double s4 = std::sqrt(4.0 * static_cast<double>(nf)) * cps[1].prob.mid();
    if (s2 > 0.0 && s4 >= 0.9 * s2) return {nf, true};
  }
  return {1, false};
}

AsymptoticsReport asymptotics_report(const IncrementLaw& law, const BoundaryFn& f,
                                     const std::vector<std::int64_t>& grid, std::int64_t n_f,
                                     double cap_multiplier) {
  if (grid.empty()) throw std::invalid_argument("empty n grid");
  const FiniteLattice& lat = law.lattice();
  std::vector<std::int64_t> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  const std::int64_t n_max = sorted.back();
  f.validate(n_max);

  AsymptoticsReport rep;
  if (n_f < 0) {
    const auto scan = find_n_f(law, f, 1024, cap_multiplier);
    rep.n_f = scan.n_f;
    rep.n_f_found = scan.found;
  } else {
    rep.n_f = std::max<std::int64_t>(1, n_f);
    rep.n_f_found = true;
  }
  // Horizons before n_f impose no constraint on A(f; n_f, n).
  std::vector<std::int64_t> above_grid;
  for (auto n : sorted) above_grid.push_back(std::max(n, rep.n_f));
  const std::int64_t above_max = std::max(n_max, rep.n_f);
  auto above = run_barrier_dp(law, barrier_above(lat, f, rep.n_f, above_max), above_grid, cap_multiplier);
  auto tail = run_barrier_dp(law, barrier_above(lat, ZeroBoundary{}, 1, n_max), sorted, cap_multiplier);
  auto below = run_barrier_dp(law, barrier_below(lat, f, n_max), sorted, cap_multiplier);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    AsymptoticsRow row;
    row.n = sorted[i];
    const auto it = std::find_if(above.begin(), above.end(), [&](const Checkpoint& c) { return c.n == above_grid[i]; });
    row.above = it->prob;
    row.tail = tail[i].prob;
    row.below = below[i].prob;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace critwalk::walk1d
