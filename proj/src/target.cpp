#include "critwalk/target.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace critwalk {

namespace {

using boost::multiprecision::cpp_int;

cpp_int floor_of(const Rational& r) {
  const cpp_int n = boost::multiprecision::numerator(r);
  const cpp_int d = boost::multiprecision::denominator(r);
  cpp_int q = n / d;
  if (n % d != 0 && n < 0) q -= 1;
  return q;
}

cpp_int ceil_of(const Rational& r) { return -floor_of(-r); }

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

std::optional<Rational> parse_bound(const std::string& s) {
  if (s.empty() || s == "inf" || s == "-inf" || s == "+inf") return std::nullopt;
  return parse_rational(s);
}

std::string bound_string(const std::optional<Rational>& b, bool lower) {
  if (!b) return lower ? "-inf" : "inf";
  return to_string(*b);
}

Interval parse_interval(const std::string& s, const std::string& spec) {
  if (s.size() < 3 || s.front() != '[' || s.back() != ']') {
    throw std::invalid_argument("bad interval '" + s + "' in target spec '" + spec + "'");
  }
  const auto parts = split(s.substr(1, s.size() - 2), ',');
  if (parts.size() != 2) throw std::invalid_argument("bad interval '" + s + "' in target spec '" + spec + "'");
  return Interval{parse_bound(parts[0]), parse_bound(parts[1])};
}

}  // namespace

void TargetSet::validate() const {
  std::visit(
      [](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SumBand>) {
          if (t.lower.size() != t.upper.size()) throw std::invalid_argument("sum band bounds differ in length");
          for (std::size_t k = 0; k < t.lower.size(); ++k) {
            if (t.lower[k] && t.upper[k] && *t.lower[k] > *t.upper[k]) {
              throw std::invalid_argument(fmt::format("sum band lower bound exceeds upper bound at level {}", k + 1));
            }
          }
        } else if constexpr (std::is_same_v<T, Box>) {
          for (std::size_t k = 0; k < t.retain.size(); ++k) {
            if (t.retain[k] < 0 || t.retain[k] > 1) {
              throw std::invalid_argument(fmt::format("box retention at level {} is outside [0,1]", k + 1));
            }
          }
        } else if constexpr (std::is_same_v<T, UnionOfBoxes>) {
          if (t.boxes.empty()) throw std::invalid_argument("union of boxes is empty");
          if (t.boxes.size() > 64) throw std::invalid_argument("at most 64 boxes are supported");
          for (const auto& b : t.boxes) {
            if (b.size() != t.boxes.front().size() || b.empty()) {
              throw std::invalid_argument("all boxes need the same positive number of coordinates");
            }
            for (const auto& iv : b) {
              if (iv.lo && iv.hi && *iv.lo > *iv.hi) throw std::invalid_argument("box interval with lo > hi");
            }
          }
        } else {
          if (t.n_f < 1) throw std::invalid_argument("half-space start must be >= 1");
        }
      },
      v_);
}

TargetSet TargetSet::parse(const std::string& spec) {
  if (spec == "b0") return nonnegative_sums();
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unknown target spec '" + spec + "'");
  const std::string head = spec.substr(0, colon);
  const std::string arg = spec.substr(colon + 1);
  if (head == "half") {
    const auto at = arg.rfind('@');
    if (at == std::string::npos) return HalfSpaceFrom{walk1d::BoundaryFn::parse(arg), 1};
    std::int64_t nf = 0;
    try {
      nf = std::stoll(arg.substr(at + 1));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad start level in target spec '" + spec + "'");
    }
    return HalfSpaceFrom{walk1d::BoundaryFn::parse(arg.substr(0, at)), nf};
  }
  if (head == "box") {
    Box b;
    for (const auto& q : split(arg, ',')) b.retain.push_back(parse_rational(q));
    if (b.retain.empty()) throw std::invalid_argument("empty box target");
    return b;
  }
  if (head == "band") {
    SumBand band;
    for (const auto& level : split(arg, ',')) {
      const auto parts = split(level, ':');
      if (parts.size() != 2) throw std::invalid_argument("bad level '" + level + "' in target spec '" + spec + "'");
      band.lower.push_back(parse_bound(parts[0]));
      band.upper.push_back(parse_bound(parts[1]));
    }
    if (band.lower.empty()) throw std::invalid_argument("empty band target");
    return band;
  }
  if (head == "union") {
    UnionOfBoxes u;
    for (const auto& box : split(arg, ';')) {
      std::vector<Interval> b;
      for (const auto& iv : split(box, 'x')) b.push_back(parse_interval(iv, spec));
      u.boxes.push_back(std::move(b));
    }
    return u;
  }
  if (head == "counterexample") return counterexample_target(parse_rational(arg));
  throw std::invalid_argument("unknown target spec '" + spec + "'");
}

std::string TargetSet::describe() const {
  return std::visit(
      [](const auto& t) -> std::string {
        using T = std::decay_t<decltype(t)>;
        std::string s;
        if constexpr (std::is_same_v<T, SumBand>) {
          s = "band:";
          for (std::size_t k = 0; k < t.lower.size(); ++k) {
            s += (k ? "," : "") + bound_string(t.lower[k], true) + ":" + bound_string(t.upper[k], false);
          }
        } else if constexpr (std::is_same_v<T, Box>) {
          s = "box:";
          for (std::size_t k = 0; k < t.retain.size(); ++k) s += (k ? "," : "") + to_string(t.retain[k]);
        } else if constexpr (std::is_same_v<T, UnionOfBoxes>) {
          s = "union:";
          for (std::size_t b = 0; b < t.boxes.size(); ++b) {
            if (b) s += ";";
            for (std::size_t k = 0; k < t.boxes[b].size(); ++k) {
              s += (k ? "x[" : "[") + bound_string(t.boxes[b][k].lo, true) + "," +
                   bound_string(t.boxes[b][k].hi, false) + "]";
            }
          }
        } else {
          s = "half:" + t.f.describe() + "@" + std::to_string(t.n_f);
        }
        return s;
      },
      v_);
}

std::optional<int> TargetSet::length() const {
  return std::visit(
      [](const auto& t) -> std::optional<int> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SumBand>) {
          return static_cast<int>(t.lower.size());
        } else if constexpr (std::is_same_v<T, Box>) {
          return static_cast<int>(t.retain.size());
        } else if constexpr (std::is_same_v<T, UnionOfBoxes>) {
          return static_cast<int>(t.boxes.front().size());
        } else {
          return std::nullopt;
        }
      },
      v_);
}

TargetSet counterexample_target(const Rational& eps) {
  if (eps <= 0 || eps * 4 > 1) throw std::invalid_argument("counterexample needs 0 < eps <= 1/4");
  const Rational half(1, 2);
  UnionOfBoxes u;
  u.boxes.push_back({Interval{Rational(0), half}, Interval{2 * eps, Rational(1)}, Interval{Rational(0), Rational(1)}});
  u.boxes.push_back({Interval{half, Rational(1)}, Interval{Rational(0), Rational(1)}, Interval{4 * eps, Rational(1)}});
  return u;
}

std::size_t CompiledTarget::total_states() const {
  std::size_t s = 0;
  for (auto n : states) s += n;
  return s;
}

namespace {

void check_budget(std::size_t total, std::size_t max_states, int level, int depth) {
  if (total > max_states) {
    throw std::invalid_argument(fmt::format(
        "target state space exceeds {} states by level {} of {} (about {} states projected)", max_states, level, depth,
        total / static_cast<std::size_t>(level) * static_cast<std::size_t>(depth)));
  }
}

struct IntBounds {
  std::optional<std::int64_t> lo;
  std::optional<std::int64_t> hi;
};

CompiledTarget compile_sums(const IncrementLaw& law, const std::vector<IntBounds>& bounds, int depth,
                            std::size_t max_states) {
  const FiniteLattice& lat = law.lattice();
  CompiledTarget ct;
  ct.depth = depth;
  ct.states.push_back(1);
  std::vector<Rational> exact_probs = lat.probs;
  std::vector<double> cell_values;
  for (auto v : lat.values) cell_values.push_back(static_cast<double>(v) * lat.unit);
  std::vector<std::vector<Rational>> pe;

  std::vector<std::int64_t> cur{0};
  std::size_t total = 1;
  for (int k = 1; k <= depth; ++k) {
    const auto& b = bounds[k - 1];
    std::vector<std::int64_t> reach;
    for (auto s : cur) {
      for (auto v : lat.values) {
        const std::int64_t t = s + v;
        if ((b.lo && t < *b.lo) || (b.hi && t > *b.hi)) continue;
        reach.push_back(t);
      }
    }
    std::sort(reach.begin(), reach.end());
    reach.erase(std::unique(reach.begin(), reach.end()), reach.end());
    total += reach.size();
    check_budget(total, max_states, k, depth);
    std::vector<std::int32_t> next(cur.size() * lat.values.size(), CompiledTarget::kDead);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (std::size_t j = 0; j < lat.values.size(); ++j) {
        const std::int64_t t = cur[i] + lat.values[j];
        const auto it = std::lower_bound(reach.begin(), reach.end(), t);
        if (it != reach.end() && *it == t) next[i * lat.values.size() + j] = static_cast<std::int32_t>(it - reach.begin());
      }
    }
    ct.next.push_back(std::move(next));
    ct.prob.push_back(law.lattice_probs());
    ct.cell_value.push_back(cell_values);
    pe.push_back(exact_probs);
    ct.states.push_back(reach.size());
    cur = std::move(reach);
  }
  ct.prob_exact = std::move(pe);
  return ct;
}

CompiledTarget compile_box(const Box& box, int depth) {
  CompiledTarget ct;
  ct.depth = depth;
  ct.states.assign(depth + 1, 1);
  std::vector<std::vector<Rational>> pe;
  for (int k = 1; k <= depth; ++k) {
    const Rational& q = box.retain[k - 1];
    std::vector<Rational> p;
    std::vector<double> val;
    std::vector<std::int32_t> next;
    if (q > 0) {
      p.push_back(q);
      val.push_back(0.0);
      next.push_back(0);
    }
    if (q < 1) {
      p.push_back(1 - q);
      val.push_back(1.0);
      next.push_back(CompiledTarget::kDead);
    }
    std::vector<double> pd;
    for (const auto& x : p) pd.push_back(to_double(x));
    ct.prob.push_back(std::move(pd));
    ct.cell_value.push_back(std::move(val));
    ct.next.push_back(std::move(next));
    pe.push_back(std::move(p));
  }
  ct.prob_exact = std::move(pe);
  return ct;
}

struct Cell {
  double prob = 0.0;
  std::optional<Rational> exact;
  double value = 0.0;
  std::uint64_t mask = 0;
};

std::vector<Cell> union_cells(const IncrementLaw& law, const UnionOfBoxes& u, int k) {
  std::vector<Cell> cells;
  auto mask_of = [&](auto&& inside) {
    std::uint64_t m = 0;
    for (std::size_t b = 0; b < u.boxes.size(); ++b) {
      if (inside(u.boxes[b][k - 1])) m |= std::uint64_t{1} << b;
    }
    return m;
  };
  if (law.is_lattice()) {
    const FiniteLattice& lat = law.lattice();
    const Rational unit = from_double(lat.unit);
    for (std::size_t j = 0; j < lat.values.size(); ++j) {
      const Rational x = unit * lat.values[j];
      cells.push_back({law.lattice_probs()[j], lat.probs[j], to_double(x),
                       mask_of([&](const Interval& iv) { return iv.contains(x); })});
    }
    return cells;
  }
  std::vector<Rational> cuts;
  for (const auto& box : u.boxes) {
    if (box[k - 1].lo) cuts.push_back(*box[k - 1].lo);
    if (box[k - 1].hi) cuts.push_back(*box[k - 1].hi);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  // Open pieces between consecutive cuts; single points carry no mass.
  for (std::size_t i = 0; i <= cuts.size(); ++i) {
    std::optional<Rational> a = i > 0 ? std::optional<Rational>(cuts[i - 1]) : std::nullopt;
    std::optional<Rational> b = i < cuts.size() ? std::optional<Rational>(cuts[i]) : std::nullopt;
    Cell c;
    c.exact = law.interval_prob_exact(a, b);
    c.prob = c.exact ? to_double(*c.exact)
                     : law.interval_prob(a ? std::optional<double>(to_double(*a)) : std::nullopt,
                                         b ? std::optional<double>(to_double(*b)) : std::nullopt);
    if (a && b) {
      c.value = to_double((*a + *b) / 2);
    } else if (a) {
      c.value = to_double(*a) + 1.0;
    } else if (b) {
      c.value = to_double(*b) - 1.0;
    }
    c.mask = mask_of([&](const Interval& iv) {
      const bool lo_ok = !iv.lo || (a && *iv.lo <= *a);
      const bool hi_ok = !iv.hi || (b && *b <= *iv.hi);
      return lo_ok && hi_ok;
    });
    cells.push_back(std::move(c));
  }
  return cells;
}

CompiledTarget compile_union(const IncrementLaw& law, const UnionOfBoxes& u, int depth, std::size_t max_states) {
  CompiledTarget ct;
  ct.depth = depth;
  ct.states.push_back(1);
  bool exact = true;
  std::vector<std::vector<Rational>> pe;
  const std::uint64_t full = u.boxes.size() == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << u.boxes.size()) - 1;
  std::vector<std::uint64_t> cur{full};
  std::size_t total = 1;
  for (int k = 1; k <= depth; ++k) {
    auto all = union_cells(law, u, k);
    std::vector<Cell> cells;
    for (auto& c : all) {
      if (c.prob > 0.0 || (c.exact && *c.exact > 0)) cells.push_back(std::move(c));
    }
    std::map<std::uint64_t, std::int32_t> index;
    for (auto m : cur) {
      for (const auto& c : cells) {
        if (const auto nm = m & c.mask; nm != 0) index.emplace(nm, 0);
      }
    }
    std::vector<std::uint64_t> reach;
    for (auto& [m, id] : index) {
      id = static_cast<std::int32_t>(reach.size());
      reach.push_back(m);
    }
    total += reach.size();
    check_budget(total, max_states, k, depth);
    std::vector<std::int32_t> next(cur.size() * cells.size(), CompiledTarget::kDead);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        if (const auto nm = cur[i] & cells[j].mask; nm != 0) next[i * cells.size() + j] = index.at(nm);
      }
    }
    std::vector<double> pd;
    std::vector<double> val;
    std::vector<Rational> pq;
    for (const auto& c : cells) {
      pd.push_back(c.prob);
      val.push_back(c.value);
      if (c.exact) {
        pq.push_back(*c.exact);
      } else {
        exact = false;
      }
    }
    ct.prob.push_back(std::move(pd));
    ct.cell_value.push_back(std::move(val));
    ct.next.push_back(std::move(next));
    pe.push_back(std::move(pq));
    ct.states.push_back(reach.size());
    cur = std::move(reach);
  }
  if (exact) ct.prob_exact = std::move(pe);
  return ct;
}

}  // namespace

CompiledTarget compile_target(const IncrementLaw& law, const TargetSet& target, int depth, std::size_t max_states) {
  if (depth < 1) throw std::invalid_argument("target depth must be >= 1");
  if (const auto len = target.length(); len && *len < depth) {
    throw std::invalid_argument(
        fmt::format("target {} constrains {} coordinates, depth {} requested", target.describe(), *len, depth));
  }
  const auto need_lattice = [&] {
    if (!law.is_lattice()) {
      throw std::invalid_argument("sum targets need a lattice law; quantize " + law.describe() +
                                  " first (--quantize ATOMS)");
    }
  };
  return std::visit(
      [&](const auto& t) -> CompiledTarget {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, SumBand>) {
          need_lattice();
          const Rational unit = from_double(law.lattice().unit);
          std::vector<IntBounds> b(depth);
          for (int k = 1; k <= depth; ++k) {
            if (t.lower[k - 1]) b[k - 1].lo = ceil_of(*t.lower[k - 1] / unit).template convert_to<std::int64_t>();
            if (t.upper[k - 1]) b[k - 1].hi = floor_of(*t.upper[k - 1] / unit).template convert_to<std::int64_t>();
          }
          return compile_sums(law, b, depth, max_states);
        } else if constexpr (std::is_same_v<T, HalfSpaceFrom>) {
          need_lattice();
          const auto spec = walk1d::barrier_above(law.lattice(), t.f, std::min<std::int64_t>(t.n_f, depth), depth);
          std::vector<IntBounds> b(depth);
          for (int k = 1; k <= depth; ++k) {
            if (k >= t.n_f) b[k - 1].lo = spec.barrier[k];
          }
          return compile_sums(law, b, depth, max_states);
        } else if constexpr (std::is_same_v<T, Box>) {
          return compile_box(t, depth);
        } else {
          return compile_union(law, t, depth, max_states);
        }
      },
      target.variant());
}

}  // namespace critwalk
