#include "critwalk/law.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace critwalk {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, sep)) parts.push_back(item);
  return parts;
}

double parse_double(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw LawError("bad number '" + s + "' in law spec '" + spec + "'");
  }
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

double stable_tail(double alpha, double x) {
  if (alpha == 2.0) return 1.0 - normal_cdf(x / std::numbers::sqrt2);
  if (x < 0.0) return 1.0 - stable_tail(alpha, -x);
  if (x == 0.0) return 0.5;
  const double e = alpha / (alpha - 1.0);
  const double scaled = std::pow(x, e);
  auto integrand = [&](double theta) {
    if (theta <= 0.0) return 0.0;
    const double c = std::cos(theta);
    if (c <= 0.0) return 0.0;
    const double v = std::pow(c / std::sin(alpha * theta), e) * std::cos((alpha - 1.0) * theta) / c;
    return std::exp(-scaled * v);
  };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, std::numbers::pi / 2, 15, 1e-13);
  return integral / std::numbers::pi;
}

double sample_symmetric_stable(double alpha, StreamRng& rng) {
  const double v = std::numbers::pi * (rng.uniform_open() - 0.5);
  const double w = rng.exponential();
  if (alpha == 2.0) {
    // The formula degenerates to 2 sqrt(W) sin(V), which is N(0, 2).
    return 2.0 * std::sqrt(w) * std::sin(v);
  }
  return std::sin(alpha * v) / std::pow(std::cos(v), 1.0 / alpha) *
         std::pow(std::cos(v - alpha * v) / w, (1.0 - alpha) / alpha);
}

IncrementLaw::IncrementLaw(Variant v) : v_(std::move(v)) {
  if (auto* lat = std::get_if<FiniteLattice>(&v_)) {
    if (lat->values.empty() || lat->values.size() != lat->probs.size()) {
      throw LawError("lattice law needs equally many values and probabilities");
    }
    if (!(lat->unit > 0.0) || !std::isfinite(lat->unit)) throw LawError("lattice unit must be positive");
    Rational total = 0;
    for (const auto& p : lat->probs) {
      if (p < 0) throw LawError("lattice probabilities must be nonnegative");
      total += p;
    }
    if (total != 1) throw LawError("lattice probabilities sum to " + to_string(total) + ", not 1");
    // Sorted distinct atoms simplify every consumer.
    std::vector<std::size_t> order(lat->values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return lat->values[a] < lat->values[b]; });
    FiniteLattice sorted{{}, {}, lat->unit};
    for (auto i : order) {
      if (!sorted.values.empty() && sorted.values.back() == lat->values[i]) {
        sorted.probs.back() += lat->probs[i];
      } else {
        sorted.values.push_back(lat->values[i]);
        sorted.probs.push_back(lat->probs[i]);
      }
    }
    *lat = std::move(sorted);
    for (const auto& p : lat->probs) probs_double_.push_back(to_double(p));
  } else if (auto* g = std::get_if<Gaussian>(&v_)) {
    if (!(g->sd > 0.0)) throw LawError("gaussian sd must be positive");
  } else if (auto* s = std::get_if<SymmetricStable>(&v_)) {
    if (!(s->alpha > 1.0 && s->alpha <= 2.0)) throw LawError("stable index must lie in (1, 2]");
    if (!(s->scale > 0.0)) throw LawError("stable scale must be positive");
  } else if (auto* u = std::get_if<Uniform>(&v_)) {
    if (!(u->lo < u->hi)) throw LawError("uniform law needs lo < hi");
  }
}

IncrementLaw IncrementLaw::rademacher() {
  return lattice({-1, 1}, {Rational(1, 2), Rational(1, 2)});
}

IncrementLaw IncrementLaw::constant(double c) {
  if (c == 0.0) return lattice({0}, {Rational(1)});
  return lattice({c > 0 ? 1 : -1}, {Rational(1)}, std::abs(c));
}

IncrementLaw IncrementLaw::lattice(std::vector<std::int64_t> values, std::vector<Rational> probs, double unit) {
  return IncrementLaw(FiniteLattice{std::move(values), std::move(probs), unit});
}

IncrementLaw IncrementLaw::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : spec.substr(colon + 1);
  const auto args = split(rest, ':');
  if (head == "rademacher" && rest.empty()) return rademacher();
  if (head == "logexp" && rest.empty()) return IncrementLaw(LogExponentialRatio{});
  if (head == "const" && args.size() == 1) return constant(parse_double(args[0], spec));
  if (head == "gauss" && args.size() == 2) {
    return IncrementLaw(Gaussian{parse_double(args[0], spec), parse_double(args[1], spec)});
  }
  if (head == "stable" && (args.size() == 1 || args.size() == 2)) {
    return IncrementLaw(SymmetricStable{parse_double(args[0], spec),
                                        args.size() == 2 ? parse_double(args[1], spec) : 1.0});
  }
  if (head == "uniform" && args.size() == 2) {
    try {
      return IncrementLaw(Uniform{parse_rational(args[0]), parse_rational(args[1])});
    } catch (const std::invalid_argument& e) {
      throw LawError(std::string(e.what()) + " in law spec '" + spec + "'");
    }
  }
  if (head == "lattice" && !rest.empty()) {
    double unit = 1.0;
    std::string atoms = rest;
    if (const auto semi = rest.find(';'); semi != std::string::npos) {
      const std::string opt = rest.substr(semi + 1);
      if (opt.rfind("unit=", 0) != 0) throw LawError("unknown lattice option '" + opt + "'");
      unit = parse_double(opt.substr(5), spec);
      atoms = rest.substr(0, semi);
    }
    std::vector<std::int64_t> values;
    std::vector<Rational> probs;
    for (const auto& atom : split(atoms, ',')) {
      const auto parts = split(atom, ':');
      if (parts.size() != 2) throw LawError("lattice atom '" + atom + "' is not VALUE:PROB");
      try {
        values.push_back(std::stoll(parts[0]));
        probs.push_back(parse_rational(parts[1]));
      } catch (const std::exception&) {
        throw LawError("bad lattice atom '" + atom + "' in law spec '" + spec + "'");
      }
    }
    return lattice(std::move(values), std::move(probs), unit);
  }
  throw LawError("unknown law spec '" + spec + "'");
}

std::string IncrementLaw::describe() const {
  return std::visit(
      [](const auto& law) -> std::string {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          std::string s = "lattice:";
          for (std::size_t i = 0; i < law.values.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(law.values[i]) + ":" + to_string(law.probs[i]);
          }
          if (law.unit != 1.0) s += fmt::format(";unit={:.17g}", law.unit);
          return s;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return fmt::format("gauss:{:.17g}:{:.17g}", law.mean, law.sd);
        } else if constexpr (std::is_same_v<T, SymmetricStable>) {
          return fmt::format("stable:{:.17g}:{:.17g}", law.alpha, law.scale);
        } else if constexpr (std::is_same_v<T, LogExponentialRatio>) {
          return "logexp";
        } else {
          return "uniform:" + to_string(law.lo) + ":" + to_string(law.hi);
        }
      },
      v_);
}

const FiniteLattice& IncrementLaw::lattice() const {
  if (const auto* lat = std::get_if<FiniteLattice>(&v_)) return *lat;
  throw LawError("law " + describe() + " is not a lattice law (quantize it first)");
}

bool IncrementLaw::has_mean() const { return true; }

double IncrementLaw::mean() const {
  return std::visit(
      [this](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          double m = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i) {
            m += probs_double_[i] * static_cast<double>(law.values[i]) * law.unit;
          }
          return m;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return law.mean;
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return to_double((law.lo + law.hi) / 2);
        } else {
          return 0.0;
        }
      },
      v_);
}

double IncrementLaw::sd() const {
  return std::visit(
      [this](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          const double m = mean();
          double var = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i) {
            const double x = static_cast<double>(law.values[i]) * law.unit - m;
            var += probs_double_[i] * x * x;
          }
          return std::sqrt(var);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return law.sd;
        } else if constexpr (std::is_same_v<T, SymmetricStable>) {
          return law.alpha == 2.0 ? std::numbers::sqrt2 * law.scale : kInf;
        } else if constexpr (std::is_same_v<T, LogExponentialRatio>) {
          return std::numbers::pi / std::sqrt(3.0);
        } else {
          return to_double(law.hi - law.lo) / std::sqrt(12.0);
        }
      },
      v_);
}

double IncrementLaw::sample(StreamRng& rng) const {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          if (law.values.size() == 1) return static_cast<double>(law.values[0]) * law.unit;
          double u = rng.uniform();
          for (std::size_t i = 0; i + 1 < law.values.size(); ++i) {
            if (u < probs_double_[i]) return static_cast<double>(law.values[i]) * law.unit;
            u -= probs_double_[i];
          }
          return static_cast<double>(law.values.back()) * law.unit;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return law.mean + law.sd * rng.normal();
        } else if constexpr (std::is_same_v<T, SymmetricStable>) {
          return law.scale * sample_symmetric_stable(law.alpha, rng);
        } else if constexpr (std::is_same_v<T, LogExponentialRatio>) {
          const double e1 = rng.exponential();
          const double e2 = rng.exponential();
          return std::log(e1 / e2);
        } else {
          const double lo = to_double(law.lo);
          return lo + (to_double(law.hi) - lo) * rng.uniform();
        }
      },
      v_);
}

double IncrementLaw::cdf(double x) const {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          double c = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i) {
            if (static_cast<double>(law.values[i]) * law.unit <= x) c += probs_double_[i];
          }
          return std::min(c, 1.0);
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return normal_cdf((x - law.mean) / law.sd);
        } else if constexpr (std::is_same_v<T, SymmetricStable>) {
          return 1.0 - stable_tail(law.alpha, x / law.scale);
        } else if constexpr (std::is_same_v<T, LogExponentialRatio>) {
          return 1.0 / (1.0 + std::exp(-x));
        } else {
          const double lo = to_double(law.lo);
          const double hi = to_double(law.hi);
          return std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
        }
      },
      v_);
}

double IncrementLaw::interval_prob(std::optional<double> lo, std::optional<double> hi) const {
  if (lo && hi && *lo > *hi) return 0.0;
  if (const auto* lat = std::get_if<FiniteLattice>(&v_)) {
    double p = 0.0;
    for (std::size_t i = 0; i < lat->values.size(); ++i) {
      const double x = static_cast<double>(lat->values[i]) * lat->unit;
      if ((!lo || x >= *lo) && (!hi || x <= *hi)) p += probs_double_[i];
    }
    return p;
  }
  const double upper = hi ? cdf(*hi) : 1.0;
  const double lower = lo ? cdf(*lo) : 0.0;
  return std::max(0.0, upper - lower);
}

bool IncrementLaw::is_exact() const {
  return std::holds_alternative<FiniteLattice>(v_) || std::holds_alternative<Uniform>(v_);
}

std::optional<Rational> IncrementLaw::interval_prob_exact(const std::optional<Rational>& lo,
                                                          const std::optional<Rational>& hi) const {
  if (lo && hi && *lo > *hi) return Rational(0);
  if (const auto* lat = std::get_if<FiniteLattice>(&v_)) {
    const Rational unit = from_double(lat->unit);
    Rational p = 0;
    for (std::size_t i = 0; i < lat->values.size(); ++i) {
      const Rational x = Rational(lat->values[i]) * unit;
      if ((!lo || x >= *lo) && (!hi || x <= *hi)) p += lat->probs[i];
    }
    return p;
  }
  if (const auto* u = std::get_if<Uniform>(&v_)) {
    const Rational a = lo ? std::max(*lo, u->lo) : u->lo;
    const Rational b = hi ? std::min(*hi, u->hi) : u->hi;
    if (b <= a) return Rational(0);
    return (b - a) / (u->hi - u->lo);
  }
  return std::nullopt;
}

double IncrementLaw::mgf(double lambda) const {
  return std::visit(
      [&](const auto& law) -> double {
        using T = std::decay_t<decltype(law)>;
        if constexpr (std::is_same_v<T, FiniteLattice>) {
          double m = 0.0;
          for (std::size_t i = 0; i < law.values.size(); ++i) {
            m += probs_double_[i] * std::exp(lambda * static_cast<double>(law.values[i]) * law.unit);
          }
          return m;
        } else if constexpr (std::is_same_v<T, Gaussian>) {
          return std::exp(lambda * law.mean + 0.5 * lambda * lambda * law.sd * law.sd);
        } else if constexpr (std::is_same_v<T, SymmetricStable>) {
          if (lambda == 0.0) return 1.0;
          if (law.alpha == 2.0) return std::exp(lambda * lambda * law.scale * law.scale);
          return kInf;
        } else if constexpr (std::is_same_v<T, LogExponentialRatio>) {
          // E (E1/E2)^lambda = Gamma(1+lambda) Gamma(1-lambda) = pi lambda / sin(pi lambda).
          if (lambda == 0.0) return 1.0;
          if (std::abs(lambda) >= 1.0) return kInf;
          return std::numbers::pi * lambda / std::sin(std::numbers::pi * lambda);
        } else {
          const double lo = to_double(law.lo);
          const double hi = to_double(law.hi);
          if (lambda == 0.0) return 1.0;
          return (std::exp(lambda * hi) - std::exp(lambda * lo)) / (lambda * (hi - lo));
        }
      },
      v_);
}

IncrementLaw IncrementLaw::quantize(int atoms) const {
  if (is_lattice()) return *this;
  if (atoms < 2) throw LawError("quantization needs at least 2 atoms");
  if (const auto* u = std::get_if<Uniform>(&v_)) {
    // Cell midpoints lo + (2i+1)(hi-lo)/(2m), each with mass 1/m.
    const double unit = to_double(u->hi - u->lo) / (2.0 * atoms);
    const double offset = to_double(u->lo) / unit;
    if (std::abs(offset - std::round(offset)) > 1e-9) {
      throw LawError("uniform lower endpoint is not a multiple of the quantization unit");
    }
    std::vector<std::int64_t> values;
    std::vector<Rational> probs;
    for (int i = 0; i < atoms; ++i) {
      values.push_back(static_cast<std::int64_t>(std::llround(offset)) + 2 * i + 1);
      probs.emplace_back(1, atoms);
    }
    return lattice(std::move(values), std::move(probs), unit);
  }
  // Symmetric laws: grid symmetric about the center, outer cells absorb the
  // tails, probabilities mirrored so the mean is exactly the center.
  const double center = mean();
  double span = 1.0;
  const double tail_target = 1.0 / (2.0 * atoms);
  while (1.0 - cdf(center + span) > tail_target) span *= 2.0;
  double lo = 0.0;
  double hi = span;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (1.0 - cdf(center + mid) > tail_target ? lo : hi) = mid;
  }
  span = hi;
  // Atoms at odd multiples of `unit` around the center: (2i - (m-1)) * unit.
  const double unit = span / static_cast<double>(atoms - 1);
  if (std::abs(center) > 0.0) throw LawError("quantization expects a law centered at 0");
  std::vector<std::int64_t> values;
  std::vector<double> mass;
  for (int i = 0; i < atoms; ++i) {
    const std::int64_t v = 2 * i - (atoms - 1);
    values.push_back(v);
    const double left = i == 0 ? -kInf : (static_cast<double>(v) - 1.0) * unit;
    const double right = i == atoms - 1 ? kInf : (static_cast<double>(v) + 1.0) * unit;
    mass.push_back(interval_prob(std::isfinite(left) ? std::optional(left) : std::nullopt,
                                 std::isfinite(right) ? std::optional(right) : std::nullopt));
  }
  for (int i = 0; i < atoms / 2; ++i) {
    const double m = 0.5 * (mass[i] + mass[atoms - 1 - i]);
    mass[i] = mass[atoms - 1 - i] = m;
  }
  double total = 0.0;
  for (double m : mass) total += m;
  // Exact rationals of the normalized doubles; renormalize exactly.
  std::vector<Rational> probs;
  Rational sum = 0;
  for (double m : mass) {
    probs.push_back(from_double(m / total));
    sum += probs.back();
  }
  for (auto& p : probs) p /= sum;
  return lattice(std::move(values), std::move(probs), unit);
}

}  // namespace critwalk
