#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <string>
#include <string_view>

namespace critwalk {

using Rational = boost::multiprecision::cpp_rational;

/// "num/den" in lowest terms ("3/8", "1", "-1/2").
std::string to_string(const Rational& r);

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Exact value of a finite double.
Rational from_double(double x);

/// Parses "a/b", integers and decimal literals ("0.01" -> 1/100) exactly.
/// Throws std::invalid_argument on anything else.
Rational parse_rational(std::string_view text);

inline bool is_integer(const Rational& r) {
  return boost::multiprecision::denominator(r) == 1;
}

}  // namespace critwalk
