#include "critwalk/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace critwalk {

std::string to_string(const Rational& r) {
  const auto num = boost::multiprecision::numerator(r);
  const auto den = boost::multiprecision::denominator(r);
  if (den == 1) return num.str();
  return num.str() + "/" + den.str();
}

Rational from_double(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot represent non-finite value as a rational");
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  // mantissa * 2^53 is an integer for every double.
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  Rational r(scaled);
  exponent -= 53;
  boost::multiprecision::cpp_int pow2 = 1;
  pow2 <<= std::abs(exponent);
  if (exponent >= 0) return r * Rational(pow2);
  return r / Rational(pow2);
}

Rational parse_rational(std::string_view text) {
  auto bad = [&] { return std::invalid_argument("not a rational number: '" + std::string(text) + "'"); };
  if (text.empty()) throw bad();
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    const Rational num = parse_rational(text.substr(0, slash));
    const Rational den = parse_rational(text.substr(slash + 1));
    if (den == 0) throw bad();
    return num / den;
  }
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    i = 1;
  }
  boost::multiprecision::cpp_int digits = 0;
  boost::multiprecision::cpp_int scale = 1;
  bool seen_point = false;
  bool seen_digit = false;
  int exponent = 0;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c >= '0' && c <= '9') {
      digits = digits * 10 + (c - '0');
      if (seen_point) scale *= 10;
      seen_digit = true;
    } else if (c == '.' && !seen_point) {
      seen_point = true;
    } else if ((c == 'e' || c == 'E') && seen_digit) {
      exponent = std::stoi(std::string(text.substr(i + 1)));
      break;
    } else {
      throw bad();
    }
  }
  if (!seen_digit) throw bad();
  Rational r(digits, scale);
  boost::multiprecision::cpp_int pow10 = 1;
  for (int e = 0; e < std::abs(exponent); ++e) pow10 *= 10;
  r = exponent >= 0 ? r * Rational(pow10) : r / Rational(pow10);
  return negative ? Rational(-r) : r;
}

}  // namespace critwalk
