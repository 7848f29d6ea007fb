#include "arith.hpp"

#include <cmath>

namespace sftl {

Elem Algebra::pow(Elem base, Elem exp) const {
  Elem acc = 1;
  Elem b = reduce(base);
  while (exp) {
    if (exp & 1) acc = mul(acc, b);
    b = mul(b, b);
    exp >>= 1;
  }
  return acc;
}

Elem Algebra::inv(Elem a) const {
  if (!is_field()) throw std::logic_error("inverse requires the prime field");
  if (a == 0) throw std::domain_error("field inverse of zero");
  return pow(a, kPrime - 2);  // Fermat
}

double FixedCodec::unit(int scale) const { return std::ldexp(1.0, -scale * frac_bits); }

Elem FixedCodec::encode(double x, const Algebra& alg, int scale) const {
  if (!std::isfinite(x) || std::fabs(x) >= std::ldexp(1.0, int_bits))
    throw OverflowError("fixed-point encode out of range: " + std::to_string(x));
  double scaled = std::ldexp(x, scale * frac_bits);
  auto v = static_cast<__int128>(std::llround(scaled));
  return alg.from_lift(v);
}

double FixedCodec::decode(Elem e, const Algebra& alg, int scale) const {
  return std::ldexp(static_cast<double>(alg.lift(e)), -scale * frac_bits);
}

Elem FixedCodec::mul_trunc(Elem a, Elem b, const Algebra& alg) const {
  __int128 prod = alg.lift(a) * alg.lift(b);
  __int128 shifted = prod >> frac_bits;  // arithmetic shift, rounds toward -inf
  __int128 bound = static_cast<__int128>(1) << (int_bits + frac_bits);
  if (shifted >= bound || shifted <= -bound)
    throw OverflowError("fixed-point product out of range");
  return alg.from_lift(shifted);
}

}  // namespace sftl
