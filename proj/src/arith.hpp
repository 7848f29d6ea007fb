#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sftl {

using Elem = std::uint64_t;

// Largest 64-bit prime: 2^64 - 59. All field arithmetic uses this modulus.
inline constexpr Elem kPrime = 0xFFFFFFFFFFFFFFC5ULL;

enum class EngineKind : std::uint8_t { SemiHonest = 0, Malicious = 1 };
enum class PartyRole : std::uint8_t { Source = 0, Target = 1 };

inline PartyRole other(PartyRole r) {
  return r == PartyRole::Source ? PartyRole::Target : PartyRole::Source;
}
inline int party_index(PartyRole r) { return r == PartyRole::Source ? 0 : 1; }

struct OverflowError : std::runtime_error {
  explicit OverflowError(const std::string& what) : std::runtime_error(what) {}
};

// Element arithmetic over one of the two supported moduli:
// Z_{2^64} (native wraparound) for the semi-honest engine, Z_p for the
// malicious engine. Pure value semantics, safe from any thread.
struct Algebra {
  enum class Kind : std::uint8_t { Ring = 0, Field = 1 };
  Kind kind = Kind::Ring;

  static Algebra ring() { return Algebra{Kind::Ring}; }
  static Algebra field() { return Algebra{Kind::Field}; }
  static Algebra for_engine(EngineKind k) {
    return k == EngineKind::SemiHonest ? ring() : field();
  }

  bool is_field() const { return kind == Kind::Field; }
  // Wire form of the modulus; 0 stands for 2^64.
  Elem modulus_wire() const { return is_field() ? kPrime : 0; }

  Elem add(Elem a, Elem b) const {
    if (!is_field()) return a + b;
    Elem r = a + b;
    if (r < a) return r + 59;  // wrapped past 2^64: subtract p once
    return r >= kPrime ? r - kPrime : r;
  }
  Elem sub(Elem a, Elem b) const {
    if (!is_field()) return a - b;
    return a >= b ? a - b : a + (kPrime - b);
  }
  Elem neg(Elem a) const {
    if (!is_field()) return ~a + 1;
    return a == 0 ? 0 : kPrime - a;
  }
  Elem mul(Elem a, Elem b) const {
    if (!is_field()) return a * b;
    return static_cast<Elem>((static_cast<__uint128_t>(a) * b) % kPrime);
  }
  Elem pow(Elem base, Elem exp) const;
  // Multiplicative inverse, field only. Throws on zero.
  Elem inv(Elem a) const;
  // Maps an arbitrary 64-bit value into the domain.
  Elem reduce(Elem a) const { return is_field() && a >= kPrime ? a - kPrime : a; }

  // Centered lift: elements above half the modulus are negative.
  __int128 lift(Elem a) const {
    if (!is_field())
      return a >= (1ULL << 63) ? static_cast<__int128>(a) - (static_cast<__int128>(1) << 64)
                               : static_cast<__int128>(a);
    return a > kPrime / 2 ? static_cast<__int128>(a) - static_cast<__int128>(kPrime)
                          : static_cast<__int128>(a);
  }
  Elem from_lift(__int128 v) const {
    if (!is_field()) return static_cast<Elem>(static_cast<unsigned __int128>(v));
    __int128 p = static_cast<__int128>(kPrime);
    v %= p;
    if (v < 0) v += p;
    return static_cast<Elem>(v);
  }
};

// Fixed-point layout: reals are stored as round(x * 2^frac_bits), negatives
// via the modular complement. int_bits bounds |x|; sigma is the statistical
// masking parameter used when sizing dealer masks. A value at scale s
// carries s*frac_bits fractional bits (products accumulate scale).
struct FixedCodec {
  int frac_bits = 16;
  int int_bits = 27;
  int sigma = 40;

  // Word-fit: a scale-2 value (one untruncated product) must fit 63 bits.
  // Note int_bits + 2*frac_bits <= 63 leaves a sign/offset bit spare.
  bool valid() const {
    return frac_bits >= 6 && frac_bits <= 24 && int_bits >= 1 && sigma >= 0 &&
           int_bits + 2 * frac_bits <= 63;
  }

  double unit(int scale = 1) const;  // 2^{-scale*frac_bits}

  Elem encode(double x, const Algebra& alg, int scale = 1) const;
  double decode(Elem e, const Algebra& alg, int scale = 1) const;

  // Cleartext fixed-point product with truncation back to scale 1.
  // |a*b| decoded must stay below 2^int_bits.
  Elem mul_trunc(Elem a, Elem b, const Algebra& alg) const;
};

// Inverse in the prime field (free-function form used by MAC-check algebra).
inline Elem field_inverse(Elem a) { return Algebra::field().inv(a); }

}  // namespace sftl
