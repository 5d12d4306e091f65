#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "odeq/error.hpp"

namespace odeq {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

// cpp_rational's (num, den) constructor rejects negative denominators
inline Rat rat_of(Int num, Int den) {
    if (den < 0) {
        num = -num;
        den = -den;
    }
    return Rat(num, den);
}

inline Rat make_rat(long long num, long long den = 1) { return rat_of(Int(num), Int(den)); }

inline Int rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline Int rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

inline bool is_integer(const Rat& r) { return rat_den(r) == 1; }

inline int sign(const Rat& r) { return r.sign(); }

inline double to_double(const Rat& r) { return r.convert_to<double>(); }

inline long long to_ll(const Int& v) { return v.convert_to<long long>(); }

inline Rat rat_abs(const Rat& r) { return r < 0 ? Rat(-r) : r; }

inline Int int_gcd(Int a, Int b) { return boost::multiprecision::gcd(a, b); }
inline Int int_lcm(Int a, Int b) { return boost::multiprecision::lcm(a, b); }

inline Rat rat_gcd(const Rat& a, const Rat& b) {
    // gcd on rationals: gcd of numerators over lcm of denominators; the
    // positive generator of the fractional ideal (a, b).
    if (a == 0) return rat_abs(b);
    if (b == 0) return rat_abs(a);
    return Rat(int_gcd(rat_num(a), rat_num(b)), int_lcm(rat_den(a), rat_den(b)));
}

inline Int int_pow(Int base, unsigned long e) {
    Int acc = 1;
    while (e) {
        if (e & 1) acc *= base;
        base *= base;
        e >>= 1;
    }
    return acc;
}

inline Rat rat_pow(const Rat& base, long long e) {
    if (e == 0) return Rat(1);
    if (e < 0) {
        if (base == 0) throw DomainError("0 raised to a negative power");
        return rat_of(int_pow(rat_den(base), static_cast<unsigned long>(-e)),
                      int_pow(rat_num(base), static_cast<unsigned long>(-e)));
    }
    return rat_of(int_pow(rat_num(base), static_cast<unsigned long>(e)),
                  int_pow(rat_den(base), static_cast<unsigned long>(e)));
}

// Integer n-th root if it is exact.
inline std::optional<Int> exact_int_root(const Int& v, unsigned long n) {
    if (n == 1) return v;
    if (v < 0) return std::nullopt;  // caller handles signs
    if (v == 0 || v == 1) return v;
    // Newton descent from an upper bound; stops when no longer decreasing.
    Int x = Int(1) << static_cast<unsigned>((boost::multiprecision::msb(v) / n) + 1);
    while (true) {
        Int xn1 = int_pow(x, n - 1);
        Int y = ((n - 1) * x + v / xn1) / n;
        if (y >= x) break;
        x = y;
    }
    while (int_pow(x, n) > v) --x;
    while (int_pow(x + 1, n) <= v) ++x;
    if (int_pow(x, n) == v) return x;
    return std::nullopt;
}

// Exact rational q-th root when both numerator and denominator are perfect powers.
inline std::optional<Rat> exact_rat_root(const Rat& v, unsigned long q) {
    if (v < 0) return std::nullopt;
    auto rn = exact_int_root(rat_num(v), q);
    if (!rn) return std::nullopt;
    auto rd = exact_int_root(rat_den(v), q);
    if (!rd) return std::nullopt;
    return Rat(*rn, *rd);
}

// Split |v| = s^q * rem with s as large as cheap trial division finds.
// Used to keep constant radicals like 12^(1/2) in the tidy form 2*3^(1/2).
inline void extract_power_part(const Int& v, unsigned long q, Int& outer, Int& rem) {
    outer = 1;
    rem = v;
    if (q <= 1 || v == 0) return;
    Int n = v;
    const long long limit = 100000;
    for (long long p = 2; p * p <= limit; p = (p == 2 ? 3 : p + 2)) {
        if (n % p != 0) continue;
        unsigned long count = 0;
        while (n % p == 0) {
            n /= p;
            ++count;
        }
        unsigned long take = count / q;
        if (take) outer *= int_pow(Int(p), take);
        unsigned long left = count % q;
        if (left) rem = rem;  // residual handled below
        if (n > limit * limit) break;
    }
    // Recompute the residual from the extracted part.
    Int oq = int_pow(outer, static_cast<unsigned long>(q));
    rem = v / oq;
}

inline std::string rat_to_string(const Rat& r) {
    std::string s = rat_num(r).str();
    if (!is_integer(r)) s += "/" + rat_den(r).str();
    return s;
}

}  // namespace odeq
