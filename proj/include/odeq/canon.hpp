#pragma once

// Canonical forms.  Every expression is normalized to coef * N / D where N, D
// are primitive integer-coefficient sparse polynomials in "atoms": plain
// variables, transcendental applications, uninterpreted symbols, fractional
// powers of constants, and fractional powers of multi-term polynomials.
// Rational subtrees therefore reduce to a unique quotient of relatively-prime
// polynomials with a graded-lexicographic monomial order (x < u < u').

#include <algorithm>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "odeq/expr.hpp"

namespace odeq {

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

struct Factor {
    ExprPtr base;
    Rat exp;
};

inline bool operator==(const Factor& a, const Factor& b) {
    return a.exp == b.exp && expr_eq(a.base, b.base);
}

using Monomial = std::vector<Factor>;  // sorted by base, ascending

inline int atom_cmp(const ExprPtr& a, const ExprPtr& b) { return expr_cmp(a, b); }

inline Rat mono_degree(const Monomial& m) {
    Rat d(0);
    for (const auto& f : m) d += f.exp;
    return d;
}

// Graded lexicographic; the smaller atom is the more significant position.
inline int mono_cmp(const Monomial& a, const Monomial& b) {
    Rat da = mono_degree(a), db = mono_degree(b);
    if (da != db) return da < db ? -1 : 1;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        int c = atom_cmp(a[i].base, b[j].base);
        if (c < 0) return 1;
        if (c > 0) return -1;
        if (a[i].exp != b[j].exp) return a[i].exp > b[j].exp ? 1 : -1;
        ++i;
        ++j;
    }
    if (i < a.size()) return 1;
    if (j < b.size()) return -1;
    return 0;
}

struct MonoGreater {
    bool operator()(const Monomial& a, const Monomial& b) const { return mono_cmp(a, b) > 0; }
};

inline void mono_sort(Monomial& m) {
    std::sort(m.begin(), m.end(),
              [](const Factor& a, const Factor& b) { return atom_cmp(a.base, b.base) < 0; });
}

// Leading term first.
using Poly = std::map<Monomial, Rat, MonoGreater>;

inline Poly poly_const(const Rat& c) {
    Poly p;
    if (c != 0) p[Monomial{}] = c;
    return p;
}

inline Poly poly_one() { return poly_const(Rat(1)); }

inline bool poly_is_zero(const Poly& p) { return p.empty(); }

inline bool poly_is_const(const Poly& p) {
    return p.empty() || (p.size() == 1 && p.begin()->first.empty());
}

inline bool poly_is_one(const Poly& p) {
    return p.size() == 1 && p.begin()->first.empty() && p.begin()->second == 1;
}

inline void poly_accum(Poly& p, const Monomial& m, const Rat& c) {
    if (c == 0) return;
    auto it = p.find(m);
    if (it == p.end()) {
        p.emplace(m, c);
    } else {
        it->second += c;
        if (it->second == 0) p.erase(it);
    }
}

inline Poly poly_add(const Poly& a, const Poly& b) {
    Poly r = a;
    for (const auto& [m, c] : b) poly_accum(r, m, c);
    return r;
}

inline Poly poly_neg(const Poly& a) {
    Poly r = a;
    for (auto& [m, c] : r) c = -c;
    return r;
}

inline Poly poly_sub(const Poly& a, const Poly& b) { return poly_add(a, poly_neg(b)); }

inline Poly poly_scale(const Poly& a, const Rat& s) {
    if (s == 0) return {};
    Poly r = a;
    for (auto& [m, c] : r) c *= s;
    return r;
}

// ---------------------------------------------------------------------------
// Factor normalization helpers
// ---------------------------------------------------------------------------

inline Rat rat_floor(const Rat& r) {
    Int fl = rat_num(r) / rat_den(r);
    if (r < 0 && fl * rat_den(r) != rat_num(r)) fl -= 1;
    return Rat(fl);
}

// Exact part of n^r for a positive integer n: returns the rational factor that
// can be extracted and (optionally) a residual radical factor with exponent in
// (0,1).
inline void int_pow_frac(const Int& n, const Rat& r, Rat& out, Monomial& residual);

// c^r for rational c, r non-integer.  Appends residual radical factors.
inline Rat const_pow(const Rat& c, const Rat& r, Monomial& residual) {
    if (c == 0) {
        if (r <= 0) throw DomainError("zero raised to a non-positive power");
        return Rat(0);
    }
    Rat out(1);
    Rat ac = rat_abs(c);
    if (c < 0) {
        // (-1)^r has period 2 in r
        Rat s = r - 2 * rat_floor(r / 2);
        if (s == 0) {
            // nothing
        } else if (s == 1) {
            out = -out;
        } else {
            if (s > 1) {
                out = -out;
                s -= 1;
            }
            auto neg1 = std::make_shared<Expr>(Kind::Num);
            neg1->value = Rat(-1);
            residual.push_back(Factor{neg1, s});
        }
    }
    int_pow_frac(rat_num(ac), r, out, residual);
    Rat dout(1);
    int_pow_frac(rat_den(ac), -r, dout, residual);
    out *= dout;
    return out;
}

inline void int_pow_frac(const Int& n, const Rat& r, Rat& out, Monomial& residual) {
    if (n == 1) return;
    unsigned long q = static_cast<unsigned long>(to_ll(rat_den(r)));
    if (auto root = exact_int_root(n, q)) {
        // exact: n^r = root^p
        long long p = to_ll(rat_num(r));
        out *= rat_pow(Rat(*root), p);
        return;
    }
    Int s, rem;
    extract_power_part(n, q, s, rem);
    long long p = to_ll(rat_num(r));
    out *= rat_pow(Rat(s), p);
    // rem^(p/q): fold the integer part of the exponent into out
    Rat e = Rat(Int(p), Int(q));
    Int fl = rat_num(e) / rat_den(e);
    if (e < 0 && fl * rat_den(e) != rat_num(e)) fl -= 1;
    Rat frac = e - Rat(fl);
    out *= rat_pow(Rat(rem), to_ll(fl));
    if (frac != 0 && rem != 1) {
        auto base = std::make_shared<Expr>(Kind::Num);
        base->value = Rat(rem);
        residual.push_back(Factor{base, frac});
    }
}

// ---------------------------------------------------------------------------
// Poly multiplication (with expansion of integral powers of compound atoms)
// ---------------------------------------------------------------------------

inline Poly poly_of_base(const ExprPtr& base);  // parse an Add-atom back into a Poly
inline Poly poly_mul(const Poly& a, const Poly& b);

inline Poly poly_pow_int(const Poly& p, long long n) {
    if (n == 0) return poly_one();
    if (n < 0) throw Error("poly_pow_int: negative exponent");
    Poly acc = poly_one();
    Poly sq = p;
    unsigned long long e = static_cast<unsigned long long>(n);
    while (e) {
        if (e & 1) acc = poly_mul(acc, sq);
        e >>= 1;
        if (e) sq = poly_mul(sq, sq);
    }
    return acc;
}

// Multiplies two monomials, normalizing exponents.  The result is a polynomial
// because integral powers of compound atoms expand.
inline Poly mono_mul(const Monomial& a, const Monomial& b, Rat coeff) {
    Monomial out;
    std::vector<std::pair<ExprPtr, long long>> expansions;
    std::size_t i = 0, j = 0;
    auto push = [&](const ExprPtr& base, Rat exp) {
        if (exp == 0) return;
        if (base->kind == Kind::Num) {
            Rat fl = rat_floor(exp);
            Rat frac = exp - fl;
            coeff *= rat_pow(base->value, to_ll(rat_num(fl)));
            if (frac != 0) out.push_back(Factor{base, frac});
            return;
        }
        if (base->kind == Kind::Add) {
            Rat fl = rat_floor(exp);
            Rat frac = exp - fl;
            if (fl < 0) throw Error("mono_mul: negative power of compound atom");
            if (fl > 0) expansions.emplace_back(base, to_ll(rat_num(fl)));
            if (frac != 0) out.push_back(Factor{base, frac});
            return;
        }
        if (base->kind == Kind::Fun && base->fn == Func::Abs) {
            // |z|^(2k+r) = z^(2k) |z|^r with r in [0,2)
            Rat k2 = 2 * rat_floor(exp / 2);
            Rat r = exp - k2;
            if (k2 > 0) expansions.emplace_back(base->kids[0], to_ll(rat_num(k2)));
            if (r != 0) out.push_back(Factor{base, r});
            return;
        }
        out.push_back(Factor{base, exp});
    };
    while (i < a.size() && j < b.size()) {
        int c = atom_cmp(a[i].base, b[j].base);
        if (c < 0) {
            push(a[i].base, a[i].exp);
            ++i;
        } else if (c > 0) {
            push(b[j].base, b[j].exp);
            ++j;
        } else {
            push(a[i].base, a[i].exp + b[j].exp);
            ++i;
            ++j;
        }
    }
    while (i < a.size()) {
        push(a[i].base, a[i].exp);
        ++i;
    }
    while (j < b.size()) {
        push(b[j].base, b[j].exp);
        ++j;
    }
    Poly res;
    if (coeff != 0) res[out] = coeff;
    for (const auto& [base, n] : expansions)
        res = poly_mul(res, poly_pow_int(poly_of_base(base), n));
    return res;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    Poly r;
    for (const auto& [ma, ca] : a)
        for (const auto& [mb, cb] : b) {
            Poly part = mono_mul(ma, mb, ca * cb);
            for (const auto& [m, c] : part) poly_accum(r, m, c);
        }
    return r;
}

// ---------------------------------------------------------------------------
// Content and primitive part
// ---------------------------------------------------------------------------

// Signed rational content; the primitive part has integer coefficients with
// gcd 1 and positive leading coefficient.
inline Rat poly_content(const Poly& p) {
    if (p.empty()) return Rat(0);
    Rat g(0);
    for (const auto& [m, c] : p) g = rat_gcd(g, c);
    if (p.begin()->second < 0) g = -g;
    return g;
}

inline Poly poly_divide_scalar(const Poly& p, const Rat& s) { return poly_scale(p, Rat(1) / s); }

inline std::pair<Rat, Poly> poly_primitive(const Poly& p) {
    if (p.empty()) return {Rat(0), Poly{}};
    Rat c = poly_content(p);
    return {c, poly_divide_scalar(p, c)};
}

// Per-atom minimum exponent over all terms (the monomial content).
inline Monomial poly_mono_content(const Poly& p) {
    if (p.empty()) return {};
    Monomial acc = p.begin()->first;
    for (auto it = std::next(p.begin()); it != p.end() && !acc.empty(); ++it) {
        const Monomial& m = it->first;
        Monomial next;
        std::size_t i = 0, j = 0;
        while (i < acc.size() && j < m.size()) {
            int c = atom_cmp(acc[i].base, m[j].base);
            if (c < 0) {
                ++i;  // absent in m: min exp 0
            } else if (c > 0) {
                ++j;
            } else {
                next.push_back(Factor{acc[i].base, std::min(acc[i].exp, m[j].exp)});
                ++i;
                ++j;
            }
        }
        acc = std::move(next);
    }
    return acc;
}

inline Monomial mono_divide(const Monomial& a, const Monomial& b);

// Divides every term by the monomial m (exponent subtraction must stay legal).
inline Poly poly_divide_mono(const Poly& p, const Monomial& m) {
    if (m.empty()) return p;
    Poly r;
    for (const auto& [mono, c] : p) {
        Rat coeff = c;
        Monomial q = mono_divide(mono, m);
        // constant folding for Num atoms that went negative
        Monomial fixed;
        for (const auto& f : q) {
            if (f.base->kind == Kind::Num) {
                Rat fl = rat_floor(f.exp);
                Rat frac = f.exp - fl;
                coeff *= rat_pow(f.base->value, to_ll(rat_num(fl)));
                if (frac != 0) fixed.push_back(Factor{f.base, frac});
            } else {
                if (f.exp < 0) throw Error("poly_divide_mono: inexact");
                if (f.exp != 0) fixed.push_back(f);
            }
        }
        poly_accum(r, fixed, coeff);
    }
    return r;
}

inline Monomial mono_divide(const Monomial& a, const Monomial& b) {
    Monomial out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        int c = atom_cmp(a[i].base, b[j].base);
        if (c < 0) {
            out.push_back(a[i]);
            ++i;
        } else if (c > 0) {
            out.push_back(Factor{b[j].base, -b[j].exp});
            ++j;
        } else {
            Rat e = a[i].exp - b[j].exp;
            if (e != 0) out.push_back(Factor{a[i].base, e});
            ++i;
            ++j;
        }
    }
    while (i < a.size()) out.push_back(a[i++]);
    while (j < b.size()) {
        out.push_back(Factor{b[j].base, -b[j].exp});
        ++j;
    }
    return out;
}

inline Monomial mono_gcd(const Monomial& a, const Monomial& b) {
    Monomial out;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        int c = atom_cmp(a[i].base, b[j].base);
        if (c < 0) {
            ++i;
        } else if (c > 0) {
            ++j;
        } else {
            Rat e = std::min(a[i].exp, b[j].exp);
            if (e != 0) out.push_back(Factor{a[i].base, e});
            ++i;
            ++j;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Univariate views and gcd
// ---------------------------------------------------------------------------

struct UniView {
    ExprPtr atom;
    Int scale;                   // exponents were multiplied by this
    std::map<long long, Poly> coeffs;  // v-degree -> coefficient polynomial

    long long degree() const { return coeffs.empty() ? -1 : coeffs.rbegin()->first; }
    const Poly& leading() const { return coeffs.rbegin()->second; }
};

inline std::vector<ExprPtr> poly_atoms(const Poly& p) {
    std::vector<ExprPtr> atoms;
    for (const auto& [m, c] : p)
        for (const auto& f : m) {
            bool found = false;
            for (const auto& a : atoms)
                if (expr_eq(a, f.base)) {
                    found = true;
                    break;
                }
            if (!found) atoms.push_back(f.base);
        }
    std::sort(atoms.begin(), atoms.end(),
              [](const ExprPtr& a, const ExprPtr& b) { return atom_cmp(a, b) < 0; });
    return atoms;
}

inline Int exp_denominator_lcm(const Poly& p, const ExprPtr& atom) {
    Int d = 1;
    for (const auto& [m, c] : p)
        for (const auto& f : m)
            if (expr_eq(f.base, atom)) d = int_lcm(d, rat_den(f.exp));
    return d;
}

inline UniView poly_view(const Poly& p, const ExprPtr& atom, const Int& scale) {
    UniView v;
    v.atom = atom;
    v.scale = scale;
    for (const auto& [m, c] : p) {
        long long deg = 0;
        Monomial rest;
        for (const auto& f : m) {
            if (expr_eq(f.base, atom)) {
                Rat scaled = f.exp * Rat(scale);
                if (!is_integer(scaled)) throw Error("poly_view: scale mismatch");
                deg = to_ll(rat_num(scaled));
            } else {
                rest.push_back(f);
            }
        }
        poly_accum(v.coeffs[deg], rest, c);
        if (v.coeffs[deg].empty()) v.coeffs.erase(deg);
    }
    return v;
}

inline Poly view_to_poly(const UniView& v) {
    Poly r;
    for (const auto& [deg, coeff] : v.coeffs) {
        Rat e = Rat(Int(deg), v.scale);
        for (const auto& [m, c] : coeff) {
            if (e == 0) {
                poly_accum(r, m, c);
                continue;
            }
            Monomial m2;
            bool inserted = false;
            for (const auto& f : m) {
                if (!inserted && atom_cmp(v.atom, f.base) < 0) {
                    m2.push_back(Factor{v.atom, e});
                    inserted = true;
                }
                m2.push_back(f);
            }
            if (!inserted) m2.push_back(Factor{v.atom, e});
            poly_accum(r, m2, c);
        }
    }
    return r;
}

inline Poly poly_gcd(const Poly& a, const Poly& b);
inline std::optional<Poly> poly_divide_exact(const Poly& a, const Poly& b);

namespace detail_poly {

inline Poly view_assemble(const ExprPtr& atom, const Int& scale,
                          const std::map<long long, Poly>& coeffs) {
    UniView v;
    v.atom = atom;
    v.scale = scale;
    v.coeffs = coeffs;
    return view_to_poly(v);
}

// content of a view: gcd of the coefficient polynomials
inline Poly view_content(const UniView& v) {
    Poly g;
    for (const auto& [deg, c] : v.coeffs) {
        g = poly_gcd(g, c);
        if (poly_is_one(g)) break;
    }
    return g;
}

inline UniView view_divide_content(const UniView& v, const Poly& cont) {
    UniView r;
    r.atom = v.atom;
    r.scale = v.scale;
    for (const auto& [deg, c] : v.coeffs) {
        auto q = poly_divide_exact(c, cont);
        if (!q) throw Error("view_divide_content: inexact");
        r.coeffs[deg] = *q;
    }
    return r;
}

// pseudo-remainder of A by B in the shared view variable
inline std::map<long long, Poly> pseudo_rem(std::map<long long, Poly> A,
                                            const std::map<long long, Poly>& B) {
    auto degree = [](const std::map<long long, Poly>& m) -> long long {
        return m.empty() ? -1 : m.rbegin()->first;
    };
    long long db = degree(B);
    const Poly& lcB = B.rbegin()->second;
    while (!A.empty() && degree(A) >= db) {
        long long da = degree(A);
        Poly lcA = A.rbegin()->second;
        // A := lcB*A - lcA*v^(da-db)*B
        std::map<long long, Poly> next;
        for (const auto& [d, c] : A) {
            Poly t = poly_mul(lcB, c);
            if (!t.empty()) {
                auto it = next.find(d);
                if (it == next.end())
                    next[d] = t;
                else {
                    it->second = poly_add(it->second, t);
                    if (it->second.empty()) next.erase(it);
                }
            }
        }
        for (const auto& [d, c] : B) {
            Poly t = poly_neg(poly_mul(lcA, c));
            long long dd = d + (da - db);
            auto it = next.find(dd);
            if (it == next.end())
                next[dd] = t;
            else {
                it->second = poly_add(it->second, t);
                if (it->second.empty()) next.erase(it);
            }
        }
        for (auto it = next.begin(); it != next.end();)
            it = it->second.empty() ? next.erase(it) : std::next(it);
        A = std::move(next);
    }
    return A;
}

}  // namespace detail_poly

inline Poly poly_gcd(const Poly& a, const Poly& b) {
    if (poly_is_zero(a)) return poly_is_zero(b) ? Poly{} : poly_primitive(b).second;
    if (poly_is_zero(b)) return poly_primitive(a).second;
    Monomial mca = poly_mono_content(a);
    Monomial mcb = poly_mono_content(b);
    Monomial mg = mono_gcd(mca, mcb);
    Poly A = poly_primitive(poly_divide_mono(a, mca)).second;
    Poly B = poly_primitive(poly_divide_mono(b, mcb)).second;

    Poly core;
    if (poly_is_const(A) || poly_is_const(B)) {
        core = poly_one();
    } else {
        auto atomsA = poly_atoms(A);
        auto atomsB = poly_atoms(B);
        ExprPtr v = atomsA.back();
        if (atom_cmp(atomsB.back(), v) > 0) v = atomsB.back();
        bool inA = false, inB = false;
        for (const auto& x : atomsA) inA |= expr_eq(x, v);
        for (const auto& x : atomsB) inB |= expr_eq(x, v);
        Int d = int_lcm(exp_denominator_lcm(A, v), exp_denominator_lcm(B, v));
        UniView va = poly_view(A, v, d);
        UniView vb = poly_view(B, v, d);
        if (!inA) {
            core = poly_gcd(A, detail_poly::view_content(vb));
        } else if (!inB) {
            core = poly_gcd(detail_poly::view_content(va), B);
        } else {
            Poly contA = detail_poly::view_content(va);
            Poly contB = detail_poly::view_content(vb);
            Poly c = poly_gcd(contA, contB);
            UniView pa = detail_poly::view_divide_content(va, contA);
            UniView pb = detail_poly::view_divide_content(vb, contB);
            // primitive PRS
            std::map<long long, Poly> R1 = pa.coeffs, R2 = pb.coeffs;
            if (pa.degree() < pb.degree()) std::swap(R1, R2);
            while (true) {
                if (R2.empty()) break;
                if (R2.rbegin()->first == 0) {
                    // remainder free of v: the gcd has no v-part
                    R1.clear();
                    R1[0] = poly_one();
                    break;
                }
                auto R = detail_poly::pseudo_rem(R1, R2);
                R1 = std::move(R2);
                R2 = std::move(R);
                if (!R2.empty()) {
                    // primitive part wrt v
                    UniView tmp;
                    tmp.atom = v;
                    tmp.scale = d;
                    tmp.coeffs = R2;
                    Poly cont = detail_poly::view_content(tmp);
                    tmp = detail_poly::view_divide_content(tmp, cont);
                    R2 = tmp.coeffs;
                }
            }
            Poly g = detail_poly::view_assemble(v, d, R1);
            g = poly_primitive(g).second;
            core = poly_mul(c, g);
        }
    }
    Poly result = core;
    if (!mg.empty()) {
        Poly shift;
        shift[mg] = Rat(1);
        result = poly_mul(result, shift);
    }
    return poly_primitive(result).second;
}

inline std::optional<Poly> poly_divide_exact(const Poly& a, const Poly& b) {
    if (poly_is_zero(b)) return std::nullopt;
    if (poly_is_zero(a)) return Poly{};
    if (b.size() == 1) {
        const auto& [mb, cb] = *b.begin();
        Poly r;
        try {
            r = poly_divide_mono(a, mb);
        } catch (const Error&) {
            return std::nullopt;
        }
        return poly_scale(r, Rat(1) / cb);
    }
    auto atomsB = poly_atoms(b);
    ExprPtr v = atomsB.back();
    Int d = int_lcm(exp_denominator_lcm(a, v), exp_denominator_lcm(b, v));
    UniView va = poly_view(a, v, d);
    UniView vb = poly_view(b, v, d);
    std::map<long long, Poly> rem = va.coeffs;
    std::map<long long, Poly> quo;
    long long db = vb.degree();
    const Poly& lcB = vb.leading();
    auto degree = [](const std::map<long long, Poly>& m) -> long long {
        return m.empty() ? -1 : m.rbegin()->first;
    };
    while (!rem.empty() && degree(rem) >= db) {
        long long da = degree(rem);
        auto q = poly_divide_exact(rem.rbegin()->second, lcB);
        if (!q) return std::nullopt;
        quo[da - db] = *q;
        for (const auto& [dd, cc] : vb.coeffs) {
            Poly t = poly_neg(poly_mul(*q, cc));
            long long target = dd + (da - db);
            auto it = rem.find(target);
            if (it == rem.end())
                rem[target] = t;
            else {
                it->second = poly_add(it->second, t);
                if (it->second.empty()) rem.erase(it);
            }
        }
        for (auto it = rem.begin(); it != rem.end();)
            it = it->second.empty() ? rem.erase(it) : std::next(it);
    }
    if (!rem.empty()) return std::nullopt;
    return detail_poly::view_assemble(v, d, quo);
}

// ---------------------------------------------------------------------------
// Rational functions
// ---------------------------------------------------------------------------

struct RatFun {
    Rat coef;   // all rational content and sign
    Poly num;   // primitive, positive leading coefficient
    Poly den;   // primitive, positive leading coefficient

    bool is_zero() const { return coef == 0; }
};

inline RatFun rf_zero() { return RatFun{Rat(0), poly_one(), poly_one()}; }
inline RatFun rf_const(const Rat& c) { return RatFun{c, poly_one(), poly_one()}; }

inline RatFun rf_normalize(const Rat& coef, Poly num, Poly den) {
    if (poly_is_zero(den)) throw DomainError("division by zero polynomial");
    if (coef == 0 || poly_is_zero(num)) return rf_zero();
    auto [cn, pn] = poly_primitive(num);
    auto [cd, pd] = poly_primitive(den);
    Rat c = coef * cn / cd;
    Poly g = poly_gcd(pn, pd);
    if (!poly_is_one(g)) {
        auto qn = poly_divide_exact(pn, g);
        auto qd = poly_divide_exact(pd, g);
        if (!qn || !qd) throw Error("rf_normalize: gcd division failed");
        pn = poly_primitive(*qn).second;
        pd = poly_primitive(*qd).second;
        // primitive parts of exact quotients of primitives keep content 1,
        // but re-extract defensively through poly_primitive above
    }
    return RatFun{c, std::move(pn), std::move(pd)};
}

inline RatFun rf_add(const RatFun& a, const RatFun& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    Poly g = poly_gcd(a.den, b.den);
    auto da = poly_divide_exact(a.den, g);
    auto db = poly_divide_exact(b.den, g);
    if (!da || !db) throw Error("rf_add: gcd does not divide");
    Poly num = poly_add(poly_scale(poly_mul(a.num, *db), a.coef),
                        poly_scale(poly_mul(b.num, *da), b.coef));
    Poly den = poly_mul(a.den, *db);
    return rf_normalize(Rat(1), std::move(num), std::move(den));
}

inline RatFun rf_neg(const RatFun& a) { return RatFun{-a.coef, a.num, a.den}; }

inline RatFun rf_sub(const RatFun& a, const RatFun& b) { return rf_add(a, rf_neg(b)); }

inline RatFun rf_mul(const RatFun& a, const RatFun& b) {
    if (a.is_zero() || b.is_zero()) return rf_zero();
    Poly g1 = poly_gcd(a.num, b.den);
    Poly g2 = poly_gcd(b.num, a.den);
    auto n1 = poly_divide_exact(a.num, g1);
    auto n2 = poly_divide_exact(b.num, g2);
    auto d1 = poly_divide_exact(a.den, g2);
    auto d2 = poly_divide_exact(b.den, g1);
    if (!n1 || !n2 || !d1 || !d2) throw Error("rf_mul: gcd does not divide");
    return rf_normalize(a.coef * b.coef, poly_mul(*n1, *n2), poly_mul(*d1, *d2));
}

inline RatFun rf_inv(const RatFun& a) {
    if (a.is_zero()) throw DomainError("division by zero");
    return rf_normalize(Rat(1) / a.coef, a.den, a.num);
}

inline RatFun rf_div(const RatFun& a, const RatFun& b) { return rf_mul(a, rf_inv(b)); }

inline bool rf_eq(const RatFun& a, const RatFun& b) {
    return a.coef == b.coef && a.num == b.num && a.den == b.den;
}

// ---------------------------------------------------------------------------
// Tree <-> RatFun
// ---------------------------------------------------------------------------

inline RatFun to_ratfun(const ExprPtr& e);
inline ExprPtr rebuild(const RatFun& rf);

inline ExprPtr make_num(const Rat& v) {
    auto n = std::make_shared<Expr>(Kind::Num);
    n->value = v;
    return n;
}

inline ExprPtr make_var(int id) {
    auto n = std::make_shared<Expr>(Kind::Var);
    n->var = id;
    return n;
}

inline ExprPtr make_pow_node(const ExprPtr& base, const Rat& e) {
    if (e == 1) return base;
    auto n = std::make_shared<Expr>(Kind::Pow);
    n->kids.push_back(base);
    n->expo = e;
    return n;
}

inline ExprPtr make_fun_node(Func f, const ExprPtr& arg) {
    auto n = std::make_shared<Expr>(Kind::Fun);
    n->fn = f;
    n->kids.push_back(arg);
    return n;
}

namespace detail_tree {

inline ExprPtr term_tree(const Rat& c, const Monomial& m) {
    std::vector<ExprPtr> factors;
    for (const auto& f : m) factors.push_back(make_pow_node(f.base, f.exp));
    if (factors.empty()) return make_num(c);
    if (c == 1 && factors.size() == 1) return factors[0];
    auto n = std::make_shared<Expr>(Kind::Mul);
    if (c != 1) n->kids.push_back(make_num(c));
    for (auto& f : factors) n->kids.push_back(std::move(f));
    if (n->kids.size() == 1) return n->kids[0];
    return n;
}

inline ExprPtr poly_tree(const Poly& p, const Rat& scale) {
    if (p.empty()) return make_num(Rat(0));
    std::vector<ExprPtr> terms;
    for (const auto& [m, c] : p) terms.push_back(term_tree(c * scale, m));
    if (terms.size() == 1) return terms[0];
    auto n = std::make_shared<Expr>(Kind::Add);
    n->kids = std::move(terms);
    return n;
}

}  // namespace detail_tree

inline ExprPtr rebuild(const RatFun& rf) {
    if (rf.is_zero()) return make_num(Rat(0));
    const bool den_trivial = poly_is_one(rf.den);
    if (den_trivial) return detail_tree::poly_tree(rf.num, rf.coef);

    std::vector<ExprPtr> kids;
    Rat coef = rf.coef;
    if (rf.num.size() == 1) {
        // fold single-term numerator into factor list
        const auto& [m, c] = *rf.num.begin();
        coef *= c;
        for (const auto& f : m) kids.push_back(make_pow_node(f.base, f.exp));
    } else {
        kids.push_back(detail_tree::poly_tree(rf.num, Rat(1)));
    }
    if (rf.den.size() == 1) {
        const auto& [m, c] = *rf.den.begin();
        coef /= c;
        for (const auto& f : m) kids.push_back(make_pow_node(f.base, -f.exp));
    } else {
        kids.push_back(make_pow_node(detail_tree::poly_tree(rf.den, Rat(1)), Rat(-1)));
    }
    if (coef != 1) kids.insert(kids.begin(), make_num(coef));
    if (kids.empty()) return make_num(Rat(1));
    if (kids.size() == 1) return kids[0];
    auto n = std::make_shared<Expr>(Kind::Mul);
    n->kids = std::move(kids);
    return n;
}

inline ExprPtr canonicalize(const ExprPtr& e) { return rebuild(to_ratfun(e)); }

// ---------------------------------------------------------------------------
// Powers at the RatFun level
// ---------------------------------------------------------------------------

inline RatFun rf_pow(const RatFun& a, const Rat& r);
inline Rat rat_pow_frac_const(const Rat& c, const Rat& r);

inline RatFun rf_atom(const ExprPtr& base, const Rat& exp) {
    if (exp > 0) {
        Poly p;
        p[Monomial{Factor{base, exp}}] = Rat(1);
        return RatFun{Rat(1), std::move(p), poly_one()};
    }
    Poly p;
    p[Monomial{Factor{base, -exp}}] = Rat(1);
    return RatFun{Rat(1), poly_one(), std::move(p)};
}

inline RatFun factor_pow(const ExprPtr& base, const Rat& e);

// p primitive with positive leading coefficient, nonzero
inline RatFun poly_frac_pow(const Poly& p, const Rat& r) {
    if (poly_is_one(p) || r == 0) return rf_const(Rat(1));
    if (p.size() == 1) {
        const auto& [m, c] = *p.begin();  // c == 1 by primitivity
        RatFun res = rf_const(rat_pow_frac_const(c, r));
        for (const auto& f : m) res = rf_mul(res, factor_pow(f.base, f.exp * r));
        return res;
    }
    Rat fl = rat_floor(r);
    Rat frac = r - fl;
    RatFun res = rf_const(Rat(1));
    long long n = to_ll(rat_num(fl));
    if (n > 0)
        res = RatFun{Rat(1), poly_pow_int(p, n), poly_one()};
    else if (n < 0)
        res = RatFun{Rat(1), poly_one(), poly_pow_int(p, -n)};
    if (frac != 0) {
        ExprPtr base = detail_tree::poly_tree(p, Rat(1));
        res = rf_mul(res, rf_atom(base, frac));
    }
    return res;
}

inline Rat rat_pow_frac_const(const Rat& c, const Rat& r) {
    // only called with c == 1 in poly_frac_pow; kept total anyway
    if (c == 1) return Rat(1);
    if (is_integer(r)) return rat_pow(c, to_ll(rat_num(r)));
    throw Error("rat_pow_frac_const: unexpected coefficient");
}

inline RatFun factor_pow(const ExprPtr& base, const Rat& e) {
    if (e == 0) return rf_const(Rat(1));
    if (base->kind == Kind::Num) {
        Monomial resid;
        Rat out = const_pow(base->value, e, resid);
        Poly p;
        mono_sort(resid);
        p[resid] = Rat(1);
        return rf_normalize(out, std::move(p), poly_one());
    }
    if (base->kind == Kind::Add) return poly_frac_pow(poly_of_base(base), e);
    if (base->kind == Kind::Fun && base->fn == Func::Abs) {
        Rat k2 = 2 * rat_floor(e / 2);
        Rat r = e - k2;
        RatFun res = rf_const(Rat(1));
        if (k2 != 0) res = rf_pow(to_ratfun(base->kids[0]), k2);
        if (r != 0) res = rf_mul(res, rf_atom(base, r));
        return res;
    }
    return rf_atom(base, e);
}

inline RatFun rf_pow(const RatFun& a, const Rat& r) {
    if (r == 0) return rf_const(Rat(1));
    if (a.is_zero()) {
        if (r < 0) throw DomainError("zero raised to a negative power");
        return rf_zero();
    }
    if (is_integer(r)) {
        long long n = to_ll(rat_num(r));
        if (n > 0)
            return rf_normalize(rat_pow(a.coef, n), poly_pow_int(a.num, n),
                                poly_pow_int(a.den, n));
        return rf_normalize(rat_pow(a.coef, n), poly_pow_int(a.den, -n),
                            poly_pow_int(a.num, -n));
    }
    Monomial resid;
    Rat out = const_pow(a.coef, r, resid);
    Poly p;
    mono_sort(resid);
    p[resid] = Rat(1);
    RatFun res = rf_normalize(out, std::move(p), poly_one());
    res = rf_mul(res, poly_frac_pow(a.num, r));
    res = rf_mul(res, poly_frac_pow(a.den, -r));
    return res;
}

// ---------------------------------------------------------------------------
// Transcendental applications
// ---------------------------------------------------------------------------

inline RatFun fun_rf(Func f, const ExprPtr& canonical_arg);

namespace detail_fun {

inline RatFun atom_rf(Func f, const ExprPtr& arg) { return rf_atom(make_fun_node(f, arg), Rat(1)); }

inline bool is_log(const ExprPtr& e) { return e->kind == Kind::Fun && e->fn == Func::Log; }
inline bool is_abs(const ExprPtr& e) { return e->kind == Kind::Fun && e->fn == Func::Abs; }
inline bool is_exp(const ExprPtr& e) { return e->kind == Kind::Fun && e->fn == Func::Exp; }

inline RatFun exp_rf(const ExprPtr& a) {
    if (is_zero_num(a)) return rf_const(Rat(1));
    if (is_log(a)) return to_ratfun(a->kids[0]);
    if (a->kind == Kind::Add) {
        RatFun res = rf_const(Rat(1));
        for (const auto& k : a->kids) res = rf_mul(res, fun_rf(Func::Exp, k));
        return res;
    }
    if (a->kind == Kind::Mul && a->kids.size() == 2 && a->kids[0]->kind == Kind::Num &&
        is_log(a->kids[1]))
        return rf_pow(to_ratfun(a->kids[1]->kids[0]), a->kids[0]->value);
    // exp(c*z) == exp(z)^c: strip the rational coefficient so that exp
    // arguments are unique up to scaling
    RatFun rf = to_ratfun(a);
    if (rf.coef != 1) {
        Rat c = rf.coef;
        rf.coef = Rat(1);
        return rf_pow(atom_rf(Func::Exp, rebuild(rf)), c);
    }
    return atom_rf(Func::Exp, a);
}

inline RatFun log_rf(const ExprPtr& a) {
    if (is_num(a, Rat(1))) return rf_zero();
    if (is_exp(a)) return to_ratfun(a->kids[0]);
    return atom_rf(Func::Log, a);
}

// |base|^e for a single factor
inline RatFun abs_factor(const ExprPtr& base, const Rat& e) {
    if (is_integer(e) && rat_num(e) % 2 == 0) return factor_pow(base, e);
    if (base->kind == Kind::Num) {
        if (base->value > 0) return factor_pow(base, e);
        // a (-1)^(p/q) radical: keep the whole power under the bar
        return rf_atom(make_fun_node(Func::Abs, make_pow_node(base, e)), Rat(1));
    }
    if (is_abs(base)) return factor_pow(base, e);
    ExprPtr wrapped = make_fun_node(Func::Abs, base);
    return factor_pow(wrapped, e);
}

inline RatFun abs_rf(const ExprPtr& a) {
    RatFun rf = to_ratfun(a);
    if (rf.is_zero()) return rf_zero();
    RatFun res = rf_const(rat_abs(rf.coef));
    auto take_side = [&](const Poly& p, bool denominator) {
        if (poly_is_one(p)) return;
        if (p.size() == 1) {
            for (const auto& f : p.begin()->first)
                res = rf_mul(res, abs_factor(f.base, denominator ? -f.exp : f.exp));
        } else {
            ExprPtr tree = detail_tree::poly_tree(p, Rat(1));
            res = rf_mul(res, rf_atom(make_fun_node(Func::Abs, tree),
                                      denominator ? Rat(-1) : Rat(1)));
        }
    };
    take_side(rf.num, false);
    take_side(rf.den, true);
    return res;
}

}  // namespace detail_fun

inline RatFun fun_rf(Func f, const ExprPtr& a) {
    switch (f) {
        case Func::Exp:
            return detail_fun::exp_rf(a);
        case Func::Log:
            return detail_fun::log_rf(a);
        case Func::Sin: {
            if (is_zero_num(a)) return rf_zero();
            RatFun rf = to_ratfun(a);
            if (rf.coef < 0) return rf_neg(fun_rf(Func::Sin, rebuild(rf_neg(rf))));
            return detail_fun::atom_rf(Func::Sin, a);
        }
        case Func::Cos: {
            if (is_zero_num(a)) return rf_const(Rat(1));
            RatFun rf = to_ratfun(a);
            if (rf.coef < 0) return fun_rf(Func::Cos, rebuild(rf_neg(rf)));
            return detail_fun::atom_rf(Func::Cos, a);
        }
        case Func::Abs: {
            if (a->kind == Kind::Num) return rf_const(rat_abs(a->value));
            if (detail_fun::is_abs(a)) return to_ratfun(a);
            return detail_fun::abs_rf(a);
        }
    }
    throw Error("unknown function");
}

// ---------------------------------------------------------------------------
// The canonicalizer
// ---------------------------------------------------------------------------

inline Poly poly_of_base(const ExprPtr& base) {
    thread_local std::map<const Expr*, std::pair<ExprPtr, Poly>> cache;
    auto it = cache.find(base.get());
    if (it != cache.end()) return it->second.second;
    RatFun rf = to_ratfun(base);
    if (!poly_is_one(rf.den)) throw Error("poly_of_base: compound atom with denominator");
    Poly p = poly_scale(rf.num, rf.coef);
    cache.emplace(base.get(), std::make_pair(base, p));
    return p;
}

inline RatFun to_ratfun(const ExprPtr& e) {
    switch (e->kind) {
        case Kind::Num:
            return rf_const(e->value);
        case Kind::Var:
            return rf_atom(make_var(e->var), Rat(1));
        case Kind::Sym: {
            auto n = std::make_shared<Expr>(*e);
            n->hash_cache = 0;
            return rf_atom(n, Rat(1));
        }
        case Kind::Add: {
            RatFun r = rf_zero();
            for (const auto& k : e->kids) r = rf_add(r, to_ratfun(k));
            return r;
        }
        case Kind::Mul: {
            RatFun r = rf_const(Rat(1));
            for (const auto& k : e->kids) r = rf_mul(r, to_ratfun(k));
            return r;
        }
        case Kind::Pow:
            return rf_pow(to_ratfun(e->kids[0]), e->expo);
        case Kind::Fun:
            return fun_rf(e->fn, canonicalize(e->kids[0]));
    }
    throw Error("unknown node kind");
}

// ---------------------------------------------------------------------------
// Public constructors.  All results are canonical trees.
// ---------------------------------------------------------------------------

inline ExprPtr num(const Rat& v) { return make_num(v); }
inline ExprPtr num(long long n) { return make_num(Rat(n)); }
inline ExprPtr num(long long p, long long q) { return rebuild(rf_const(make_rat(p, q))); }

inline ExprPtr var(int id) { return make_var(id); }
inline ExprPtr var(const std::string& name) { return make_var(var_registry().intern(name)); }

inline ExprPtr vx() { return make_var(VAR_X); }
inline ExprPtr vu() { return make_var(VAR_U); }
inline ExprPtr vux() { return make_var(VAR_UX); }

inline ExprPtr add(const ExprPtr& a, const ExprPtr& b) {
    return rebuild(rf_add(to_ratfun(a), to_ratfun(b)));
}

inline ExprPtr add(std::initializer_list<ExprPtr> xs) {
    RatFun r = rf_zero();
    for (const auto& x : xs) r = rf_add(r, to_ratfun(x));
    return rebuild(r);
}

inline ExprPtr sub(const ExprPtr& a, const ExprPtr& b) {
    return rebuild(rf_sub(to_ratfun(a), to_ratfun(b)));
}

inline ExprPtr neg(const ExprPtr& a) { return rebuild(rf_neg(to_ratfun(a))); }

inline ExprPtr mul(const ExprPtr& a, const ExprPtr& b) {
    return rebuild(rf_mul(to_ratfun(a), to_ratfun(b)));
}

inline ExprPtr mul(std::initializer_list<ExprPtr> xs) {
    RatFun r = rf_const(Rat(1));
    for (const auto& x : xs) r = rf_mul(r, to_ratfun(x));
    return rebuild(r);
}

inline ExprPtr div(const ExprPtr& a, const ExprPtr& b) {
    return rebuild(rf_div(to_ratfun(a), to_ratfun(b)));
}

inline ExprPtr pow(const ExprPtr& a, const Rat& r) { return rebuild(rf_pow(to_ratfun(a), r)); }
inline ExprPtr pow(const ExprPtr& a, long long n) { return pow(a, Rat(n)); }
inline ExprPtr pow(const ExprPtr& a, long long p, long long q) { return pow(a, make_rat(p, q)); }

inline ExprPtr sqrt_of(const ExprPtr& a) { return pow(a, make_rat(1, 2)); }

inline ExprPtr fun(Func f, const ExprPtr& a) { return rebuild(fun_rf(f, canonicalize(a))); }
inline ExprPtr exp_of(const ExprPtr& a) { return fun(Func::Exp, a); }
inline ExprPtr log_of(const ExprPtr& a) { return fun(Func::Log, a); }
inline ExprPtr sin_of(const ExprPtr& a) { return fun(Func::Sin, a); }
inline ExprPtr cos_of(const ExprPtr& a) { return fun(Func::Cos, a); }
inline ExprPtr abs_of(const ExprPtr& a) { return fun(Func::Abs, a); }

inline ExprPtr sym(const std::string& name, std::vector<int> deps,
                   std::vector<unsigned> orders = {}) {
    auto n = std::make_shared<Expr>(Kind::Sym);
    n->sym_name = name;
    n->sym_deps = std::move(deps);
    if (orders.empty()) orders.assign(n->sym_deps.size(), 0u);
    n->sym_orders = std::move(orders);
    if (n->sym_orders.size() != n->sym_deps.size())
        throw Error("sym: orders/deps size mismatch");
    return n;
}

// structural equality after canonicalization of both sides
inline bool equal(const ExprPtr& a, const ExprPtr& b) {
    return rf_eq(to_ratfun(a), to_ratfun(b));
}

}  // namespace odeq
