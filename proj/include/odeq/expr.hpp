#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "odeq/error.hpp"
#include "odeq/rational.hpp"

namespace odeq {

// ---------------------------------------------------------------------------
// Variable registry: interned names, ids stable per process.  The jet-space
// variables x, u, u' occupy ids 0, 1, 2 so that the monomial order follows
// x < u < u'.
// ---------------------------------------------------------------------------

class VarRegistry {
public:
    VarRegistry() {
        intern("x");
        intern("u");
        intern("u'");
    }

    int intern(const std::string& name) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = ids_.find(name);
        if (it != ids_.end()) return it->second;
        int id = static_cast<int>(names_.size());
        names_.push_back(name);
        ids_[name] = id;
        return id;
    }

    std::optional<int> lookup(const std::string& name) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = ids_.find(name);
        if (it == ids_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& name(int id) const {
        std::lock_guard<std::mutex> lock(mutex_);
        return names_.at(static_cast<std::size_t>(id));
    }

private:
    mutable std::mutex mutex_;
    std::vector<std::string> names_;
    std::map<std::string, int> ids_;
};

inline VarRegistry& var_registry() {
    static VarRegistry reg;
    return reg;
}

inline constexpr int VAR_X = 0;
inline constexpr int VAR_U = 1;
inline constexpr int VAR_UX = 2;

// ---------------------------------------------------------------------------
// Expression nodes.  Trees are immutable; construction goes through the
// canonicalizing builders in canon.hpp.
// ---------------------------------------------------------------------------

enum class Kind { Num, Var, Fun, Sym, Pow, Mul, Add };

enum class Func { Exp, Log, Sin, Cos, Abs };

inline const char* func_name(Func f) {
    switch (f) {
        case Func::Exp: return "exp";
        case Func::Log: return "log";
        case Func::Sin: return "sin";
        case Func::Cos: return "cos";
        case Func::Abs: return "abs";
    }
    return "?";
}

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

class Expr {
public:
    Kind kind;
    Rat value;                  // Num
    int var = -1;               // Var
    Func fn = Func::Exp;        // Fun
    Rat expo;                   // Pow exponent
    std::vector<ExprPtr> kids;  // Fun/Pow: [arg]; Mul/Add: children

    // Uninterpreted function symbol with tracked partial-derivative orders.
    std::string sym_name;
    std::vector<int> sym_deps;
    std::vector<unsigned> sym_orders;

    mutable std::size_t hash_cache = 0;

    explicit Expr(Kind k) : kind(k) {}
};

inline std::size_t hash_mix(std::size_t a, std::size_t b) {
    return a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
}

inline std::size_t expr_hash(const ExprPtr& e);

inline std::size_t expr_hash_compute(const Expr& n) {
    std::size_t h = static_cast<std::size_t>(n.kind) * 1000003u;
    switch (n.kind) {
        case Kind::Num:
            h = hash_mix(h, std::hash<std::string>{}(rat_to_string(n.value)));
            break;
        case Kind::Var:
            h = hash_mix(h, static_cast<std::size_t>(n.var));
            break;
        case Kind::Fun:
            h = hash_mix(h, static_cast<std::size_t>(n.fn));
            h = hash_mix(h, expr_hash(n.kids[0]));
            break;
        case Kind::Sym:
            h = hash_mix(h, std::hash<std::string>{}(n.sym_name));
            for (int d : n.sym_deps) h = hash_mix(h, static_cast<std::size_t>(d));
            for (unsigned o : n.sym_orders) h = hash_mix(h, o);
            break;
        case Kind::Pow:
            h = hash_mix(h, expr_hash(n.kids[0]));
            h = hash_mix(h, std::hash<std::string>{}(rat_to_string(n.expo)));
            break;
        case Kind::Mul:
        case Kind::Add:
            for (const auto& k : n.kids) h = hash_mix(h, expr_hash(k));
            break;
    }
    if (h == 0) h = 1;
    return h;
}

inline std::size_t expr_hash(const ExprPtr& e) {
    if (e->hash_cache == 0) e->hash_cache = expr_hash_compute(*e);
    return e->hash_cache;
}

// Total structural order; 0 on equality.
inline int expr_cmp(const ExprPtr& a, const ExprPtr& b) {
    if (a.get() == b.get()) return 0;
    if (a->kind != b->kind) return a->kind < b->kind ? -1 : 1;
    switch (a->kind) {
        case Kind::Num:
            if (a->value == b->value) return 0;
            return a->value < b->value ? -1 : 1;
        case Kind::Var:
            if (a->var == b->var) return 0;
            return a->var < b->var ? -1 : 1;
        case Kind::Fun:
            if (a->fn != b->fn) return a->fn < b->fn ? -1 : 1;
            return expr_cmp(a->kids[0], b->kids[0]);
        case Kind::Sym: {
            if (int c = a->sym_name.compare(b->sym_name)) return c < 0 ? -1 : 1;
            if (a->sym_deps != b->sym_deps) return a->sym_deps < b->sym_deps ? -1 : 1;
            if (a->sym_orders != b->sym_orders) return a->sym_orders < b->sym_orders ? -1 : 1;
            return 0;
        }
        case Kind::Pow: {
            if (int c = expr_cmp(a->kids[0], b->kids[0])) return c;
            if (a->expo == b->expo) return 0;
            return a->expo < b->expo ? -1 : 1;
        }
        case Kind::Mul:
        case Kind::Add: {
            if (a->kids.size() != b->kids.size())
                return a->kids.size() < b->kids.size() ? -1 : 1;
            for (std::size_t i = 0; i < a->kids.size(); ++i)
                if (int c = expr_cmp(a->kids[i], b->kids[i])) return c;
            return 0;
        }
    }
    return 0;
}

inline bool expr_eq(const ExprPtr& a, const ExprPtr& b) { return expr_cmp(a, b) == 0; }

inline bool is_num(const ExprPtr& e) { return e->kind == Kind::Num; }
inline bool is_num(const ExprPtr& e, const Rat& v) { return e->kind == Kind::Num && e->value == v; }
inline bool is_zero_num(const ExprPtr& e) { return is_num(e, Rat(0)); }

// ---------------------------------------------------------------------------
// Free variables
// ---------------------------------------------------------------------------

inline void collect_vars(const ExprPtr& e, std::set<int>& out) {
    switch (e->kind) {
        case Kind::Num: return;
        case Kind::Var: out.insert(e->var); return;
        case Kind::Sym:
            for (int d : e->sym_deps) out.insert(d);
            return;
        default:
            for (const auto& k : e->kids) collect_vars(k, out);
    }
}

inline std::set<int> free_vars(const ExprPtr& e) {
    std::set<int> s;
    collect_vars(e, s);
    return s;
}

inline bool depends_on(const ExprPtr& e, int var) {
    switch (e->kind) {
        case Kind::Num: return false;
        case Kind::Var: return e->var == var;
        case Kind::Sym:
            for (int d : e->sym_deps)
                if (d == var) return true;
            return false;
        default:
            for (const auto& k : e->kids)
                if (depends_on(k, var)) return true;
            return false;
    }
}

// ---------------------------------------------------------------------------
// Numeric evaluation
// ---------------------------------------------------------------------------

using Valuation = std::map<int, double>;

struct EvalResult {
    std::optional<double> value;
    ExprPtr offending;  // set when undefined

    bool ok() const { return value.has_value(); }
    double get() const { return *value; }
};

double eval_or_throw(const ExprPtr& e, const Valuation& val);

inline EvalResult eval(const ExprPtr& e, const Valuation& val) {
    try {
        return EvalResult{eval_or_throw(e, val), nullptr};
    } catch (const DomainError&) {
        return EvalResult{std::nullopt, e};
    }
}

namespace detail {
inline double eval_pow(double base, const Rat& expo, const ExprPtr& where) {
    long long q = to_ll(rat_den(expo));
    if (base == 0.0) {
        if (expo < 0) throw DomainError("division by zero in " + std::to_string(0));
        return 0.0;
    }
    if (base < 0.0) {
        if (q % 2 == 0) throw DomainError("even root of a negative value");
        // odd root of a negative base: sign follows the numerator parity
        long long p = to_ll(rat_num(expo) % 2);
        double mag = std::pow(-base, to_double(expo));
        return (p % 2 == 0) ? mag : -mag;
    }
    (void)where;
    return std::pow(base, to_double(expo));
}
}  // namespace detail

inline double eval_or_throw(const ExprPtr& e, const Valuation& val) {
    switch (e->kind) {
        case Kind::Num:
            return to_double(e->value);
        case Kind::Var: {
            auto it = val.find(e->var);
            if (it == val.end())
                throw DomainError("valuation does not cover variable " +
                                  var_registry().name(e->var));
            return it->second;
        }
        case Kind::Add: {
            double s = 0;
            for (const auto& k : e->kids) s += eval_or_throw(k, val);
            return s;
        }
        case Kind::Mul: {
            double p = 1;
            for (const auto& k : e->kids) p *= eval_or_throw(k, val);
            return p;
        }
        case Kind::Pow: {
            double b = eval_or_throw(e->kids[0], val);
            if (b == 0.0 && e->expo < 0) throw DomainError("division by zero");
            return detail::eval_pow(b, e->expo, e);
        }
        case Kind::Fun: {
            double a = eval_or_throw(e->kids[0], val);
            switch (e->fn) {
                case Func::Exp: return std::exp(a);
                case Func::Log:
                    if (a <= 0) throw DomainError("log of a non-positive value");
                    return std::log(a);
                case Func::Sin: return std::sin(a);
                case Func::Cos: return std::cos(a);
                case Func::Abs: return std::fabs(a);
            }
            throw DomainError("unknown function");
        }
        case Kind::Sym:
            throw DomainError("cannot evaluate uninterpreted symbol " + e->sym_name);
    }
    throw DomainError("unknown node");
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

std::string to_string(const ExprPtr& e);

namespace detail {

enum class Prec { Sum = 0, Product = 1, Unary = 2, Power = 3, Atom = 4 };

inline std::string paren(const std::string& s, bool need) {
    return need ? "(" + s + ")" : s;
}

inline std::string print_expr(const ExprPtr& e, Prec ctx);

inline std::string print_num(const Rat& v, Prec ctx) {
    std::string s = rat_to_string(v);
    bool need = (!is_integer(v) && ctx >= Prec::Product) || (v < 0 && ctx >= Prec::Product);
    return paren(s, need);
}

// Splits a product's children into numerator and denominator factors.
inline std::string print_mul(const Expr& n, Prec ctx) {
    std::vector<std::string> num, den;
    Rat coeff(1);
    bool have_coeff = false;
    for (const auto& k : n.kids) {
        if (k->kind == Kind::Num) {
            coeff = k->value;
            have_coeff = true;
        } else if (k->kind == Kind::Pow && k->expo < 0) {
            auto flipped = std::make_shared<Expr>(*k);
            flipped->expo = -k->expo;
            flipped->hash_cache = 0;
            ExprPtr f = flipped;
            if (f->expo == 1) f = k->kids[0];
            den.push_back(print_expr(f, Prec::Power));
        } else {
            num.push_back(print_expr(k, Prec::Product));
        }
    }
    std::string sign;
    if (have_coeff) {
        Rat c = coeff;
        if (c < 0) {
            sign = "-";
            c = -c;
        }
        if (rat_den(c) != 1) den.push_back(rat_den(c).str());
        if (rat_num(c) != 1 || num.empty()) num.insert(num.begin(), rat_num(c).str());
    }
    std::string res = sign;
    for (std::size_t i = 0; i < num.size(); ++i) {
        if (i) res += "*";
        res += num[i];
    }
    if (num.empty()) res += "1";
    if (!den.empty()) {
        res += "/";
        if (den.size() == 1)
            res += den[0];
        else {
            res += "(";
            for (std::size_t i = 0; i < den.size(); ++i) {
                if (i) res += "*";
                res += den[i];
            }
            res += ")";
        }
    }
    bool need = ctx >= Prec::Power || (!sign.empty() && ctx >= Prec::Product);
    return paren(res, need);
}

inline std::string print_expr(const ExprPtr& e, Prec ctx) {
    switch (e->kind) {
        case Kind::Num:
            return print_num(e->value, ctx);
        case Kind::Var:
            return var_registry().name(e->var);
        case Kind::Sym: {
            std::string s = e->sym_name;
            std::string subs;
            for (std::size_t i = 0; i < e->sym_orders.size(); ++i)
                for (unsigned k = 0; k < e->sym_orders[i]; ++k)
                    subs += var_registry().name(e->sym_deps[i]);
            if (!subs.empty()) s += "_" + subs;
            return s;
        }
        case Kind::Fun:
            return std::string(func_name(e->fn)) + "(" + print_expr(e->kids[0], Prec::Sum) + ")";
        case Kind::Pow: {
            if (e->expo < 0) {
                auto flipped = std::make_shared<Expr>(*e);
                flipped->expo = -e->expo;
                flipped->hash_cache = 0;
                ExprPtr f = flipped;
                if (f->expo == 1) f = e->kids[0];
                return paren("1/" + print_expr(f, Prec::Power), ctx >= Prec::Power);
            }
            std::string b = print_expr(e->kids[0], Prec::Power);
            std::string x = is_integer(e->expo) ? rat_num(e->expo).str()
                                                : "(" + rat_to_string(e->expo) + ")";
            return b + "^" + x;
        }
        case Kind::Mul:
            return print_mul(*e, ctx);
        case Kind::Add: {
            std::string res;
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                std::string part = print_expr(e->kids[i], Prec::Sum);
                if (i == 0) {
                    res = part;
                } else if (!part.empty() && part[0] == '-') {
                    res += " - " + part.substr(1);
                } else {
                    res += " + " + part;
                }
            }
            return paren(res, ctx >= Prec::Product);
        }
    }
    return "?";
}

}  // namespace detail

inline std::string to_string(const ExprPtr& e) {
    return detail::print_expr(e, detail::Prec::Sum);
}

}  // namespace odeq
