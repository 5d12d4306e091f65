#pragma once

#include <map>

#include "odeq/canon.hpp"

namespace odeq {

// Partial derivative with respect to a declared variable.  Results are
// canonical.
inline ExprPtr differentiate(const ExprPtr& e, int v) {
    switch (e->kind) {
        case Kind::Num:
            return num(0);
        case Kind::Var:
            return num(e->var == v ? 1 : 0);
        case Kind::Add: {
            RatFun acc = rf_zero();
            for (const auto& k : e->kids) acc = rf_add(acc, to_ratfun(differentiate(k, v)));
            return rebuild(acc);
        }
        case Kind::Mul: {
            RatFun acc = rf_zero();
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                RatFun part = to_ratfun(differentiate(e->kids[i], v));
                if (part.is_zero()) continue;
                for (std::size_t j = 0; j < e->kids.size(); ++j)
                    if (j != i) part = rf_mul(part, to_ratfun(e->kids[j]));
                acc = rf_add(acc, part);
            }
            return rebuild(acc);
        }
        case Kind::Pow: {
            ExprPtr db = differentiate(e->kids[0], v);
            if (is_zero_num(db)) return num(0);
            RatFun r = rf_mul(rf_const(e->expo), to_ratfun(db));
            r = rf_mul(r, rf_pow(to_ratfun(e->kids[0]), e->expo - 1));
            return rebuild(r);
        }
        case Kind::Fun: {
            const ExprPtr& a = e->kids[0];
            ExprPtr da = differentiate(a, v);
            if (is_zero_num(da)) return num(0);
            switch (e->fn) {
                case Func::Exp:
                    return mul(exp_of(a), da);
                case Func::Log:
                    return div(da, a);
                case Func::Sin:
                    return mul(cos_of(a), da);
                case Func::Cos:
                    return neg(mul(sin_of(a), da));
                case Func::Abs:
                    // d|a| = a/|a| da on the domain where a != 0
                    return mul({a, pow(abs_of(a), -1), da});
            }
            throw Error("unknown function");
        }
        case Kind::Sym: {
            for (std::size_t i = 0; i < e->sym_deps.size(); ++i) {
                if (e->sym_deps[i] == v) {
                    auto orders = e->sym_orders;
                    orders[i] += 1;
                    return sym(e->sym_name, e->sym_deps, orders);
                }
            }
            return num(0);
        }
    }
    throw Error("unknown node kind");
}

inline ExprPtr differentiate(const ExprPtr& e, int v, unsigned times) {
    ExprPtr r = e;
    for (unsigned i = 0; i < times; ++i) r = differentiate(r, v);
    return r;
}

using Bindings = std::map<int, ExprPtr>;

// Simultaneous substitution followed by canonicalization.
inline ExprPtr substitute(const ExprPtr& e, const Bindings& b) {
    switch (e->kind) {
        case Kind::Num:
            return e;
        case Kind::Var: {
            auto it = b.find(e->var);
            return it == b.end() ? e : it->second;
        }
        case Kind::Add: {
            RatFun acc = rf_zero();
            for (const auto& k : e->kids) acc = rf_add(acc, to_ratfun(substitute(k, b)));
            return rebuild(acc);
        }
        case Kind::Mul: {
            RatFun acc = rf_const(Rat(1));
            for (const auto& k : e->kids) acc = rf_mul(acc, to_ratfun(substitute(k, b)));
            return rebuild(acc);
        }
        case Kind::Pow:
            return pow(substitute(e->kids[0], b), e->expo);
        case Kind::Fun:
            return fun(e->fn, substitute(e->kids[0], b));
        case Kind::Sym:
            for (int d : e->sym_deps)
                if (b.count(d))
                    throw Error("cannot substitute into uninterpreted symbol " + e->sym_name);
            return e;
    }
    throw Error("unknown node kind");
}

inline ExprPtr substitute(const ExprPtr& e, int v, const ExprPtr& to) {
    return substitute(e, Bindings{{v, to}});
}

}  // namespace odeq
