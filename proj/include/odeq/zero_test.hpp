#pragma once

#include <random>

#include "odeq/canon.hpp"

namespace odeq {

enum class Decision { Zero, NonZero, Unknown };

inline const char* decision_name(Decision d) {
    switch (d) {
        case Decision::Zero: return "Zero";
        case Decision::NonZero: return "NonZero";
        case Decision::Unknown: return "Unknown";
    }
    return "?";
}

// An expression is in the decidable rational class when it has no
// transcendental nodes, no uninterpreted symbols and no fractional powers;
// there the canonical form is a faithful quotient of polynomials.
inline bool is_rational_class(const ExprPtr& e) {
    switch (e->kind) {
        case Kind::Num:
        case Kind::Var:
            return true;
        case Kind::Fun:
        case Kind::Sym:
            return false;
        case Kind::Pow:
            return is_integer(e->expo) && is_rational_class(e->kids[0]);
        case Kind::Add:
        case Kind::Mul:
            for (const auto& k : e->kids)
                if (!is_rational_class(k)) return false;
            return true;
    }
    return false;
}

struct ZeroTestOptions {
    int probes = 32;
    double tolerance = 1e-9;
    double box = 3.0;
    unsigned long seed = 20240401;
};

// Semidecision: Zero only via the canonical form; NonZero via a sound probe;
// otherwise Unknown.
inline Decision is_zero(const ExprPtr& e, const ZeroTestOptions& opt = {}) {
    ExprPtr c = canonicalize(e);
    if (is_zero_num(c)) return Decision::Zero;
    if (is_rational_class(c)) return Decision::NonZero;
    auto vars = free_vars(c);
    if (vars.empty()) {
        // constant transcendental expression, e.g. exp(1): probe once
        EvalResult r = eval(c, {});
        if (r.ok() && std::fabs(r.get()) > opt.tolerance) return Decision::NonZero;
        return Decision::Unknown;
    }
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> dist(-opt.box, opt.box);
    int defined = 0;
    for (int i = 0; i < opt.probes; ++i) {
        Valuation val;
        for (int v : vars) val[v] = dist(rng);
        EvalResult r = eval(c, val);
        if (!r.ok()) continue;
        ++defined;
        if (std::isfinite(r.get()) && std::fabs(r.get()) > opt.tolerance) return Decision::NonZero;
    }
    return Decision::Unknown;
}

inline bool definitely_zero(const ExprPtr& e) { return is_zero(e) == Decision::Zero; }
inline bool definitely_nonzero(const ExprPtr& e) { return is_zero(e) == Decision::NonZero; }

}  // namespace odeq
