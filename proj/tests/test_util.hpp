#pragma once

// Shared helpers for the test suites: reproducible random rational
// expressions and valuations.

#include <random>
#include <vector>

#include "odeq/calculus.hpp"
#include "odeq/parser.hpp"
#include "odeq/zero_test.hpp"

namespace odeq_test {

using namespace odeq;

class RandomExpr {
public:
    RandomExpr(unsigned long seed, std::vector<int> vars) : rng_(seed), vars_(std::move(vars)) {}

    ExprPtr rational(int depth = 3) { return gen(depth); }

    Valuation point(double lo = -2.0, double hi = 2.0) {
        std::uniform_real_distribution<double> d(lo, hi);
        Valuation v;
        for (int id : vars_) v[id] = d(rng_);
        return v;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    ExprPtr gen(int depth) {
        std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 6);
        switch (pick(rng_)) {
            case 0: {
                std::uniform_int_distribution<int> c(-6, 6);
                int p = c(rng_);
                int q = std::abs(c(rng_)) + 1;
                return num(p, q);
            }
            case 1: {
                std::uniform_int_distribution<std::size_t> v(0, vars_.size() - 1);
                return var(vars_[v(rng_)]);
            }
            case 2:
                return add(gen(depth - 1), gen(depth - 1));
            case 3:
                return sub(gen(depth - 1), gen(depth - 1));
            case 4:
                return mul(gen(depth - 1), gen(depth - 1));
            case 5: {
                ExprPtr d = gen(depth - 1);
                if (is_zero_num(d)) d = add(d, num(1));
                return div(gen(depth - 1), d);
            }
            default: {
                std::uniform_int_distribution<int> e(-3, 3);
                int k = e(rng_);
                if (k == 0) k = 2;
                ExprPtr b = gen(depth - 1);
                if (is_zero_num(b) && k < 0) b = add(b, num(1));
                return pow(b, k);
            }
        }
    }

    std::mt19937_64 rng_;
    std::vector<int> vars_;
};

// Central finite difference with one Richardson step.
inline std::optional<double> central_diff(const ExprPtr& e, const Valuation& at, int v,
                                          double h) {
    auto shift = [&](double dh) -> std::optional<double> {
        Valuation p = at;
        p[v] += dh;
        EvalResult r = eval(e, p);
        if (!r.ok() || !std::isfinite(r.get())) return std::nullopt;
        return r.get();
    };
    auto fd = [&](double hh) -> std::optional<double> {
        auto a = shift(hh), b = shift(-hh);
        if (!a || !b) return std::nullopt;
        return (*a - *b) / (2 * hh);
    };
    auto f1 = fd(h), f2 = fd(h / 2);
    if (!f1 || !f2) return std::nullopt;
    return (4 * *f2 - *f1) / 3;
}

}  // namespace odeq_test
