#include <catch2/catch_amalgamated.hpp>

#include "test_util.hpp"

using namespace odeq;

TEST_CASE("rational constants normalize") {
    CHECK(equal(num(4, 6), num(2, 3)));
    CHECK(equal(add(num(1, 2), num(1, 3)), num(5, 6)));
    CHECK(to_string(num(-3, 2)) == "-3/2");
}

TEST_CASE("canonical polynomial arithmetic") {
    ExprPtr x = vx(), u = vu();
    ExprPtr e = sub(mul(add(x, u), sub(x, u)), sub(mul(x, x), mul(u, u)));
    CHECK(is_zero_num(e));

    ExprPtr q = div(sub(mul(x, x), mul(u, u)), sub(x, u));
    CHECK(equal(q, add(x, u)));

    // binomial square cancellation
    ExprPtr ux = vux();
    ExprPtr lhs = pow(add(ux, num(1)), 2);
    ExprPtr r = sub(sub(sub(lhs, pow(ux, 2)), mul(num(2), ux)), num(1));
    CHECK(is_zero_num(r));
}

TEST_CASE("canonicalization is idempotent and stable under reparse") {
    odeq_test::RandomExpr gen(1234, {VAR_X, VAR_U, VAR_UX});
    for (int i = 0; i < 1000; ++i) {
        ExprPtr e;
        try {
            e = gen.rational(3);
        } catch (const DomainError&) {
            continue;  // division by structural zero inside the generator
        }
        ExprPtr c1 = canonicalize(e);
        ExprPtr c2 = canonicalize(c1);
        REQUIRE(expr_eq(c1, c2));
    }
}

TEST_CASE("printer output reparses to the same expression") {
    odeq_test::RandomExpr gen(777, {VAR_X, VAR_U, VAR_UX});
    for (int i = 0; i < 300; ++i) {
        ExprPtr e;
        try {
            e = gen.rational(3);
        } catch (const DomainError&) {
            continue;
        }
        std::string s = to_string(e);
        INFO(s);
        ExprPtr back = parse(s);
        REQUIRE(expr_eq(canonicalize(back), canonicalize(e)));
    }
}

TEST_CASE("derivatives: named examples") {
    ExprPtr ux = vux();
    CHECK(equal(differentiate(pow(ux, 4), VAR_UX), mul(num(4), pow(ux, 3))));

    // chain rule through an uninterpreted symbol
    ExprPtr B = sym("B", {VAR_X, VAR_U});
    ExprPtr e = exp_of(neg(B));
    ExprPtr d = differentiate(e, VAR_U);
    ExprPtr Bu = sym("B", {VAR_X, VAR_U}, {0, 1});
    CHECK(equal(d, neg(mul(Bu, exp_of(neg(B))))));

    // d^5/du'^5 (1/u') = -120 u'^-6
    ExprPtr f = pow(ux, -1);
    CHECK(equal(differentiate(f, VAR_UX, 5), mul(num(-120), pow(ux, -6))));
}

TEST_CASE("derivative matches central finite differences") {
    odeq_test::RandomExpr gen(42, {VAR_X, VAR_U, VAR_UX});
    int done = 0, attempts = 0;
    while (done < 1000 && attempts < 20000) {
        ++attempts;
        ExprPtr e;
        try {
            e = gen.rational(3);
        } catch (const DomainError&) {
            continue;
        }
        int v = VAR_X;
        ExprPtr de;
        try {
            de = differentiate(e, v);
        } catch (const DomainError&) {
            continue;
        }
        Valuation p = gen.point();
        EvalResult val = eval(de, p);
        if (!val.ok() || !std::isfinite(val.get()) || std::fabs(val.get()) > 1e6) continue;
        auto fd = odeq_test::central_diff(e, p, v, 1e-4 * (1 + std::fabs(p[v])));
        if (!fd || !std::isfinite(*fd)) continue;
        // reject points where the function itself is stiff enough that the
        // finite difference is unreliable
        if (std::fabs(*fd) > 1e6) continue;
        double err = std::fabs(val.get() - *fd);
        if (err > 1e-6 * (1 + std::fabs(val.get()))) {
            INFO(to_string(e));
            INFO("x=" << p[VAR_X] << " u=" << p[VAR_U] << " ux=" << p[VAR_UX]);
            REQUIRE(err <= 1e-6 * (1 + std::fabs(val.get())));
        }
        ++done;
    }
    REQUIRE(done == 1000);
}

TEST_CASE("zero test") {
    ExprPtr ux = vux();
    // (u'+1)^2 - u'^2 - 2u' - 1 == 0
    ExprPtr e = sub(sub(sub(pow(add(ux, num(1)), 2), pow(ux, 2)), mul(num(2), ux)), num(1));
    CHECK(is_zero(e) == Decision::Zero);

    // 5 F4 F6 - 6 F5^2 for F = exp(u') is -exp(2u')
    ExprPtr F = exp_of(ux);
    ExprPtr F4 = differentiate(F, VAR_UX, 4);
    ExprPtr F5 = differentiate(F, VAR_UX, 5);
    ExprPtr F6 = differentiate(F, VAR_UX, 6);
    ExprPtr W = sub(mul({num(5), F4, F6}), mul(num(6), pow(F5, 2)));
    CHECK(equal(W, neg(exp_of(mul(num(2), ux)))));
    CHECK(is_zero(W) == Decision::NonZero);

    CHECK(is_zero(sub(mul(vx(), vx()), pow(vx(), 2))) == Decision::Zero);
    CHECK(is_zero(vx()) == Decision::NonZero);
}

TEST_CASE("substitution") {
    ExprPtr x = vx(), u = vu(), ux = vux();
    ExprPtr e = sub(u, mul(num(9), x));
    ExprPtr s = substitute(e, Bindings{{VAR_X, u}, {VAR_U, x}});
    CHECK(equal(s, sub(x, mul(num(9), u))));

    int v = var_registry().intern("v");
    ExprPtr r = substitute(pow(ux, 4), VAR_UX, pow(var(v), -1));
    CHECK(equal(r, pow(var(v), -4)));
}

TEST_CASE("evaluation") {
    ExprPtr ux = vux();
    EvalResult r = eval(pow(ux, 4), Valuation{{VAR_UX, 2.0}});
    REQUIRE(r.ok());
    CHECK(r.get() == Catch::Approx(16.0));

    EvalResult bad = eval(pow(vx(), make_rat(-5, 4)), Valuation{{VAR_X, 0.0}});
    CHECK(!bad.ok());

    // odd root of a negative base is real
    EvalResult odd = eval(pow(vx(), make_rat(1, 3)), Valuation{{VAR_X, -8.0}});
    REQUIRE(odd.ok());
    CHECK(odd.get() == Catch::Approx(-2.0));

    // even root of a negative base is not
    EvalResult even = eval(pow(vx(), make_rat(1, 2)), Valuation{{VAR_X, -1.0}});
    CHECK(!even.ok());
}

TEST_CASE("radical normalization") {
    ExprPtr x = vx();
    CHECK(equal(mul(sqrt_of(x), sqrt_of(x)), x));
    CHECK(equal(pow(num(12), make_rat(1, 2)), mul(num(2), pow(num(3), make_rat(1, 2)))));
    CHECK(equal(mul(pow(num(2), make_rat(1, 2)), pow(num(1, 2), make_rat(1, 2))), num(1)));
    CHECK(equal(pow(num(8, 27), make_rat(2, 3)), num(4, 9)));
    CHECK(equal(pow(pow(x, make_rat(1, 2)), 3), pow(x, make_rat(3, 2))));
    // (x^2)^(1/2) collapses to x in the locally-positive regime
    CHECK(equal(sqrt_of(pow(x, 2)), x));
}

TEST_CASE("transcendental normalization") {
    ExprPtr x = vx(), u = vu();
    CHECK(equal(exp_of(add(x, u)), mul(exp_of(x), exp_of(u))));
    CHECK(equal(exp_of(mul(num(3), log_of(u))), pow(u, 3)));
    CHECK(equal(exp_of(log_of(x)), x));
    CHECK(equal(log_of(exp_of(x)), x));
    CHECK(is_zero_num(sin_of(num(0))));
    CHECK(equal(cos_of(num(0)), num(1)));
    CHECK(equal(sin_of(neg(x)), neg(sin_of(x))));
    CHECK(equal(cos_of(neg(x)), cos_of(x)));
    CHECK(equal(abs_of(mul(num(-3), x)), mul(num(3), abs_of(x))));
    CHECK(equal(pow(abs_of(x), 2), pow(x, 2)));
}

TEST_CASE("canonical equality implies numeric agreement") {
    odeq_test::RandomExpr gen(99, {VAR_X, VAR_U});
    for (int i = 0; i < 200; ++i) {
        ExprPtr e;
        try {
            e = gen.rational(3);
        } catch (const DomainError&) {
            continue;
        }
        ExprPtr c = canonicalize(e);
        Valuation p = gen.point();
        EvalResult a = eval(e, p);
        EvalResult b = eval(c, p);
        if (!a.ok() || !b.ok()) continue;
        if (!std::isfinite(a.get()) || std::fabs(a.get()) > 1e8) continue;
        REQUIRE(std::fabs(a.get() - b.get()) <= 1e-6 * (1 + std::fabs(a.get())));
    }
}
