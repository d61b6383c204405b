#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "thinlim/limit.hpp"

using namespace thinlim;

namespace {

std::string slurp(const std::string& name) {
    std::ifstream in(std::string(THINLIM_PROBLEMS_DIR) + "/" + name);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ObliqueData make_data(const char* g1p, const char* g1m, const char* bp, const char* bm) {
    ObliqueData d;
    d.gamma1_plus = ScalarField::parse("gamma1_plus", g1p, 2);
    d.gamma1_minus = ScalarField::parse("gamma1_minus", g1m, 2);
    d.beta_plus = ScalarField::parse("beta_plus", bp, 2);
    d.beta_minus = ScalarField::parse("beta_minus", bm, 2);
    d.gamma_o = ScalarField(
        "gamma_o", d.gamma1_plus.expression().bind(1, 0.0, 1), 1);
    d.beta_o = ScalarField("beta_o", d.beta_plus.expression().bind(1, 0.0, 1), 1);
    return d;
}

DomainProfile make_profile(const char* gm, const char* gp) {
    DomainProfile p;
    p.g_minus = ScalarField::parse("g_minus", gm, 1);
    p.g_plus = ScalarField::parse("g_plus", gp, 1);
    p.h = ScalarField(
        "h", (p.g_plus.expression() + p.g_minus.expression()) * expr::Expression::constant(0.5),
        1);
    p.delta0 = 0.25;
    return p;
}

}  // namespace

TEST_CASE("slope extraction: linear, constant and smooth data") {
    // gamma1+(x,y) = x + 2y has exact slope 2
    auto d = make_data("x + 2*y", "-x + 2*y", "1", "-1");
    const ExpansionSlopes s = extract_y_expansion(d);
    CHECK_FALSE(s.from_config);
    for (double x : {0.0, 0.35, 1.0}) {
        CHECK(s.k_plus(x) == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s.l_plus(x) == doctest::Approx(0.0));
        CHECK(s.l_minus(x) == doctest::Approx(0.0));
    }
    CHECK(s.residual <= 1e-10);

    // gamma1+ = sin(y): slope cos(0) = 1 within 1e-8
    auto smooth = make_data("sin(y)", "-sin(y)", "0", "0");
    const ExpansionSlopes s2 = extract_y_expansion(smooth);
    CHECK(s2.k_plus(0.4) == doctest::Approx(1.0).epsilon(1e-8));

    // config slopes short-circuit the extraction
    d.k_plus = ScalarField::parse("k_plus", "2", 1);
    d.k_minus = ScalarField::parse("k_minus", "2", 1);
    d.l_plus = ScalarField::parse("l_plus", "0", 1);
    d.l_minus = ScalarField::parse("l_minus", "0", 1);
    CHECK(extract_y_expansion(d).from_config);
}

TEST_CASE("slope extraction rejects wild y-oscillation") {
    auto d = make_data("x + sin(1000*y)", "-x", "0", "0");
    CHECK_THROWS_AS(extract_y_expansion(d), ValidationError);
}

TEST_CASE("limit coefficients b and c") {
    // all sources vanish
    {
        auto d = make_data("0", "0", "0", "0");
        auto lc = build_b_c(make_profile("-1", "1"), d, extract_y_expansion(d));
        for (double x : {0.0, 0.5, 1.0}) {
            CHECK(lc.b(x) == doctest::Approx(0.0));
            CHECK(lc.c(x) == doctest::Approx(0.0));
        }
    }
    // the Neumann/BBI special case: gamma_o = 0, g- = 0, k+ = -g+'/g+
    {
        DomainProfile prof = make_profile("0", "1 + x/2");
        ObliqueData d = make_data("-y/(2 + x)", "0", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "-1/(2 + x)", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(prof, d, extract_y_expansion(d));
        for (double x : {0.0, 0.3, 1.0}) {
            const double expected = 0.5 / (1 + x / 2);  // g+'/g+
            CHECK(lc.b(x) == doctest::Approx(expected).epsilon(1e-12));
            CHECK(lc.c(x) == doctest::Approx(0.0));
        }
    }
    // gamma_o(x) = x, beta_o = 0, k = l = 0, g+- = +-1: b(x) = x, c = 0
    {
        auto d = make_data("x", "-x", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(make_profile("-1", "1"), d, extract_y_expansion(d));
        for (double x : {0.1, 0.6, 0.9}) {
            CHECK(lc.b(x) == doctest::Approx(x).epsilon(1e-9));
            CHECK(lc.c(x) == doctest::Approx(0.0));
        }
    }
}

TEST_CASE("assembled matrices A, B, C") {
    auto d = make_data("x", "-x", "0", "0");
    d.k_plus = ScalarField::parse("k_plus", "0", 1);
    d.k_minus = ScalarField::parse("k_minus", "0", 1);
    d.l_plus = ScalarField::parse("l_plus", "0", 1);
    d.l_minus = ScalarField::parse("l_minus", "0", 1);
    auto lc = build_b_c(make_profile("-1", "1"), d, extract_y_expansion(d));

    // X = 1, gamma_o = 1 at x = 1: A = [[1,-1],[-1,1]], eigenvalues {0, 2}
    auto abc = assemble_ABC(lc, 1.0, 0.0, 1.0);
    CHECK(abc.A.xx == doctest::Approx(1.0));
    CHECK(abc.A.xy == doctest::Approx(-1.0));
    CHECK(abc.A.yy == doctest::Approx(1.0));
    CHECK(abc.A.min_eigenvalue() == doctest::Approx(0.0));
    const double tr = abc.A.trace();
    CHECK(tr - abc.A.min_eigenvalue() == doctest::Approx(2.0));  // the other eigenvalue

    // X = 0 gives A = 0
    abc = assemble_ABC(lc, 0.0, 2.0, 0.5);
    CHECK(abc.A.xx == 0.0);
    CHECK(abc.A.xy == 0.0);
    CHECK(abc.A.yy == 0.0);

    // decoupled case gamma_o = 0: B = [[0,0],[0,bp]], C = diag(0, c)
    auto d0 = make_data("0", "0", "1/4", "-1/4");
    d0.k_plus = ScalarField::parse("k_plus", "1", 1);
    d0.k_minus = ScalarField::parse("k_minus", "1", 1);
    d0.l_plus = ScalarField::parse("l_plus", "1/2", 1);
    d0.l_minus = ScalarField::parse("l_minus", "-1/2", 1);
    auto lc0 = build_b_c(make_profile("-1", "1"), d0, extract_y_expansion(d0));
    auto abc0 = assemble_ABC(lc0, 3.0, 2.0, 0.5);
    CHECK(abc0.A.xx == doctest::Approx(3.0));
    CHECK(abc0.A.xy == 0.0);
    CHECK(abc0.B.xx == 0.0);
    CHECK(abc0.B.xy == doctest::Approx(0.0));
    CHECK(abc0.B.yy == doctest::Approx(lc0.b(0.5) * 2.0));
    CHECK(abc0.C.xy == doctest::Approx(0.0));
    CHECK(abc0.C.yy == doctest::Approx(lc0.c(0.5)));
}

TEST_CASE("eval_G against the reduced form and special cases") {
    const auto inst = parse_problem(slurp("laplacian_oblique.prob"));
    const LimitOperator limop = build_limit_operator(inst);

    // dual-path equivalence on 1000 seeded tuples
    CHECK(check_dual_path(limop, 1000, 42).pass);

    // second-order coefficient of -X equals 1 + gamma_o^2 at x = 0.5
    const double g = 0.25;  // gamma_o(0.5) = x/2
    const double coef = limop.eval_direct(1.0, 0.0, 0.0, 0.5) -
                        limop.eval_direct(0.0, 0.0, 0.0, 0.5);
    CHECK(coef == doctest::Approx(-(1.0 + g * g)).epsilon(1e-12));

    // trace identity: tr(sigma~^T sigma~)(x) = tr[(sigma^T sigma)(x,0) A(1,x)]
    for (double x : {0.0, 0.3, 0.8}) {
        const auto abc = assemble_ABC(limop.coefficients(), 1.0, 0.0, x);
        const Sym2 q = inst.op.family(0, 0).diffusion(x, 0.0);
        const double lhs = limop.reduced()[0][0].sigma2(x);
        const double rhs = q.xx * abc.A.xx + 2 * q.xy * abc.A.xy + q.yy * abc.A.yy;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-14));
    }
}

TEST_CASE("Laplacian with no boundary correction reduces to -X + r") {
    auto d = make_data("0", "0", "0", "0");
    d.k_plus = ScalarField::parse("k_plus", "0", 1);
    d.k_minus = ScalarField::parse("k_minus", "0", 1);
    d.l_plus = ScalarField::parse("l_plus", "0", 1);
    d.l_minus = ScalarField::parse("l_minus", "0", 1);
    CoefficientFamily fam;
    fam.sigma.push_back(
        {ScalarField::parse("s0x", "1", 2), ScalarField::parse("s0y", "0", 2)});
    fam.sigma.push_back(
        {ScalarField::parse("s1x", "0", 2), ScalarField::parse("s1y", "1", 2)});
    fam.drift = {ScalarField::parse("b0", "0", 2), ScalarField::parse("b1", "0", 2)};
    fam.zeroth = ScalarField::parse("c", "1", 2);
    fam.source = ScalarField::parse("f", "0", 2);
    BellmanIsaacsOperator op({{fam}}, 1.0, 2.0);
    LimitOperator limop(op, build_b_c(make_profile("-1", "1"), d, extract_y_expansion(d)));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 100; ++i) {
        const double X = u(rng), p = u(rng), r = u(rng), x = 0.5 + 0.25 * u(rng);
        CHECK(limop.eval_direct(X, p, r, x) == doctest::Approx(-X + r).epsilon(1e-14));
        CHECK(limop.eval_reduced(X, p, r, x) == doctest::Approx(-X + r).epsilon(1e-14));
    }
}

TEST_CASE("reduced diffusion: sigma = I2 with gamma_o = 1 gives sigma2 = 2") {
    auto d = make_data("1", "-1", "0", "0");
    d.k_plus = ScalarField::parse("k_plus", "0", 1);
    d.k_minus = ScalarField::parse("k_minus", "0", 1);
    d.l_plus = ScalarField::parse("l_plus", "0", 1);
    d.l_minus = ScalarField::parse("l_minus", "0", 1);
    CoefficientFamily fam;
    fam.sigma.push_back(
        {ScalarField::parse("s0x", "1", 2), ScalarField::parse("s0y", "0", 2)});
    fam.sigma.push_back(
        {ScalarField::parse("s1x", "0", 2), ScalarField::parse("s1y", "1", 2)});
    fam.drift = {ScalarField::parse("b0", "0", 2), ScalarField::parse("b1", "0", 2)};
    fam.zeroth = ScalarField::parse("c", "1", 2);
    fam.source = ScalarField::parse("f", "x + y", 2);
    BellmanIsaacsOperator op({{fam}}, 1.0, 2.0);
    LimitOperator limop(op, build_b_c(make_profile("-1", "1"), d, extract_y_expansion(d)));
    CHECK(limop.reduced()[0][0].sigma2(0.4) == doctest::Approx(2.0));
    // f~ picks up the source trace f(x, 0)
    auto d0 = make_data("0", "0", "0", "0");
    d0.k_plus = ScalarField::parse("k_plus", "0", 1);
    d0.k_minus = ScalarField::parse("k_minus", "0", 1);
    d0.l_plus = ScalarField::parse("l_plus", "0", 1);
    d0.l_minus = ScalarField::parse("l_minus", "0", 1);
    LimitOperator plain(op, build_b_c(make_profile("-1", "1"), d0, extract_y_expansion(d0)));
    CHECK(plain.reduced()[0][0].sigma2(0.4) == doctest::Approx(1.0));
    CHECK(plain.reduced()[0][0].drift(0.4) == doctest::Approx(0.0));
    CHECK(plain.reduced()[0][0].source(0.4) == doctest::Approx(0.4));
}

TEST_CASE("correctors: v, w and the test function") {
    const DomainProfile prof = make_profile("-1", "1");

    // zero data: everything vanishes
    {
        auto d = make_data("0", "0", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(prof, d, extract_y_expansion(d));
        const Corrector corr = corrector_expand(prof, lc, SmoothFn::zero(), 0.1, 0.0);
        for (double x : {0.0, 0.5, 1.0}) {
            CHECK(corr.v().f(x) == doctest::Approx(0.0));
            CHECK(corr.w_plus().f(x) == doctest::Approx(0.0));
            CHECK(corr.psi(x, 0.05) == doctest::Approx(0.0));
        }
    }
    // l+ = 2, everything else zero: w+ = 1, w- = 0
    {
        auto d = make_data("0", "0", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "2", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(prof, d, extract_y_expansion(d));
        const Corrector corr = corrector_expand(prof, lc, SmoothFn::zero(), 0.1, 0.0);
        CHECK(corr.w_plus().f(0.5) == doctest::Approx(1.0));
        CHECK(corr.w_minus().f(0.5) == doctest::Approx(0.0));
        // u2(x,y) = (y - g-)^2 w+ / 2
        CHECK(corr.u2(0.5, 0.0) == doctest::Approx(0.5));
    }
    // u0 = x^2/2 with gamma_o = 1, beta_o = 0: v(x) = -x
    {
        auto d = make_data("1", "-1", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(prof, d, extract_y_expansion(d));
        ScalarField u0 = ScalarField::parse("u0", "x^2/2", 1);
        u0.set_dx(expr::Expression::parse("x", std::vector<std::string>{"x"}));
        const Corrector corr = corrector_expand(prof, lc, SmoothFn::from_field(u0), 0.1, 0.0);
        for (double x : {0.0, 0.4, 1.0}) CHECK(corr.v().f(x) == doctest::Approx(-x));
    }
}

TEST_CASE("corrector identities against finite differences") {
    const auto inst = parse_problem(slurp("laplacian_oblique.prob"));
    const LimitCoefficients lc = build_limit_operator(inst).coefficients();
    ScalarField u0 = ScalarField::parse("u0", "sin(pi*x)/4 + x^2/8", 1);
    const Corrector corr = corrector_expand(inst.profile, lc, SmoothFn::from_field(u0), 0.05,
                                            0.0);
    const SmoothFn u0f = SmoothFn::from_field(u0);
    for (double x : {0.2, 0.5, 0.8}) {
        // v' from (the implementation's analytic chain) vs a finite
        // difference of the v evaluator itself
        const double h = 1e-5;
        const double fd = (corr.v().f(x + h) - corr.v().f(x - h)) / (2 * h);
        CHECK(corr.v().d1(x) == doctest::Approx(fd).epsilon(1e-6));

        // w+ + w- = gamma_o^2 u0'' + b u0' + c
        const double lhs = corr.w_plus().f(x) + corr.w_minus().f(x);
        const double rhs = lc.gamma_o.f(x) * lc.gamma_o.f(x) * u0f.d2(x) +
                           lc.b(x) * u0f.d1(x) + lc.c(x);
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    }
}

TEST_CASE("grid-sampled u0 reproduces the analytic corrector") {
    const auto inst = parse_problem(slurp("laplacian_oblique.prob"));
    const LimitCoefficients lc = build_limit_operator(inst).coefficients();
    ScalarField u0 = ScalarField::parse("u0", "x^2/2", 1);

    std::vector<double> xs, vals;
    for (int i = 0; i <= 400; ++i) {
        xs.push_back(i / 400.0);
        vals.push_back(u0(xs.back()));
    }
    const Corrector analytic =
        corrector_expand(inst.profile, lc, SmoothFn::from_field(u0), 0.05, 0.0);
    const Corrector sampled = corrector_expand(
        inst.profile, lc, SmoothFn::from_samples(std::move(xs), std::move(vals)), 0.05, 0.0);
    for (double x : {0.25, 0.5, 0.75})
        CHECK(sampled.v().f(x) == doctest::Approx(analytic.v().f(x)).epsilon(1e-4));
}

TEST_CASE("boundary residual of the test function") {
    // all data zero: residual vanishes identically
    {
        const DomainProfile prof = make_profile("-1", "1");
        auto d = make_data("0", "0", "0", "0");
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        auto lc = build_b_c(prof, d, extract_y_expansion(d));
        const Corrector corr = corrector_expand(prof, lc, SmoothFn::zero(), 0.1, 0.0);
        CHECK(boundary_residual(corr, d).max_abs() <= 1e-14);

        // delta = 1 on the flat strip with h = 0: residual/eps = delta (g+ - h)
        const Corrector strict = corrector_expand(prof, lc, SmoothFn::zero(), 0.1, 1.0);
        const ResidualReport rep = boundary_residual(strict, d);
        CHECK(rep.max_abs_top / 0.1 == doctest::Approx(1.0));
        CHECK(rep.max_abs_bottom / 0.1 == doctest::Approx(1.0));
    }
    // the o(eps) claim: residual/eps shrinks as eps drops
    {
        const auto inst = parse_problem(slurp("laplacian_oblique.prob"));
        const LimitCoefficients lc = build_limit_operator(inst).coefficients();
        ScalarField u0 = ScalarField::parse("u0", "sin(pi*x)/200", 1);
        double prev = std::numeric_limits<double>::infinity();
        for (double eps : {0.1, 0.05, 0.025}) {
            const Corrector corr =
                corrector_expand(inst.profile, lc, SmoothFn::from_field(u0), eps, 0.0);
            const double ratio = boundary_residual(corr, inst.oblique).max_abs() / eps;
            CHECK(ratio < prev);
            prev = ratio;
        }
    }
}

TEST_CASE("degenerate ellipticity of the limit operator") {
    const auto inst = parse_problem(slurp("bellman_isaacs.prob"));
    const LimitOperator limop = build_limit_operator(inst);
    const CheckResult res = check_degenerate_ellipticity(limop, 1000, 42);
    CHECK(res.pass);
    CHECK(res.value >= -1e-12);
}
