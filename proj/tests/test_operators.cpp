#include <cmath>
#include <random>

#include "doctest.h"
#include "thinlim/operators.hpp"

using namespace thinlim;

namespace {

CoefficientFamily make_family(const char* s00, const char* s01, const char* s10,
                              const char* s11, const char* b0, const char* b1, const char* c,
                              const char* f) {
    CoefficientFamily fam;
    fam.sigma.push_back({ScalarField::parse("s0x", s00, 2), ScalarField::parse("s0y", s01, 2)});
    fam.sigma.push_back({ScalarField::parse("s1x", s10, 2), ScalarField::parse("s1y", s11, 2)});
    fam.drift = {ScalarField::parse("b0", b0, 2), ScalarField::parse("b1", b1, 2)};
    fam.zeroth = ScalarField::parse("c", c, 2);
    fam.source = ScalarField::parse("f", f, 2);
    return fam;
}

BellmanIsaacsOperator identity_operator() {
    return BellmanIsaacsOperator({{make_family("1", "0", "0", "1", "0", "0", "1", "1")}}, 1.0,
                                 2.0);
}

}  // namespace

TEST_CASE("single-family evaluation matches hand arithmetic") {
    const BellmanIsaacsOperator op = identity_operator();
    OperatorPoint pt;  // X = 0, p = 0, r = 1
    pt.r = 1;
    pt.x = 0.5;
    CHECK(op.eval(pt) == doctest::Approx(0.0));  // -0 + 1 - 1

    // sigma = I2, b = (1,0), c = 1, f = 0; X = diag(1,-1), p = (2,0), r = 3
    const BellmanIsaacsOperator op2 = BellmanIsaacsOperator(
        {{make_family("1", "0", "0", "1", "1", "0", "1", "0")}}, 1.0, 2.0);
    OperatorPoint pt2;
    pt2.hessian = {1, 0, -1};
    pt2.px = 2;
    pt2.r = 3;
    pt2.x = 0.5;
    CHECK(op2.eval(pt2) == doctest::Approx(1.0));  // -(1-1) - 2 + 3
}

TEST_CASE("two lambda-families take the min of the traces") {
    // -tr X and -2 tr X realized with sigma = I and sigma = sqrt(2) I
    const char* r2 = "2^(1/2)";
    BellmanIsaacsOperator op({{make_family("1", "0", "0", "1", "0", "0", "0", "0")},
                              {make_family(r2, "0", "0", r2, "0", "0", "0", "0")}},
                             0.0, 3.0);
    OperatorPoint pt;
    pt.hessian = {1, 0, 1};  // identity
    CHECK(op.eval(pt) == doctest::Approx(-4.0));
    // with a single family the inf-sup equals the family value exactly
    CHECK(op.eval_family(1, 0, pt) == doctest::Approx(-4.0));
}

TEST_CASE("inf-sup with |L| = |M| = 1 equals the single family bitwise") {
    const BellmanIsaacsOperator op = identity_operator();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int i = 0; i < 200; ++i) {
        OperatorPoint pt;
        pt.hessian = {u(rng), u(rng), u(rng)};
        pt.px = u(rng);
        pt.py = u(rng);
        pt.r = u(rng);
        pt.x = 0.5 + 0.25 * u(rng);
        pt.y = 0.5 * u(rng);
        CHECK(op.eval(pt) == op.eval_family(0, 0, pt));
    }
}

TEST_CASE("properness holds with the declared alpha and fails for c = 0") {
    CHECK(check_properness(identity_operator(), 500, 42).pass);

    BellmanIsaacsOperator no_c(
        {{make_family("1", "0", "0", "1", "0", "0", "0", "0")}}, 1.0, 2.0);
    const CheckResult res = check_properness(no_c, 500, 42);
    CHECK_FALSE(res.pass);
    CHECK(res.witness.find("r=0 s=1") != std::string::npos);
    CHECK(check_zeroth_bound(no_c).pass == false);
    CHECK(check_zeroth_bound(identity_operator()).pass);
}

TEST_CASE("properness gain is at least alpha * t") {
    const BellmanIsaacsOperator op = identity_operator();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-2, 2), ut(0, 3);
    for (int i = 0; i < 1000; ++i) {
        OperatorPoint pt;
        pt.hessian = {u(rng), u(rng), u(rng)};
        pt.px = u(rng);
        pt.py = u(rng);
        pt.r = u(rng);
        pt.x = 0.5 + 0.25 * u(rng);
        const double t = ut(rng);
        OperatorPoint shifted = pt;
        shifted.r += t;
        CHECK(op.eval(shifted) - op.eval(pt) >= op.alpha() * t - 1e-12);
    }
}

TEST_CASE("eval is monotone in the Hessian argument") {
    BellmanIsaacsOperator op({{make_family("1", "0", "1/2", "1", "0", "0", "1", "x")},
                              {make_family("1", "1/2", "0", "1", "1", "0", "2", "y")}},
                             1.0, 3.0);
    CHECK(check_degenerate_ellipticity_F(op, 1000, 42).pass);
}

TEST_CASE("regularity bound (5.8) with the Frobenius norm") {
    BellmanIsaacsOperator op({{make_family("1", "0", "0", "1", "1", "1", "1", "0")}}, 1.0, 2.0);
    CHECK(check_operator_lipschitz(op, 1000, 42).pass);
    CHECK(check_uniform_bounds(op, 500, 42).pass);

    // C_F declared too small: the bound check must fail
    BellmanIsaacsOperator tight({{make_family("1", "0", "0", "1", "1", "1", "1", "0")}}, 1.0,
                                0.5);
    CHECK_FALSE(check_uniform_bounds(tight, 500, 42).pass);
}

TEST_CASE("normal ellipticity at the endpoints") {
    const ScalarField zero = ScalarField::parse("gamma_o", "0", 1);
    const ScalarField one = ScalarField::parse("gamma_o", "1", 1);

    auto res = check_normal_ellipticity(identity_operator(), zero);
    CHECK(res.pass);
    CHECK(res.value == doctest::Approx(1.0));

    BellmanIsaacsOperator degenerate(
        {{make_family("0", "0", "0", "1", "0", "0", "1", "0")}}, 1.0, 2.0);
    res = check_normal_ellipticity(degenerate, zero);
    CHECK_FALSE(res.pass);
    CHECK(res.value == doctest::Approx(0.0));

    res = check_normal_ellipticity(identity_operator(), one);
    CHECK(res.pass);
    CHECK(res.value == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("Sym2 eigenvalue oracle") {
    // closed-form eigenvalues of [[1,-1],[-1,1]] are {0, 2}
    Sym2 a{1, -1, 1};
    CHECK(a.min_eigenvalue() == doctest::Approx(0.0));
    CHECK(a.psd());
    Sym2 indef{1, 2, 1};
    CHECK(indef.min_eigenvalue() == doctest::Approx(-1.0));
    CHECK_FALSE(indef.psd());
    CHECK(Sym2{3, 4, 0}.frobenius() == doctest::Approx(std::sqrt(9 + 32.0)));
}
