// Acceptance suite: one pass/fail line per criterion, exit code equals the
// number of failures. All tolerances are fixed here, in code.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "thinlim/harness.hpp"

using namespace thinlim;

namespace {

int failures = 0;

void report(int number, const char* title, bool pass, const std::string& detail) {
    std::printf("%s  criterion %d: %s  (%s)\n", pass ? "PASS" : "FAIL", number, title,
                detail.c_str());
    if (!pass) ++failures;
}

std::string slurp(const std::string& name) {
    std::ifstream in(std::string(THINLIM_PROBLEMS_DIR) + "/" + name);
    if (!in) throw std::runtime_error("missing problem file " + name);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---- criterion 1: counterexample regression ------------------------------

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    const CounterexampleReport rep = run_counterexample(17, 200, {0.4, 0.2, 0.1});
    const double wall = seconds_since(t0);
    bool pass = rep.rows.size() == 3 && wall < 10.0;
    for (const auto& r : rep.rows) pass = pass && r.rel_err <= 0.01;
    const double expected = 1.0 / std::tanh(0.1) + 1.0;  // 11.0333...
    const double sup01 = rep.rows.back().sup_numeric;
    pass = pass && std::abs(sup01 - expected) <= 0.01 * expected;
    report(1, "counterexample closed form within 1% at nt=200", pass,
           fmt("sup(0.1)=%.4f vs %.4f, worst rel err %.3g, %.2fs", sup01, expected,
               std::max({rep.rows[0].rel_err, rep.rows[1].rel_err, rep.rows[2].rel_err}),
               wall));
}

// ---- criterion 2: dual-path operator equivalence -------------------------

std::string random_instance_text(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> small(0.05, 0.4), unit(0.3, 1.2), src(-1, 1);
    std::uniform_int_distribution<int> nl(1, 2);
    std::ostringstream out;
    const double a = small(rng), b = small(rng), k = small(rng), e = small(rng),
                 f = small(rng), l = small(rng);
    out << "[domain]\ng_plus = 1\ng_minus = -1\n";
    out << "[oblique]\n";
    out << "gamma1_plus = " << a << " + " << b << "*x + " << k << "*y\n";
    out << "gamma1_minus = -(" << a << " + " << b << "*x) + " << k << "*y\n";
    out << "beta_plus = " << e << " + " << f << "*x + " << l << "*y\n";
    out << "beta_minus = -(" << e << " + " << f << "*x) + " << l << "*y\n";
    out << "k_plus = " << k << "\nk_minus = " << k << "\n";
    out << "l_plus = " << l << "\nl_minus = " << l << "\n";
    out << "[lateral]\nkind = neumann\n";
    out << "[operator]\nalpha = 1/2\nC_F = 8\n";
    const int n_lambda = nl(rng);
    for (int i = 0; i < n_lambda; ++i) {
        const double s = unit(rng), c2 = small(rng), d1 = src(rng), d2 = src(rng);
        out << "family." << i << ".sigma.0 = " << s << " + " << c2 << "*x ; " << c2 << "*y\n";
        out << "family." << i << ".sigma.1 = " << c2 << " ; " << s << "\n";
        out << "family." << i << ".drift = " << d1 << " ; " << d2 << "\n";
        out << "family." << i << ".c = 1/2 + " << small(rng) << "*x^2\n";
        out << "family." << i << ".f = " << src(rng) << " + " << src(rng) << "*x\n";
    }
    out << "[solver]\nnx = 51\nnt = 11\n";
    return out.str();
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(42);
    bool pass = true;
    double worst = 0;
    for (int k = 0; k < 5; ++k) {
        const ProblemInstance inst = parse_problem(random_instance_text(rng));
        const LimitOperator limop = build_limit_operator(inst);
        const CheckResult res = check_dual_path(limop, 1000, 42 + k);
        pass = pass && res.pass;
        worst = std::max(worst, res.value);
    }
    const double wall = seconds_since(t0);
    pass = pass && wall < 5.0;
    report(2, "dual-path |G(1.8+1) - G(5.10)| <= 1e-10 (1+|G|)", pass,
           fmt("worst relative gap %.3g over 5 instances x 1000 tuples, %.2fs", worst, wall));
}

// ---- criterion 3: special-case formulas ----------------------------------

void criterion_3() {
    bool pass = true;
    std::string detail;

    // (a) gamma_o = 0, g- = 0, k+ = -g+'/g+, l = 0: lower-right entry of
    // A+B+C equals (g+'/g+) p, off-diagonals vanish.
    {
        DomainProfile prof;
        prof.g_minus = ScalarField::parse("g_minus", "0", 1);
        prof.g_plus = ScalarField::parse("g_plus", "1 + x/2", 1);
        prof.h = ScalarField::parse("h", "(1 + x/2)/2", 1);
        prof.delta0 = 0.25;
        ObliqueData d;
        d.gamma1_plus = ScalarField::parse("gamma1_plus", "-y/(2 + x)", 2);
        d.gamma1_minus = ScalarField::parse("gamma1_minus", "0", 2);
        d.beta_plus = ScalarField::parse("beta_plus", "0", 2);
        d.beta_minus = ScalarField::parse("beta_minus", "0", 2);
        d.gamma_o = ScalarField::parse("gamma_o", "0", 1);
        d.beta_o = ScalarField::parse("beta_o", "0", 1);
        d.k_plus = ScalarField::parse("k_plus", "-1/(2 + x)", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "0", 1);
        d.l_minus = ScalarField::parse("l_minus", "0", 1);
        const LimitCoefficients lc = build_b_c(prof, d, extract_y_expansion(d));
        double worst = 0;
        for (int i = 0; i <= 50; ++i) {
            const double x = i / 50.0;
            const double p = -1.0 + 2.0 * i / 50.0;
            const double X = std::sin(3 * x);
            const AssembledMatrices abc = assemble_ABC(lc, X, p, x);
            const Sym2 sum = abc.sum();
            const double gp = 1 + x / 2, gp1 = 0.5;
            worst = std::max(worst, std::abs(sum.yy - (gp1 / gp) * p));
            worst = std::max(worst, std::abs(sum.xy));
            worst = std::max(worst, std::abs(abc.B.xy));
        }
        pass = pass && worst <= 1e-12;
        detail += fmt("Neumann/BBI lower-right gap %.3g", worst);
    }

    // (b) F = -tr: G(X,p,r,x) = -(X + gamma_o^2 X + b p + c) with the c term
    // entering as an r-free source.
    {
        ObliqueData d;
        d.gamma1_plus = ScalarField::parse("gamma1_plus", "x/2", 2);
        d.gamma1_minus = ScalarField::parse("gamma1_minus", "-x/2", 2);
        d.beta_plus = ScalarField::parse("beta_plus", "x/4 + y/2", 2);
        d.beta_minus = ScalarField::parse("beta_minus", "-x/4 + y/2", 2);
        d.gamma_o = ScalarField::parse("gamma_o", "x/2", 1);
        d.beta_o = ScalarField::parse("beta_o", "x/4", 1);
        d.k_plus = ScalarField::parse("k_plus", "0", 1);
        d.k_minus = ScalarField::parse("k_minus", "0", 1);
        d.l_plus = ScalarField::parse("l_plus", "1/2", 1);
        d.l_minus = ScalarField::parse("l_minus", "1/2", 1);
        DomainProfile prof;
        prof.g_minus = ScalarField::parse("g_minus", "-1", 1);
        prof.g_plus = ScalarField::parse("g_plus", "1", 1);
        prof.h = ScalarField::parse("h", "0", 1);
        prof.delta0 = 1.0;
        const LimitCoefficients lc = build_b_c(prof, d, extract_y_expansion(d));

        CoefficientFamily fam;  // F = -tr, no drift, no zeroth order, no source
        fam.sigma.push_back(
            {ScalarField::parse("s0x", "1", 2), ScalarField::parse("s0y", "0", 2)});
        fam.sigma.push_back(
            {ScalarField::parse("s1x", "0", 2), ScalarField::parse("s1y", "1", 2)});
        fam.drift = {ScalarField::parse("b0", "0", 2), ScalarField::parse("b1", "0", 2)};
        fam.zeroth = ScalarField::parse("c", "0", 2);
        fam.source = ScalarField::parse("f", "0", 2);
        const LimitOperator limop(BellmanIsaacsOperator({{fam}}, 0.0, 2.0), lc);

        std::mt19937_64 rng(4242);
        std::uniform_real_distribution<double> u(-2, 2), ux(0, 1);
        double worst = 0;
        for (int i = 0; i < 500; ++i) {
            const double X = u(rng), p = u(rng), r = u(rng), x = ux(rng);
            const double g = x / 2;
            const double expected = -(X + g * g * X + lc.b(x) * p + lc.c(x));
            worst = std::max(worst, std::abs(limop.eval_direct(X, p, r, x) - expected));
        }
        pass = pass && worst <= 1e-12;
        detail += fmt(", basic-case gap %.3g", worst);
    }
    report(3, "special-case formulas exact to 1e-12", pass, detail);
}

// ---- criterion 4: degenerate ellipticity suite ----------------------------

void criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    const ProblemInstance inst = parse_problem(slurp("laplacian_oblique.prob"));
    const LimitOperator limop = build_limit_operator(inst);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> uX(0, 3), ustep(0, 2), up(-2, 2), ur(-2, 2),
        ux(0, 1);
    double worst_eig = 0, worst_margin = 0;
    for (int i = 0; i < 1000; ++i) {
        const double x = ux(rng);
        const Sym2 A = assemble_ABC(limop.coefficients(), uX(rng), 0, x).A;
        worst_eig = std::min(worst_eig, A.min_eigenvalue());
        const double lo = up(rng);
        const double hi = lo + ustep(rng);
        const double p = up(rng), r = ur(rng);
        worst_margin =
            std::min(worst_margin, limop.eval(lo, p, r, x) - limop.eval(hi, p, r, x));
    }
    const double wall = seconds_since(t0);
    const bool pass = worst_eig >= -1e-12 && worst_margin >= -1e-12 && wall < 5.0;
    report(4, "A(X) PSD and G nonincreasing in X over 1000 seeded trials", pass,
           fmt("min eigenvalue %.3g, min margin %.3g, %.2fs", worst_eig, worst_margin, wall));
}

// ---- criterion 5: corrector residual --------------------------------------

void criterion_5() {
    const ProblemInstance inst = parse_problem(slurp("laplacian_oblique.prob"));
    const LimitCoefficients lc = build_limit_operator(inst).coefficients();
    ScalarField u0 = ScalarField::parse("u0", "sin(pi*x)/200", 1);
    u0.set_dx(expr::differentiate(u0.expression(), 0));
    const SmoothFn u0f = SmoothFn::from_field(u0);

    auto ratio_at = [&](double eps, double delta) {
        const Corrector corr = corrector_expand(inst.profile, lc, u0f, eps, delta);
        return boundary_residual(corr, inst.oblique).max_abs() / eps;
    };

    const double r_coarse = ratio_at(0.1, 0.0);
    const double r_fine = ratio_at(0.025, 0.0);
    const bool o_eps = r_fine <= 0.5 * r_coarse;

    // with delta = 0.01 the residual/eps approaches delta (g+ - h) = 0.01
    const double target = 0.01 * (inst.profile.g_plus(0.3) - inst.profile.h(0.3));
    const double r_delta = ratio_at(0.025, 0.01);
    const bool delta_limit = std::abs(r_delta - target) <= 0.2 * target;

    report(5, "corrector boundary residual is o(eps), delta term survives", o_eps && delta_limit,
           fmt("ratio %.3g -> %.3g across eps 0.1 -> 0.025; delta run %.4g vs %.4g", r_coarse,
               r_fine, r_delta, target));
}

// ---- criterion 6 and 7: convergence sweep with barriers -------------------

void criteria_6_and_7() {
    const auto t0 = std::chrono::steady_clock::now();
    bool decreasing = true, halved = true, sandwich = true, solved = true;
    std::string detail;
    for (const char* name : {"laplacian_oblique.prob", "bellman_isaacs.prob"}) {
        const ProblemInstance inst = parse_problem(slurp(name));
        SweepConfig cfg;
        cfg.eps_list = {0.2, 0.1, 0.05, 0.025};
        cfg.scheme = inst.scheme;
        cfg.scheme.nx = 201;
        cfg.scheme.nt = 41;
        const ConvergenceReport rep = run_sweep(inst, cfg);
        detail += std::string(name) + ": ";
        for (size_t i = 0; i < rep.rows.size(); ++i) {
            solved = solved && rep.rows[i].ok;
            sandwich = sandwich && rep.rows[i].barrier_margin >= -1e-6;
            if (i > 0) decreasing = decreasing && rep.rows[i].sup_error < rep.rows[i - 1].sup_error;
            detail += fmt("%.4g ", rep.rows[i].sup_error);
        }
        halved = halved && rep.rows.back().sup_error < 0.5 * rep.rows.front().sup_error;
    }
    const double wall = seconds_since(t0);
    report(6, "sup errors strictly decrease and at least halve over the sweep",
           solved && decreasing && halved && wall < 300.0, detail + fmt("(%.1fs)", wall));
    report(7, "barrier sandwich psi- - M <= u <= psi+ + M nodewise (tol 1e-6)",
           solved && sandwich, "min margins recorded per row");
}

// ---- criterion 8: hypothesis battery ---------------------------------------

void criterion_8() {
    bool pass = true;
    std::string detail;
    for (const char* name :
         {"laplacian_oblique.prob", "bellman_isaacs.prob", "neumann_bbi.prob"}) {
        const BatteryReport rep = run_checks(parse_problem(slurp(name)));
        if (!rep.all_pass()) {
            pass = false;
            detail += std::string(name) + " unexpectedly fails; ";
        }
    }
    struct Fixture {
        const char* file;
        const char* intended;
    };
    for (const Fixture fx : {Fixture{"broken_compat.prob", "(1.4)"},
                             Fixture{"broken_zero_c.prob", "(5.7)"},
                             Fixture{"broken_dirichlet_sigma.prob", "(5.30)"}}) {
        const BatteryReport rep = run_checks(parse_problem(slurp(fx.file), /*strict=*/false));
        int wrong = 0, hits = 0;
        for (const auto& item : rep.items) {
            if (item.check.pass) continue;
            (item.check.name.find(fx.intended) != std::string::npos ? hits : wrong) += 1;
        }
        if (hits < 1 || wrong > 0) {
            pass = false;
            detail += fmt("%s: %d intended, %d unintended failures; ", fx.file, hits, wrong);
        }
    }
    if (detail.empty()) detail = "3 valid all-pass, 3 fixtures fail exactly (1.4)/(5.7)/(5.30)";
    report(8, "hypothesis battery separates valid instances from broken fixtures", pass,
           detail);
}

// ---- criterion 9: manufactured-solution orders -----------------------------

void criterion_9() {
    const ProblemInstance inst = parse_problem(slurp("laplacian_oblique.prob"));
    const MmsReport limit =
        run_manufactured_limit(inst, ScalarField::parse("exact", "cos(pi*x)", 1), 3, 51);
    const bool limit_ok = limit.min_order() >= 1.5;

    const MmsReport thin =
        run_manufactured_thin(inst, ScalarField::parse("exact", "cos(pi*x)", 1), 3, 0.1, 26);
    bool thin_ok = true;
    for (size_t i = 1; i < thin.levels.size(); ++i)
        thin_ok = thin_ok && thin.levels[i - 1].sup_error / thin.levels[i].sup_error >= 1.5;

    report(9, "manufactured orders: limit >= 1.5, thin error ratio >= 1.5 per doubling",
           limit_ok && thin_ok,
           fmt("limit min order %.2f; thin ratios %.2f, %.2f", limit.min_order(),
               thin.levels[0].sup_error / thin.levels[1].sup_error,
               thin.levels[1].sup_error / thin.levels[2].sup_error));
}

}  // namespace

int main() {
    try {
        criterion_1();
        criterion_2();
        criterion_3();
        criterion_4();
        criterion_5();
        criteria_6_and_7();
        criterion_8();
        criterion_9();
    } catch (const std::exception& e) {
        std::printf("FAIL  acceptance aborted: %s\n", e.what());
        return 99;
    }
    std::printf("%d criterion failure(s)\n", failures);
    return failures;
}
