#include "thinlim/limit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace thinlim {

SmoothFn SmoothFn::from_field(const ScalarField& field) {
    SmoothFn s;
    s.f = [field](double x) { return field(x); };
    s.d1 = [field](double x) { return field.dx(x); };
    s.d2 = [field](double x) { return field.dxx(x); };
    return s;
}

SmoothFn SmoothFn::from_samples(std::vector<double> xs, std::vector<double> values) {
    auto shared_xs = std::make_shared<std::vector<double>>(std::move(xs));
    auto shared_v = std::make_shared<std::vector<double>>(std::move(values));

    auto locate = [shared_xs](double x) {
        const auto& g = *shared_xs;
        size_t i = static_cast<size_t>(
            std::upper_bound(g.begin(), g.end(), x) - g.begin());
        if (i == 0) i = 1;
        if (i >= g.size()) i = g.size() - 1;
        return i;  // x in [g[i-1], g[i]]
    };
    SmoothFn s;
    s.f = [shared_xs, shared_v, locate](double x) {
        const auto& g = *shared_xs;
        const auto& v = *shared_v;
        const size_t i = locate(x);
        const double w = (x - g[i - 1]) / (g[i] - g[i - 1]);
        return (1 - w) * v[i - 1] + w * v[i];
    };
    // Second-order discrete derivatives on the sample grid, interpolated.
    const size_t n = shared_xs->size();
    std::vector<double> d1(n), d2(n);
    const auto& g = *shared_xs;
    const auto& v = *shared_v;
    for (size_t i = 0; i < n; ++i) {
        const size_t c = std::min(std::max<size_t>(i, 1), n - 2);
        const double hl = g[c] - g[c - 1], hr = g[c + 1] - g[c];
        d2[i] = 2 * (hl * v[c + 1] - (hl + hr) * v[c] + hr * v[c - 1]) /
                (hl * hr * (hl + hr));
        if (i == 0)
            d1[i] = (v[1] - v[0]) / (g[1] - g[0]) - 0.5 * (g[1] - g[0]) * d2[i];
        else if (i == n - 1)
            d1[i] = (v[n - 1] - v[n - 2]) / (g[n - 1] - g[n - 2]) +
                    0.5 * (g[n - 1] - g[n - 2]) * d2[i];
        else
            d1[i] = (v[i + 1] - v[i - 1]) / (g[i + 1] - g[i - 1]);
    }
    auto interp = [shared_xs, locate](std::vector<double> vals) {
        auto shared = std::make_shared<std::vector<double>>(std::move(vals));
        return [shared_xs, shared, locate](double x) {
            const auto& gx = *shared_xs;
            const size_t i = locate(x);
            const double w = (x - gx[i - 1]) / (gx[i] - gx[i - 1]);
            return (1 - w) * (*shared)[i - 1] + w * (*shared)[i];
        };
    };
    s.d1 = interp(std::move(d1));
    s.d2 = interp(std::move(d2));
    return s;
}

SmoothFn SmoothFn::from_callable(std::function<double(double)> f) {
    SmoothFn s;
    s.f = f;
    s.d1 = [f](double x) { return fd::deriv1(f, x, 0.0, 1.0); };
    s.d2 = [f](double x) { return fd::deriv2(f, x, 0.0, 1.0); };
    return s;
}

SmoothFn SmoothFn::zero() {
    SmoothFn s;
    s.f = s.d1 = s.d2 = [](double) { return 0.0; };
    return s;
}

ExpansionSlopes extract_y_expansion(const ObliqueData& data) {
    ExpansionSlopes out;
    if (data.has_config_slopes()) {
        out.from_config = true;
        out.k_plus = [f = *data.k_plus](double x) { return f(x); };
        out.k_minus = [f = *data.k_minus](double x) { return f(x); };
        out.l_plus = [f = *data.l_plus](double x) { return f(x); };
        out.l_minus = [f = *data.l_minus](double x) { return f(x); };
        return out;
    }
    auto slope_of = [](const ScalarField& f) {
        return [f](double x) {
            const double h = 1e-2;
            const double s1 = (f(x, h) - f(x, -h)) / (2 * h);
            const double s2 = (f(x, h / 2) - f(x, -h / 2)) / h;
            return (4 * s2 - s1) / 3;
        };
    };
    auto residual_of = [](const ScalarField& f) {
        double worst = 0;
        for (int i = 0; i <= 200; ++i) {
            const double x = i / 200.0;
            const double h = 1e-2;
            const double s1 = (f(x, h) - f(x, -h)) / (2 * h);
            const double s2 = (f(x, h / 2) - f(x, -h / 2)) / h;
            worst = std::max(worst, std::abs(s2 - s1));
        }
        return worst;
    };
    out.k_plus = slope_of(data.gamma1_plus);
    out.k_minus = slope_of(data.gamma1_minus);
    out.l_plus = slope_of(data.beta_plus);
    out.l_minus = slope_of(data.beta_minus);
    out.residual = std::max(
        std::max(residual_of(data.gamma1_plus), residual_of(data.gamma1_minus)),
        std::max(residual_of(data.beta_plus), residual_of(data.beta_minus)));
    if (out.residual > 1e-4)
        throw ValidationError("expansion (1.6)",
                              "expansion (1.6) not satisfied: extrapolation residual " +
                                  expr::format_double(out.residual) + " exceeds 1e-4");
    return out;
}

LimitCoefficients build_b_c(const DomainProfile& profile, const ObliqueData& data,
                            const ExpansionSlopes& slopes) {
    LimitCoefficients lc;
    lc.gamma_o = SmoothFn::from_field(data.gamma_o);
    lc.beta_o = SmoothFn::from_field(data.beta_o);
    lc.k_plus = slopes.k_plus;
    lc.k_minus = slopes.k_minus;
    lc.l_plus = slopes.l_plus;
    lc.l_minus = slopes.l_minus;
    const ScalarField gp = profile.g_plus, gm = profile.g_minus;
    lc.b = [gp, gm, g = lc.gamma_o, kp = lc.k_plus, km = lc.k_minus](double x) {
        return g.f(x) * g.d1(x) - (gp(x) * kp(x) + gm(x) * km(x)) / (gp(x) - gm(x));
    };
    lc.c = [gp, gm, g = lc.gamma_o, b = lc.beta_o, lp = lc.l_plus, lm = lc.l_minus](double x) {
        return -g.f(x) * b.d1(x) + (gp(x) * lp(x) + gm(x) * lm(x)) / (gp(x) - gm(x));
    };
    return lc;
}

AssembledMatrices assemble_ABC(const LimitCoefficients& coeffs, double X, double p, double x) {
    const double g = coeffs.gamma_o.f(x);
    const double dg = coeffs.gamma_o.d1(x);
    const double dbeta = coeffs.beta_o.d1(x);
    AssembledMatrices out;
    out.A = {X, -X * g, g * X * g};
    out.B = {0, -p * dg, coeffs.b(x) * p};
    out.C = {0, dbeta, coeffs.c(x)};
    return out;
}

LimitOperator::LimitOperator(BellmanIsaacsOperator base, LimitCoefficients coeffs)
    : base_(std::move(base)), coeffs_(std::move(coeffs)) {
    reduced_.resize(static_cast<size_t>(base_.n_lambda()));
    for (int l = 0; l < base_.n_lambda(); ++l) {
        for (int m = 0; m < base_.n_mu(); ++m) {
            const CoefficientFamily fam = base_.family(l, m);  // shares field storage
            const LimitCoefficients& lc = coeffs_;
            ReducedFamily red;
            red.sigma2 = [fam, lc](double x) {
                const double g = lc.gamma_o.f(x);
                double s = 0;
                for (const auto& row : fam.sigma) {
                    const double v = row[0](x, 0.0) - row[1](x, 0.0) * g;
                    s += v * v;
                }
                return s;
            };
            red.drift = [fam, lc](double x) {
                const Sym2 q = fam.diffusion(x, 0.0);
                const double tr_qB = -2 * q.xy * lc.gamma_o.d1(x) + q.yy * lc.b(x);
                return tr_qB + fam.drift[0](x, 0.0) - fam.drift[1](x, 0.0) * lc.gamma_o.f(x);
            };
            red.zeroth = [fam](double x) { return fam.zeroth(x, 0.0); };
            red.source = [fam, lc](double x) {
                const Sym2 q = fam.diffusion(x, 0.0);
                const double tr_qC = 2 * q.xy * lc.beta_o.d1(x) + q.yy * lc.c(x);
                return fam.source(x, 0.0) + tr_qC + fam.drift[1](x, 0.0) * lc.beta_o.f(x);
            };
            reduced_[static_cast<size_t>(l)].push_back(std::move(red));
        }
    }
}

double LimitOperator::eval_direct(double X, double p, double r, double x) const {
    const AssembledMatrices abc = assemble_ABC(coeffs_, X, p, x);
    OperatorPoint pt;
    pt.hessian = abc.sum();
    pt.px = p;
    pt.py = coeffs_.beta_o.f(x) - coeffs_.gamma_o.f(x) * p;
    pt.r = r;
    pt.x = x;
    pt.y = 0;
    return base_.eval(pt);
}

double LimitOperator::eval_reduced(double X, double p, double r, double x) const {
    double inf = std::numeric_limits<double>::infinity();
    for (const auto& row : reduced_) {
        double sup = -std::numeric_limits<double>::infinity();
        for (const ReducedFamily& fam : row) {
            sup = std::max(sup, -fam.sigma2(x) * X - fam.drift(x) * p + fam.zeroth(x) * r -
                                    fam.source(x));
        }
        inf = std::min(inf, sup);
    }
    return inf;
}

LimitOperator build_limit_operator(const ProblemInstance& inst) {
    const ExpansionSlopes slopes = extract_y_expansion(inst.oblique);
    return LimitOperator(inst.op, build_b_c(inst.profile, inst.oblique, slopes));
}

Corrector::Corrector(DomainProfile profile, SmoothFn u0, SmoothFn v, SmoothFn w_plus,
                     SmoothFn w_minus, double eps, double delta)
    : profile_(std::move(profile)),
      u0_(std::move(u0)),
      v_(std::move(v)),
      w_plus_(std::move(w_plus)),
      w_minus_(std::move(w_minus)),
      eps_(eps),
      delta_(delta) {}

double Corrector::u2(double x, double y) const {
    const double gm = profile_.g_minus(x), gp = profile_.g_plus(x);
    return 0.5 * (y - gm) * (y - gm) * w_plus_.f(x) + 0.5 * (y - gp) * (y - gp) * w_minus_.f(x);
}

double Corrector::psi(double x, double y) const {
    const double gm = eps_ * profile_.g_minus(x);
    const double gp = eps_ * profile_.g_plus(x);
    const double hh = eps_ * profile_.h(x);
    return u0_.f(x) + v_.f(x) * y +
           0.5 * ((y - gm) * (y - gm) * w_plus_.f(x) + (y - gp) * (y - gp) * w_minus_.f(x) +
                  delta_ * (y - hh) * (y - hh));
}

double Corrector::psi_x(double x, double y) const {
    const double gm = eps_ * profile_.g_minus(x);
    const double gp = eps_ * profile_.g_plus(x);
    const double hh = eps_ * profile_.h(x);
    return u0_.d1(x) + v_.d1(x) * y +
           0.5 * ((y - gm) * (y - gm) * w_plus_.d1(x) + (y - gp) * (y - gp) * w_minus_.d1(x)) -
           eps_ * ((y - gm) * w_plus_.f(x) * profile_.g_minus.dx(x) +
                   (y - gp) * w_minus_.f(x) * profile_.g_plus.dx(x) +
                   delta_ * (y - hh) * profile_.h.dx(x));
}

double Corrector::psi_y(double x, double y) const {
    const double gm = eps_ * profile_.g_minus(x);
    const double gp = eps_ * profile_.g_plus(x);
    const double hh = eps_ * profile_.h(x);
    return v_.f(x) + (y - gm) * w_plus_.f(x) + (y - gp) * w_minus_.f(x) + delta_ * (y - hh);
}

Corrector corrector_expand(const DomainProfile& profile, const LimitCoefficients& coeffs,
                           const SmoothFn& u0, double eps, double delta) {
    const LimitCoefficients lc = coeffs;
    SmoothFn v;
    v.f = [lc, u0](double x) { return lc.beta_o.f(x) - lc.gamma_o.f(x) * u0.d1(x); };
    v.d1 = [lc, u0](double x) {
        return lc.beta_o.d1(x) - lc.gamma_o.d1(x) * u0.d1(x) - lc.gamma_o.f(x) * u0.d2(x);
    };
    v.d2 = nullptr;

    const ScalarField gp = profile.g_plus, gm = profile.g_minus;
    auto w_of = [gp, gm, lc, u0, v](double sign) {
        // sign = +1 for w+, -1 for w-.
        return [gp, gm, lc, u0, v, sign](double x) {
            const double g = sign > 0 ? gp(x) : gm(x);
            const double slope = sign > 0 ? lc.l_plus(x) : lc.l_minus(x);
            const double k = sign > 0 ? lc.k_plus(x) : lc.k_minus(x);
            return g / (gp(x) - gm(x)) *
                   (slope - k * u0.d1(x) - sign * lc.gamma_o.f(x) * v.d1(x));
        };
    };
    SmoothFn w_plus = SmoothFn::from_callable(w_of(+1.0));
    SmoothFn w_minus = SmoothFn::from_callable(w_of(-1.0));
    return Corrector(profile, u0, std::move(v), std::move(w_plus), std::move(w_minus), eps,
                     delta);
}

double Corrector::top_y(double x) const { return eps_ * profile_.g_plus(x); }
double Corrector::bottom_y(double x) const { return eps_ * profile_.g_minus(x); }

double boundary_residual_top(const Corrector& corr, const ObliqueData& data, double x) {
    const double y = corr.top_y(x);
    return data.gamma1_plus(x, y) * corr.psi_x(x, y) + corr.psi_y(x, y) - data.beta_plus(x, y);
}

double boundary_residual_bottom(const Corrector& corr, const ObliqueData& data, double x) {
    const double y = corr.bottom_y(x);
    return data.gamma1_minus(x, y) * corr.psi_x(x, y) - corr.psi_y(x, y) -
           data.beta_minus(x, y);
}

ResidualReport boundary_residual(const Corrector& corr, const ObliqueData& data, int samples) {
    ResidualReport rep;
    for (int i = 0; i < samples; ++i) {
        const double x = static_cast<double>(i) / (samples - 1);
        const double top = boundary_residual_top(corr, data, x);
        const double bot = boundary_residual_bottom(corr, data, x);
        if (std::abs(top) > rep.max_abs_top) {
            rep.max_abs_top = std::abs(top);
            rep.witness_x_top = x;
        }
        if (std::abs(bot) > rep.max_abs_bottom) {
            rep.max_abs_bottom = std::abs(bot);
            rep.witness_x_bottom = x;
        }
    }
    return rep;
}

CheckResult check_degenerate_ellipticity(const LimitOperator& limop, int samples,
                                         std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uX(0, 3), ustep(0, 2), up(-2, 2),
        ur(-2, 2);
    CheckResult res{"degenerate ellipticity of G", true, std::numeric_limits<double>::infinity(),
                    "", "min A(X) eigenvalue and min G(X)-G(Y) margin over X <= Y"};
    double worst_eig = std::numeric_limits<double>::infinity();
    double worst_margin = worst_eig;
    for (int i = 0; i < samples; ++i) {
        const double x = ux(rng);
        const double X = uX(rng);
        const Sym2 A = assemble_ABC(limop.coefficients(), X, 0, x).A;
        const double eig = A.min_eigenvalue();
        if (eig < worst_eig) {
            worst_eig = eig;
            if (eig < -1e-12) res.witness = "A(X) at x=" + expr::format_double(x);
        }
        const double lo = uX(rng) - 1.5;
        const double hi = lo + ustep(rng);
        const double p = up(rng), r = ur(rng);
        const double margin = limop.eval(lo, p, r, x) - limop.eval(hi, p, r, x);
        if (margin < worst_margin) {
            worst_margin = margin;
            if (margin < -1e-12) res.witness = "monotonicity at x=" + expr::format_double(x);
        }
    }
    res.value = std::min(worst_eig, worst_margin);
    res.pass = worst_eig >= -1e-12 && worst_margin >= -1e-12;
    res.detail = "min eigenvalue " + expr::format_double(worst_eig) + ", min margin " +
                 expr::format_double(worst_margin);
    return res;
}

CheckResult check_dual_path(const LimitOperator& limop, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uX(-3, 3), up(-3, 3), ur(-3, 3);
    CheckResult res{"dual-path equivalence (1.8+1) vs (5.10)", true, 0, "",
                    "max |direct - reduced| / (1 + |direct|)"};
    for (int i = 0; i < samples; ++i) {
        const double X = uX(rng), p = up(rng), r = ur(rng), x = ux(rng);
        const double direct = limop.eval_direct(X, p, r, x);
        const double reduced = limop.eval_reduced(X, p, r, x);
        const double rel = std::abs(direct - reduced) / (1 + std::abs(direct));
        if (rel > res.value) {
            res.value = rel;
            res.witness = "x=" + expr::format_double(x) + ", X=" + expr::format_double(X);
        }
    }
    res.pass = res.value <= 1e-10;
    return res;
}

}  // namespace thinlim
