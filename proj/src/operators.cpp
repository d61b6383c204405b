#include "thinlim/operators.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace thinlim {

double Sym2::min_eigenvalue() const {
    const double half_tr = 0.5 * (xx + yy);
    const double det = xx * yy - xy * xy;
    const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - det));
    return half_tr - disc;
}

double Sym2::frobenius() const { return std::sqrt(xx * xx + 2 * xy * xy + yy * yy); }

Sym2 CoefficientFamily::diffusion(double x, double y) const {
    Sym2 q;
    for (const auto& row : sigma) {
        const double s1 = row[0](x, y);
        const double s2 = row[1](x, y);
        q.xx += s1 * s1;
        q.xy += s1 * s2;
        q.yy += s2 * s2;
    }
    return q;
}

double CoefficientFamily::sigma_norm(double x, double y) const {
    double s = 0;
    for (const auto& row : sigma) {
        const double s1 = row[0](x, y);
        const double s2 = row[1](x, y);
        s += s1 * s1 + s2 * s2;
    }
    return std::sqrt(s);
}

BellmanIsaacsOperator::BellmanIsaacsOperator(
    std::vector<std::vector<CoefficientFamily>> families, double alpha, double uniform_bound)
    : families_(std::move(families)), alpha_(alpha), uniform_bound_(uniform_bound) {}

int BellmanIsaacsOperator::sigma_rows() const {
    return families_.empty() ? 0 : static_cast<int>(families_[0][0].sigma.size());
}

double BellmanIsaacsOperator::eval_family(int l, int m, const OperatorPoint& pt) const {
    const CoefficientFamily& fam = families_[l][m];
    const Sym2 q = fam.diffusion(pt.x, pt.y);
    const double trace = q.xx * pt.hessian.xx + 2 * q.xy * pt.hessian.xy + q.yy * pt.hessian.yy;
    const double drift = fam.drift[0](pt.x, pt.y) * pt.px + fam.drift[1](pt.x, pt.y) * pt.py;
    return -trace - drift + fam.zeroth(pt.x, pt.y) * pt.r - fam.source(pt.x, pt.y);
}

double BellmanIsaacsOperator::eval(const OperatorPoint& pt) const {
    double inf = std::numeric_limits<double>::infinity();
    for (int l = 0; l < n_lambda(); ++l) {
        double sup = -std::numeric_limits<double>::infinity();
        for (int m = 0; m < n_mu(); ++m) sup = std::max(sup, eval_family(l, m, pt));
        inf = std::min(inf, sup);
    }
    return inf;
}

namespace {

Sym2 random_sym(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    return {u(rng), u(rng), u(rng)};
}

Sym2 random_psd(std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    // M^T M is PSD for any M.
    return {a * a + c * c, a * b + c * d, b * b + d * d};
}

std::string point_witness(double x, double y) {
    return "(x=" + expr::format_double(x) + ", y=" + expr::format_double(y) + ")";
}

}  // namespace

CheckResult check_properness(const BellmanIsaacsOperator& op, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uy(-1, 1), ur(-2, 2), up(-2, 2),
        ut(0, 2);
    CheckResult res{"properness (H1)/(5.7)", true, std::numeric_limits<double>::infinity(), "",
                    "margin of F(Y,p,s)-alpha*s - (F(X,p,r)-alpha*r) over X>=Y, r<=s"};
    for (int i = 0; i < samples; ++i) {
        OperatorPoint lo, hi;
        if (i == 0) {
            // canonical witness probe: X=Y=0, p=0, r=0, s=1
            lo.r = 0;
            hi.r = 1;
            lo.x = hi.x = 0.5;
        } else {
            const Sym2 y = random_sym(rng, 2.0);
            const Sym2 x = y + random_psd(rng, 1.0);
            lo.hessian = x;
            hi.hessian = y;
            lo.px = hi.px = up(rng);
            lo.py = hi.py = up(rng);
            lo.r = ur(rng);
            hi.r = lo.r + ut(rng);
            lo.x = hi.x = ux(rng);
            lo.y = hi.y = uy(rng);
        }
        const double margin = (op.eval(hi) - op.alpha() * hi.r) - (op.eval(lo) - op.alpha() * lo.r);
        if (margin < res.value) {
            res.value = margin;
            res.witness = point_witness(lo.x, lo.y) + " r=" + expr::format_double(lo.r) +
                          " s=" + expr::format_double(hi.r);
        }
    }
    res.pass = res.value >= -1e-12;
    return res;
}

CheckResult check_degenerate_ellipticity_F(const BellmanIsaacsOperator& op, int samples,
                                           std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uy(-1, 1), up(-2, 2), ur(-2, 2);
    CheckResult res{"degenerate ellipticity of F (H1)", true,
                    std::numeric_limits<double>::infinity(), "",
                    "margin of F(Y,..) - F(X,..) over X >= Y"};
    for (int i = 0; i < samples; ++i) {
        OperatorPoint big, small;
        small.hessian = random_sym(rng, 2.0);
        big.hessian = small.hessian + random_psd(rng, 1.0);
        big.px = small.px = up(rng);
        big.py = small.py = up(rng);
        big.r = small.r = ur(rng);
        big.x = small.x = ux(rng);
        big.y = small.y = uy(rng);
        const double margin = op.eval(small) - op.eval(big);
        if (margin < res.value) {
            res.value = margin;
            res.witness = point_witness(big.x, big.y);
        }
    }
    res.pass = res.value >= -1e-12;
    return res;
}

CheckResult check_zeroth_bound(const BellmanIsaacsOperator& op, int samples_per_axis) {
    CheckResult res{"zeroth-order bound (5.7)", true, std::numeric_limits<double>::infinity(),
                    "", "min of c - alpha over families and a sample lattice"};
    const int n = samples_per_axis;
    for (int l = 0; l < op.n_lambda(); ++l) {
        for (int m = 0; m < op.n_mu(); ++m) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double x = static_cast<double>(i) / (n - 1);
                    const double y = -1.0 + 2.0 * j / (n - 1);
                    const double margin = op.family(l, m).zeroth(x, y) - op.alpha();
                    if (margin < res.value) {
                        res.value = margin;
                        res.witness = "family (" + std::to_string(l) + "," +
                                      std::to_string(m) + ") at " + point_witness(x, y);
                    }
                }
            }
        }
    }
    res.pass = res.value >= -1e-12;
    return res;
}

CheckResult check_uniform_bounds(const BellmanIsaacsOperator& op, int samples,
                                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uy(-1, 1);
    const double cf = op.uniform_bound();
    CheckResult res{"uniform bounds (5.6)", true, 0, "", ""};
    double worst = 0;
    double lip_worst = 0;
    double omega_cf = 0;  // empirical modulus slope for c, f (reported only)
    for (int i = 0; i < samples; ++i) {
        const double x = ux(rng), y = uy(rng);
        const double x2 = ux(rng), y2 = uy(rng);
        const double dist = std::hypot(x - x2, y - y2);
        for (int l = 0; l < op.n_lambda(); ++l) {
            for (int m = 0; m < op.n_mu(); ++m) {
                const auto& fam = op.family(l, m);
                const double bound = std::max(
                    {fam.sigma_norm(x, y), std::hypot(fam.drift[0](x, y), fam.drift[1](x, y)),
                     std::abs(fam.zeroth(x, y)), std::abs(fam.source(x, y))});
                if (bound > worst) {
                    worst = bound;
                    res.witness = point_witness(x, y);
                }
                if (dist > 1e-8) {
                    const double dsig = std::abs(fam.sigma_norm(x, y) - fam.sigma_norm(x2, y2));
                    const double db =
                        std::hypot(fam.drift[0](x, y) - fam.drift[0](x2, y2),
                                   fam.drift[1](x, y) - fam.drift[1](x2, y2));
                    lip_worst = std::max(lip_worst, std::max(dsig, db) / dist);
                    const double dc = std::abs(fam.zeroth(x, y) - fam.zeroth(x2, y2));
                    const double df = std::abs(fam.source(x, y) - fam.source(x2, y2));
                    omega_cf = std::max(omega_cf, std::max(dc, df) / dist);
                }
            }
        }
    }
    res.value = worst;
    res.pass = worst <= cf + 1e-12 && lip_worst <= cf + 1e-9;
    res.detail = "max coefficient " + expr::format_double(worst) + ", sigma/b Lipschitz " +
                 expr::format_double(lip_worst) + ", empirical c/f modulus slope " +
                 expr::format_double(omega_cf) + " vs C_F " + expr::format_double(cf);
    return res;
}

CheckResult check_operator_lipschitz(const BellmanIsaacsOperator& op, int samples,
                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0, 1), uy(-1, 1), up(-2, 2), ur(-2, 2);
    const double cf = op.uniform_bound();
    CheckResult res{"operator regularity (5.8)", true, 0, "",
                    "max of |F(X,p)-F(Y,q)| - (C_F^2 |X-Y| + C_F |p-q|)"};
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        OperatorPoint a, b;
        a.hessian = random_sym(rng, 2.0);
        b.hessian = random_sym(rng, 2.0);
        a.px = up(rng);
        a.py = up(rng);
        b.px = up(rng);
        b.py = up(rng);
        a.r = b.r = ur(rng);
        a.x = b.x = ux(rng);
        a.y = b.y = uy(rng);
        const double lhs = std::abs(op.eval(a) - op.eval(b));
        const double rhs = cf * cf * (a.hessian - b.hessian).frobenius() +
                           cf * std::hypot(a.px - b.px, a.py - b.py);
        const double excess = lhs - rhs;
        if (excess > worst) {
            worst = excess;
            res.witness = point_witness(a.x, a.y);
        }
    }
    res.value = worst;
    res.pass = worst <= 1e-9;
    return res;
}

CheckResult check_normal_ellipticity(const BellmanIsaacsOperator& op,
                                     const ScalarField& gamma_o) {
    CheckResult res{"normal ellipticity (5.30)", true, std::numeric_limits<double>::infinity(),
                    "", "min over endpoints and families of |sigma(x,0) (1,-gamma_o)^T|"};
    for (const double x : {0.0, 1.0}) {
        const double g = gamma_o(x);
        for (int l = 0; l < op.n_lambda(); ++l) {
            for (int m = 0; m < op.n_mu(); ++m) {
                const auto& fam = op.family(l, m);
                double norm2 = 0;
                for (const auto& row : fam.sigma) {
                    const double v = row[0](x, 0.0) - row[1](x, 0.0) * g;
                    norm2 += v * v;
                }
                const double norm = std::sqrt(norm2);
                if (norm < res.value) {
                    res.value = norm;
                    res.witness = "x=" + expr::format_double(x) + " family (" +
                                  std::to_string(l) + "," + std::to_string(m) + ")";
                }
            }
        }
    }
    res.pass = res.value > 0;
    return res;
}

}  // namespace thinlim
