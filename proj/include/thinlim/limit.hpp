#pragma once

#include <functional>

#include "thinlim/problem.hpp"

namespace thinlim {

/// Scalar function on [0,1] bundled with first and second derivatives.
/// Built from an analytic field (derivatives analytic when supplied, else
/// fourth-order finite differences), from grid samples (linear interpolation
/// with second-order discrete derivatives), or from any callable.
struct SmoothFn {
    std::function<double(double)> f, d1, d2;

    static SmoothFn from_field(const ScalarField& field);
    static SmoothFn from_samples(std::vector<double> xs, std::vector<double> values);
    static SmoothFn from_callable(std::function<double(double)> f);
    static SmoothFn zero();
};

/// Expansion slopes of the boundary data in y at y=0, either taken from the
/// config or extracted by centered differences with Richardson extrapolation
/// (steps 1e-2 and 5e-3).
struct ExpansionSlopes {
    std::function<double(double)> k_plus, k_minus, l_plus, l_minus;
    double residual = 0;  // worst extrapolation correction over the sample sweep
    bool from_config = false;
};

/// Throws ValidationError when the extrapolation residual exceeds 1e-4.
ExpansionSlopes extract_y_expansion(const ObliqueData& data);

/// The limit equation's first and zeroth order corrections:
///   b = gamma_o gamma_o' - (g+ k+ + g- k-)/(g+ - g-)
///   c = -gamma_o beta_o' + (g+ l+ + g- l-)/(g+ - g-)
struct LimitCoefficients {
    SmoothFn gamma_o, beta_o;
    std::function<double(double)> k_plus, k_minus, l_plus, l_minus;
    std::function<double(double)> b, c;
};

LimitCoefficients build_b_c(const DomainProfile& profile, const ObliqueData& data,
                            const ExpansionSlopes& slopes);

/// The three symmetric matrices whose sum feeds F in the definition of G.
struct AssembledMatrices {
    Sym2 A, B, C;
    Sym2 sum() const { return A + B + C; }
};

AssembledMatrices assemble_ABC(const LimitCoefficients& coeffs, double X, double p, double x);

/// One reduced family of the one-dimensional Bellman-Isaacs form of G.
struct ReducedFamily {
    std::function<double(double)> sigma2;  // sigma~^T sigma~ (a scalar in 1-D)
    std::function<double(double)> drift;   // b~
    std::function<double(double)> zeroth;  // c(x,0)
    std::function<double(double)> source;  // f~
};

/// The limit operator G, evaluable two ways: directly through F at the
/// assembled matrix (the defining formula) and through the reduced
/// one-dimensional inf-sup form. The two agree to round-off.
class LimitOperator {
public:
    LimitOperator() = default;
    LimitOperator(BellmanIsaacsOperator base, LimitCoefficients coeffs);

    const LimitCoefficients& coefficients() const { return coeffs_; }
    const BellmanIsaacsOperator& base() const { return base_; }
    const std::vector<std::vector<ReducedFamily>>& reduced() const { return reduced_; }
    int n_lambda() const { return base_.n_lambda(); }
    int n_mu() const { return base_.n_mu(); }

    /// G(X,p,r,x) = F(A+B+C, (p, beta_o - gamma_o p), r, (x,0)).
    double eval_direct(double X, double p, double r, double x) const;

    /// Reduced evaluation: inf-sup of -sigma2 X - b~ p + c r - f~.
    double eval_reduced(double X, double p, double r, double x) const;

    double eval(double X, double p, double r, double x) const {
        return eval_reduced(X, p, r, x);
    }

private:
    BellmanIsaacsOperator base_;
    LimitCoefficients coeffs_;
    std::vector<std::vector<ReducedFamily>> reduced_;
};

/// Convenience: build the full limit operator from a parsed instance.
LimitOperator build_limit_operator(const ProblemInstance& inst);

/// Correctors of the two-term expansion and the strict test function
///   Psi_eps(x,y) = u0 + v y + 1/2 [ (y - eps g-)^2 w+ + (y - eps g+)^2 w-
///                                   + delta (y - eps h)^2 ].
class Corrector {
public:
    Corrector(DomainProfile profile, SmoothFn u0, SmoothFn v, SmoothFn w_plus, SmoothFn w_minus,
              double eps, double delta);

    double u2(double x, double y) const;  // unscaled second corrector on y in [g-, g+]
    double psi(double x, double y) const;
    double psi_x(double x, double y) const;
    double psi_y(double x, double y) const;

    double top_y(double x) const;     // eps g+(x)
    double bottom_y(double x) const;  // eps g-(x)

    const SmoothFn& v() const { return v_; }
    const SmoothFn& w_plus() const { return w_plus_; }
    const SmoothFn& w_minus() const { return w_minus_; }
    double eps() const { return eps_; }
    double delta() const { return delta_; }

private:
    DomainProfile profile_;
    SmoothFn u0_, v_, w_plus_, w_minus_;
    double eps_ = 0, delta_ = 0;
};

/// v = beta_o - gamma_o u0', w+- = g+-/(g+ - g-) (l+- - k+- u0' -+ gamma_o v').
Corrector corrector_expand(const DomainProfile& profile, const LimitCoefficients& coeffs,
                           const SmoothFn& u0, double eps, double delta);

/// Oblique residual of Psi_eps on the top/bottom boundaries.
double boundary_residual_top(const Corrector& corr, const ObliqueData& data, double x);
double boundary_residual_bottom(const Corrector& corr, const ObliqueData& data, double x);

struct ResidualReport {
    double max_abs_top = 0, max_abs_bottom = 0;
    double witness_x_top = 0, witness_x_bottom = 0;
    double max_abs() const { return std::max(max_abs_top, max_abs_bottom); }
};

ResidualReport boundary_residual(const Corrector& corr, const ObliqueData& data,
                                 int samples = 401);

/// (a) A(X) stays PSD for random X >= 0 (the rank-one factorization);
/// (b) eval is nonincreasing in X for random ordered pairs.
CheckResult check_degenerate_ellipticity(const LimitOperator& limop, int samples,
                                         std::uint64_t seed);

/// Dual-path agreement between the defining and reduced forms of G on
/// seeded random tuples: |direct - reduced| <= 1e-10 (1 + |direct|).
CheckResult check_dual_path(const LimitOperator& limop, int samples, std::uint64_t seed);

}  // namespace thinlim
