#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "thinlim/fields.hpp"

namespace thinlim {

/// Symmetric 2x2 matrix stored as (xx, xy, yy).
struct Sym2 {
    double xx = 0, xy = 0, yy = 0;

    Sym2 operator+(const Sym2& o) const { return {xx + o.xx, xy + o.xy, yy + o.yy}; }
    Sym2 operator-(const Sym2& o) const { return {xx - o.xx, xy - o.xy, yy - o.yy}; }
    double trace() const { return xx + yy; }
    double min_eigenvalue() const;
    double frobenius() const;
    /// Positive semidefinite within `tol` on the smallest eigenvalue.
    bool psd(double tol = 1e-12) const { return min_eigenvalue() >= -tol; }
};

/// One (lambda, mu) entry of the inf-sup family: k x 2 diffusion rows sigma,
/// drift (b1, b2), zeroth-order coefficient c and source f, all fields on
/// [0,1] x [-1,1].
struct CoefficientFamily {
    std::vector<std::array<ScalarField, 2>> sigma;
    std::array<ScalarField, 2> drift;
    ScalarField zeroth;
    ScalarField source;

    /// sigma^T sigma at z, a PSD 2x2 matrix.
    Sym2 diffusion(double x, double y) const;
    double sigma_norm(double x, double y) const;  // Frobenius of the k x 2 matrix
};

struct OperatorPoint {
    Sym2 hessian;
    double px = 0, py = 0;
    double r = 0;
    double x = 0, y = 0;
};

/// F(X,p,r,z) = inf over lambda of sup over mu of
///   -tr(sigma^T sigma X) - b.p + c r - f
/// with finite index sets; evaluation is the exact min-max.
class BellmanIsaacsOperator {
public:
    BellmanIsaacsOperator() = default;
    BellmanIsaacsOperator(std::vector<std::vector<CoefficientFamily>> families, double alpha,
                          double uniform_bound);

    int n_lambda() const { return static_cast<int>(families_.size()); }
    int n_mu() const { return families_.empty() ? 0 : static_cast<int>(families_[0].size()); }
    int sigma_rows() const;
    double alpha() const { return alpha_; }
    double uniform_bound() const { return uniform_bound_; }
    const CoefficientFamily& family(int l, int m) const { return families_[l][m]; }

    double eval(const OperatorPoint& pt) const;
    /// Single-family evaluation (used by oracles and the reduction).
    double eval_family(int l, int m, const OperatorPoint& pt) const;

private:
    std::vector<std::vector<CoefficientFamily>> families_;
    double alpha_ = 0;
    double uniform_bound_ = 0;
};

/// Outcome of one structural hypothesis check. `value` is the quantity the
/// check measures (a margin or a bound), `witness` a human-readable point
/// where the worst case occurred.
struct CheckResult {
    std::string name;
    bool pass = false;
    double value = 0;
    std::string witness;
    std::string detail;
};

/// Properness: F(X,p,r,z) - alpha r <= F(Y,p,s,z) - alpha s for X >= Y,
/// r <= s. Randomized over `samples` tuples; the canonical witness
/// (X=Y=0, p=0, r=0, s=1) is probe 0. Reports the worst margin.
CheckResult check_properness(const BellmanIsaacsOperator& op, int samples, std::uint64_t seed);

/// Degenerate ellipticity of F in X: eval(X) <= eval(Y) for random X >= Y.
CheckResult check_degenerate_ellipticity_F(const BellmanIsaacsOperator& op, int samples,
                                           std::uint64_t seed);

/// Zeroth-order positivity: min over a sample lattice and all families of
/// c - alpha; must stay nonnegative.
CheckResult check_zeroth_bound(const BellmanIsaacsOperator& op, int samples_per_axis = 41);

/// Uniform bound |sigma|,|b|,|c|,|f| <= C_F plus the Lipschitz-in-z sample
/// check for sigma and b with the same constant.
CheckResult check_uniform_bounds(const BellmanIsaacsOperator& op, int samples,
                                 std::uint64_t seed);

/// Regularity of F in (X,p): |F(X,p,..) - F(Y,q,..)| <= C_F^2 |X-Y|_F + C_F |p-q|.
CheckResult check_operator_lipschitz(const BellmanIsaacsOperator& op, int samples,
                                     std::uint64_t seed);

/// Normal strict ellipticity at the lateral endpoints: at x in {0,1} the
/// minimum over families of |sigma(x,0) (1, -gamma_o(x))^T| must be positive.
CheckResult check_normal_ellipticity(const BellmanIsaacsOperator& op,
                                     const ScalarField& gamma_o);

}  // namespace thinlim
