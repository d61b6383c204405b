#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "thinlim/operators.hpp"

namespace thinlim {

/// Profiles g_minus < h < g_plus on [0,1] bounding the thin domain
///   Omega_eps = { (x,y) : eps*g_minus(x) < y < eps*g_plus(x) }
/// together with the separation margin delta0 used by the barriers.
struct DomainProfile {
    ScalarField g_minus, g_plus, h;
    double delta0 = 0;

    double width(double x) const { return g_plus(x) - g_minus(x); }
    /// Throws ValidationError if ordering or the delta0 separation fails
    /// on a dense sample.
    void validate(int samples = 1001) const;
};

/// Oblique data on the top/bottom boundaries. gamma2 components are fixed
/// to +1 (top) and -1 (bottom) and not stored. Traces at y=0 define
/// gamma_o and beta_o; the optional expansion slopes come from the config.
struct ObliqueData {
    ScalarField gamma1_plus, gamma1_minus;  // on [0,1] x [-1,1]
    ScalarField beta_plus, beta_minus;      // on [0,1] x [-1,1]
    ScalarField gamma_o, beta_o;            // traces at y=0, on [0,1]
    std::optional<ScalarField> k_plus, k_minus, l_plus, l_minus;

    bool has_config_slopes() const {
        return k_plus.has_value() && k_minus.has_value() && l_plus.has_value() &&
               l_minus.has_value();
    }
};

enum class LateralKind { Neumann, Oblique, Dirichlet };

struct LateralBC {
    LateralKind kind = LateralKind::Neumann;
    ScalarField gamma1, gamma2, beta;  // on [0,1] x [-1,1]; used per kind

    /// Outward unit normal of (0,1) at an endpoint.
    static double nu(double x) { return x < 0.5 ? -1.0 : 1.0; }
};

enum class SolveMethod { Policy, FixedPoint };

/// Discretization and iteration settings, shared by the thin and limit
/// solvers.
struct SchemeConfig {
    int nx = 201;
    int nt = 41;
    double tol = 1e-8;
    int max_iter = 200;
    double tau = 0;  // 0 = auto: 0.4 / (discrete row Lipschitz bound)
    SolveMethod method = SolveMethod::Policy;
    std::string cross_scheme = "seven_point_split";
    std::string bc_corner_rule = "prefer_top_bottom";
};

/// Fitted grid for the thin domain: x_i = i/(nx-1), t_j = j/(nt-1),
/// y_ij = eps (g-(x_i) + t_j (g+ - g-)(x_i)). Metric terms of the
/// (x,t) -> (x,y) map are cached per node.
struct ThinGrid {
    double eps = 0;
    int nx = 0, nt = 0;
    double hx = 0, ht = 0;
    std::vector<double> xs;  // size nx
    std::vector<double> ts;  // size nt

    struct Metric {
        double y;     // physical height of the node
        double d;     // g+ - g-
        double dd;    // (g+ - g-)'
        double m;     // (g-' + t d') / d  ==  -dt/dx of the inverse map
        double m_t;   // d'/d
        double m_x;   // x-derivative of m at fixed t
        double txx;   // second derivative term: -m_x + m m_t
    };
    std::vector<Metric> metric;  // nx*nt, row-major in i then j

    int index(int i, int j) const { return i * nt + j; }
    const Metric& at(int i, int j) const { return metric[static_cast<size_t>(index(i, j))]; }
};

ThinGrid build_thin_grid(const DomainProfile& profile, double eps, int nx, int nt);

/// A fully parsed and bundled problem.
struct ProblemInstance {
    DomainProfile profile;
    ObliqueData oblique;
    LateralBC lateral;
    BellmanIsaacsOperator op;
    SchemeConfig scheme;
    double eps = 0.1;  // default epsilon for single-solve and check runs
    std::uint64_t seed = 42;
    int samples = 1000;

    /// Semantic validation: compatibility (1.4) style trace matching,
    /// first-order y-expansion consistency, lateral obliqueness and the
    /// zeroth-order positivity bound. Throws on the first failure.
    void validate() const;
};

/// Parse the sectioned key/value problem format. Structural errors and
/// geometry violations throw; when `strict` the semantic validation of
/// ProblemInstance::validate runs as well.
ProblemInstance parse_problem(const std::string& config_text, bool strict = true);

/// Same, with dotted-key overrides (e.g. "solver.nx=401") applied after the
/// file content.
ProblemInstance parse_problem(const std::string& config_text,
                              const std::vector<std::string>& overrides, bool strict = true);

/// Canonical text form of an instance; parse(serialize(parse(t))) is the
/// identity on this representation.
std::string serialize_problem(const ProblemInstance& inst);

/// Outward unit normal of the top/bottom boundary at x:
/// (-eps g+'(x), 1)/|.| on the top, (eps g-'(x), -1)/|.| on the bottom.
std::array<double, 2> outward_normal_tb(const DomainProfile& profile, double eps, double x,
                                        bool top);

/// Minimum over a dense sample of -eps g+' gamma1+ + 1 on the top and
/// eps g-' gamma1- + 1 on the bottom; both must stay positive for the
/// oblique boundary rows to be well posed.
CheckResult check_obliqueness_tb(const DomainProfile& profile, const ObliqueData& data,
                                 double eps, int samples = 1001);

/// Largest epsilon (up to eps_hi) below which check_obliqueness_tb passes,
/// located by scan plus bisection.
double obliqueness_threshold(const DomainProfile& profile, const ObliqueData& data,
                             double eps_hi = 1.0);

/// Compatibility of the boundary data traces at y=0:
/// beta+(x,0) = -beta-(x,0) and gamma1+(x,0) = -gamma1-(x,0) within 1e-10.
CheckResult check_compatibility(const ObliqueData& data, int samples = 1001);

/// First-order expansion consistency in y at the dyadic scales
/// {1e-1, 1e-2, 1e-3}: the remainder ratio must shrink.
CheckResult check_expansion(const ObliqueData& data, int samples = 201);

/// Lateral obliqueness: gamma1 . nu > 0 at both endpoints for sampled y,
/// and gamma2(x,0) = 0. Trivially passes for Neumann and Dirichlet kinds.
CheckResult check_lateral_obliqueness(const LateralBC& lateral, int samples = 201);

}  // namespace thinlim
