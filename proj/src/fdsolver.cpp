#include "thinlim/fdsolver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace thinlim {

namespace {

constexpr double kTiny = 1e-14;

struct RowBuilder {
    int self = 0;
    std::vector<std::pair<int, double>> entries;
    double rhs = 0;

    void add(int idx, double coef) {
        if (coef == 0.0) return;
        for (auto& [k, c] : entries) {
            if (k == idx) {
                c += coef;
                return;
            }
        }
        entries.emplace_back(idx, coef);
    }

    double diag() const {
        for (const auto& [k, c] : entries)
            if (k == self) return c;
        return 0;
    }

    DiscreteScheme::Row finish() const { return DiscreteScheme::Row{entries, rhs}; }
};

// Upwind contribution of  -D * dU/ds  with one-sided differences of spacing
// h toward idx_fwd (forward) or idx_bwd (backward).
void add_upwind(RowBuilder& row, double drift, double h, int idx_fwd, int idx_bwd) {
    if (drift >= 0) {
        row.add(row.self, drift / h);
        row.add(idx_fwd, -drift / h);
    } else {
        row.add(row.self, -drift / h);
        row.add(idx_bwd, drift / h);
    }
}

}  // namespace

double GridFunction::sup_norm() const {
    double s = 0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
}

double GridFunction::interp(double x) const {
    const auto& g = xs;
    size_t i = static_cast<size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin());
    if (i == 0) i = 1;
    if (i >= g.size()) i = g.size() - 1;
    const double w = (x - g[i - 1]) / (g[i] - g[i - 1]);
    return (1 - w) * values[i - 1] + w * values[i];
}

double DiscreteScheme::residual_at(std::span<const double> u, int node) const {
    const Node& nd = nodes_[static_cast<size_t>(node)];
    if (nd.rows.size() == 1) return nd.rows[0].eval(u);
    double inf = std::numeric_limits<double>::infinity();
    for (int l = 0; l < nd.n_lambda; ++l) {
        double sup = -std::numeric_limits<double>::infinity();
        for (int m = 0; m < nd.n_mu; ++m)
            sup = std::max(sup, nd.rows[static_cast<size_t>(l * nd.n_mu + m)].eval(u));
        inf = std::min(inf, sup);
    }
    return inf;
}

double DiscreteScheme::sup_residual(std::span<const double> u) const {
    double s = 0;
    for (int i = 0; i < size(); ++i) s = std::max(s, std::abs(residual_at(u, i)));
    return s;
}

double DiscreteScheme::lipschitz_bound() const {
    double worst = 0;
    for (const Node& nd : nodes_) {
        for (const Row& r : nd.rows) {
            double sum = 0;
            for (const auto& [k, c] : r.entries) sum += std::abs(c);
            worst = std::max(worst, sum);
        }
    }
    return worst;
}

GridFunction DiscreteScheme::make_grid_function() const {
    GridFunction g;
    if (thin_grid_) {
        g.grid = thin_grid_;
        g.values.assign(static_cast<size_t>(thin_grid_->nx) * thin_grid_->nt, 0.0);
        g.xs = thin_grid_->xs;
    } else {
        g.xs = base_xs_;
        g.values.assign(base_xs_.size(), 0.0);
    }
    return g;
}

namespace {

struct ThinAssembler {
    const ProblemInstance& inst;
    const ThinGrid& grid;
    double eps;

    int idx(int i, int j) const { return grid.index(i, j); }

    // Interior PDE rows, one per family, monotone by the seven-point split.
    std::vector<DiscreteScheme::Row> interior_rows(int i, int j, double* anisotropy) const {
        const auto& mm = grid.at(i, j);
        const double x = grid.xs[static_cast<size_t>(i)];
        const double hx = grid.hx, ht = grid.ht;
        const double inv_ed = 1.0 / (eps * mm.d);
        std::vector<DiscreteScheme::Row> rows;
        for (int l = 0; l < inst.op.n_lambda(); ++l) {
            for (int m = 0; m < inst.op.n_mu(); ++m) {
                const CoefficientFamily& fam = inst.op.family(l, m);
                const Sym2 q = fam.diffusion(x, mm.y);
                const double axx = q.xx;
                const double axt = -q.xx * mm.m + q.xy * inv_ed;
                const double att = q.xx * mm.m * mm.m - 2 * q.xy * mm.m * inv_ed +
                                   q.yy * inv_ed * inv_ed;
                const double et = q.xx * mm.txx - 2 * q.xy * mm.m_t * inv_ed;
                const double b1 = fam.drift[0](x, mm.y);
                const double b2 = fam.drift[1](x, mm.y);
                const double dx_drift = b1;
                const double dt_drift = -b1 * mm.m + b2 * inv_ed + et;

                const double cross = std::abs(axt) / (hx * ht);
                if (cross > axx / (hx * hx) + kTiny || cross > att / (ht * ht) + kTiny)
                    throw ValidationError(
                        "monotone stencil",
                        "cross term dominates the diagonal at node (" + std::to_string(i) +
                            "," + std::to_string(j) + ") for family (" + std::to_string(l) +
                            "," + std::to_string(m) + "); increase solver.nt");
                if (axx > kTiny)
                    *anisotropy = std::max(*anisotropy, att / axx);

                RowBuilder row;
                row.self = idx(i, j);
                // second differences
                row.add(row.self, 2 * axx / (hx * hx) + 2 * att / (ht * ht));
                row.add(idx(i + 1, j), -axx / (hx * hx));
                row.add(idx(i - 1, j), -axx / (hx * hx));
                row.add(idx(i, j + 1), -att / (ht * ht));
                row.add(idx(i, j - 1), -att / (ht * ht));
                // cross term, split by sign
                const double w = axt / (hx * ht);
                if (axt >= 0) {
                    row.add(row.self, -2 * w);
                    row.add(idx(i + 1, j + 1), -w);
                    row.add(idx(i - 1, j - 1), -w);
                    row.add(idx(i + 1, j), w);
                    row.add(idx(i - 1, j), w);
                    row.add(idx(i, j + 1), w);
                    row.add(idx(i, j - 1), w);
                } else {
                    row.add(row.self, 2 * w);
                    row.add(idx(i - 1, j + 1), w);
                    row.add(idx(i + 1, j - 1), w);
                    row.add(idx(i + 1, j), -w);
                    row.add(idx(i - 1, j), -w);
                    row.add(idx(i, j + 1), -w);
                    row.add(idx(i, j - 1), -w);
                }
                add_upwind(row, dx_drift, hx, idx(i + 1, j), idx(i - 1, j));
                add_upwind(row, dt_drift, ht, idx(i, j + 1), idx(i, j - 1));
                row.add(row.self, fam.zeroth(x, mm.y));
                row.rhs = fam.source(x, mm.y);
                rows.push_back(row.finish());
            }
        }
        return rows;
    }

    // A first-order boundary operator cx u_x|grid + ct U_t - beta in grid
    // coordinates. Rows are built by upwind one-sided differences; a
    // candidate fails when the upwind neighbor leaves the grid.
    struct DirOperator {
        double cx = 0, ct = 0, beta = 0;
    };

    DirOperator tb_operator(int i, int j, bool top) const {
        const auto& mm = grid.at(i, j);
        const double x = grid.xs[static_cast<size_t>(i)];
        const double gamma = top ? inst.oblique.gamma1_plus(x, mm.y)
                                 : inst.oblique.gamma1_minus(x, mm.y);
        const double gslope = top ? inst.profile.g_plus.dx(x) : inst.profile.g_minus.dx(x);
        DirOperator op;
        op.cx = gamma;
        // top: gamma u_x + u_y; bottom: gamma u_x - u_y (in physical coords)
        op.ct = top ? (1.0 - eps * gamma * gslope) / (eps * mm.d)
                    : -(1.0 + eps * gamma * gslope) / (eps * mm.d);
        if ((top && op.ct <= 0) || (!top && op.ct >= 0))
            throw ValidationError("obliqueness",
                                  "oblique row ill posed at node (" + std::to_string(i) + "," +
                                      std::to_string(j) + "): obliqueness fails at this eps");
        op.beta = top ? inst.oblique.beta_plus(x, mm.y) : inst.oblique.beta_minus(x, mm.y);
        return op;
    }

    std::optional<DirOperator> lateral_operator(int i, int j) const {
        if (inst.lateral.kind == LateralKind::Dirichlet) return std::nullopt;
        const auto& mm = grid.at(i, j);
        const double x = grid.xs[static_cast<size_t>(i)];
        const double nu = LateralBC::nu(x);
        DirOperator op;
        if (inst.lateral.kind == LateralKind::Neumann) {
            op.cx = nu;
            op.ct = -nu * mm.m;
            op.beta = 0;
        } else {
            const double g1 = inst.lateral.gamma1(x, mm.y);
            if (g1 * nu <= 0)
                throw ValidationError("lateral obliqueness (5.2111)",
                                      "gamma1 . nu <= 0 at x=" + expr::format_double(x));
            op.cx = g1;
            op.ct = -g1 * mm.m + inst.lateral.gamma2(x, mm.y) / (eps * mm.d);
            op.beta = inst.lateral.beta(x, mm.y);
        }
        return op;
    }

    std::optional<DiscreteScheme::Row> dir_row(int i, int j, const DirOperator& op) const {
        RowBuilder row;
        row.self = idx(i, j);
        if (std::abs(op.cx) > kTiny) {
            if (op.cx > 0) {
                if (i == 0) return std::nullopt;
                row.add(row.self, op.cx / grid.hx);
                row.add(idx(i - 1, j), -op.cx / grid.hx);
            } else {
                if (i == grid.nx - 1) return std::nullopt;
                row.add(row.self, -op.cx / grid.hx);
                row.add(idx(i + 1, j), op.cx / grid.hx);
            }
        }
        if (std::abs(op.ct) > kTiny) {
            if (op.ct > 0) {
                if (j == 0) return std::nullopt;
                row.add(row.self, op.ct / grid.ht);
                row.add(idx(i, j - 1), -op.ct / grid.ht);
            } else {
                if (j == grid.nt - 1) return std::nullopt;
                row.add(row.self, -op.ct / grid.ht);
                row.add(idx(i, j + 1), op.ct / grid.ht);
            }
        }
        if (row.diag() <= kTiny) return std::nullopt;
        row.rhs = op.beta;
        return row.finish();
    }

    DiscreteScheme::Row dirichlet_row(int i, int j) const {
        const auto& mm = grid.at(i, j);
        RowBuilder row;
        row.self = idx(i, j);
        row.add(row.self, 1.0);
        row.rhs = inst.lateral.beta(grid.xs[static_cast<size_t>(i)], mm.y);
        return row.finish();
    }

    // Corner nodes accept either boundary operator or any nonnegative
    // combination of the two (the viscosity formulation admits both
    // conditions there). Candidates in rule order: the preferred pure
    // operator, the other one, then the blends that cancel one grid
    // direction.
    std::optional<DiscreteScheme::Row> corner_row(int i, int j, bool top, bool prefer_tb) const {
        const DirOperator tb = tb_operator(i, j, top);
        if (inst.lateral.kind == LateralKind::Dirichlet) {
            auto tb_try = dir_row(i, j, tb);
            if (prefer_tb && tb_try) return tb_try;
            return dirichlet_row(i, j);
        }
        const DirOperator lat = *lateral_operator(i, j);
        std::vector<DirOperator> candidates;
        if (prefer_tb) {
            candidates.push_back(tb);
            candidates.push_back(lat);
        } else {
            candidates.push_back(lat);
            candidates.push_back(tb);
        }
        auto blend = [](const DirOperator& a, const DirOperator& b, double wa, double wb) {
            return DirOperator{wa * a.cx + wb * b.cx, wa * a.ct + wb * b.ct,
                               wa * a.beta + wb * b.beta};
        };
        if (lat.ct * tb.ct < 0)  // cancel the t-coupling
            candidates.push_back(blend(lat, tb, std::abs(tb.ct), std::abs(lat.ct)));
        if (lat.cx * tb.cx < 0)  // cancel the x-coupling
            candidates.push_back(blend(lat, tb, std::abs(tb.cx), std::abs(lat.cx)));
        for (const DirOperator& cand : candidates)
            if (auto row = dir_row(i, j, cand)) return row;
        return std::nullopt;
    }
};

void normalize_node(DiscreteScheme::Node& nd, int self) {
    double scale = 0;
    for (const auto& r : nd.rows) {
        for (const auto& [k, c] : r.entries)
            if (k == self) scale = std::max(scale, std::abs(c));
    }
    if (scale <= 0) scale = 1;
    nd.scale = scale;
    for (auto& r : nd.rows) {
        for (auto& [k, c] : r.entries) c /= scale;
        r.rhs /= scale;
    }
}

void assert_monotone_rows(const DiscreteScheme::Node& nd, int self, const char* where) {
    for (const auto& r : nd.rows) {
        for (const auto& [k, c] : r.entries) {
            if (k != self && c > 1e-12)
                throw ValidationError("monotone stencil",
                                      std::string("positive off-diagonal coefficient in a ") +
                                          where + " row at node " + std::to_string(self));
        }
    }
}

}  // namespace

DiscreteScheme discretize_thin(const ProblemInstance& inst, double eps,
                               const SchemeConfig& cfg) {
    if (auto r = check_obliqueness_tb(inst.profile, inst.oblique, eps, 257); !r.pass)
        throw ValidationError("obliqueness",
                              "obliqueness (oblique_TB) fails at eps=" +
                                  expr::format_double(eps) + ", witness " + r.witness);

    DiscreteScheme scheme;
    scheme.thin_grid_ = std::make_shared<ThinGrid>(
        build_thin_grid(inst.profile, eps, cfg.nx, cfg.nt));
    const ThinGrid& grid = *scheme.thin_grid_;
    ThinAssembler as{inst, grid, eps};
    const bool prefer_tb = cfg.bc_corner_rule != "prefer_lateral";

    scheme.nodes_.resize(static_cast<size_t>(grid.nx) * grid.nt);
    double anisotropy = 1;
    for (int i = 0; i < grid.nx; ++i) {
        for (int j = 0; j < grid.nt; ++j) {
            DiscreteScheme::Node nd;
            const bool on_lateral = (i == 0 || i == grid.nx - 1);
            const bool on_top = (j == grid.nt - 1);
            const bool on_bottom = (j == 0);
            if (!on_lateral && !on_top && !on_bottom) {
                nd.rows = as.interior_rows(i, j, &anisotropy);
                nd.n_lambda = inst.op.n_lambda();
                nd.n_mu = inst.op.n_mu();
            } else if (!on_lateral) {
                auto row = as.dir_row(i, j, as.tb_operator(i, j, on_top));
                nd.rows = {*row};  // both x-neighbors exist away from corners
            } else if (!on_top && !on_bottom) {
                if (inst.lateral.kind == LateralKind::Dirichlet) {
                    nd.rows = {as.dirichlet_row(i, j)};
                } else {
                    auto row = as.dir_row(i, j, *as.lateral_operator(i, j));
                    nd.rows = {*row};  // both t-neighbors exist away from corners
                }
            } else if (auto row = as.corner_row(i, j, on_top, prefer_tb)) {
                nd.rows = {*row};
            } else {
                throw ValidationError(
                    "monotone stencil",
                    "no monotone boundary stencil at corner (" + std::to_string(i) + "," +
                        std::to_string(j) + "); the boundary operators span no inward cone");
            }
            const int self = grid.index(i, j);
            normalize_node(nd, self);
            assert_monotone_rows(nd, self, "thin");
            scheme.nodes_[static_cast<size_t>(self)] = std::move(nd);
        }
    }
    scheme.anisotropy_ = anisotropy;
    if (cfg.tau > 0 && cfg.tau * scheme.lipschitz_bound() >= 2)
        throw ValidationError("damping",
                              "solver.tau exceeds the stable range for this scheme");
    return scheme;
}

DiscreteScheme discretize_limit(const LimitOperator& limop, const LateralBC& lateral,
                                const SchemeConfig& cfg) {
    return discretize_limit(limop.reduced(), lateral, cfg);
}

DiscreteScheme discretize_limit(const std::vector<std::vector<ReducedFamily>>& reduced,
                                const LateralBC& lateral, const SchemeConfig& cfg) {
    DiscreteScheme scheme;
    const int n = cfg.nx;
    const double h = 1.0 / (n - 1);
    scheme.base_xs_.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) scheme.base_xs_[static_cast<size_t>(i)] = i * h;
    scheme.nodes_.resize(static_cast<size_t>(n));

    const int nl = static_cast<int>(reduced.size());
    const int nm = static_cast<int>(reduced[0].size());

    auto interior_row = [&](int i, const ReducedFamily& fam) {
        const double x = scheme.base_xs_[static_cast<size_t>(i)];
        const double s2 = fam.sigma2(x);
        const double b = fam.drift(x);
        RowBuilder row;
        row.self = i;
        row.add(i, 2 * s2 / (h * h));
        row.add(i + 1, -s2 / (h * h));
        row.add(i - 1, -s2 / (h * h));
        if (std::abs(b) * h <= 2 * s2) {
            // centered drift keeps the positive-coefficient property here
            row.add(i + 1, -b / (2 * h));
            row.add(i - 1, b / (2 * h));
        } else {
            add_upwind(row, b, h, i + 1, i - 1);
        }
        row.add(i, fam.zeroth(x));
        row.rhs = fam.source(x);
        return row.finish();
    };

    // Endpoint PDE row with the boundary condition folded in through the
    // ghost value: at x=0, u(-h) = u(h) - 2h u'(0); at x=1 mirrored.
    // u'(endpoint) is known exactly from the boundary condition.
    auto ghost_row = [&](int i, const ReducedFamily& fam, double slope) {
        const double x = scheme.base_xs_[static_cast<size_t>(i)];
        const double s2 = fam.sigma2(x);
        const double b = fam.drift(x);
        const int inner = (i == 0) ? 1 : n - 2;
        const double sign = (i == 0) ? -1.0 : 1.0;
        RowBuilder row;
        row.self = i;
        row.add(i, 2 * s2 / (h * h));
        row.add(inner, -2 * s2 / (h * h));
        row.add(i, fam.zeroth(x));
        row.rhs = fam.source(x) + sign * 2 * s2 * slope / h + b * slope;
        return row.finish();
    };

    for (int i = 0; i < n; ++i) {
        DiscreteScheme::Node nd;
        const double x = scheme.base_xs_[static_cast<size_t>(i)];
        if (i > 0 && i < n - 1) {
            nd.n_lambda = nl;
            nd.n_mu = nm;
            for (int l = 0; l < nl; ++l)
                for (int m = 0; m < nm; ++m)
                    nd.rows.push_back(interior_row(i, reduced[static_cast<size_t>(l)]
                                                          [static_cast<size_t>(m)]));
        } else if (lateral.kind == LateralKind::Dirichlet) {
            RowBuilder row;
            row.self = i;
            row.add(i, 1.0);
            row.rhs = lateral.beta(x, 0.0);
            nd.rows = {row.finish()};
        } else {
            double slope = 0;  // Neumann
            if (lateral.kind == LateralKind::Oblique) {
                const double g1 = lateral.gamma1(x, 0.0);
                if (g1 * LateralBC::nu(x) <= 0)
                    throw ValidationError("lateral obliqueness (5.2111)",
                                          "gamma1 . nu <= 0 at x=" + expr::format_double(x));
                slope = lateral.beta(x, 0.0) / g1;
            }
            double min_s2 = std::numeric_limits<double>::infinity();
            for (int l = 0; l < nl; ++l)
                for (int m = 0; m < nm; ++m)
                    min_s2 = std::min(min_s2, reduced[static_cast<size_t>(l)]
                                                     [static_cast<size_t>(m)].sigma2(x));
            if (min_s2 > kTiny) {
                nd.n_lambda = nl;
                nd.n_mu = nm;
                for (int l = 0; l < nl; ++l)
                    for (int m = 0; m < nm; ++m)
                        nd.rows.push_back(ghost_row(i, reduced[static_cast<size_t>(l)]
                                                              [static_cast<size_t>(m)], slope));
            } else {
                // degenerate normal diffusion: first-order one-sided BC row
                RowBuilder row;
                row.self = i;
                const int inner = (i == 0) ? 1 : n - 2;
                const double coef = (lateral.kind == LateralKind::Oblique)
                                        ? lateral.gamma1(x, 0.0) * LateralBC::nu(x)
                                        : 1.0;
                row.add(i, coef / h);
                row.add(inner, -coef / h);
                row.rhs = (lateral.kind == LateralKind::Oblique)
                              ? lateral.beta(x, 0.0) * LateralBC::nu(x)
                              : 0.0;
                nd.rows = {row.finish()};
            }
        }
        normalize_node(nd, i);
        assert_monotone_rows(nd, i, "limit");
        scheme.nodes_[static_cast<size_t>(i)] = std::move(nd);
    }
    if (cfg.tau > 0 && cfg.tau * scheme.lipschitz_bound() >= 2)
        throw ValidationError("damping",
                              "solver.tau exceeds the stable range for this scheme");
    return scheme;
}

namespace {

std::vector<int> choose_policy(const DiscreteScheme& scheme, std::span<const double> u) {
    std::vector<int> policy(static_cast<size_t>(scheme.size()), 0);
    for (int i = 0; i < scheme.size(); ++i) {
        const auto& nd = scheme.node(i);
        if (nd.rows.size() == 1) continue;
        double best_inf = std::numeric_limits<double>::infinity();
        int best = 0;
        for (int l = 0; l < nd.n_lambda; ++l) {
            double sup = -std::numeric_limits<double>::infinity();
            int arg = 0;
            for (int m = 0; m < nd.n_mu; ++m) {
                const double v = nd.rows[static_cast<size_t>(l * nd.n_mu + m)].eval(u);
                if (v > sup) {
                    sup = v;
                    arg = l * nd.n_mu + m;
                }
            }
            if (sup < best_inf) {
                best_inf = sup;
                best = arg;
            }
        }
        policy[static_cast<size_t>(i)] = best;
    }
    return policy;
}

void solve_policy(const DiscreteScheme& scheme, const SchemeConfig& cfg,
                  std::vector<double>& u, SolveReport& rep) {
    const int n = scheme.size();
    Eigen::SparseMatrix<double> A(n, n);
    Eigen::VectorXd b(n);
    std::vector<Eigen::Triplet<double>> trips;
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        const std::vector<int> policy = choose_policy(scheme, u);
        trips.clear();
        for (int i = 0; i < n; ++i) {
            const auto& row =
                scheme.node(i).rows[static_cast<size_t>(policy[static_cast<size_t>(i)])];
            for (const auto& [k, c] : row.entries) trips.emplace_back(i, k, c);
            b[i] = row.rhs;
        }
        A.setFromTriplets(trips.begin(), trips.end());
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(A);
        if (lu.info() != Eigen::Success)
            throw SolverDivergence("policy-iteration linear solve failed",
                                   rep.residual_history);
        const Eigen::VectorXd sol = lu.solve(b);
        for (int i = 0; i < n; ++i) u[static_cast<size_t>(i)] = sol[i];
        rep.iterations = iter;
        const double res = scheme.sup_residual(u);
        rep.residual_history.push_back(res);
        if (res <= cfg.tol) {
            rep.final_residual = res;
            return;
        }
    }
    rep.final_residual = rep.residual_history.empty() ? 0 : rep.residual_history.back();
    std::vector<double> tail(rep.residual_history.end() -
                                 std::min<size_t>(5, rep.residual_history.size()),
                             rep.residual_history.end());
    throw SolverDivergence("policy iteration did not reach tol within max_iter", tail);
}

void solve_fixed_point(const DiscreteScheme& scheme, const SchemeConfig& cfg,
                       std::vector<double>& u, SolveReport& rep) {
    const int n = scheme.size();
    const double lip = scheme.lipschitz_bound();
    const double tau = cfg.tau > 0 ? cfg.tau : 0.4 / lip;
    if (tau * lip >= 2)
        throw ValidationError("damping", "tau * (discrete Lipschitz bound) must stay below 2");
    std::vector<double> res(static_cast<size_t>(n));
    for (int iter = 1; iter <= cfg.max_iter; ++iter) {
        double sup = 0;
        for (int i = 0; i < n; ++i) {
            res[static_cast<size_t>(i)] = scheme.residual_at(u, i);
            sup = std::max(sup, std::abs(res[static_cast<size_t>(i)]));
        }
        rep.iterations = iter;
        rep.residual_history.push_back(sup);
        if (sup <= cfg.tol) {
            rep.final_residual = sup;
            return;
        }
        for (int i = 0; i < n; ++i) u[static_cast<size_t>(i)] -= tau * res[static_cast<size_t>(i)];
    }
    rep.final_residual = rep.residual_history.back();
    std::vector<double> tail(rep.residual_history.end() -
                                 std::min<size_t>(5, rep.residual_history.size()),
                             rep.residual_history.end());
    throw SolverDivergence("fixed-point iteration did not reach tol within max_iter", tail);
}

}  // namespace

std::pair<GridFunction, SolveReport> solve(const DiscreteScheme& scheme,
                                           const SchemeConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    GridFunction out = scheme.make_grid_function();
    SolveReport rep;
    if (cfg.method == SolveMethod::FixedPoint)
        solve_fixed_point(scheme, cfg, out.values, rep);
    else
        solve_policy(scheme, cfg, out.values, rep);
    rep.sup_norm = out.sup_norm();
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(out), std::move(rep)};
}

CheckResult check_scheme_monotonicity(const DiscreteScheme& scheme, int trials,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uval(-1, 1), ubump(0.1, 2.0);
    std::uniform_int_distribution<int> unode(0, scheme.size() - 1);
    std::vector<double> u(static_cast<size_t>(scheme.size()));
    for (double& v : u) v = uval(rng);
    CheckResult res{"scheme monotonicity", true, std::numeric_limits<double>::infinity(), "",
                    "min decrease of the residual under neighbor increases"};
    for (int t = 0; t < trials; ++t) {
        const int i = unode(rng);
        const auto& nd = scheme.node(i);
        // collect the distinct neighbor indices of this node
        std::vector<int> nbrs;
        for (const auto& row : nd.rows)
            for (const auto& [k, c] : row.entries)
                if (k != i && std::find(nbrs.begin(), nbrs.end(), k) == nbrs.end())
                    nbrs.push_back(k);
        if (nbrs.empty()) continue;
        const int k = nbrs[static_cast<size_t>(
            std::uniform_int_distribution<int>(0, static_cast<int>(nbrs.size()) - 1)(rng))];
        const double before = scheme.residual_at(u, i);
        const double bump = ubump(rng);
        u[static_cast<size_t>(k)] += bump;
        const double after = scheme.residual_at(u, i);
        u[static_cast<size_t>(k)] -= bump;
        const double decrease = before - after;
        if (decrease < res.value) {
            res.value = decrease;
            res.witness = "node " + std::to_string(i) + ", neighbor " + std::to_string(k);
        }
    }
    res.pass = res.value >= -1e-12;
    return res;
}

namespace {

/// Analytic barrier pair evaluator: psi = sgn rho + v y + sgn (L/2)(y-eps h)^2.
struct BarrierFn {
    double sgn = 1;
    bool quadratic_rho = true;  // false: constant rho == K (Dirichlet lateral)
    double K = 1, Lambda = 1, eps = 0;
    DomainProfile profile;
    SmoothFn gamma_o, beta_o;
    std::function<double(double)> v, v1;  // v and v'

    double rho(double x) const { return quadratic_rho ? K * (x - 0.5) * (x - 0.5) : K; }
    double rho1(double x) const { return quadratic_rho ? 2 * K * (x - 0.5) : 0; }
    double rho2(double) const { return quadratic_rho ? 2 * K : 0; }

    void build_v() {
        const auto g = gamma_o, b = beta_o;
        const double s = sgn, k = K;
        const bool quad = quadratic_rho;
        auto rho1_fn = [k, quad](double x) { return quad ? 2 * k * (x - 0.5) : 0.0; };
        auto rho2_fn = [k, quad](double) { return quad ? 2 * k : 0.0; };
        v = [g, b, s, rho1_fn](double x) { return b.f(x) - s * g.f(x) * rho1_fn(x); };
        v1 = [g, b, s, rho1_fn, rho2_fn](double x) {
            return b.d1(x) - s * (g.d1(x) * rho1_fn(x) + g.f(x) * rho2_fn(x));
        };
    }

    double value(double x, double y) const {
        const double dy = y - eps * profile.h(x);
        return sgn * rho(x) + v(x) * y + sgn * 0.5 * Lambda * dy * dy;
    }
    double d_x(double x, double y) const {
        const double dy = y - eps * profile.h(x);
        return sgn * rho1(x) + v1(x) * y - sgn * Lambda * eps * profile.h.dx(x) * dy;
    }
    double d_y(double x, double y) const {
        return v(x) + sgn * Lambda * (y - eps * profile.h(x));
    }
    Sym2 hessian(double x, double y) const {
        const double dy = y - eps * profile.h(x);
        const double h1 = profile.h.dx(x), h2 = profile.h.dxx(x);
        const double v2 = fd::deriv1(v1, x, 0.0, 1.0);
        Sym2 out;
        out.xx = sgn * rho2(x) + v2 * y - sgn * Lambda * eps * h2 * dy +
                 sgn * Lambda * eps * eps * h1 * h1;
        out.xy = v1(x) - sgn * Lambda * eps * h1;
        out.yy = sgn * Lambda;
        return out;
    }
};

double lateral_residual(const BarrierFn& bf, const LateralBC& lateral, double x, double y) {
    switch (lateral.kind) {
        case LateralKind::Neumann:
            return LateralBC::nu(x) * bf.d_x(x, y);
        case LateralKind::Oblique:
            return lateral.gamma1(x, y) * bf.d_x(x, y) + lateral.gamma2(x, y) * bf.d_y(x, y) -
                   lateral.beta(x, y);
        case LateralKind::Dirichlet:
            return bf.value(x, y) - lateral.beta(x, y);
    }
    return 0;
}

double tb_residual(const BarrierFn& bf, const ObliqueData& data, const DomainProfile& profile,
                   double eps, double x, bool top) {
    const double y = eps * (top ? profile.g_plus(x) : profile.g_minus(x));
    if (top)
        return data.gamma1_plus(x, y) * bf.d_x(x, y) + bf.d_y(x, y) - data.beta_plus(x, y);
    return data.gamma1_minus(x, y) * bf.d_x(x, y) - bf.d_y(x, y) - data.beta_minus(x, y);
}

/// Worst (smallest, after sign-flip for the lower barrier) boundary slack of
/// one barrier over sampled top/bottom/lateral points.
double boundary_margin(const BarrierFn& bf, const ProblemInstance& inst, double eps) {
    double margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 256; ++i) {
        const double x = i / 256.0;
        margin = std::min(margin,
                          bf.sgn * tb_residual(bf, inst.oblique, inst.profile, eps, x, true));
        margin = std::min(margin,
                          bf.sgn * tb_residual(bf, inst.oblique, inst.profile, eps, x, false));
    }
    for (const double x : {0.0, 1.0}) {
        const double lo = eps * inst.profile.g_minus(x), hi = eps * inst.profile.g_plus(x);
        for (int i = 0; i <= 64; ++i) {
            const double y = lo + (hi - lo) * i / 64.0;
            margin = std::min(margin, bf.sgn * lateral_residual(bf, inst.lateral, x, y));
        }
    }
    return margin;
}

}  // namespace

Barriers build_barriers(const ProblemInstance& inst, double eps, bool m_auto) {
    if (auto r = check_compatibility(inst.oblique); !r.pass)
        throw ValidationError("compatibility (1.4)",
                              "barrier construction requires compatibility (1.4), witness " +
                                  r.witness);

    const bool dirichlet = inst.lateral.kind == LateralKind::Dirichlet;
    double K0 = 1;
    if (dirichlet) {
        double bmax = 0;
        for (const double x : {0.0, 1.0})
            for (int i = 0; i <= 64; ++i)
                bmax = std::max(bmax, std::abs(inst.lateral.beta(x, -1.0 + 2.0 * i / 64.0)));
        K0 = bmax + 1;
    }

    auto make = [&](double sgn, double K, double Lambda) {
        BarrierFn bf;
        bf.sgn = sgn;
        bf.quadratic_rho = !dirichlet;
        bf.K = K;
        bf.Lambda = Lambda;
        bf.eps = eps;
        bf.profile = inst.profile;
        bf.gamma_o = SmoothFn::from_field(inst.oblique.gamma_o);
        bf.beta_o = SmoothFn::from_field(inst.oblique.beta_o);
        bf.build_v();
        return bf;
    };

    double best_margin = -std::numeric_limits<double>::infinity();
    BarrierFn upper, lower;
    bool found = false;
    for (double K = K0; K <= K0 * (1 << 16) && !found; K *= 2) {
        for (double Lambda = 1; Lambda <= double(1 << 20) && !found; Lambda *= 2) {
            BarrierFn up = make(+1, K, Lambda);
            BarrierFn lo = make(-1, K, Lambda);
            const double margin =
                std::min(boundary_margin(up, inst, eps), boundary_margin(lo, inst, eps));
            if (margin > best_margin) best_margin = margin;
            if (margin > 1e-10) {
                upper = std::move(up);
                lower = std::move(lo);
                found = true;
            }
        }
        if (dirichlet) break;  // constant rho is already maximal for the lateral rows
    }
    if (!found)
        throw ValidationError("barrier construction",
                              "no (K, Lambda) made the boundary inequalities strict; best "
                              "margin " +
                                  expr::format_double(best_margin));

    // Interior residual bound C3 = sup |F(D^2 psi, D psi, psi, x, y)|, then
    // M with alpha M > C3.
    double c3 = 0;
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        const double lo = eps * inst.profile.g_minus(x), hi = eps * inst.profile.g_plus(x);
        for (int j = 0; j <= 20; ++j) {
            const double y = lo + (hi - lo) * j / 20.0;
            for (const BarrierFn* bf : {&upper, &lower}) {
                OperatorPoint pt;
                pt.hessian = bf->hessian(x, y);
                pt.px = bf->d_x(x, y);
                pt.py = bf->d_y(x, y);
                pt.r = bf->value(x, y);
                pt.x = x;
                pt.y = y;
                c3 = std::max(c3, std::abs(inst.op.eval(pt)));
            }
        }
    }

    Barriers bars;
    bars.Lambda = upper.Lambda;
    bars.K = upper.K;
    bars.C3 = c3;
    bars.min_boundary_margin = best_margin;
    bars.M = m_auto ? (1.05 * c3 + 0.01) / inst.op.alpha() : 0.0;

    auto grid = std::make_shared<ThinGrid>(
        build_thin_grid(inst.profile, eps, inst.scheme.nx, inst.scheme.nt));
    for (const BarrierFn* bf : {&upper, &lower}) {
        GridFunction g;
        g.grid = grid;
        g.xs = grid->xs;
        g.values.resize(static_cast<size_t>(grid->nx) * grid->nt);
        for (int i = 0; i < grid->nx; ++i)
            for (int j = 0; j < grid->nt; ++j)
                g.values[static_cast<size_t>(grid->index(i, j))] =
                    bf->value(grid->xs[static_cast<size_t>(i)], grid->at(i, j).y);
        (bf == &upper ? bars.psi_upper : bars.psi_lower) = std::move(g);
    }
    return bars;
}

SandwichReport check_barrier_sandwich(const GridFunction& u, const Barriers& bars,
                                      double tol) {
    SandwichReport rep;
    rep.upper_margin = std::numeric_limits<double>::infinity();
    rep.lower_margin = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < u.values.size(); ++k) {
        rep.upper_margin =
            std::min(rep.upper_margin, bars.psi_upper.values[k] + bars.M - u.values[k]);
        rep.lower_margin =
            std::min(rep.lower_margin, u.values[k] - (bars.psi_lower.values[k] - bars.M));
    }
    rep.pass = rep.upper_margin >= -tol && rep.lower_margin >= -tol;
    return rep;
}

double sup_norm_error(const GridFunction& u_thin, const GridFunction& u_limit) {
    const ThinGrid& grid = *u_thin.grid;
    double worst = 0;
    for (int i = 0; i < grid.nx; ++i) {
        const double ul = u_limit.interp(grid.xs[static_cast<size_t>(i)]);
        for (int j = 0; j < grid.nt; ++j)
            worst = std::max(worst, std::abs(u_thin.at(i, j) - ul));
    }
    return worst;
}

}  // namespace thinlim
