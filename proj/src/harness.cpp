#include "thinlim/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>
#include <sstream>

#include "json.hpp"

namespace thinlim {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

const CheckResult* BatteryReport::find(const std::string& name_prefix) const {
    for (const auto& it : items)
        if (it.check.name.rfind(name_prefix, 0) == 0) return &it.check;
    return nullptr;
}

BatteryReport run_checks(const ProblemInstance& inst) {
    BatteryReport rep;
    const std::uint64_t seed = inst.seed;
    const int samples = inst.samples;

    rep.items.push_back({check_compatibility(inst.oblique), true});
    rep.items.push_back({check_expansion(inst.oblique), true});
    rep.items.push_back({check_obliqueness_tb(inst.profile, inst.oblique, inst.eps), true});
    rep.items.push_back({check_degenerate_ellipticity_F(inst.op, samples, seed), true});
    rep.items.push_back({check_zeroth_bound(inst.op), true});
    rep.items.push_back({check_properness(inst.op, samples, seed + 1), true});
    rep.items.push_back({check_uniform_bounds(inst.op, samples, seed + 2), true});
    rep.items.push_back({check_operator_lipschitz(inst.op, samples, seed + 3), true});
    rep.items.push_back({check_lateral_obliqueness(inst.lateral), true});
    rep.items.push_back({check_normal_ellipticity(inst.op, inst.oblique.gamma_o),
                         inst.lateral.kind == LateralKind::Dirichlet});

    // Limit-side checks need the expansion slopes; report a failure to build
    // as a failed dual-path line rather than aborting the battery.
    try {
        const LimitOperator limop = build_limit_operator(inst);
        rep.items.push_back({check_degenerate_ellipticity(limop, samples, seed + 4), true});
        rep.items.push_back({check_dual_path(limop, samples, seed + 5), true});
    } catch (const ValidationError& e) {
        CheckResult fail{"limit operator assembly", false, 0, "", e.what()};
        rep.items.push_back({fail, true});
    }
    return rep;
}

ConvergenceReport run_sweep(const ProblemInstance& inst_in, const SweepConfig& cfg) {
    ProblemInstance inst = inst_in;
    inst.scheme = cfg.scheme;

    if (cfg.eps_list.empty())
        throw ValidationError("sweep config", "eps_list is empty");
    for (size_t i = 1; i < cfg.eps_list.size(); ++i)
        if (!(cfg.eps_list[i] < cfg.eps_list[i - 1]))
            throw ValidationError("sweep config", "eps_list must be strictly decreasing");

    const BatteryReport battery = run_checks(inst);
    for (const auto& item : battery.items)
        if (item.blocking && !item.check.pass)
            throw ValidationError(item.check.name,
                                  "sweep refused: check '" + item.check.name +
                                      "' fails, witness " + item.check.witness);
    if (auto r = check_obliqueness_tb(inst.profile, inst.oblique, cfg.eps_list.front());
        !r.pass)
        throw ValidationError("obliqueness",
                              "largest eps lies above the obliqueness threshold " +
                                  expr::format_double(
                                      obliqueness_threshold(inst.profile, inst.oblique)));

    ConvergenceReport rep;
    const LimitOperator limop = build_limit_operator(inst);
    const DiscreteScheme limit_scheme = discretize_limit(limop, inst.lateral, inst.scheme);
    auto [u0, limit_rep] = solve(limit_scheme, inst.scheme);
    rep.limit_nx = inst.scheme.nx;
    rep.limit_iterations = limit_rep.iterations;
    rep.limit_residual = limit_rep.final_residual;

    auto run_one = [&](double eps) {
        SweepRow row;
        row.eps = eps;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const DiscreteScheme scheme = discretize_thin(inst, eps, inst.scheme);
            auto [u, srep] = solve(scheme, inst.scheme);
            row.sup_error = sup_norm_error(u, u0);
            row.iters = srep.iterations;
            row.residual = srep.final_residual;
            if (cfg.with_barriers) {
                const Barriers bars = build_barriers(inst, eps);
                const SandwichReport sw = check_barrier_sandwich(u, bars);
                row.barrier_margin = std::min(sw.upper_margin, sw.lower_margin);
            }
            row.ok = true;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        row.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return row;
    };

    // Independent schemes solve concurrently, one future per eps.
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(cfg.eps_list.size());
    for (double eps : cfg.eps_list)
        futures.push_back(std::async(std::launch::async, run_one, eps));
    for (auto& f : futures) rep.rows.push_back(f.get());
    return rep;
}

ProblemInstance counterexample_instance(int nx, int nt) {
    ProblemInstance inst;
    inst.profile.g_minus = ScalarField::parse("g_minus", "0", 1);
    inst.profile.g_plus = ScalarField::parse("g_plus", "1", 1);
    inst.profile.h = ScalarField::parse("h", "1/2", 1);
    inst.profile.delta0 = 0.5;
    inst.oblique.gamma1_plus = ScalarField::parse("gamma1_plus", "0", 2);
    inst.oblique.gamma1_minus = ScalarField::parse("gamma1_minus", "0", 2);
    inst.oblique.beta_plus = ScalarField::parse("beta_plus", "1", 2);
    inst.oblique.beta_minus = ScalarField::parse("beta_minus", "0", 2);
    inst.oblique.gamma_o = ScalarField::parse("gamma_o", "0", 1);
    inst.oblique.beta_o = ScalarField::parse("beta_o", "1", 1);
    inst.lateral.kind = LateralKind::Neumann;

    CoefficientFamily fam;
    fam.sigma.push_back({ScalarField::parse("sigma00", "0", 2),
                         ScalarField::parse("sigma01", "1", 2)});
    fam.drift = {ScalarField::parse("b0", "0", 2), ScalarField::parse("b1", "0", 2)};
    fam.zeroth = ScalarField::parse("c", "1", 2);
    fam.source = ScalarField::parse("f", "1", 2);
    inst.op = BellmanIsaacsOperator({{fam}}, 1.0, 2.0);

    inst.scheme.nx = nx;
    inst.scheme.nt = nt;
    inst.scheme.tol = 1e-9;
    inst.scheme.max_iter = 50;
    return inst;
}

CounterexampleReport run_counterexample(int nx, int nt, std::vector<double> eps_list) {
    const ProblemInstance inst = counterexample_instance(nx, nt);
    CounterexampleReport rep;
    for (const double eps : eps_list) {
        CounterexampleRow row;
        row.eps = eps;
        const auto t0 = std::chrono::steady_clock::now();
        const DiscreteScheme scheme = discretize_thin(inst, eps, inst.scheme);
        auto [u, srep] = solve(scheme, inst.scheme);
        row.iters = srep.iterations;
        const ThinGrid& grid = *u.grid;
        double worst = 0, sup_exact_grid = 0;
        for (int i = 0; i < grid.nx; ++i) {
            for (int j = 0; j < grid.nt; ++j) {
                const double y = grid.at(i, j).y;
                const double exact =
                    (std::exp(y) + std::exp(-y)) / (std::exp(eps) - std::exp(-eps)) + 1.0;
                worst = std::max(worst, std::abs(u.at(i, j) - exact));
                sup_exact_grid = std::max(sup_exact_grid, std::abs(exact));
            }
        }
        row.sup_numeric = u.sup_norm();
        row.sup_exact = 1.0 / std::tanh(eps) + 1.0;
        row.rel_err = worst / sup_exact_grid;
        row.wall_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rep.rows.push_back(row);
    }
    rep.growth_monotone = true;
    for (size_t i = 1; i < rep.rows.size(); ++i)
        if (rep.rows[i].sup_numeric <= rep.rows[i - 1].sup_numeric) rep.growth_monotone = false;
    if (rep.rows.size() >= 2) {
        const auto& a = rep.rows[rep.rows.size() - 2];
        const auto& b = rep.rows.back();
        rep.growth_ratio = b.sup_numeric / a.sup_numeric;
    }
    rep.matches_closed_form = true;
    for (const auto& r : rep.rows)
        if (r.rel_err > 0.01) rep.matches_closed_form = false;
    return rep;
}

double MmsReport::min_order() const {
    double worst = std::numeric_limits<double>::infinity();
    for (size_t i = 1; i < levels.size(); ++i) worst = std::min(worst, levels[i].observed_order);
    return worst;
}

namespace {

struct ExactFn {
    expr::Expression w, w1, w2;
    double operator()(double x) const { return w.eval(x); }
};

ExactFn differentiate_exact(const ScalarField& exact) {
    ExactFn e;
    e.w = exact.expression();
    e.w1 = expr::differentiate(e.w, 0);
    e.w2 = expr::differentiate(e.w1, 0);
    return e;
}

void require_lateral_consistency(const LateralBC& lateral, const ExactFn& e) {
    if (lateral.kind == LateralKind::Oblique)
        throw ValidationError("manufactured solution",
                              "manufactured studies support neumann and dirichlet laterals");
    if (lateral.kind == LateralKind::Neumann) {
        if (std::abs(e.w1.eval(0.0)) > 1e-10 || std::abs(e.w1.eval(1.0)) > 1e-10)
            throw ValidationError(
                "manufactured solution",
                "exact solution must satisfy the Neumann endpoints (u'(0)=u'(1)=0)");
    }
}

LateralBC mms_lateral(const LateralBC& lateral, const ScalarField& exact) {
    LateralBC out = lateral;
    if (lateral.kind == LateralKind::Dirichlet)
        out.beta = ScalarField("beta", exact.expression(), 2);
    return out;
}

}  // namespace

MmsReport run_manufactured_limit(const ProblemInstance& inst, const ScalarField& exact,
                                 int levels, int base_nx) {
    const ExactFn e = differentiate_exact(exact);
    require_lateral_consistency(inst.lateral, e);

    const LimitOperator limop = build_limit_operator(inst);
    std::vector<std::vector<ReducedFamily>> families = limop.reduced();
    for (auto& row : families) {
        for (ReducedFamily& fam : row) {
            const ReducedFamily base = fam;
            fam.source = [base, e](double x) {
                return -base.sigma2(x) * e.w2.eval(x) - base.drift(x) * e.w1.eval(x) +
                       base.zeroth(x) * e.w.eval(x);
            };
        }
    }
    const LateralBC lateral = mms_lateral(inst.lateral, exact);

    MmsReport rep;
    rep.target = "limit";
    SchemeConfig cfg = inst.scheme;
    for (int level = 0; level < levels; ++level) {
        cfg.nx = ((base_nx - 1) << level) + 1;
        const DiscreteScheme scheme = discretize_limit(families, lateral, cfg);
        auto [u, srep] = solve(scheme, cfg);
        MmsLevel lv;
        lv.n = cfg.nx;
        for (size_t i = 0; i < u.xs.size(); ++i)
            lv.sup_error = std::max(lv.sup_error, std::abs(u.values[i] - e.w.eval(u.xs[i])));
        if (!rep.levels.empty())
            lv.observed_order = std::log2(rep.levels.back().sup_error / lv.sup_error);
        rep.levels.push_back(lv);
    }
    return rep;
}

MmsReport run_manufactured_thin(const ProblemInstance& inst, const ScalarField& exact,
                                int levels, double eps, int base_nx) {
    const ExactFn e = differentiate_exact(exact);
    require_lateral_consistency(inst.lateral, e);

    // Move the mismatch into the per-family sources and boundary data so the
    // y-independent exact solution solves the thin problem identically.
    ProblemInstance mod = inst;
    std::vector<std::vector<CoefficientFamily>> families;
    for (int l = 0; l < inst.op.n_lambda(); ++l) {
        families.emplace_back();
        for (int m = 0; m < inst.op.n_mu(); ++m) {
            CoefficientFamily fam = inst.op.family(l, m);
            expr::Expression q11 = expr::Expression::constant(0);
            for (const auto& row : fam.sigma)
                q11 = q11 + row[0].expression() * row[0].expression();
            expr::Expression src = fam.zeroth.expression() * e.w - q11 * e.w2 -
                                   fam.drift[0].expression() * e.w1;
            fam.source = ScalarField("f", std::move(src), 2);
            families.back().push_back(std::move(fam));
        }
    }
    mod.op = BellmanIsaacsOperator(std::move(families), inst.op.alpha(),
                                   inst.op.uniform_bound());
    mod.oblique.beta_plus =
        ScalarField("beta_plus", inst.oblique.gamma1_plus.expression() * e.w1, 2);
    mod.oblique.beta_minus =
        ScalarField("beta_minus", inst.oblique.gamma1_minus.expression() * e.w1, 2);
    mod.oblique.beta_o =
        ScalarField("beta_o", mod.oblique.beta_plus.expression().bind(1, 0.0, 1), 1);
    if (mod.oblique.l_plus && mod.oblique.k_plus)
        mod.oblique.l_plus = ScalarField("l_plus", mod.oblique.k_plus->expression() * e.w1, 1);
    if (mod.oblique.l_minus && mod.oblique.k_minus)
        mod.oblique.l_minus =
            ScalarField("l_minus", mod.oblique.k_minus->expression() * e.w1, 1);
    mod.lateral = mms_lateral(inst.lateral, exact);

    MmsReport rep;
    rep.target = "thin";
    SchemeConfig cfg = inst.scheme;
    for (int level = 0; level < levels; ++level) {
        cfg.nx = ((base_nx - 1) << level) + 1;
        const DiscreteScheme scheme = discretize_thin(mod, eps, cfg);
        auto [u, srep] = solve(scheme, cfg);
        MmsLevel lv;
        lv.n = cfg.nx;
        const ThinGrid& grid = *u.grid;
        for (int i = 0; i < grid.nx; ++i)
            for (int j = 0; j < grid.nt; ++j)
                lv.sup_error = std::max(
                    lv.sup_error, std::abs(u.at(i, j) - e.w.eval(grid.xs[static_cast<size_t>(i)])));
        if (!rep.levels.empty())
            lv.observed_order = std::log2(rep.levels.back().sup_error / lv.sup_error);
        rep.levels.push_back(lv);
    }
    return rep;
}

// ---- serialization -------------------------------------------------------

std::string battery_text(const BatteryReport& rep) {
    std::ostringstream out;
    for (const auto& item : rep.items) {
        out << (item.check.pass ? "PASS" : "FAIL");
        if (!item.blocking) out << " (advisory)";
        out << "  " << item.check.name << "  value=" << num(item.check.value);
        if (!item.check.witness.empty()) out << "  witness: " << item.check.witness;
        if (!item.check.detail.empty()) out << "  [" << item.check.detail << "]";
        out << "\n";
    }
    out << (rep.all_pass() ? "ALL CHECKS PASS" : "CHECK FAILURES PRESENT") << "\n";
    return out.str();
}

std::string battery_json(const BatteryReport& rep) {
    nlohmann::json j;
    j["all_pass"] = rep.all_pass();
    j["checks"] = nlohmann::json::array();
    for (const auto& item : rep.items) {
        j["checks"].push_back({{"name", item.check.name},
                               {"pass", item.check.pass},
                               {"blocking", item.blocking},
                               {"value", item.check.value},
                               {"witness", item.check.witness},
                               {"detail", item.check.detail}});
    }
    return j.dump(2) + "\n";
}

std::string sweep_csv(const ConvergenceReport& rep, bool with_wall_time) {
    std::ostringstream out;
    out << "eps,sup_error,iters,residual,barrier_margin,wall_s\n";
    for (const auto& r : rep.rows) {
        if (!r.ok) {
            out << num(r.eps) << ",error,,,," << (with_wall_time ? num(r.wall_s) : "0") << "\n";
            continue;
        }
        out << num(r.eps) << "," << num(r.sup_error) << "," << r.iters << ","
            << num(r.residual) << "," << num(r.barrier_margin) << ","
            << (with_wall_time ? num(r.wall_s) : "0") << "\n";
    }
    return out.str();
}

std::string sweep_json(const ConvergenceReport& rep, bool with_wall_time) {
    nlohmann::json j;
    j["limit"] = {{"nx", rep.limit_nx},
                  {"iterations", rep.limit_iterations},
                  {"residual", rep.limit_residual}};
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) {
        nlohmann::json row = {{"eps", r.eps},         {"ok", r.ok},
                              {"sup_error", r.sup_error}, {"iters", r.iters},
                              {"residual", r.residual},   {"barrier_margin", r.barrier_margin},
                              {"wall_s", with_wall_time ? r.wall_s : 0.0}};
        if (!r.ok) row["error"] = r.error;
        j["rows"].push_back(row);
    }
    return j.dump(2) + "\n";
}

std::string counterexample_csv(const CounterexampleReport& rep, bool with_wall_time) {
    std::ostringstream out;
    out << "eps,sup_numeric,sup_exact,rel_err,iters,wall_s\n";
    for (const auto& r : rep.rows)
        out << num(r.eps) << "," << num(r.sup_numeric) << "," << num(r.sup_exact) << ","
            << num(r.rel_err) << "," << r.iters << ","
            << (with_wall_time ? num(r.wall_s) : "0") << "\n";
    return out.str();
}

std::string counterexample_json(const CounterexampleReport& rep, bool with_wall_time) {
    nlohmann::json j;
    j["growth_monotone"] = rep.growth_monotone;
    j["growth_ratio"] = rep.growth_ratio;
    j["matches_closed_form"] = rep.matches_closed_form;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows)
        j["rows"].push_back({{"eps", r.eps},
                             {"sup_numeric", r.sup_numeric},
                             {"sup_exact", r.sup_exact},
                             {"rel_err", r.rel_err},
                             {"iters", r.iters},
                             {"wall_s", with_wall_time ? r.wall_s : 0.0}});
    return j.dump(2) + "\n";
}

std::string mms_csv(const MmsReport& rep) {
    std::ostringstream out;
    out << "level,n,sup_error,observed_order\n";
    for (size_t i = 0; i < rep.levels.size(); ++i)
        out << i << "," << rep.levels[i].n << "," << num(rep.levels[i].sup_error) << ","
            << (i == 0 ? std::string("") : num(rep.levels[i].observed_order)) << "\n";
    return out.str();
}

std::string mms_json(const MmsReport& rep) {
    nlohmann::json j;
    j["target"] = rep.target;
    j["levels"] = nlohmann::json::array();
    for (size_t i = 0; i < rep.levels.size(); ++i) {
        nlohmann::json lv = {{"n", rep.levels[i].n}, {"sup_error", rep.levels[i].sup_error}};
        if (i > 0) lv["observed_order"] = rep.levels[i].observed_order;
        j["levels"].push_back(lv);
    }
    j["min_order"] = rep.levels.size() > 1 ? rep.min_order() : 0.0;
    return j.dump(2) + "\n";
}

std::string solution_csv(const GridFunction& u) {
    std::ostringstream out;
    if (u.is_thin()) {
        out << "x,y,u\n";
        const ThinGrid& g = *u.grid;
        for (int i = 0; i < g.nx; ++i)
            for (int j = 0; j < g.nt; ++j)
                out << num(g.xs[static_cast<size_t>(i)]) << "," << num(g.at(i, j).y) << ","
                    << num(u.at(i, j)) << "\n";
    } else {
        out << "x,u\n";
        for (size_t i = 0; i < u.xs.size(); ++i)
            out << num(u.xs[i]) << "," << num(u.values[i]) << "\n";
    }
    return out.str();
}

std::string solve_report_json(const SolveReport& rep, bool with_wall_time) {
    nlohmann::json j = {{"iterations", rep.iterations},
                        {"final_residual", rep.final_residual},
                        {"sup_norm", rep.sup_norm},
                        {"wall_time", with_wall_time ? rep.wall_time : 0.0}};
    return j.dump(2) + "\n";
}

std::string reduce_csv(const LimitOperator& limop, int nx) {
    std::ostringstream out;
    out << "x,gamma_o,beta_o,b,c";
    for (int l = 0; l < limop.n_lambda(); ++l)
        for (int m = 0; m < limop.n_mu(); ++m)
            out << ",sigma2_" << l << "_" << m << ",btilde_" << l << "_" << m << ",ftilde_"
                << l << "_" << m;
    out << "\n";
    const auto& lc = limop.coefficients();
    for (int i = 0; i < nx; ++i) {
        const double x = static_cast<double>(i) / (nx - 1);
        out << num(x) << "," << num(lc.gamma_o.f(x)) << "," << num(lc.beta_o.f(x)) << ","
            << num(lc.b(x)) << "," << num(lc.c(x));
        for (const auto& row : limop.reduced())
            for (const ReducedFamily& fam : row)
                out << "," << num(fam.sigma2(x)) << "," << num(fam.drift(x)) << ","
                    << num(fam.source(x));
        out << "\n";
    }
    return out.str();
}

}  // namespace thinlim
