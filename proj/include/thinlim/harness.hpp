#pragma once

#include "thinlim/fdsolver.hpp"

namespace thinlim {

/// One battery entry; non-blocking items are advisory (normal ellipticity
/// when the lateral condition is not Dirichlet).
struct BatteryItem {
    CheckResult check;
    bool blocking = true;
};

struct BatteryReport {
    std::vector<BatteryItem> items;
    bool all_pass() const {
        for (const auto& it : items)
            if (it.blocking && !it.check.pass) return false;
        return true;
    }
    const CheckResult* find(const std::string& name_prefix) const;
};

/// Run every structural hypothesis check on the instance, one line each.
BatteryReport run_checks(const ProblemInstance& inst);

struct SweepConfig {
    std::vector<double> eps_list;  // strictly decreasing
    SchemeConfig scheme;
    bool with_barriers = true;
};

struct SweepRow {
    double eps = 0;
    bool ok = false;
    double sup_error = 0;
    int iters = 0;
    double residual = 0;
    double barrier_margin = 0;
    double wall_s = 0;
    std::string error;
};

struct ConvergenceReport {
    std::vector<SweepRow> rows;  // eps descending
    int limit_nx = 0;
    int limit_iterations = 0;
    double limit_residual = 0;
};

/// Solve the limit problem once, then the thin problem per eps; report the
/// sup-norm distance to the limit solution and the barrier sandwich margin.
/// Refuses to run when a blocking hypothesis check fails. Individual eps
/// failures are recorded in their row without aborting the rest.
ConvergenceReport run_sweep(const ProblemInstance& inst, const SweepConfig& cfg);

struct CounterexampleRow {
    double eps = 0;
    double sup_numeric = 0;
    double sup_exact = 0;   // coth(eps) + 1
    double rel_err = 0;     // sup-norm distance to the closed form, relative
    int iters = 0;
    double wall_s = 0;
};

struct CounterexampleReport {
    std::vector<CounterexampleRow> rows;  // eps descending
    bool growth_monotone = false;         // sup grows as eps shrinks
    double growth_ratio = 0;              // sup(last) / sup(second to last)
    bool matches_closed_form = false;     // every rel_err <= 1%
};

/// The built-in incompatible-data problem: -u_yy + u = 1 on (0,1) x (0,eps),
/// u_y = 1 on top, -u_y = 0 on the bottom, Neumann lateral. Its exact
/// solution (e^y + e^-y)/(e^eps - e^-eps) + 1 blows up as eps -> 0.
ProblemInstance counterexample_instance(int nx = 17, int nt = 200);

CounterexampleReport run_counterexample(int nx = 17, int nt = 200,
                                        std::vector<double> eps_list = {0.4, 0.2, 0.1});

struct MmsLevel {
    int n = 0;
    double sup_error = 0;
    double observed_order = 0;  // log2 ratio against the previous level
};

struct MmsReport {
    std::string target;  // "limit" or "thin"
    std::vector<MmsLevel> levels;
    double min_order() const;
};

/// Manufactured-solution study for the limit solver: the exact expression is
/// differentiated symbolically and moved into the per-family sources, then
/// the grid is refined `levels` times from base_nx.
MmsReport run_manufactured_limit(const ProblemInstance& inst, const ScalarField& exact,
                                 int levels, int base_nx = 51);

/// Same for the thin solver with a y-independent exact solution; nx refines,
/// nt and eps stay fixed.
MmsReport run_manufactured_thin(const ProblemInstance& inst, const ScalarField& exact,
                                int levels, double eps, int base_nx = 51);

// ---- report serialization ----------------------------------------------

std::string battery_text(const BatteryReport& rep);
std::string battery_json(const BatteryReport& rep);

/// Header: eps,sup_error,iters,residual,barrier_margin,wall_s
std::string sweep_csv(const ConvergenceReport& rep, bool with_wall_time = true);
std::string sweep_json(const ConvergenceReport& rep, bool with_wall_time = true);

std::string counterexample_csv(const CounterexampleReport& rep, bool with_wall_time = true);
std::string counterexample_json(const CounterexampleReport& rep, bool with_wall_time = true);

std::string mms_csv(const MmsReport& rep);
std::string mms_json(const MmsReport& rep);

/// Solution dump: x,y,u for thin functions, x,u for 1-D functions.
std::string solution_csv(const GridFunction& u);
std::string solve_report_json(const SolveReport& rep, bool with_wall_time = true);

/// Reduced-coefficient table: x, gamma_o, beta_o, b, c, then per family
/// sigma2, btilde, ftilde.
std::string reduce_csv(const LimitOperator& limop, int nx);

}  // namespace thinlim
