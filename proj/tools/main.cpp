#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "thinlim/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitParse = 3;

struct CommonOpts {
    std::string problem_path;
    std::string output_path;
    std::vector<std::string> overrides;
    std::string format = "csv";
    long seed = -1;
    long samples = -1;
    bool no_wall_time = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool with_problem = true) {
    if (with_problem)
        cmd->add_option("problem", opts.problem_path, "problem file")->required();
    cmd->add_option("-o,--output", opts.output_path, "write the report here (default stdout)");
    cmd->add_option("--set", opts.overrides,
                    "dotted config override, e.g. solver.nx=401 (repeatable)");
    cmd->add_option("--format", opts.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--seed", opts.seed, "seed for randomized checks");
    cmd->add_option("--samples", opts.samples, "sample count for randomized checks");
    cmd->add_flag("--no-wall-time", opts.no_wall_time,
                  "report wall_s as 0 for reproducible output");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw thinlim::expr::ParseError("cannot open problem file '" + path + "'", 0, 1);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit(const CommonOpts& opts, const std::string& content) {
    if (opts.output_path.empty()) {
        std::cout << content;
        return;
    }
    std::ofstream out(opts.output_path);
    if (!out) throw std::runtime_error("cannot write '" + opts.output_path + "'");
    out << content;
}

thinlim::ProblemInstance load(const CommonOpts& opts, bool strict) {
    thinlim::ProblemInstance inst =
        thinlim::parse_problem(slurp(opts.problem_path), opts.overrides, strict);
    if (opts.seed >= 0) inst.seed = static_cast<std::uint64_t>(opts.seed);
    if (opts.samples > 0) inst.samples = static_cast<int>(opts.samples);
    return inst;
}

std::vector<double> parse_eps_list(const std::string& text) {
    std::vector<double> out;
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"thin-domain limits of fully nonlinear elliptic problems with oblique "
                 "boundary data"};
    app.require_subcommand(1);

    CommonOpts check_opts, reduce_opts, thin_opts, limit_opts, sweep_opts, ce_opts, mms_opts,
        norm_opts;

    auto* cmd_check = app.add_subcommand(
        "check", "run the hypothesis battery, one pass/fail line per condition");
    add_common(cmd_check, check_opts);

    auto* cmd_reduce =
        app.add_subcommand("reduce", "emit the limit coefficients and reduced families as CSV");
    add_common(cmd_reduce, reduce_opts);

    auto* cmd_thin = app.add_subcommand("solve-thin", "solve the thin problem at one eps");
    double thin_eps = 0.1;
    std::string thin_report_path;
    cmd_thin->add_option("--eps", thin_eps, "thin-domain parameter")->required();
    cmd_thin->add_option("--report", thin_report_path, "write the solve report JSON here");
    add_common(cmd_thin, thin_opts);

    auto* cmd_limit = app.add_subcommand("solve-limit", "solve the limit problem");
    std::string limit_report_path;
    cmd_limit->add_option("--report", limit_report_path, "write the solve report JSON here");
    add_common(cmd_limit, limit_opts);

    auto* cmd_sweep = app.add_subcommand(
        "sweep", "solve the limit problem once, then the thin problem per eps");
    std::string sweep_eps = "0.2,0.1,0.05,0.025";
    bool sweep_no_barriers = false;
    cmd_sweep->add_option("--eps-list", sweep_eps, "comma-separated, strictly decreasing");
    cmd_sweep->add_flag("--no-barriers", sweep_no_barriers, "skip the barrier sandwich");
    add_common(cmd_sweep, sweep_opts);

    auto* cmd_ce = app.add_subcommand(
        "counterexample", "run the built-in incompatible-data blow-up regression");
    std::string ce_eps = "0.4,0.2,0.1";
    long ce_nx = 17, ce_nt = 200;
    cmd_ce->add_option("--eps-list", ce_eps, "comma-separated, strictly decreasing");
    cmd_ce->add_option("--nx", ce_nx, "horizontal grid count");
    cmd_ce->add_option("--nt", ce_nt, "vertical grid count");
    add_common(cmd_ce, ce_opts, /*with_problem=*/false);

    auto* cmd_mms = app.add_subcommand(
        "mms", "manufactured-solution refinement study for the limit or thin solver");
    std::string mms_exact = "cos(pi*x)";
    std::string mms_target = "limit";
    long mms_levels = 3, mms_base_nx = 51;
    double mms_eps = 0.1;
    cmd_mms->add_option("--exact", mms_exact, "exact solution expression in x")->required();
    cmd_mms->add_option("--levels", mms_levels, "number of refinement levels")->required();
    cmd_mms->add_option("--target", mms_target, "limit or thin")
        ->check(CLI::IsMember({"limit", "thin"}));
    cmd_mms->add_option("--eps", mms_eps, "eps for the thin target");
    cmd_mms->add_option("--base-nx", mms_base_nx, "coarsest grid count");
    add_common(cmd_mms, mms_opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_check->parsed()) {
            const thinlim::ProblemInstance inst = load(check_opts, /*strict=*/false);
            const thinlim::BatteryReport rep = thinlim::run_checks(inst);
            emit(check_opts, check_opts.format == "json" ? thinlim::battery_json(rep)
                                                         : thinlim::battery_text(rep));
            return rep.all_pass() ? kExitOk : kExitValidation;
        }
        if (cmd_reduce->parsed()) {
            const thinlim::ProblemInstance inst = load(reduce_opts, /*strict=*/true);
            const thinlim::LimitOperator limop = thinlim::build_limit_operator(inst);
            emit(reduce_opts, thinlim::reduce_csv(limop, inst.scheme.nx));
            return kExitOk;
        }
        if (cmd_thin->parsed()) {
            const thinlim::ProblemInstance inst = load(thin_opts, /*strict=*/true);
            const thinlim::DiscreteScheme scheme =
                thinlim::discretize_thin(inst, thin_eps, inst.scheme);
            auto [u, rep] = thinlim::solve(scheme, inst.scheme);
            emit(thin_opts, thinlim::solution_csv(u));
            const std::string report_json =
                thinlim::solve_report_json(rep, !thin_opts.no_wall_time);
            if (!thin_report_path.empty()) std::ofstream(thin_report_path) << report_json;
            return kExitOk;
        }
        if (cmd_limit->parsed()) {
            const thinlim::ProblemInstance inst = load(limit_opts, /*strict=*/true);
            const thinlim::LimitOperator limop = thinlim::build_limit_operator(inst);
            const thinlim::DiscreteScheme scheme =
                thinlim::discretize_limit(limop, inst.lateral, inst.scheme);
            auto [u, rep] = thinlim::solve(scheme, inst.scheme);
            emit(limit_opts, thinlim::solution_csv(u));
            const std::string report_json =
                thinlim::solve_report_json(rep, !limit_opts.no_wall_time);
            if (!limit_report_path.empty()) std::ofstream(limit_report_path) << report_json;
            return kExitOk;
        }
        if (cmd_sweep->parsed()) {
            const thinlim::ProblemInstance inst = load(sweep_opts, /*strict=*/true);
            thinlim::SweepConfig cfg;
            cfg.eps_list = parse_eps_list(sweep_eps);
            cfg.scheme = inst.scheme;
            cfg.with_barriers = !sweep_no_barriers;
            const thinlim::ConvergenceReport rep = thinlim::run_sweep(inst, cfg);
            emit(sweep_opts,
                 sweep_opts.format == "json"
                     ? thinlim::sweep_json(rep, !sweep_opts.no_wall_time)
                     : thinlim::sweep_csv(rep, !sweep_opts.no_wall_time));
            for (const auto& row : rep.rows)
                if (!row.ok) return kExitDivergence;
            return kExitOk;
        }
        if (cmd_ce->parsed()) {
            const thinlim::CounterexampleReport rep = thinlim::run_counterexample(
                static_cast<int>(ce_nx), static_cast<int>(ce_nt), parse_eps_list(ce_eps));
            emit(ce_opts, ce_opts.format == "json"
                              ? thinlim::counterexample_json(rep, !ce_opts.no_wall_time)
                              : thinlim::counterexample_csv(rep, !ce_opts.no_wall_time));
            return rep.matches_closed_form && rep.growth_monotone ? kExitOk : kExitValidation;
        }
        if (cmd_mms->parsed()) {
            const thinlim::ProblemInstance inst = load(mms_opts, /*strict=*/true);
            thinlim::ScalarField exact =
                thinlim::ScalarField::parse("exact", mms_exact, 1);
            exact.validate();
            const thinlim::MmsReport rep =
                mms_target == "thin"
                    ? thinlim::run_manufactured_thin(inst, exact, static_cast<int>(mms_levels),
                                                     mms_eps, static_cast<int>(mms_base_nx))
                    : thinlim::run_manufactured_limit(inst, exact, static_cast<int>(mms_levels),
                                                      static_cast<int>(mms_base_nx));
            emit(mms_opts, mms_opts.format == "json" ? thinlim::mms_json(rep)
                                                     : thinlim::mms_csv(rep));
            return kExitOk;
        }
    } catch (const thinlim::expr::ParseError& e) {
        std::cerr << "parse error";
        if (e.line > 0) std::cerr << " (line " << e.line << ", column " << e.column << ")";
        std::cerr << ": " << e.what() << "\n";
        return kExitParse;
    } catch (const thinlim::SolverDivergence& e) {
        std::cerr << "solver divergence: " << e.what() << "; residual tail:";
        for (double r : e.residual_tail) std::cerr << " " << r;
        std::cerr << "\n";
        return kExitDivergence;
    } catch (const thinlim::ValidationError& e) {
        std::cerr << "validation failure [" << e.check << "]: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitOk;
}
