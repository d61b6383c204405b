#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "thinlim/harness.hpp"

namespace py = pybind11;
using namespace thinlim;

namespace {

py::dict grid_function_dict(const GridFunction& u) {
    py::dict d;
    if (u.is_thin()) {
        const ThinGrid& g = *u.grid;
        std::vector<double> xs, ys, vals;
        for (int i = 0; i < g.nx; ++i) {
            for (int j = 0; j < g.nt; ++j) {
                xs.push_back(g.xs[static_cast<size_t>(i)]);
                ys.push_back(g.at(i, j).y);
                vals.push_back(u.at(i, j));
            }
        }
        d["x"] = xs;
        d["y"] = ys;
        d["u"] = vals;
        d["nx"] = g.nx;
        d["nt"] = g.nt;
    } else {
        d["x"] = u.xs;
        d["u"] = u.values;
    }
    return d;
}

py::dict report_dict(const SolveReport& rep) {
    py::dict d;
    d["iterations"] = rep.iterations;
    d["final_residual"] = rep.final_residual;
    d["sup_norm"] = rep.sup_norm;
    d["wall_time"] = rep.wall_time;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "thin-domain limits of fully nonlinear elliptic problems with oblique "
              "boundary conditions";

    py::register_exception<expr::ParseError>(m, "ProblemParseError");
    py::register_exception<ValidationError>(m, "ValidationError");
    py::register_exception<SolverDivergence>(m, "SolverDivergence");

    py::class_<ProblemInstance>(m, "ProblemInstance")
        .def_property_readonly("eps", [](const ProblemInstance& p) { return p.eps; })
        .def_property_readonly("nx", [](const ProblemInstance& p) { return p.scheme.nx; })
        .def_property_readonly("nt", [](const ProblemInstance& p) { return p.scheme.nt; })
        .def("serialize", &serialize_problem)
        .def("validate", &ProblemInstance::validate);

    m.def("parse_problem",
          [](const std::string& text, const std::vector<std::string>& overrides, bool strict) {
              return parse_problem(text, overrides, strict);
          },
          py::arg("text"), py::arg("overrides") = std::vector<std::string>{},
          py::arg("strict") = true,
          "Parse the sectioned key/value problem format.");

    m.def("run_checks", [](const ProblemInstance& inst) {
        const BatteryReport rep = run_checks(inst);
        py::list items;
        for (const auto& it : rep.items) {
            py::dict d;
            d["name"] = it.check.name;
            d["pass"] = it.check.pass;
            d["blocking"] = it.blocking;
            d["value"] = it.check.value;
            d["witness"] = it.check.witness;
            d["detail"] = it.check.detail;
            items.append(d);
        }
        py::dict out;
        out["all_pass"] = rep.all_pass();
        out["checks"] = items;
        return out;
    });

    m.def("solve_thin", [](const ProblemInstance& inst, double eps) {
        const DiscreteScheme scheme = discretize_thin(inst, eps, inst.scheme);
        auto [u, rep] = solve(scheme, inst.scheme);
        py::dict d = grid_function_dict(u);
        d["report"] = report_dict(rep);
        return d;
    }, py::arg("instance"), py::arg("eps"));

    m.def("solve_limit", [](const ProblemInstance& inst) {
        const LimitOperator limop = build_limit_operator(inst);
        const DiscreteScheme scheme = discretize_limit(limop, inst.lateral, inst.scheme);
        auto [u, rep] = solve(scheme, inst.scheme);
        py::dict d = grid_function_dict(u);
        d["report"] = report_dict(rep);
        return d;
    });

    m.def("eval_G", [](const ProblemInstance& inst, double X, double p, double r, double x) {
        return build_limit_operator(inst).eval_direct(X, p, r, x);
    }, py::arg("instance"), py::arg("X"), py::arg("p"), py::arg("r"), py::arg("x"));

    m.def("eval_F",
          [](const ProblemInstance& inst, std::array<double, 3> hessian,
             std::array<double, 2> grad, double r, double x, double y) {
              OperatorPoint pt;
              pt.hessian = {hessian[0], hessian[1], hessian[2]};
              pt.px = grad[0];
              pt.py = grad[1];
              pt.r = r;
              pt.x = x;
              pt.y = y;
              return inst.op.eval(pt);
          },
          py::arg("instance"), py::arg("hessian_xx_xy_yy"), py::arg("grad"), py::arg("r"),
          py::arg("x"), py::arg("y"));

    m.def("reduce_csv", [](const ProblemInstance& inst, int nx) {
        return reduce_csv(build_limit_operator(inst), nx);
    }, py::arg("instance"), py::arg("nx") = 11);

    m.def("sweep",
          [](const ProblemInstance& inst, const std::vector<double>& eps_list, bool barriers) {
              SweepConfig cfg;
              cfg.eps_list = eps_list;
              cfg.scheme = inst.scheme;
              cfg.with_barriers = barriers;
              const ConvergenceReport rep = run_sweep(inst, cfg);
              py::list rows;
              for (const auto& r : rep.rows) {
                  py::dict d;
                  d["eps"] = r.eps;
                  d["ok"] = r.ok;
                  d["sup_error"] = r.sup_error;
                  d["iters"] = r.iters;
                  d["residual"] = r.residual;
                  d["barrier_margin"] = r.barrier_margin;
                  d["wall_s"] = r.wall_s;
                  if (!r.ok) d["error"] = r.error;
                  rows.append(d);
              }
              return rows;
          },
          py::arg("instance"), py::arg("eps_list"), py::arg("barriers") = true);

    m.def("counterexample",
          [](int nx, int nt, const std::vector<double>& eps_list) {
              const CounterexampleReport rep = run_counterexample(nx, nt, eps_list);
              py::list rows;
              for (const auto& r : rep.rows) {
                  py::dict d;
                  d["eps"] = r.eps;
                  d["sup_numeric"] = r.sup_numeric;
                  d["sup_exact"] = r.sup_exact;
                  d["rel_err"] = r.rel_err;
                  rows.append(d);
              }
              py::dict out;
              out["rows"] = rows;
              out["growth_monotone"] = rep.growth_monotone;
              out["growth_ratio"] = rep.growth_ratio;
              out["matches_closed_form"] = rep.matches_closed_form;
              return out;
          },
          py::arg("nx") = 17, py::arg("nt") = 200,
          py::arg("eps_list") = std::vector<double>{0.4, 0.2, 0.1});

    m.def("mms",
          [](const ProblemInstance& inst, const std::string& exact_expr, int levels,
             const std::string& target, double eps, int base_nx) {
              ScalarField exact = ScalarField::parse("exact", exact_expr, 1);
              exact.validate();
              const MmsReport rep =
                  target == "thin" ? run_manufactured_thin(inst, exact, levels, eps, base_nx)
                                   : run_manufactured_limit(inst, exact, levels, base_nx);
              py::list lv;
              for (const auto& l : rep.levels) {
                  py::dict d;
                  d["n"] = l.n;
                  d["sup_error"] = l.sup_error;
                  d["observed_order"] = l.observed_order;
                  lv.append(d);
              }
              py::dict out;
              out["target"] = rep.target;
              out["levels"] = lv;
              out["min_order"] = rep.levels.size() > 1 ? rep.min_order() : 0.0;
              return out;
          },
          py::arg("instance"), py::arg("exact"), py::arg("levels") = 3,
          py::arg("target") = "limit", py::arg("eps") = 0.1, py::arg("base_nx") = 51);

#ifdef VERSION_INFO
    m.attr("__version__") = VERSION_INFO;
#else
    m.attr("__version__") = "dev";
#endif
}
