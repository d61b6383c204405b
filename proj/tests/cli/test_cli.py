#!/usr/bin/env python3
"""End-to-end checks of the thinlim command line: exit codes, output
formats, determinism and help coverage."""

import json
import os
import subprocess
import sys
import tempfile

BIN = os.environ["THINLIM_BIN"]
PROBLEMS = os.environ["THINLIM_PROBLEMS"]

passed = 0
failed = []


def run(*args):
    return subprocess.run([BIN, *args], capture_output=True, text=True)


def check(name, cond, extra=""):
    global passed
    if cond:
        passed += 1
    else:
        failed.append(f"{name} {extra}")
        print(f"FAIL {name} {extra}")


def prob(name):
    return os.path.join(PROBLEMS, name)


# exit codes ----------------------------------------------------------------
r = run("check", prob("laplacian_oblique.prob"))
check("check valid exit 0", r.returncode == 0, r.stderr)
check("check prints battery", "ALL CHECKS PASS" in r.stdout)

r = run("check", prob("broken_compat.prob"))
check("check broken exit 1", r.returncode == 1)
check("intended failure visible", "FAIL" in r.stdout and "(1.4)" in r.stdout)

r = run("check", "/nonexistent/file.prob")
check("missing file exit 3", r.returncode == 3)

with tempfile.NamedTemporaryFile("w", suffix=".prob", delete=False) as tmp:
    tmp.write("[domain]\ng_plus = 1 +\n")
    bad = tmp.name
r = run("check", bad)
check("syntax error exit 3", r.returncode == 3)
check("syntax error names the line", "line 2" in r.stderr, r.stderr)
os.unlink(bad)

r = run("solve-thin", prob("broken_compat.prob"), "--eps", "0.1")
check("strict subcommand rejects broken data with exit 1", r.returncode == 1)

r = run("sweep", prob("laplacian_oblique.prob"), "--eps-list", "0.1,0.2")
check("increasing eps list exit 1", r.returncode == 1)

# counterexample ------------------------------------------------------------
r = run("counterexample", "--format", "json", "--no-wall-time")
check("counterexample exit 0", r.returncode == 0, r.stderr)
doc = json.loads(r.stdout)
sup = [row["sup_numeric"] for row in doc["rows"] if row["eps"] == 0.1][0]
check("counterexample sup near 11.0333", abs(sup - 11.0333) <= 0.12, str(sup))
check("counterexample growth", doc["growth_monotone"])

# sweep determinism ---------------------------------------------------------
args = ("sweep", prob("laplacian_oblique.prob"), "--eps-list", "0.2,0.1,0.05",
        "--set", "solver.nx=101", "--set", "solver.nt=21", "--seed", "42",
        "--no-wall-time")
a, b = run(*args), run(*args)
check("sweep exit 0", a.returncode == 0, a.stderr)
check("sweep byte-identical for one seed", a.stdout == b.stdout)
check("sweep header", a.stdout.splitlines()[0] ==
      "eps,sup_error,iters,residual,barrier_margin,wall_s")
errors = [float(line.split(",")[1]) for line in a.stdout.splitlines()[1:]]
check("sweep decreasing", all(x > y for x, y in zip(errors, errors[1:])), str(errors))

# solutions and reports -------------------------------------------------------
with tempfile.TemporaryDirectory() as tmpdir:
    out = os.path.join(tmpdir, "u.csv")
    rep = os.path.join(tmpdir, "report.json")
    r = run("solve-thin", prob("laplacian_oblique.prob"), "--eps", "0.1", "-o", out,
            "--report", rep, "--set", "solver.nx=41", "--set", "solver.nt=9",
            "--no-wall-time")
    check("solve-thin exit 0", r.returncode == 0, r.stderr)
    lines = open(out).read().splitlines()
    check("solution header x,y,u", lines[0] == "x,y,u")
    check("solution rows", len(lines) == 1 + 41 * 9)
    doc = json.loads(open(rep).read())
    check("solve report fields",
          set(doc) >= {"iterations", "final_residual", "sup_norm", "wall_time"})

r = run("solve-limit", prob("laplacian_oblique.prob"), "--set", "solver.nx=11")
check("solve-limit exit 0", r.returncode == 0, r.stderr)
check("limit solution header", r.stdout.splitlines()[0] == "x,u")

r = run("reduce", prob("laplacian_oblique.prob"), "--set", "solver.nx=3")
check("reduce http header", r.stdout.splitlines()[0].startswith("x,gamma_o,beta_o,b,c"))

# mms -------------------------------------------------------------------------
r = run("mms", prob("laplacian_oblique.prob"), "--exact", "cos(pi*x)", "--levels", "3")
check("mms exit 0", r.returncode == 0, r.stderr)
orders = [line.split(",")[3] for line in r.stdout.splitlines()[2:]]
check("mms orders >= 1.5", all(float(o) >= 1.5 for o in orders), str(orders))

# help coverage ---------------------------------------------------------------
for sub, flags in {
    "check": ["--set", "--seed", "--format"],
    "sweep": ["--eps-list", "--no-wall-time", "--set"],
    "solve-thin": ["--eps", "--report"],
    "counterexample": ["--nt", "--eps-list"],
    "mms": ["--exact", "--levels", "--target"],
}.items():
    r = run(sub, "--help")
    for flag in flags:
        check(f"{sub} --help documents {flag}", flag in r.stdout)

print(f"{passed} checks passed, {len(failed)} failed")
sys.exit(1 if failed else 0)
