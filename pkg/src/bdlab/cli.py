"""Command-line surface: load fields and integrands, run the experiments,
and emit JSON/CSV reports with a strict exit-code contract.

Exit codes: 0 success, 1 input/usage error, 2 a verdict of FAIL or a
quasiconvexity violation (so shell scripts can branch without parsing).
"""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from typing import Optional

import click
import numpy as np

from .errors import InputError, NotSolvableError, ParseError
from .fields import (DisplacementField, Grid, PointAtom, SurfaceAtom, SymMeasure,
                     assemble_symmetrized_measure, doubling_scan, staircase_field)
from .functional import (area_functional, concentration_sequence,
                         evaluate_functional, laminate_sequence, lsc_experiment,
                         minimize_functional, strict_continuity_experiment)
from .integrands import (Integrand, builtin_integrand, cell_problem_min,
                         parse_integrand)
from .rigidity2d import (Profile1D, classify_inclusion, solve_degenerate,
                         solve_elliptic, solve_opposite_sign)
from .symtensor import classify_dyad
from .youngmeasures import (elementary_ym, jensen_check, laminate_ym,
                            pair_duality, staircase_average, staircase_cell)


def _round9(obj):
    """Reports carry floats at 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round9(v) for v in obj]
    return obj


def _write_report(out: Optional[str], name: str, doc: dict):
    if not out:
        return
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, name)
    with open(path, "w") as fh:
        json.dump(_round9(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(out: Optional[str], name: str, header, rows):
    if not out:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in r])


def _load_integrand(spec: str) -> Integrand:
    if spec.startswith("@"):
        return builtin_integrand(spec)
    return parse_integrand(spec)


def _load_field(spec: str) -> DisplacementField:
    if spec == "staircase":
        return staircase_field()
    try:
        with open(spec) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read field file '{spec}': {exc}")
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in '{spec}': {exc}")
    return DisplacementField.from_json(doc)


def _load_matrix(text: str) -> np.ndarray:
    try:
        arr = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError) as exc:
        raise InputError(f"malformed matrix JSON: {exc}")
    return arr


def _parse_profile(expr: str, lo: float, hi: float) -> Profile1D:
    """A 1D profile from an expression in the single variable x[0]."""
    integ = parse_integrand(expr)

    def fn(s):
        s = np.asarray(s, dtype=float)
        x = np.stack([s, np.zeros_like(s)], axis=-1)
        A = np.zeros(s.shape + (2, 2))
        return integ(x, A)

    return Profile1D.from_function(fn, lo, hi)


class _Fail(Exception):
    """Raised to signal a verdict failure (exit code 2)."""


def _run(fn):
    try:
        fn()
    except _Fail as exc:
        click.echo(str(exc))
        sys.exit(2)
    except (InputError, ParseError, NotSolvableError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


@click.group()
def main():
    """Numerical laboratory for linear-growth functionals over symmetrized
    gradients: dyad classification, rigidity of 2D differential inclusions,
    quasiconvexity testing, functional evaluation, and Young-measure
    experiments."""


_common = [
    click.option("--seed", type=int, default=0, show_default=True),
    click.option("--tol", type=float, default=None, help="tolerance override"),
    click.option("--out", type=click.Path(), default=None,
                 help="directory for JSON/CSV reports"),
    click.option("--threads", type=int, default=1, show_default=True,
                 help="cap on inner parallelism (evaluation is single-process)"),
]


def _with_common(cmd):
    for opt in reversed(_common):
        cmd = opt(cmd)
    return cmd


@main.command()
@click.option("--matrix", required=True, help="2x2 symmetric matrix as JSON")
@_with_common
def classify(matrix, seed, tol, out, threads):
    """Classify a symmetric matrix as a symmetric tensor product a (.) b
    (zero, rank-one, opposite-sign-spectrum dyad, or not a dyad)."""
    def go():
        dc = classify_dyad(_load_matrix(matrix), tol=tol or 1e-9)
        doc = dc.to_json()
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "classify.json", doc)
    _run(go)


@main.command()
@click.option("--matrix", required=True, help="matrix P of the inclusion, as JSON")
@click.option("--h1", "h1_expr", default=None, help="profile h1(x[0]) (opposite-sign case)")
@click.option("--h2", "h2_expr", default=None, help="profile h2(x[0]) (opposite-sign case)")
@click.option("--h", "h_expr", default=None, help="profile h(x[0]) (degenerate case)")
@click.option("--p", "p_expr", default=None, help="profile p(x[0]) (degenerate case)")
@click.option("--g", "g_expr", default=None, help="field g(x[0], x[1]) (elliptic case)")
@click.option("--grid", "grid_n", type=int, default=65, show_default=True)
@_with_common
def rigidity(matrix, h1_expr, h2_expr, h_expr, p_expr, g_expr, grid_n,
             seed, tol, out, threads):
    """Solve the differential inclusion Eu in span{P} in 2D: free solution
    families in the dyad cases, the conjugate-potential construction (or a
    no-solution verdict) in the elliptic case."""
    def go():
        P = _load_matrix(matrix)
        case = classify_inclusion(P)
        grid = Grid(((0.0, 1.0), (0.0, 1.0)), (grid_n, grid_n))
        report = {"case": case.to_json()}
        if case.tag == "Trivial":
            click.echo(json.dumps(_round9(report)))
            _write_report(out, "rigidity.json", report)
            return
        if case.tag == "OppositeSign":
            h1 = _parse_profile(h1_expr or "1", -4.0, 4.0)
            h2 = _parse_profile(h2_expr or "0", -4.0, 4.0)
            u, g, residual = solve_opposite_sign(P, h1, h2, grid)
            report.update({"residual": residual})
        elif case.tag == "Degenerate":
            lam1 = case.eigen[0]
            h = _parse_profile(h_expr or "0", 0.0, 1.0)
            p = _parse_profile(p_expr or "1", 0.0, 1.0)
            u, g, residual = solve_degenerate(lam1, h, p, grid)
            report.update({"residual": residual})
        else:
            if g_expr is None:
                raise InputError("elliptic case needs --g")
            integ = parse_integrand(g_expr)
            pts = grid.nodes()
            gvals = integ(pts, np.zeros(grid.n + (2, 2)))
            try:
                sol = solve_elliptic(P, gvals, grid, tol=tol)
            except NotSolvableError as exc:
                report.update({"verdict": "NotSolvable",
                               "residual_pde": exc.residual})
                click.echo(json.dumps(_round9(report)))
                _write_report(out, "rigidity.json", report)
                raise _Fail(f"verdict: NotSolvable ({exc})")
            u = sol.u
            report.update({"residual_pde": sol.residual_pde,
                           "residual_incl": sol.residual_incl,
                           "curl_residual": sol.curl_residual})
        click.echo(json.dumps(_round9(report)))
        _write_report(out, "rigidity.json", report)
        _write_report(out, "rigidity_field.json", u.to_json())
    _run(go)


@main.command("qc-test")
@click.option("--integrand", required=True,
              help="expression in A and x, or @name for a catalog entry")
@click.option("--at", "at_matrix", default="[[0,0],[0,0]]", show_default=True,
              help="matrix A at which symmetric quasiconvexity is probed")
@click.option("--grid", "grid_n", type=int, default=33, show_default=True)
@_with_common
def qc_test(integrand, at_matrix, grid_n, seed, tol, out, threads):
    """Probe symmetric quasiconvexity of h at A through the cell problem:
    search for zero-boundary test displacements lowering the mean of
    h(A + E psi).  Exit 2 when a violation is certified."""
    def go():
        h = _load_integrand(integrand)
        A = _load_matrix(at_matrix)
        cell = Grid(((0.0, 1.0), (0.0, 1.0)), (grid_n, grid_n))
        opts = {"seed": seed}
        if tol is not None:
            opts["tol"] = tol
        res = cell_problem_min(h, A, cell, opts)
        doc = {"min_mean": res.min_mean, "h_at_A": res.h_at_A,
               "violation": res.violation, "starts_tried": res.starts_tried,
               "verdict": "violation" if res.violation else "no-violation"}
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "qc_test.json", doc)
        if res.violation:
            raise _Fail("verdict: violation of symmetric quasiconvexity")
    _run(go)


@main.command()
@click.option("--field", required=True,
              help="field JSON file, or 'staircase' for the built-in example")
@click.option("--integrand", required=True)
@click.option("--no-boundary", is_flag=True, default=False,
              help="drop the boundary trace term")
@_with_common
def evaluate(field, integrand, no_boundary, seed, tol, out, threads):
    """Evaluate the linear-growth functional: bulk integral of f at the
    strain, exact singular sums of the recession at jump amplitudes, and
    optionally the boundary trace term."""
    def go():
        u = _load_field(field)
        f = _load_integrand(integrand)
        br = evaluate_functional(f, u, include_boundary=not no_boundary)
        mu = assemble_symmetrized_measure(u)
        doc = br.to_json()
        doc["area"] = area_functional(mu)
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "evaluate.json", doc)
    _run(go)


@main.command()
@click.option("--integrand", required=True)
@click.option("--grid", "grid_n", type=int, default=17, show_default=True)
@click.option("--no-boundary", is_flag=True, default=False)
@click.option("--coercivity", type=float, default=0.0,
              help="coercivity constant m for the sample check")
@_with_common
def minimize(integrand, grid_n, no_boundary, coercivity, seed, tol, out, threads):
    """Descend over node displacements for the relaxed Dirichlet problem;
    the reported value is an upper bound on the discrete minimum."""
    def go():
        f = _load_integrand(integrand)
        grid = Grid(((0.0, 1.0), (0.0, 1.0)), (grid_n, grid_n))
        opts = {"seed": seed, "include_boundary": not no_boundary}
        if coercivity > 0:
            opts["coercivity_m"] = coercivity
        u_star, br = minimize_functional(f, grid, opts=opts)
        doc = br.to_json()
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "minimize.json", doc)
        _write_report(out, "minimizer_field.json", u_star.to_json())
    _run(go)


@main.command("lsc-demo")
@click.option("--integrand", required=True)
@click.option("--seq", "seq_kind", type=click.Choice(["laminate", "concentration"]),
              default="laminate", show_default=True)
@click.option("--grid", "grid_n", type=int, default=129, show_default=True)
@_with_common
def lsc_demo(integrand, seq_kind, grid_n, seed, tol, out, threads):
    """Lower-semicontinuity experiment: track F along an oscillation or
    concentration sequence and compare its tail with F at the limit.
    Exit 2 on a FAIL verdict."""
    def go():
        f = _load_integrand(integrand)
        grid = Grid(((0.0, 1.0), (0.0, 1.0)), (grid_n, grid_n))
        seq = (laminate_sequence(grid) if seq_kind == "laminate"
               else concentration_sequence(grid))
        rep = lsc_experiment(f, seq, tol=tol if tol is not None else 1e-6)
        click.echo(json.dumps(_round9(rep)))
        _write_report(out, "lsc.json", rep)
        rows = []
        for (j, Fv), uj in zip(rep["trajectory"], seq.fields):
            area = area_functional(assemble_symmetrized_measure(uj))
            rows.append((j, float(Fv), float(area)))
        _write_csv(out, "lsc.csv", ("j", "F_uj", "area_uj"), rows)
        if rep["verdict"] == "FAIL":
            raise _Fail("verdict: FAIL (lower semicontinuity violated)")
    _run(go)


@main.command("strict-demo")
@click.option("--field", default="staircase", show_default=True)
@click.option("--integrand", required=True)
@click.option("--deltas", default="0.2,0.1,0.05", show_default=True,
              help="decreasing mollification radii")
@_with_common
def strict_demo(field, integrand, deltas, seed, tol, out, threads):
    """Strict-continuity experiment: mollify the derivative measure and
    track the area functional and F toward their exact values."""
    def go():
        u = _load_field(field)
        f = _load_integrand(integrand)
        dl = [float(s) for s in deltas.split(",")]
        rep = strict_continuity_experiment(f, u, dl)
        click.echo(json.dumps(_round9(rep)))
        _write_report(out, "strict.json", rep)
        rows = [(d, Fv, av) for (d, Fv), (_, av)
                in zip(rep["F_trajectory"], rep["area_trajectory"])]
        _write_csv(out, "strict.csv", ("delta", "F_udelta", "area_udelta"), rows)
    _run(go)


@main.command()
@click.option("--integrand", required=True)
@click.option("--ym", "ym_kind", type=click.Choice(["laminate", "staircase"]),
              default="laminate", show_default=True)
@click.option("--theta", type=float, default=0.5, show_default=True)
@click.option("--where", type=click.Choice(["regular", "singular"]),
              default="regular", show_default=True)
@_with_common
def jensen(integrand, ym_kind, theta, where, seed, tol, out, threads):
    """Jensen-type inequality check on a built-in Young measure (two-atom
    laminate or the elementary measure of the staircase field).
    Exit 2 on a FAILS verdict."""
    def go():
        h = _load_integrand(integrand)
        if ym_kind == "laminate":
            P = np.array([[0.0, 0.5], [0.5, 0.0]])
            nu = laminate_ym(P, -P, theta)
        else:
            nu = elementary_ym(assemble_symmetrized_measure(staircase_field()))
        rep = jensen_check(nu, h, where=where,
                           tol=tol if tol is not None else 1e-9)
        click.echo(json.dumps(_round9(rep)))
        _write_report(out, "jensen.json", rep)
        _write_csv(out, "jensen.csv", ("lhs", "rhs", "gap", "verdict"),
                   [(rep["lhs"], rep["rhs"], rep["gap"], rep["verdict"])])
        if rep["verdict"] == "FAILS":
            raise _Fail("verdict: FAILS (Jensen inequality violated)")
    _run(go)


@main.command()
@click.option("--q1", type=float, default=1.0, show_default=True)
@click.option("--q2", type=float, default=1.0, show_default=True)
@click.option("--n-list", default="1,2,4,8", show_default=True)
@_with_common
def staircase(q1, q2, n_list, seed, tol, out, threads):
    """Staircase averaging: tile the built-in cell field, add the floor
    staircase, rescale, and report the distance to the affine limit and
    the (cancelled) gluing-interface mass."""
    def go():
        v = staircase_cell()
        rows = []
        for n in (int(s) for s in n_list.split(",")):
            _, dist, T, glue = staircase_average(v, q1, q2, n)
            rows.append({"n": n, "dist_to_affine": dist, "gluing_mass": glue})
        doc = {"target": T.tolist(), "runs": rows}
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "staircase.json", doc)
        _write_csv(out, "staircase.csv", ("n", "dist_to_affine", "gluing_mass"),
                   [(r["n"], r["dist_to_affine"], r["gluing_mass"]) for r in rows])
    _run(go)


def _builtin_measure(name: str) -> SymMeasure:
    grid = Grid(((-1.0, 1.0), (-1.0, 1.0)), (65, 65))
    d = grid.dim
    dens = np.zeros(grid.cell_shape + (d, d))
    if name == "lebesgue":
        dens[..., 0, 0] = 1.0
        return SymMeasure(grid, dens)
    if name == "line":
        atom = SurfaceAtom(np.array([[-1.0, 0.0], [1.0, 0.0]]),
                           np.array([[0.0, 0.5], [0.5, 0.0]]) * math.sqrt(2.0))
        return SymMeasure(grid, dens, (atom,))
    if name == "dirac":
        return SymMeasure(grid, dens, (), (PointAtom(np.zeros(2), np.eye(2)),))
    raise InputError(f"unknown builtin measure '{name}'")


@main.command()
@click.option("--measure", default="lebesgue", show_default=True,
              help="lebesgue | line | dirac | path to a measure JSON")
@click.option("--x0", default="[0,0]", show_default=True)
@click.option("--t", "t_factor", type=float, default=3.0, show_default=True)
@click.option("--radii", default="0.2,0.1,0.05", show_default=True)
@_with_common
def doubling(measure, x0, t_factor, radii, seed, tol, out, threads):
    """Doubling scan: the ratio of ball masses |mu|(B(x0, t r)) / |mu|(B(x0, r))
    per radius, with the sup and its argmax for inspection."""
    def go():
        if measure in ("lebesgue", "line", "dirac"):
            mu = _builtin_measure(measure)
        else:
            with open(measure) as fh:
                mu = SymMeasure.from_json(json.load(fh))
        point = np.asarray(json.loads(x0), dtype=float)
        rs = [float(s) for s in radii.split(",")]
        rep = doubling_scan(mu, point, t_factor, rs)
        doc = {"ratios": [[r, q] for r, q in rep["ratios"]],
               "sup": rep["sup"], "argmax": rep["argmax"]}
        click.echo(json.dumps(_round9(doc)))
        _write_report(out, "doubling.json", doc)
        _write_csv(out, "doubling.csv", ("r", "ratio"),
                   [(r, q) for r, q in rep["ratios"]])
    _run(go)


if __name__ == "__main__":
    main()
