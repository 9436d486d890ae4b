"""Command-line entry point.

Exit codes: 0 success, 1 condition failure or reported divergence,
2 Picard non-convergence, 64 usage error.
"""
import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, degiorgi, formats
from .coefficients import SampleSpec, check_structure, DEFAULT_L_GRID
from .mesh_field import build_box_mesh, sobolev_conjugate
from .pipeline import run_example
from .solver import LinearSolveError, PicardConfig, boundary_preset, picard_solve, weak_residual

EXIT_OK, EXIT_FAILED, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2, 64

log = logging.getLogger("quasilinear_lab")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _scan(text):
    try:
        a, b = text.split("..")
        return range(int(a), int(b) + 1)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a..b, got {text!r}") from None


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _out(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_field(path):
    try:
        return formats.read_field(path)
    except formats.FormatError as exc:
        raise UsageError(str(exc)) from None


def _tensor(name):
    try:
        return formats.load_tensor(name)
    except formats.FormatError as exc:
        raise UsageError(str(exc)) from None


# -- commands ----------------------------------------------------------------

def cmd_check(args):
    T = _tensor(args.tensor)
    spec = SampleSpec(x_box=(0.0, 1.0), y_box=(-args.y_range, args.y_range),
                      x_points=args.x_points, y_points=args.y_points)
    report = check_structure(T, spec, DEFAULT_L_GRID)
    path = _out(args) / "structure_report.json"
    formats.write_json(path, report.as_dict())
    print(f"c={formats.fmt(report.c)} nu={formats.fmt(report.nu)} L0={report.L0} "
          f"A1={report.passed_A1} A2={report.passed_A2} A3={report.passed_A3}")
    for w in report.witnesses:
        print(f"witness: {w.implication} alpha={w.alpha} beta={w.beta} L={w.L} y={w.y}")
    return EXIT_OK if report.passed else EXIT_FAILED


def _solve_config(args):
    cfg = formats.read_json(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise UsageError("solve configuration must be a JSON object")
    tensor = cfg.get("tensor", args.tensor)
    mesh_cfg = cfg.get("mesh", {})
    T = formats.tensor_from_spec(tensor)
    n = int(mesh_cfg.get("n", T.n))
    box = mesh_cfg.get("box", [[0.0] * n, [1.0] * n])
    cells = int(mesh_cfg.get("cells_per_axis", args.cells))
    boundary = cfg.get("boundary", {"preset": args.boundary})
    if isinstance(boundary, str):
        boundary = {"preset": boundary}
    params = {k: v for k, v in boundary.items() if k != "preset"}
    g = boundary_preset(boundary.get("preset", "linear"), T.N, **params)
    picard = PicardConfig(**cfg.get("picard", {}))
    return cfg, T, build_box_mesh(n, box, cells), g, picard


def cmd_solve(args):
    try:
        cfg, T, mesh, g, picard = _solve_config(args)
    except (formats.FormatError, ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid solve configuration: {exc}") from None
    start = time.perf_counter()
    try:
        res = picard_solve(T, mesh, g, picard)
    except LinearSolveError as exc:
        print(f"linear solver failed: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    elapsed = time.perf_counter() - start
    out = _out(args)
    formats.write_field(out / "solution.csv", res.field)
    report = {
        "tensor": T.name,
        "mesh": {"n": mesh.n, "box": [mesh.lower.tolist(), mesh.upper.tolist()],
                 "cells_per_axis": mesh.cells_per_axis},
        "boundary": g.name,
        "converged": res.converged,
        "outer_iters": res.outer_iters,
        "update_history": res.update_history,
        "linear": [{"method": i.method, "iterations": i.iterations, "residual": i.residual,
                    "rhs_norm": i.rhs_norm} for i in res.linear_info],
        "weak_residual": weak_residual(T, mesh, res.field),
    }
    if args.timing:
        report["timing_seconds"] = elapsed
    formats.write_json(out / "run_report.json", report)
    print(f"converged={res.converged} iterations={res.outer_iters} "
          f"update={formats.fmt(res.update_norm)}")
    return EXIT_OK if res.converged else EXIT_DIVERGED


def _center(args, field):
    if args.x0 is not None:
        if len(args.x0) != field.mesh.n:
            raise UsageError("--x0 has the wrong dimension")
        return np.array(args.x0)
    return 0.5 * (field.mesh.lower + field.mesh.upper)


def cmd_analyze(args):
    out = _out(args)
    kind = args.analysis
    if kind == "cond19":
        rows = analysis.condition19_scan(args.scan)
        formats.write_rows(out / "cond19_scan.csv", ["k", "ratio", "threshold", "below"], rows)
        first = next((r[0] for r in rows if r[3]), None)
        print(f"first k below -12/5: {first}")
        if args.k is not None:
            if args.k < 2:
                raise UsageError("--k must be an integer >= 2")
            drows = analysis.condition19_delta_scan(_tensor(args.tensor), args.k, args.lambda19,
                                                    args.dx, args.gx)
            formats.write_rows(out / "cond19_delta_scan.csv", ["delta", "lhs", "rhs", "violated"], drows,
                               comments=[f"k={args.k} lambda={formats.fmt(args.lambda19)} "
                                         f"d={formats.fmt(args.dx)} g={formats.fmt(args.gx)}"])
            print(f"k={args.k}: violated for {sum(r[3] for r in drows)}/{len(drows)} deltas")
        return EXIT_OK
    if kind == "radial":
        return _radial(args, out)
    if args.field is None:
        raise UsageError(f"analyze {kind} needs --field")
    field = _load_field(args.field)
    x0 = _center(args, field)
    try:
        if kind == "excess":
            trace = analysis.excess_trace(field, x0, args.R, args.d, args.H, p=args.p)
            formats.write_rows(out / "excess_trace.csv", ["h", "k_h", "rho_h", "J_h"], trace.rows(),
                               comments=[f"d={formats.fmt(args.d)} R={formats.fmt(args.R)} "
                                         f"p={formats.fmt(args.p)} p_star={formats.fmt(trace.p_star)}"])
            print(f"J_0={formats.fmt(trace.J[0])} J_H={formats.fmt(trace.J[-1])}")
            return EXIT_OK if trace.is_nonincreasing() else EXIT_FAILED
        if kind == "caccioppoli":
            T = _tensor(args.tensor)
            if args.c is None or args.nu is None:
                rep = check_structure(T, SampleSpec(x_box=(0.0, 1.0), y_box=(-10.0, 10.0)))
                c, nu = rep.c, rep.nu
            else:
                c, nu = args.c, args.nu
            spec = analysis.CaccioppoliCheckSpec(tuple(x0), args.s, args.t, args.L)
            sides = analysis.caccioppoli_sides(T, field, spec, (c, T.n, T.N, nu))
            formats.write_json(out / "caccioppoli_report.json", {
                **sides.as_dict(),
                "spec": {"center": list(x0), "s": args.s, "t": args.t, "L": args.L},
                "c": c, "nu": nu,
            })
            print(f"lhs={formats.fmt(sides.lhs)} rhs={formats.fmt(sides.rhs)} ratio={formats.fmt(sides.ratio)}")
            return EXIT_OK if sides.ratio <= 1 else EXIT_FAILED
        if kind == "boundedness":
            p_star = sobolev_conjugate(field.mesh.n, args.p)
            R = args.R if args.R is not None else analysis.admissible_radius(field, x0, p_star)
            upper, lower = analysis.two_sided_bound(field, x0, R, H=args.H, p=args.p)
            formats.write_json(out / "boundedness_report.json",
                               {"R": R, "upper": upper, "lower": lower, "center": list(x0)})
            print(f"R={formats.fmt(R)} u <= {upper} and u >= -{lower} on B(x0, R/2)")
            return EXIT_OK
    except analysis.GeometryError as exc:
        raise UsageError(str(exc)) from None
    except analysis.UnboundedAtResolution as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILED
    raise UsageError(f"unknown analysis {kind!r}")


def _radial(args, out):
    f = analysis.RadialField(args.gamma, args.n)
    rows = []
    for r in args.radii:
        sup, semi = analysis.radial_diagnostics(f, r, 1.0)
        rows.append((r, sup, semi))
    formats.write_rows(out / "radial_diagnostics.csv", ["r", "sup", "seminorm"], rows,
                       comments=[f"gamma={formats.fmt(args.gamma)} n={args.n}"])
    for r, sup, semi in rows:
        print(f"r={r:g} sup={sup:.6g} seminorm={semi:.6g}")
    return EXIT_OK


def cmd_radial(args):
    return _radial(args, _out(args))


def cmd_lemma(args):
    try:
        params = degiorgi.RecursionParams(args.A, args.lam, args.gamma0)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    trace = degiorgi.simulate_recursion(params, args.J0, args.steps)
    comments = [f"threshold={formats.fmt(trace.threshold)} A={formats.fmt(args.A)} "
                f"lambda={formats.fmt(args.lam)} gamma={formats.fmt(args.gamma0)}"]
    if trace.diverged:
        comments.append(f"diverged at h={trace.overflow_index}")
    formats.write_rows(_out(args) / "lemma_trace.csv", ["h", "J_h"], list(enumerate(trace.values)),
                       comments=comments)
    print(f"threshold={formats.fmt(trace.threshold)} diverged={trace.diverged}")
    return EXIT_FAILED if trace.diverged else EXIT_OK


def cmd_example(args):
    result = run_example(cells=tuple(args.cells_list))
    formats.write_json(_out(args) / "example_report.json", result)
    ok = result["structure"]["passed_A1"] and result["structure"]["passed_A3"]
    ok = ok and all(r["converged"] for r in result["resolutions"])
    print(f"c={result['structure']['c']} nu={result['structure']['nu']} "
          f"bounds={[(r['bound_above'], r['bound_below']) for r in result['resolutions']]}")
    return EXIT_OK if ok else EXIT_FAILED


def build_parser():
    p = _Parser(prog="quasilinear-lab", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="certify boundedness, ellipticity and staircase support")
    c.add_argument("--tensor", default="example4", help="preset name or JSON file")
    c.add_argument("--y-range", type=float, default=10.0)
    c.add_argument("--y-points", type=int, default=101)
    c.add_argument("--x-points", type=int, default=2)
    c.add_argument("--out", default=".")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("solve", help="Picard solve on a box mesh")
    s.add_argument("--config")
    s.add_argument("--tensor", default="example4")
    s.add_argument("--cells", type=int, default=8)
    s.add_argument("--boundary", default="linear", choices=["linear", "bounded_sine", "constant"])
    s.add_argument("--timing", action="store_true", help="add wall time to the run report")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("analyze", help="level-set diagnostics")
    a.add_argument("analysis", choices=["excess", "cond19", "caccioppoli", "boundedness", "radial"])
    a.add_argument("--field", help="solution CSV (mesh sidecar alongside)")
    a.add_argument("--tensor", default="example4")
    a.add_argument("--x0", type=_floats)
    a.add_argument("--d", type=float, default=1.0)
    a.add_argument("--R", type=float)
    a.add_argument("--H", type=int, default=20)
    a.add_argument("--p", type=float, default=2.0)
    a.add_argument("--L", type=float, default=1.0)
    a.add_argument("--s", type=float, default=0.15)
    a.add_argument("--t", type=float, default=0.3)
    a.add_argument("--c", type=float)
    a.add_argument("--nu", type=float)
    a.add_argument("--scan", type=_scan, default=range(2, 21))
    a.add_argument("--k", type=int, help="also scan delta for the counterexample at this k")
    a.add_argument("--lambda19", type=float, default=1.0)
    a.add_argument("--dx", type=float, default=1.0)
    a.add_argument("--gx", type=float, default=1.0)
    a.add_argument("--gamma", type=float, default=1.2)
    a.add_argument("--n", type=int, default=3)
    a.add_argument("--radii", type=_floats, default=(1e-2, 1e-3, 1e-4))
    a.add_argument("--out", default=".")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("radial", help="sup and W^{1,2} seminorm of x/|x|^gamma on annuli")
    r.add_argument("--gamma", type=float, default=1.2)
    r.add_argument("--n", type=int, default=3)
    r.add_argument("--radii", type=_floats, default=(1e-2, 1e-3, 1e-4))
    r.add_argument("--out", default=".")
    r.set_defaults(func=cmd_radial)

    lm = sub.add_parser("lemma", help="iterate J_{h+1} = A lambda^h J_h^(1+gamma)")
    lm.add_argument("--A", type=float, default=1.0)
    lm.add_argument("--lambda", dest="lam", type=float, default=2.0)
    lm.add_argument("--gamma0", type=float, default=1.0)
    lm.add_argument("--J0", type=float, default=0.5)
    lm.add_argument("--steps", type=int, default=40)
    lm.add_argument("--out", default=".")
    lm.set_defaults(func=cmd_lemma)

    e = sub.add_parser("example", help="full worked-example pipeline, one JSON report")
    e.add_argument("--cells", dest="cells_list", type=int, nargs="+", default=[8, 16])
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_example)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, formats.FormatError, analysis.GeometryError) as exc:
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
