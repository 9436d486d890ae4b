"""End-to-end run of the worked example: structure constants, the failed
weighted condition, solves at two resolutions and the level-set checks."""
from .analysis import (
    CaccioppoliCheckSpec,
    admissible_radius,
    caccioppoli_sides,
    condition19_delta_scan,
    condition19_scan,
    excess_trace,
    fit_decay,
    two_sided_bound,
)
from .coefficients import build_example_tensor, check_structure, example_sample_spec
from .degiorgi import RecursionParams, caccioppoli_constant, recursion_threshold, simulate_recursion
from .mesh_field import build_box_mesh, sobolev_conjugate
from .solver import PicardConfig, boundary_preset, interior_sup, picard_solve, weak_residual

CENTER = (0.5, 0.5, 0.5)
BALL_PAIR = (0.15, 0.3)
LEVELS = (1.0, 1.5, 2.0)


def example_boundary():
    """Affine data spanning ``[0, 3]`` in each component on the unit cube."""
    return boundary_preset("linear", 2, scale=1.5)


def solve_example(cells, boundary=None, config=None):
    T = build_example_tensor()
    mesh = build_box_mesh(3, ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0)), cells)
    return T, mesh, picard_solve(T, mesh, boundary or example_boundary(), config or PicardConfig())


def run_example(cells=(8, 16), levels=LEVELS, H=20):
    T = build_example_tensor()
    report = check_structure(T, example_sample_spec())
    constants = (report.c, 3, 2, report.nu)
    p_star = sobolev_conjugate(3, 2.0)
    out = {
        "structure": report.as_dict(),
        "caccioppoli_constant": caccioppoli_constant(*constants),
        "condition19": [
            {"k": k, "ratio": r, "threshold": th, "below": below}
            for k, r, th, below in condition19_scan(range(2, 21))
        ],
        "condition19_counterexample_k4": [
            {"delta": dl, "lhs": lhs, "rhs": rhs, "violated": bad}
            for dl, lhs, rhs, bad in condition19_delta_scan(T, 4, lambda_19=1.0, d_x=1.0, g_x=1.0)
        ],
        "resolutions": [],
    }
    for m in cells:
        _, mesh, res = solve_example(m)
        u = res.field
        R = admissible_radius(u, CENTER, p_star)
        upper, lower = two_sided_bound(u, CENTER, R, L0=report.L0, H=H)
        trace = excess_trace(u, CENTER, R, 1.0, H)
        C_fit, ok = fit_decay(trace)
        entry = {
            "cells_per_axis": m,
            "converged": res.converged,
            "outer_iters": res.outer_iters,
            "update_norm": res.update_norm,
            "weak_residual": weak_residual(T, mesh, u),
            "interior_sup": interior_sup(u),
            "admissible_radius": R,
            "bound_above": upper,
            "bound_below": lower,
            "decay_fit": C_fit if ok else None,
            "excess_trace_d1": trace.J,
            "caccioppoli": [],
        }
        for L in levels:
            spec = CaccioppoliCheckSpec(CENTER, *BALL_PAIR, L)
            sides = caccioppoli_sides(T, u, spec, constants)
            entry["caccioppoli"].append({"L": L, **sides.as_dict()})
        out["resolutions"].append(entry)
    params = RecursionParams(1.0, 2.0, 1.0)
    lemma = simulate_recursion(params, recursion_threshold(params), 40)
    out["lemma"] = {"threshold": recursion_threshold(params), "J": lemma.values,
                    "diverged": lemma.diverged}
    return out
