"""Piecewise-linear Galerkin discretisation of the divergence-form system
with Dirichlet data, solved by frozen-coefficient (Picard) iteration.

Degrees of freedom are interleaved: component ``alpha`` at vertex ``v`` is
dof ``v * N + alpha``.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh_field import DiscreteField, sobolev_seminorm

log = logging.getLogger(__name__)

ASSEMBLY_CHUNK = 8192


class LinearSolveError(RuntimeError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class DirichletData:
    """Boundary function ``g(points) -> (..., N)``; only boundary vertices are used
    as constraints, but the same function extends ``g`` into the interior for
    the initial guess."""
    func: Callable[[np.ndarray], np.ndarray]
    N: int
    name: str = "custom"

    def __call__(self, points):
        vals = np.asarray(self.func(points), dtype=float).reshape(len(points), self.N)
        if not np.all(np.isfinite(vals)):
            raise ValueError("boundary data must be finite")
        return vals


def boundary_preset(name, N, **params):
    """Named boundary data.

    ``linear``: ``g^alpha(x) = scale * (x_alpha + (sum of the other coordinates) / 2) + shift``
    (axis index wraps when ``N > n``), so every component varies along every axis.
    ``bounded_sine``: ``g^alpha(x) = amplitude * sin(pi * (x_1 + (alpha+1) x_2 + ...) + alpha)``.
    ``constant``: ``g^alpha = value``.
    """
    if name == "linear":
        scale = float(params.get("scale", 1.0))
        shift = float(params.get("shift", 0.0))

        def g(x):
            n = x.shape[-1]
            total = x.sum(axis=-1)
            return np.stack([scale * (0.5 * x[..., a % n] + 0.5 * total) + shift
                             for a in range(N)], axis=-1)
    elif name == "bounded_sine":
        amp = float(params.get("amplitude", 1.0))

        def g(x):
            n = x.shape[-1]
            out = []
            for a in range(N):
                phase = x[..., 0] + sum((a + 1) / (d + 1) * x[..., d] for d in range(1, n))
                out.append(amp * np.sin(np.pi * phase + a))
            return np.stack(out, axis=-1)
    elif name == "constant":
        value = float(params.get("value", 0.0))

        def g(x):
            return np.full(x.shape[:-1] + (N,), value)
    else:
        raise ValueError(f"unknown boundary preset {name!r}")
    return DirichletData(g, N, name=name)


@dataclass
class PicardConfig:
    max_outer_iters: int = 50
    outer_tol: float = 1e-8
    linear_tol: float = 1e-10
    linear_max_iters: int = 2000
    linear_method: str = "auto"  # auto | direct | dense | bicgstab | gmres
    direct_max_unknowns: int = 20_000
    initial_guess: str = "lift"  # lift | zero

    def __post_init__(self):
        if not (self.outer_tol > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class LinearSolveInfo:
    method: str
    iterations: int
    residual: float
    rhs_norm: float


@dataclass
class SolveResult:
    field: DiscreteField
    outer_iters: int
    update_norm: float
    converged: bool
    linear_info: list = field(default_factory=list)
    update_history: list = field(default_factory=list)


@dataclass
class AssembledSystem:
    matrix: sp.csr_matrix      # free x free operator
    rhs: np.ndarray            # free load incl. boundary lift
    full: sp.csr_matrix        # all dofs x all dofs
    free: np.ndarray           # free dof indices
    fixed: np.ndarray          # constrained dof indices
    fixed_values: np.ndarray


def dof_masks(mesh, N):
    fixed_vertex = np.repeat(mesh.boundary, N)
    dofs = np.arange(mesh.n_vertices * N)
    return dofs[~fixed_vertex], dofs[fixed_vertex]


def simplex_average_tensor(T, mesh, frozen, start, stop):
    """Quadrature average of ``a(x, u_frozen(x))`` on simplices ``start:stop``."""
    _, w = mesh.quadrature
    xq = mesh.quadrature_points[start:stop]
    yq = frozen.at_quadrature[start:stop]
    E = T(xq, yq)  # (S, Q, N, N, n, n)
    return np.einsum("q,sqabij->sabij", w, E)


def stiffness(T, mesh, frozen):
    """Full stiffness matrix over all dofs, rows = test ``(v, alpha)``,
    columns = trial ``(w, beta)``."""
    if T.n != mesh.n:
        raise ValueError(f"tensor dimension {T.n} != mesh dimension {mesh.n}")
    N = T.N
    if frozen.N != N:
        raise ValueError("frozen field has the wrong number of components")
    G = mesh.basis_gradients
    vol = mesh.volumes
    rows, cols, vals = [], [], []
    for start in range(0, mesh.n_simplices, ASSEMBLY_CHUNK):
        stop = min(start + ASSEMBLY_CHUNK, mesh.n_simplices)
        Abar = simplex_average_tensor(T, mesh, frozen, start, stop)
        g = G[start:stop]
        Ke = np.einsum("s,sabij,spi,sqj->spaqb", vol[start:stop], Abar, g, g)  # (S,k,N,k,N)
        simp = mesh.simplices[start:stop]
        r = (simp[:, :, None] * N + np.arange(N)[None, None, :])  # (S, k, N)
        R = np.broadcast_to(r[:, :, :, None, None], Ke.shape)
        C = np.broadcast_to(r[:, None, None, :, :], Ke.shape)
        rows.append(R.ravel())
        cols.append(C.ravel())
        vals.append(Ke.ravel())
    size = mesh.n_vertices * N
    return sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()


def source_load(mesh, source, N):
    """``integral f^alpha phi_v`` for a callable source ``f(points) -> (..., N)``."""
    bary, w = mesh.quadrature
    fq = np.asarray(source(mesh.quadrature_points), dtype=float).reshape(mesh.n_simplices, -1, N)
    contrib = np.einsum("s,q,qk,sqc->skc", mesh.volumes, w, bary, fq)
    idx = mesh.simplices[:, :, None] * N + np.arange(N)
    return np.bincount(idx.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices * N)


def _full_load(mesh, N, source):
    if source is None:
        return np.zeros(mesh.n_vertices * N)
    if callable(source):
        return source_load(mesh, source, N)
    load = np.asarray(source, dtype=float)
    if load.shape != (mesh.n_vertices * N,):
        raise ValueError("load vector must cover all dofs")
    return load


def assemble(T, mesh, frozen, boundary=None, source=None):
    """Frozen-coefficient operator on the free dofs and its right-hand side.

    ``boundary`` is a :class:`DirichletData` (zero data if ``None``);
    ``source`` is a callable ``f(points)`` or a full-length load vector.
    """
    N = T.N
    K = stiffness(T, mesh, frozen)
    free, fixed = dof_masks(mesh, N)
    bverts = mesh.vertices[mesh.boundary]
    gvals = boundary(bverts).ravel() if boundary is not None else np.zeros(len(fixed))
    load = _full_load(mesh, N, source)
    A = K[free][:, free]
    rhs = load[free] - K[free][:, fixed] @ gvals
    return AssembledSystem(matrix=A.tocsr(), rhs=rhs, full=K, free=free, fixed=fixed,
                           fixed_values=gvals)


def _jacobi(A):
    d = A.diagonal().copy()
    d[d == 0] = 1.0
    inv = 1.0 / d
    return spla.LinearOperator(A.shape, matvec=lambda v: inv * v, dtype=float)


def linear_solve(A, b, config=None):
    """Solve ``A x = b`` for a possibly nonsymmetric ``A``.

    Returns ``(x, info)``; guarantees ``||b - A x|| <= linear_tol * ||b||`` or
    raises :class:`LinearSolveError` with the residual history.
    """
    config = config or PicardConfig()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), LinearSolveInfo("trivial", 0, 0.0, 0.0)
    method = config.linear_method
    if method == "auto":
        if n <= 400:
            method = "dense"
        elif n <= config.direct_max_unknowns:
            method = "direct"
        else:
            method = "bicgstab"
    history = []
    target = config.linear_tol * bnorm

    def check(x, name, its):
        res = float(np.linalg.norm(b - A @ x))
        history.append((name, res))
        return res <= target, LinearSolveInfo(name, its, res, bnorm)

    if method == "dense":
        Ad = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)
        x = np.linalg.solve(Ad, b)
        ok, info = check(x, "dense", 1)
        if ok:
            return x, info
        method = "gmres"
    elif method == "direct":
        x = spla.spsolve(sp.csc_matrix(A), b)
        ok, info = check(x, "direct", 1)
        if ok:
            return x, info
        method = "gmres"

    A = sp.csr_matrix(A)
    M = _jacobi(A)
    # Krylov stops on a preconditioned or estimated residual; aim lower than
    # the true-residual target so the check below rarely has to retry
    rtol = 0.1 * config.linear_tol
    x0 = None
    attempts = [method] + (["gmres"] if method == "bicgstab" else [])
    for name in attempts:
        its = [0]

        def count(_):
            its[0] += 1

        if name == "bicgstab":
            x, _ = spla.bicgstab(A, b, x0=x0, rtol=rtol, atol=0.0,
                                 maxiter=config.linear_max_iters, M=M, callback=count)
        elif name == "gmres":
            x, _ = spla.gmres(A, b, x0=x0, rtol=rtol, atol=0.0, restart=100,
                              maxiter=config.linear_max_iters, M=M, callback=count,
                              callback_type="pr_norm")
        else:
            raise ValueError(f"unknown linear method {name!r}")
        ok, info = check(x, name, its[0])
        if ok:
            return x, info
        x0 = x
    raise LinearSolveError(
        f"linear solve did not reach {config.linear_tol:g} relative residual", history
    )


def initial_field(mesh, boundary, N, policy):
    if policy == "lift" and boundary is not None:
        return DiscreteField(mesh, boundary(mesh.vertices))
    if policy in ("lift", "zero"):
        vals = np.zeros((mesh.n_vertices, N))
        if boundary is not None:
            vals[mesh.boundary] = boundary(mesh.vertices[mesh.boundary])
        return DiscreteField(mesh, vals)
    raise ValueError(f"unknown initial guess policy {policy!r}")


def picard_solve(T, mesh, boundary=None, config=None, source=None, initial=None):
    """Frozen-coefficient iteration ``u_{m+1} = solve(a(., u_m))``.

    Stops when the sup-norm of the update drops to ``outer_tol``. Failure to
    converge is reported through ``SolveResult.converged``; linear solver
    failures propagate as :class:`LinearSolveError`.
    """
    config = config or PicardConfig()
    N = T.N
    u = initial if initial is not None else initial_field(mesh, boundary, N, config.initial_guess)
    free, fixed = dof_masks(mesh, N)
    result = SolveResult(field=u, outer_iters=0, update_norm=np.inf, converged=False)
    for it in range(1, config.max_outer_iters + 1):
        system = assemble(T, mesh, u, boundary, source)
        xf, info = linear_solve(system.matrix, system.rhs, config)
        vals = np.empty(mesh.n_vertices * N)
        vals[free] = xf
        vals[fixed] = system.fixed_values
        new = DiscreteField(mesh, vals.reshape(-1, N))
        update = float(np.max(np.abs(new.values - u.values))) if vals.size else 0.0
        result.linear_info.append(info)
        result.update_history.append(update)
        result.field, result.outer_iters, result.update_norm = new, it, update
        log.debug("picard %d: update %.3e (%s, res %.2e)", it, update, info.method, info.residual)
        u = new
        if update <= config.outer_tol:
            result.converged = True
            break
    return result


def weak_residual(T, mesh, field, source=None):
    """Largest discrete weak-form residual over interior test functions,
    divided by ``||Du||_{L2} + 1``."""
    N = T.N
    K = stiffness(T, mesh, field)
    r = K @ field.values.ravel() - _full_load(mesh, N, source)
    free, _ = dof_masks(mesh, N)
    if len(free) == 0:
        return 0.0
    return float(np.max(np.abs(r[free])) / (sobolev_seminorm(field, None, 2.0) + 1.0))


def manufactured_rhs(T, mesh, u_exact):
    """Full load vector making the interpolant of ``u_exact`` the discrete
    solution of the problem frozen at ``u_exact``."""
    K = stiffness(T, mesh, u_exact)
    return K @ u_exact.values.ravel()


def interior_sup(field):
    interior = ~field.mesh.boundary
    if not np.any(interior):
        return 0.0
    return float(np.max(np.abs(field.values[interior])))

