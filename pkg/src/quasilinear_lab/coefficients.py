"""Coefficient tensors ``a^{alpha,beta}_{i,j}(x, y)`` and sample-based
certification of boundedness, ellipticity and the staircase support condition.

Index convention: entries are stored 0-based with axes ``(alpha, beta, i, j)``,
so mathematical entry ``a^{1,2}_{1,1}`` is ``E[0, 1, 0, 0]``. Evaluators are
vectorised: ``x`` has shape ``(..., n)``, ``y`` has shape ``(..., N)`` and the
result has shape ``(..., N, N, n, n)``.
"""
import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class TensorEvaluationError(ValueError):
    def __init__(self, message, x=None, y=None):
        super().__init__(message)
        self.x = x
        self.y = y


@dataclass(frozen=True)
class CoefficientTensor:
    n: int
    N: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    name: str = "custom"
    # y-points where extremes sit; injected into every sample set
    anchors: tuple = ()

    def __post_init__(self):
        if self.n < 1 or self.N < 1:
            raise ValueError("tensor dimensions must be positive")

    def __call__(self, x, y):
        return evaluate_tensor(self, x, y)


def evaluate_tensor(T, x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lead = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    x = np.broadcast_to(x, lead + (T.n,))
    y = np.broadcast_to(y, lead + (T.N,))
    E = np.broadcast_to(T.func(x, y), lead + (T.N, T.N, T.n, T.n))
    bad = ~np.all(np.isfinite(E), axis=(-4, -3, -2, -1))
    if np.any(bad):
        where = np.argwhere(bad)[0] if bad.ndim else ()
        raise TensorEvaluationError(
            f"non-finite coefficient from tensor {T.name!r}", x=x[tuple(where)], y=y[tuple(where)]
        )
    return E


def flatten_entries(E):
    """``(..., N, N, n, n) -> (..., N*n, N*n)`` with row ``(alpha, i)`` and column ``(beta, j)``."""
    N, n = E.shape[-3], E.shape[-1]
    M = np.swapaxes(E, -3, -2)  # (..., alpha, i, beta, j)
    return M.reshape(E.shape[:-4] + (N * n, N * n))


def quadratic_form(T, x, y, xi):
    """``sum a^{alpha,beta}_{i,j}(x, y) xi^alpha_i xi^beta_j`` with ``xi`` of shape ``(N, n)``."""
    E = evaluate_tensor(T, x, y)
    return np.einsum("...abij,...ai,...bj->...", E, xi, xi)


# -- tensor constructors -----------------------------------------------------

def constant_tensor(blocks, name="constant_blocks"):
    blocks = np.asarray(blocks, dtype=float)
    if blocks.ndim != 4 or blocks.shape[0] != blocks.shape[1] or blocks.shape[2] != blocks.shape[3]:
        raise ValueError(f"blocks must have shape (N, N, n, n), got {blocks.shape}")
    N, n = blocks.shape[0], blocks.shape[2]
    blocks = blocks.copy()
    blocks.setflags(write=False)

    def func(x, y):
        return np.broadcast_to(blocks, x.shape[:-1] + blocks.shape)

    return CoefficientTensor(n=n, N=N, func=func, name=name)


def identity_tensor(n, N):
    blocks = np.einsum("ab,ij->abij", np.eye(N), np.eye(n))
    return constant_tensor(blocks, name="identity")


def zero_tensor(n, N):
    return constant_tensor(np.zeros((N, N, n, n)), name="zero")


def diagonal_tensor(diagonal_blocks, name="diagonal"):
    """Block-diagonal constant tensor from a list of ``N`` ``(n, n)`` blocks."""
    diag = [np.asarray(b, dtype=float) for b in diagonal_blocks]
    N, n = len(diag), diag[0].shape[0]
    blocks = np.zeros((N, N, n, n))
    for a, b in enumerate(diag):
        blocks[a, a] = b
    return constant_tensor(blocks, name=name)


def constant_offdiag_tensor(n=3, N=2, value=1.0):
    """Identity plus a constant ``a^{1,2}_{1,1}``; violates the staircase condition."""
    blocks = np.einsum("ab,ij->abij", np.eye(N), np.eye(n))
    blocks[0, 1, 0, 0] = value
    return constant_tensor(blocks, name="constant_offdiag")


def reflect_tensor(T):
    """Tensor evaluating ``T`` at ``(x, -y)``; an involution."""
    return CoefficientTensor(
        n=T.n,
        N=T.N,
        func=lambda x, y: T.func(x, -y),
        name=f"reflected({T.name})",
        anchors=tuple(tuple(-np.asarray(a)) for a in T.anchors),
    )


# -- worked example: n = 3, N = 2 with bump-supported coupling -----------------

EXAMPLE_DIAGONAL_11 = np.diag([2.0, 2.0, 1.0])
EXAMPLE_DIAGONAL_22 = np.diag([27.0, 1.0, 1.0])


@dataclass(frozen=True)
class ExampleTensorSpec:
    bump_radius: float = 0.25
    b_peak: float = 2.0
    w_peak: float = -10.0

    def __post_init__(self):
        # bumps around (k, k+1) must stay strictly on one side of the diagonal
        if not 0 < self.bump_radius < 1 / np.sqrt(2):
            raise ValueError("bump_radius must lie in (0, 1/sqrt(2))")

    def b(self, y):
        return self.b_peak * _hat(_dist_to_anchor_set(y, swap=False), self.bump_radius)

    def w(self, y):
        return self.w_peak * _hat(_dist_to_anchor_set(y, swap=True), self.bump_radius)

    def anchors_in_box(self, lower, upper):
        """Anchors of both coupling bumps inside the square ``[lower, upper]^2``."""
        pts = [(0.0, 0.0)]
        k = 2
        while k + 1 <= upper:
            pts += [(float(k), float(k + 1)), (float(k + 1), float(k))]
            k += 1
        return tuple(p for p in pts if min(p) >= lower and max(p) <= upper)


def _hat(dist, r):
    return np.maximum(0.0, 1.0 - dist / r)


def _dist_to_anchor_set(y, swap):
    """Distance from ``y`` to ``{(0,0)} U {(k, k+1): k >= 2}`` (or its mirror)."""
    y1, y2 = y[..., 0], y[..., 1]
    if swap:
        y1, y2 = y2, y1
    best = np.hypot(y1, y2)
    kc = np.rint((y1 + y2 - 1.0) / 2.0)
    for shift in (-1.0, 0.0, 1.0):
        k = np.maximum(kc + shift, 2.0)
        best = np.minimum(best, np.hypot(y1 - k, y2 - k - 1.0))
    return best


def build_example_tensor(spec=None):
    """The ``n=3, N=2`` example: constant diagonal blocks, ``a^{1,2}_{1,1} = b(y)``,
    ``a^{2,1}_{1,2} = w(y)`` and every other off-diagonal entry zero."""
    spec = spec or ExampleTensorSpec()
    base = np.zeros((2, 2, 3, 3))
    base[0, 0] = EXAMPLE_DIAGONAL_11
    base[1, 1] = EXAMPLE_DIAGONAL_22

    def func(x, y):
        out = np.empty(y.shape[:-1] + base.shape)
        out[...] = base
        out[..., 0, 1, 0, 0] = spec.b(y)
        out[..., 1, 0, 0, 1] = spec.w(y)
        return out

    anchors = spec.anchors_in_box(-np.inf, 100.0)
    return CoefficientTensor(n=3, N=2, func=func, name="example4", anchors=anchors)


# -- sample-based certification ----------------------------------------------

@dataclass(frozen=True)
class SampleSpec:
    """Tensor-product sample grid over an ``(x, y)`` box.

    ``y_points`` nodes per y-axis (the expensive direction), ``x_points`` per
    x-axis. ``extra_y`` and in-box tensor anchors are appended to the y-set.
    """
    x_box: tuple
    y_box: tuple
    x_points: int = 3
    y_points: int = 101
    extra_y: tuple = ()
    inject_anchors: bool = True

    def x_samples(self, n):
        lo, hi = self.x_box
        axes = [np.linspace(lo, hi, self.x_points) if self.x_points > 1 else np.array([(lo + hi) / 2])] * n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)

    def y_samples(self, T):
        lo, hi = self.y_box
        axes = [np.linspace(lo, hi, self.y_points)] * T.N
        ys = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, T.N)
        extra = [np.asarray(p, dtype=float) for p in self.extra_y]
        if self.inject_anchors:
            extra += [np.asarray(a, dtype=float) for a in T.anchors
                      if np.all(np.asarray(a) >= lo) and np.all(np.asarray(a) <= hi)]
        if extra:
            ys = np.vstack([ys, np.array(extra).reshape(-1, T.N)])
        return ys

    def describe(self):
        return {
            "x_box": list(map(float, self.x_box)),
            "y_box": list(map(float, self.y_box)),
            "x_points_per_axis": self.x_points,
            "y_points_per_axis": self.y_points,
            "extra_y": [list(map(float, p)) for p in self.extra_y],
            "inject_anchors": self.inject_anchors,
        }


def _iter_samples(T, spec, chunk=20000):
    xs = spec.x_samples(T.n)
    ys = spec.y_samples(T)
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("empty sample set")
    for x in xs:
        for start in range(0, len(ys), chunk):
            yb = ys[start:start + chunk]
            xb = np.broadcast_to(x, (len(yb), T.n))
            yield xb, yb, evaluate_tensor(T, xb, yb)


def check_boundedness(T, spec):
    """``(passed, c)`` with ``c`` the largest absolute entry over the samples."""
    c = 0.0
    for _, _, E in _iter_samples(T, spec):
        c = max(c, float(np.max(np.abs(E))))
    return bool(np.isfinite(c)), c


class EllipticityError(RuntimeError):
    def __init__(self, message, x=None, y=None):
        super().__init__(message)
        self.x = x
        self.y = y


def check_ellipticity(T, spec):
    """``(passed, nu)``: ``nu`` is the smallest eigenvalue of the symmetrised
    flattened matrix over all samples; passes iff ``nu > 0``."""
    nu = np.inf
    for xb, yb, E in _iter_samples(T, spec):
        M = flatten_entries(E)
        S = 0.5 * (M + np.swapaxes(M, -1, -2))
        try:
            lam = np.linalg.eigvalsh(S)[:, 0]
        except np.linalg.LinAlgError:
            for x1, y1, S1 in zip(xb, yb, S):
                try:
                    np.linalg.eigvalsh(S1)
                except np.linalg.LinAlgError:
                    raise EllipticityError("eigenvalue computation failed", x=x1, y=y1) from None
            raise
        nu = min(nu, float(lam.min()))
    return nu > 0, nu


DEFAULT_L_GRID = tuple(np.arange(1.0, 10.0 + 0.25, 0.5))


@dataclass
class StaircaseWitness:
    x: list
    y: list
    alpha: int
    beta: int
    L: float
    implication: str  # "A3'" (upper) or "A3''" (lower)

    def as_dict(self):
        return {"x": self.x, "y": self.y, "alpha": self.alpha, "beta": self.beta,
                "L": self.L, "implication": self.implication}


def check_staircase_support(T, spec, L_grid=DEFAULT_L_GRID):
    """Check both staircase implications for every off-diagonal pair.

    Returns ``(passed, L0, witnesses)``. A threshold ``L`` is testable only if
    some sample has ``|y^alpha| > L``; above that the implications hold
    vacuously on the finite sample set and certify nothing. ``L0`` is the
    smallest grid value such that every testable ``L >= L0`` passes (at least
    one of them testable). ``witnesses`` holds the first violation found at
    each failing threshold, 1-based ``alpha``/``beta``.
    """
    L_grid = np.asarray(L_grid, dtype=float)
    if len(L_grid) == 0 or np.any(np.diff(L_grid) <= 0) or L_grid[0] <= 0:
        raise ValueError("L_grid must be increasing positive values")
    failed = np.zeros(len(L_grid), dtype=bool)
    testable = np.zeros(len(L_grid), dtype=bool)
    witnesses = {}
    offdiag = [(a, b) for a, b in itertools.permutations(range(T.N), 2)]
    for xb, yb, E in _iter_samples(T, spec):
        ymax = np.max(np.abs(yb))
        testable |= L_grid < ymax
        if not offdiag:
            continue
        nz = np.any(E != 0, axis=(-2, -1))  # (B, N, N)
        for li, L in enumerate(L_grid):
            for a, b in offdiag:
                active = nz[:, a, b]
                upper = active & (yb[:, a] > L) & ~(yb[:, b] > L)
                lower = active & (yb[:, a] < -L) & ~(yb[:, b] < -L)
                for mask, label in ((upper, "A3'"), (lower, "A3''")):
                    if np.any(mask):
                        failed[li] = True
                        if li not in witnesses:
                            s = int(np.argmax(mask))
                            witnesses[li] = StaircaseWitness(
                                x=xb[s].tolist(), y=yb[s].tolist(), alpha=a + 1, beta=b + 1,
                                L=float(L), implication=label)
    L0 = None
    for li in range(len(L_grid) - 1, -1, -1):
        if failed[li]:
            break
        if testable[li:].any():
            L0 = float(L_grid[li])
    return L0 is not None, L0, [witnesses[k] for k in sorted(witnesses)]


@dataclass
class StructureReport:
    c: float
    nu: float
    L0: Optional[float]
    passed_A1: bool
    passed_A2: bool
    passed_A3: bool
    sample_spec: dict
    witnesses: list = field(default_factory=list)
    tensor: str = ""

    @property
    def passed(self):
        return self.passed_A1 and self.passed_A2 and self.passed_A3

    def as_dict(self):
        return {
            "tensor": self.tensor,
            "c": self.c,
            "nu": self.nu,
            "L0": self.L0,
            "passed_A1": self.passed_A1,
            "passed_A2": self.passed_A2,
            "passed_A3": self.passed_A3,
            "sample_spec": self.sample_spec,
            "witnesses": [w.as_dict() for w in self.witnesses],
        }


def check_structure(T, spec, L_grid=DEFAULT_L_GRID):
    ok1, c = check_boundedness(T, spec)
    ok2, nu = check_ellipticity(T, spec)
    ok3, L0, wit = check_staircase_support(T, spec, L_grid)
    desc = spec.describe()
    desc["L_grid"] = [float(v) for v in L_grid]
    return StructureReport(c=c, nu=nu, L0=L0, passed_A1=ok1, passed_A2=ok2, passed_A3=ok3,
                           sample_spec=desc, witnesses=wit, tensor=T.name)


def example_sample_spec(y_half_width=10.0, y_points=101, x_points=2):
    return SampleSpec(x_box=(0.0, 1.0), y_box=(-y_half_width, y_half_width),
                      x_points=x_points, y_points=y_points)
