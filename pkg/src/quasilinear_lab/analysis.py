"""Checks of the level-set estimates on discrete fields, the structure
condition with a ``y/|y|`` weighting and its failure on the worked example,
and the radial fields ``x / |x|^gamma``.
"""
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import evaluate_tensor
from .degiorgi import LevelSchedule, RadiusSchedule, caccioppoli_constant, level_at, radii_at
from .mesh_field import Ball, DiscreteField, ball_volume, excess, integrate, sobolev_conjugate


class GeometryError(ValueError):
    pass


class UnboundedAtResolution(RuntimeError):
    def __init__(self, message, d_max):
        super().__init__(message)
        self.d_max = d_max


def _require_inside(mesh, ball):
    if not mesh.ball_inside(ball):
        raise GeometryError(f"ball (center {ball.center.tolist()}, radius {ball.radius}) "
                            f"leaves the mesh box")


# -- admissible radius ---------------------------------------------------------

def admissible_radius(field, x0, p_star, iters=60):
    """Largest radius ``R0 < 1`` (bisection) with ``|B_R0| < 1``,
    ``sum_alpha int_{B_R0} |u^alpha|^p* < 1`` and the ball inside the mesh box."""
    mesh = field.mesh
    x0 = np.asarray(x0, dtype=float)
    hi = min(float(np.min(np.minimum(x0 - mesh.lower, mesh.upper - x0))), 1.0)
    if hi <= 0:
        raise GeometryError("center lies outside the mesh box")
    powered = (np.abs(field.at_quadrature) ** p_star).sum(axis=2)

    def ok(R):
        if ball_volume(mesh.n, R) >= 1.0:
            return False
        return integrate(powered, mesh, Ball(x0, R)) < 1.0

    lo = 0.0
    if ok(hi) and hi < 1.0:
        # the closed ball must stay inside the box
        lo = hi * (1.0 - 1e-12)
    else:
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    if lo < mesh.h:
        raise GeometryError(f"no admissible radius above mesh resolution h={mesh.h:g}")
    return lo


# -- Caccioppoli inequality on superlevel sets ---------------------------------

@dataclass(frozen=True)
class CaccioppoliCheckSpec:
    center: tuple
    s: float
    t: float
    L: float

    def __post_init__(self):
        if not 0 < self.s < self.t:
            raise ValueError("need 0 < s < t")

    def cutoff(self, x):
        """Piecewise-linear radial cutoff: 1 on ``B_s``, 0 outside ``B_t``,
        slope ``1/(t-s)``."""
        r = np.linalg.norm(np.asarray(x) - np.asarray(self.center), axis=-1)
        return np.clip((self.t - r) / (self.t - self.s), 0.0, 1.0)


@dataclass
class CaccioppoliSides:
    lhs: float
    rhs: float
    ratio: float
    constant: float

    def as_dict(self):
        return {"lhs": self.lhs, "rhs": self.rhs, "ratio": self.ratio, "constant": self.constant}


def caccioppoli_sides(T, field, spec, constants):
    """Both sides of the superlevel Caccioppoli inequality.

    ``constants = (c, n, N, nu)``. ``ratio`` is ``inf`` when only the left
    side is positive and 0 when both vanish.
    """
    mesh = field.mesh
    if T is not None and (T.n != mesh.n or T.N != field.N):
        raise ValueError("tensor and field dimensions disagree")
    outer = Ball(spec.center, spec.t)
    _require_inside(mesh, outer)
    inner = Ball(spec.center, spec.s)
    c, n, N, nu = constants
    C = caccioppoli_constant(c, n, N, nu)

    u = field.at_quadrature  # (S, Q, N)
    grad2 = (field.gradients**2).sum(axis=2)  # (S, N)
    above = u > spec.L
    lhs = integrate((above * grad2[:, None, :]).sum(axis=2), mesh, inner)
    over = np.clip(u - spec.L, 0.0, None) / (spec.t - spec.s)
    rhs = C * integrate((over**2).sum(axis=2), mesh, outer)
    if rhs > 0:
        ratio = lhs / rhs
    else:
        ratio = math.inf if lhs > 0 else 0.0
    return CaccioppoliSides(lhs, rhs, ratio, C)


# -- excess trace and decay ---------------------------------------------------

@dataclass
class ExcessTrace:
    d: float
    R: float
    H: int
    p: float
    p_star: float
    theta: float
    h: list = field(default_factory=list)
    k: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    J: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.h, self.k, self.rho, self.J))

    def is_nonincreasing(self):
        return all(b <= a for a, b in zip(self.J, self.J[1:]))


def excess_trace(field, x0, R, d, H, p=2.0, p_star=None, theta=1.0):
    """``J_h = excess(field, k_h, B(x0, rho_h), p*)`` for ``h = 0..H``.

    ``R`` should not exceed :func:`admissible_radius`; only the geometry
    (``B(x0, R)`` inside the box) is enforced here.
    """
    if H < 2:
        raise ValueError("H must be >= 2")
    mesh = field.mesh
    if p_star is None:
        p_star = sobolev_conjugate(mesh.n, p)
    levels = LevelSchedule(d)
    radii = RadiusSchedule(R)
    _require_inside(mesh, Ball(x0, R))
    trace = ExcessTrace(d=d, R=R, H=H, p=p, p_star=p_star, theta=theta)
    for h in range(H + 1):
        k_h = level_at(levels, h)
        rho_h, _ = radii_at(radii, h)
        trace.h.append(h)
        trace.k.append(k_h)
        trace.rho.append(rho_h)
        trace.J.append(excess(field, k_h, Ball(x0, rho_h), p_star))
    return trace


def fit_decay(trace):
    """Smallest constant ``C`` with ``J_{h+1} <= C (2^(p*^2/p))^h J_h^(theta p*/p)``
    over the recorded steps.

    Returns ``(C, ok)``; ``(None, False)`` when fewer than three leading
    entries are positive.
    """
    J = np.asarray(trace.J, dtype=float)
    positive = 0
    while positive < len(J) and J[positive] > 0:
        positive += 1
    if positive < 3:
        return None, False
    base = trace.p_star**2 / trace.p * math.log(2.0)
    power = trace.theta * trace.p_star / trace.p
    logs = []
    for h in range(len(J) - 1):
        if J[h] <= 0:
            break
        if J[h + 1] <= 0:
            logs.append(-math.inf)
            continue
        logs.append(math.log(J[h + 1]) - h * base - power * math.log(J[h]))
    C = math.exp(max(logs))
    return C, math.isfinite(C)


def boundedness_level(field, x0, R, tol=1e-12, H=20, p=2.0, p_star=None, L0=None, d_max=2.0**40):
    """Smallest ``d`` in ``1, 2, 4, ...`` whose excess trace reaches ``J_H <= tol``.

    With ``L0`` given, candidates below ``2 L0`` are skipped. Raises
    :class:`UnboundedAtResolution` past ``d_max``.
    """
    d = 1.0
    if L0 is not None:
        while d < 2.0 * L0:
            d *= 2.0
    while d <= d_max:
        trace = excess_trace(field, x0, R, d, H, p=p, p_star=p_star)
        if trace.J[-1] <= tol:
            return d
        d *= 2.0
    raise UnboundedAtResolution(f"no level up to {d_max:g} certifies the field", d_max)


def two_sided_bound(field, x0, R, **kwargs):
    """``(upper, lower)`` certified levels: ``u^alpha <= upper`` and
    ``-u^alpha <= lower`` on ``B(x0, R/2)``. The lower bound runs the same search
    on ``-u``, which solves the system with reflected coefficients."""
    return (boundedness_level(field, x0, R, **kwargs),
            boundedness_level(-field, x0, R, **kwargs))


# -- structure condition with y/|y| weighting -----------------------------------

@dataclass(frozen=True)
class Condition19Input:
    y: tuple
    p: np.ndarray
    delta: float
    lambda_19: float
    d_x: float = 0.0
    g_x: float = 0.0
    L: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.lambda_19 < 0 or self.d_x < 0 or self.g_x < 0:
            raise ValueError("lambda, d(x), g(x) must be nonnegative")
        if self.L is not None and not np.linalg.norm(self.y) > self.L:
            raise ValueError("condition only applies for |y| > L")


def condition19_lhs(T, x, y, p):
    """``sum_{alpha,gamma} y^alpha y^gamma / |y|^2 * sum_i p^gamma_i sum_{beta,j} a^{alpha,beta}_{i,j} p^beta_j``."""
    y = np.asarray(y, dtype=float)
    norm2 = float(y @ y)
    if norm2 == 0:
        raise ValueError("y must be nonzero")
    E = evaluate_tensor(T, np.asarray(x, dtype=float), y)
    p = np.asarray(p, dtype=float)
    inner = np.einsum("gi,abij,bj->ag", p, E, p)
    return float(np.einsum("a,g,ag->", y, y, inner) / norm2)


def condition19_rhs(inp):
    """``-(delta |p|^2 + delta^-lambda (d(x)|y|^2 + g(x)))``."""
    y = np.asarray(inp.y, dtype=float)
    p = np.asarray(inp.p, dtype=float)
    return -(inp.delta * float(np.sum(p * p))
             + (1.0 / inp.delta) ** inp.lambda_19 * (inp.d_x * float(y @ y) + inp.g_x))


def condition19_example_ratio(k):
    """Coefficient of ``|t|^2`` in the left side for the worked example at
    ``y = (k+1, k)``, ``p^1_1 = p^1_2 = t``."""
    if int(k) != k or k < 2:
        raise ValueError("k must be an integer >= 2")
    k = float(k)
    return (-6.0 * k * k - 2.0 * k + 4.0) / (2.0 * k * k + 2.0 * k + 1.0)


VIOLATION_THRESHOLD = -12.0 / 5.0


def condition19_example_data(k, t=1.0, n=3):
    """``(y, p)`` test data for the worked example."""
    y = np.array([k + 1.0, float(k)])
    p = np.zeros((2, n))
    p[0, 0] = p[0, 1] = t
    return y, p


def condition19_counterexample(T, k, delta, lambda_19, d_x=0.0, g_x=0.0):
    """Evaluate both sides at the worked-example data with
    ``|t|^2 = 5 / (2 delta^(1+lambda)) ((d+1)|y|^2 + g)``.

    Returns ``(lhs, rhs)``; ``lhs < rhs`` exhibits the failure.
    """
    y, _ = condition19_example_data(k)
    t2 = 5.0 / (2.0 * delta ** (1.0 + lambda_19)) * ((d_x + 1.0) * float(y @ y) + g_x)
    _, p = condition19_example_data(k, t=math.sqrt(t2), n=T.n)
    x = np.zeros(T.n)
    lhs = condition19_lhs(T, x, y, p)
    rhs = condition19_rhs(Condition19Input(y=tuple(y), p=p, delta=delta, lambda_19=lambda_19,
                                           d_x=d_x, g_x=g_x))
    return lhs, rhs


DEFAULT_DELTAS = tuple(2.0**-m for m in range(1, 21))


def condition19_delta_scan(T, k, lambda_19, d_x=0.0, g_x=0.0, deltas=DEFAULT_DELTAS):
    """Rows ``(delta, lhs, rhs, violated)`` of :func:`condition19_counterexample`
    over a geometric range of ``delta``."""
    rows = []
    for delta in deltas:
        lhs, rhs = condition19_counterexample(T, k, delta, lambda_19, d_x, g_x)
        rows.append((delta, lhs, rhs, lhs < rhs))
    return rows


def condition19_scan(k_values):
    """Rows ``(k, ratio, threshold, below)`` for the closed-form ratio."""
    return [(int(k), condition19_example_ratio(k), VIOLATION_THRESHOLD,
             condition19_example_ratio(k) < VIOLATION_THRESHOLD) for k in k_values]


# -- radial fields x / |x|^gamma ------------------------------------------------

@dataclass(frozen=True)
class RadialField:
    gamma: float
    n: int = 3

    def __post_init__(self):
        if not self.gamma >= 1:
            raise ValueError("radial exponent must be >= 1")


def radial_eval(f, x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(r == 0):
        raise ValueError("radial field is singular at the origin")
    return x / r**f.gamma


def radial_jacobian(f, x):
    """``Du = |x|^-gamma (I - gamma x x^T / |x|^2)``."""
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    eye = np.eye(x.shape[-1])
    xx = np.einsum("...i,...j->...ij", x, x)
    return r[..., None, None] ** -f.gamma * (eye - f.gamma * xx / (r**2)[..., None, None])


def _sphere_area(n):
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def radial_diagnostics(f, r, R=1.0, nodes=256):
    """``(sup |u| on the annulus r <= |x| <= R, W^{1,2} seminorm on it)``.

    The seminorm integrates ``|Du|^2`` along a ray with Gauss-Legendre nodes in
    ``log rho``, times the sphere area (``|Du|`` is rotation invariant).
    """
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    e = np.zeros(f.n)
    e[0] = 1.0
    sup = float(np.linalg.norm(radial_eval(f, r * e)))
    s, w = np.polynomial.legendre.leggauss(nodes)
    a, b = math.log(r), math.log(R)
    logs = 0.5 * (b - a) * s + 0.5 * (a + b)
    rho = np.exp(logs)
    J = radial_jacobian(f, rho[:, None] * e)
    integrand = (J**2).sum(axis=(1, 2)) * rho ** (f.n - 1) * rho  # d rho = rho d(log rho)
    energy = _sphere_area(f.n) * 0.5 * (b - a) * float(w @ integrand)
    return sup, math.sqrt(energy)


def radial_field_on_mesh(f, mesh, cutoff):
    """Interpolate ``x / max(|x|, cutoff)^gamma``: the radial field on the
    annulus ``|x| >= cutoff``, continued linearly inside."""
    if mesh.n != f.n:
        raise ValueError("mesh and radial field dimensions differ")
    x = mesh.vertices
    r = np.maximum(np.linalg.norm(x, axis=1, keepdims=True), cutoff)
    return DiscreteField(mesh, x / r**f.gamma)
