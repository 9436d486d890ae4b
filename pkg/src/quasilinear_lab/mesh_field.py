"""Structured simplicial meshes, piecewise-linear vector fields and the
integrals built on them (superlevel measures, excess, Sobolev seminorms).

Every integral is a sum over simplices of a fixed positive-weight quadrature
rule (see :mod:`quasilinear_lab.quadrature`). Ball and superlevel indicators
are evaluated pointwise at quadrature points, so restricting to a smaller ball
or raising a level can only remove contributions.
"""
from dataclasses import dataclass
from functools import cached_property
from itertools import permutations
from math import factorial

import numpy as np
from scipy.special import gamma

from .quadrature import simplex_rule

QUAD_POINTS_PER_AXIS = 3  # exact to total degree 5


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    def contains(self, points):
        d = points - self.center
        return np.einsum("...i,...i->...", d, d) < self.radius**2

    def measure(self):
        n = len(self.center)
        return ball_volume(n, self.radius)


def ball_volume(n, radius):
    return np.pi ** (n / 2) / gamma(n / 2 + 1) * radius**n


class Mesh:
    """Uniform Kuhn triangulation of an axis-aligned box.

    Vertices are numbered in C order over the integer grid, so vertex
    ``(i_1, ..., i_n)`` has index ``ravel_multi_index((i_1, ..., i_n))``.
    Each grid cell is split into ``n!`` simplices, one per axis permutation.
    """

    def __init__(self, n, lower, upper, cells_per_axis):
        if n not in (2, 3):
            raise ValueError(f"mesh dimension must be 2 or 3, got {n}")
        lower = np.asarray(lower, dtype=float).reshape(n)
        upper = np.asarray(upper, dtype=float).reshape(n)
        if not np.all(upper > lower):
            raise ValueError(f"degenerate box {lower} -> {upper}")
        if int(cells_per_axis) < 1:
            raise ValueError("cells_per_axis must be >= 1")
        self.n = n
        self.lower = lower
        self.upper = upper
        self.cells_per_axis = m = int(cells_per_axis)

        axes = [np.linspace(lower[d], upper[d], m + 1) for d in range(n)]
        grid = np.meshgrid(*axes, indexing="ij")
        self.vertices = np.stack([g.ravel() for g in grid], axis=1)

        shape = (m + 1,) * n
        idx = np.stack(np.meshgrid(*[np.arange(m + 1)] * n, indexing="ij"), axis=-1).reshape(-1, n)
        self.boundary = np.any((idx == 0) | (idx == m), axis=1)

        corners = np.stack(np.meshgrid(*[np.arange(m)] * n, indexing="ij"), axis=-1).reshape(-1, n)
        simplices = []
        for perm in permutations(range(n)):
            walk = [corners.copy()]
            cur = corners.copy()
            for axis in perm:
                cur = cur.copy()
                cur[:, axis] += 1
                walk.append(cur)
            simplices.append(
                np.stack([np.ravel_multi_index(tuple(p.T), shape) for p in walk], axis=1)
            )
        # cell-major ordering: all simplices of a cell are adjacent
        self.simplices = np.stack(simplices, axis=1).reshape(-1, n + 1)
        for arr in (self.vertices, self.boundary, self.simplices):
            arr.setflags(write=False)

    def __repr__(self):
        return (f"Mesh(n={self.n}, box={self.lower.tolist()}..{self.upper.tolist()}, "
                f"cells_per_axis={self.cells_per_axis})")

    @property
    def box(self):
        return self.lower, self.upper

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_simplices(self):
        return len(self.simplices)

    @property
    def h(self):
        return float(np.max((self.upper - self.lower) / self.cells_per_axis))

    @cached_property
    def _geometry(self):
        P = self.vertices[self.simplices]  # (S, n+1, n)
        B = np.swapaxes(P[:, 1:, :] - P[:, :1, :], 1, 2)  # columns are edge vectors
        det = np.linalg.det(B)
        vol = np.abs(det) / factorial(self.n)
        grads = np.empty((len(P), self.n + 1, self.n))
        grads[:, 1:, :] = np.linalg.inv(B)  # row k = gradient of barycentric k+1
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        return vol, grads

    @property
    def volumes(self):
        return self._geometry[0]

    @property
    def basis_gradients(self):
        """``(S, n+1, n)`` gradients of the local hat functions."""
        return self._geometry[1]

    @property
    def quadrature(self):
        return simplex_rule(self.n, QUAD_POINTS_PER_AXIS)

    @cached_property
    def quadrature_points(self):
        """``(S, Q, n)`` physical quadrature points."""
        bary, _ = self.quadrature
        return np.einsum("qk,skd->sqd", bary, self.vertices[self.simplices])

    @cached_property
    def quadrature_weights(self):
        """``(S, Q)`` absolute weights (simplex volume folded in)."""
        _, w = self.quadrature
        return self.volumes[:, None] * w[None, :]

    def ball_mask(self, ball):
        if ball is None:
            return None
        return ball.contains(self.quadrature_points)

    def ball_inside(self, ball, tol=1e-12):
        c, r = ball.center, ball.radius
        return bool(np.all(c - r >= self.lower - tol) and np.all(c + r <= self.upper + tol))

    def vertex_grid_index(self, point):
        """Index of the grid vertex nearest to ``point``."""
        m = self.cells_per_axis
        ij = np.rint((np.asarray(point) - self.lower) / (self.upper - self.lower) * m).astype(int)
        ij = np.clip(ij, 0, m)
        return int(np.ravel_multi_index(tuple(ij), (m + 1,) * self.n))


def build_box_mesh(n, box, cells_per_axis):
    """Uniform simplicial mesh of ``box = (lower, upper)``."""
    lower, upper = box
    return Mesh(n, lower, upper, cells_per_axis)


class DiscreteField:
    """Continuous piecewise-linear field with ``N`` components per vertex."""

    def __init__(self, mesh, values):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.shape[0] != mesh.n_vertices:
            raise ValueError(f"expected {mesh.n_vertices} vertex values, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        self.mesh = mesh
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, mesh, func):
        """Interpolate ``func(points) -> (V,) or (V, N)`` at the vertices."""
        return cls(mesh, func(mesh.vertices))

    @property
    def N(self):
        return self.values.shape[1]

    def __neg__(self):
        return DiscreteField(self.mesh, -self.values)

    def with_values(self, values):
        return DiscreteField(self.mesh, values)

    @cached_property
    def at_quadrature(self):
        """``(S, Q, N)`` interpolant values at the quadrature points."""
        bary, _ = self.mesh.quadrature
        return np.einsum("qk,skc->sqc", bary, self.values[self.mesh.simplices])

    @cached_property
    def gradients(self):
        """``(S, N, n)`` constant gradient of each component on each simplex."""
        return np.einsum("skd,skc->scd", self.mesh.basis_gradients, self.values[self.mesh.simplices])

    def sup(self, component=None):
        v = self.values if component is None else self.values[:, component]
        return float(v.max())


def integrate(f, mesh, region=None):
    """Integrate over the mesh, or over ``region`` (a :class:`Ball`) by
    pointwise indicator quadrature.

    ``f`` may be a callable of the ``(S, Q, n)`` quadrature points, an
    ``(S, Q)`` array of quadrature-point values or an ``(S,)`` array of
    per-simplex constants.
    """
    vals = f(mesh.quadrature_points) if callable(f) else np.asarray(f, dtype=float)
    if vals.ndim == 0:
        vals = np.full(mesh.quadrature_weights.shape, float(vals))
    elif vals.ndim == 1:
        vals = np.broadcast_to(vals[:, None], mesh.quadrature_weights.shape)
    w = mesh.quadrature_weights
    mask = mesh.ball_mask(region)
    if mask is not None:
        w = np.where(mask, w, 0.0)
    # numpy reductions are pairwise and deterministic for a fixed array layout
    return float(np.sum((w * vals).sum(axis=1)))


def gradient_on_simplex(field, simplex_index, component):
    return field.gradients[simplex_index, component].copy()


def superlevel_measure(field, component, k, ball=None):
    """Measure of ``{u^component > k}`` (strict) intersected with ``ball``."""
    inside = field.at_quadrature[:, :, component] > k
    return integrate(inside.astype(float), field.mesh, ball)


def excess(field, k, ball=None, q=2.0):
    """``sum_alpha  integral over {u^alpha > k} of (u^alpha - k)^q``."""
    if q < 1:
        raise ValueError("excess exponent must be >= 1")
    over = np.clip(field.at_quadrature - k, 0.0, None)
    return integrate((over**q).sum(axis=2), field.mesh, ball)


def sobolev_seminorm(field, ball=None, p=2.0):
    """``(sum_alpha integral |D u^alpha|^p)^(1/p)`` over the ball or mesh."""
    if p < 1:
        raise ValueError("p must be >= 1")
    gnorm = np.linalg.norm(field.gradients, axis=2)  # (S, N)
    per_simplex = (gnorm**p).sum(axis=1)
    return integrate(per_simplex, field.mesh, ball) ** (1.0 / p)


def sobolev_conjugate(n, p):
    """Exponent ``p*``: ``np/(n-p)`` below the dimension, ``2p`` otherwise."""
    if p < n:
        return n * p / (n - p)
    return 2.0 * p
