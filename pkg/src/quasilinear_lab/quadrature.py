"""Positive-weight quadrature on the reference simplex.

Conical (collapsed-coordinate) product rules built from Gauss-Jacobi nodes.
With ``q`` nodes per direction the rule integrates polynomials of total
degree ``2q - 1`` exactly; all weights are strictly positive, which keeps
indicator-weighted integrals monotone.
"""
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


def _unit_interval_rule(q, alpha):
    # nodes/weights on [0, 1] for the weight (1 - t)**alpha
    x, w = roots_jacobi(q, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def simplex_rule(n, q=3):
    """Return ``(bary, weights)`` for the reference ``n``-simplex.

    ``bary`` has shape ``(Q, n + 1)`` (barycentric coordinates, column 0 is
    the weight of vertex 0) and ``weights`` has shape ``(Q,)`` and sums to 1,
    so an integral over a simplex of volume ``V`` is ``V * sum(w * f)``.
    """
    if n < 1:
        raise ValueError("simplex dimension must be >= 1")
    rules = [_unit_interval_rule(q, n - 1 - d) for d in range(n)]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    t = np.stack([g.ravel() for g in grids], axis=1)
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)

    # Duffy map: x_1 = t_1, x_2 = t_2 (1 - t_1), x_3 = t_3 (1 - t_1)(1 - t_2), ...
    coords = np.empty_like(t)
    scale = np.ones(len(t))
    for d in range(n):
        coords[:, d] = t[:, d] * scale
        scale = scale * (1.0 - t[:, d])
    bary = np.column_stack([1.0 - coords.sum(axis=1), coords])
    w = w / w.sum()
    bary.setflags(write=False)
    w.setflags(write=False)
    return bary, w
