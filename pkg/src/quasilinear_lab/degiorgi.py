"""Level and radius schedules, the superlevel Caccioppoli constant and the
superlinear recursion ``J_{h+1} <= A lambda^h J_h^(1+gamma)``."""
import math
from dataclasses import dataclass, field

import numpy as np

OVERFLOW = 1e300


@dataclass(frozen=True)
class LevelSchedule:
    d: float

    def __post_init__(self):
        if not self.d >= 1:
            raise ValueError(f"target level d must be >= 1, got {self.d}")


@dataclass(frozen=True)
class RadiusSchedule:
    R: float

    def __post_init__(self):
        if not 0 < self.R < 1:
            raise ValueError(f"base radius must lie in (0, 1), got {self.R}")


@dataclass(frozen=True)
class RecursionParams:
    A: float
    lam: float
    gamma: float

    def __post_init__(self):
        if not (self.A > 0 and self.lam > 1 and self.gamma > 0):
            raise ValueError(f"need A > 0, lambda > 1, gamma > 0; got {self}")


def level_at(s, h):
    """``k_h = d (1 - 2^-(h+1))``."""
    if h < 0:
        raise ValueError("h must be >= 0")
    return s.d * (1.0 - 0.5 ** (h + 1))


def radii_at(s, h):
    """``(rho_h, rho_bar_h)``: ``rho_h = R/2 (1 + 2^-h)``, ``rho_bar_h`` the midpoint
    of ``rho_h`` and ``rho_{h+1}``."""
    if h < 0:
        raise ValueError("h must be >= 0")
    rho = 0.5 * s.R * (1.0 + 0.5**h)
    rho_bar = 0.5 * s.R * (1.0 + 0.75 * 0.5**h)
    return rho, rho_bar


def caccioppoli_constant(c, n, N, nu):
    """``16 c^2 n^4 N^4 / nu^2``."""
    if nu <= 0:
        raise ValueError("ellipticity constant must be positive")
    if c < 0:
        raise ValueError("bound c must be nonnegative")
    return 16.0 * c**2 * n**4 * N**4 / nu**2


def recursion_threshold(p):
    """``A^(-1/gamma) lambda^(-1/gamma^2)``."""
    return p.A ** (-1.0 / p.gamma) * p.lam ** (-1.0 / p.gamma**2)


@dataclass
class RecursionTrace:
    params: RecursionParams
    values: list = field(default_factory=list)
    diverged: bool = False
    overflow_index: int = None

    @property
    def threshold(self):
        return recursion_threshold(self.params)


def simulate_recursion(p, J0, steps):
    """Iterate the equality ``J_{h+1} = A lambda^h J_h^(1+gamma)``.

    Stops at the first value above ``1e300`` (or an IEEE overflow) and flags
    divergence with that index.
    """
    if J0 < 0:
        raise ValueError("J0 must be nonnegative")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    trace = RecursionTrace(p, [float(J0)])
    J = float(J0)
    log_A, log_lam = math.log(p.A), math.log(p.lam)
    for h in range(steps):
        if J == 0.0:
            nxt = 0.0
        else:
            log_next = log_A + h * log_lam + (1.0 + p.gamma) * math.log(J)
            nxt = math.inf if log_next > math.log(OVERFLOW) else p.A * p.lam**h * J ** (1.0 + p.gamma)
        if not np.isfinite(nxt) or nxt > OVERFLOW:
            trace.diverged = True
            trace.overflow_index = h + 1
            break
        trace.values.append(nxt)
        J = nxt
    return trace
