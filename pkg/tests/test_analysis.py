import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilinear_lab.analysis import (
    CaccioppoliCheckSpec,
    Condition19Input,
    ExcessTrace,
    GeometryError,
    RadialField,
    UnboundedAtResolution,
    VIOLATION_THRESHOLD,
    admissible_radius,
    boundedness_level,
    caccioppoli_sides,
    condition19_counterexample,
    condition19_delta_scan,
    condition19_example_data,
    condition19_example_ratio,
    condition19_lhs,
    condition19_rhs,
    condition19_scan,
    excess_trace,
    fit_decay,
    radial_diagnostics,
    radial_eval,
    radial_field_on_mesh,
    radial_jacobian,
    two_sided_bound,
)
from quasilinear_lab.coefficients import build_example_tensor, identity_tensor
from quasilinear_lab.mesh_field import Ball, DiscreteField, build_box_mesh, integrate

T4 = build_example_tensor()
SQUARE = ((-1.0, -1.0), (1.0, 1.0))
CUBE = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))


def const_field(mesh, value, N=2):
    return DiscreteField(mesh, np.full((mesh.n_vertices, N), float(value)))


def brute_lhs(E, y, p):
    # literal transcription of the quadruple sum
    N, n = p.shape
    total = 0.0
    for a in range(N):
        for g in range(N):
            inner = 0.0
            for i in range(n):
                for b in range(N):
                    for j in range(n):
                        inner += p[g, i] * E[a, b, i, j] * p[b, j]
            total += y[a] * y[g] / (y @ y) * inner
    return total


# -- admissible radius --------------------------------------------------------

def test_admissible_radius_zero_fields():
    m2 = build_box_mesh(2, SQUARE, 8)
    R2 = admissible_radius(const_field(m2, 0.0), (0.0, 0.0), 4.0)
    assert R2 == pytest.approx(1 / math.sqrt(math.pi), abs=1e-12) and math.pi * R2**2 < 1
    m3 = build_box_mesh(3, CUBE, 4)
    R3 = admissible_radius(const_field(m3, 0.0), (0.0, 0.0, 0.0), 6.0)
    assert R3 == pytest.approx((3 / (4 * math.pi)) ** (1 / 3), abs=1e-12)
    assert round(R3, 2) == 0.62


def test_admissible_radius_shrinks_for_large_fields():
    m = build_box_mesh(2, SQUARE, 16)
    big = admissible_radius(const_field(m, 1.5), (0, 0), 4.0)
    assert big < admissible_radius(const_field(m, 0.0), (0, 0), 4.0)
    # 2 components * 1.5^4 * pi R^2 = 1 up to indicator quadrature
    assert big == pytest.approx((2 * 1.5**4 * math.pi) ** -0.5, rel=0.1)


def test_admissible_radius_capped_by_box():
    m = build_box_mesh(2, ((0, 0), (1, 1)), 8)
    R = admissible_radius(const_field(m, 0.0), (0.5, 0.5), 4.0)
    assert R < 0.5 and R == pytest.approx(0.5, abs=1e-10)


def test_admissible_radius_errors():
    m = build_box_mesh(2, SQUARE, 8)
    with pytest.raises(GeometryError):
        admissible_radius(const_field(m, 0.0), (2.0, 0.0), 4.0)
    with pytest.raises(GeometryError):
        admissible_radius(const_field(m, 1e6), (0.0, 0.0), 4.0)


# -- Caccioppoli --------------------------------------------------------------

def test_cutoff_profile():
    spec = CaccioppoliCheckSpec((0.0, 0.0), 0.2, 0.6, 1.0)
    pts = np.array([[0.1, 0.0], [0.4, 0.0], [0.7, 0.0]])
    np.testing.assert_allclose(spec.cutoff(pts), [1.0, 0.5, 0.0])
    with pytest.raises(ValueError):
        CaccioppoliCheckSpec((0.0, 0.0), 0.5, 0.5, 1.0)


def test_caccioppoli_empty_superlevel():
    m = build_box_mesh(2, SQUARE, 6)
    sides = caccioppoli_sides(identity_tensor(2, 2), const_field(m, 0.5), CaccioppoliCheckSpec((0, 0), 0.2, 0.5, 1.0),
                              (1.0, 2, 2, 1.0))
    assert (sides.lhs, sides.rhs, sides.ratio) == (0.0, 0.0, 0.0)


def test_caccioppoli_affine_field():
    m = build_box_mesh(2, SQUARE, 16)
    L = 1.0
    f = DiscreteField.from_function(m, lambda x: L + x[:, :1])
    spec = CaccioppoliCheckSpec((0.0, 0.0), 0.3, 0.6, L)
    sides = caccioppoli_sides(identity_tensor(2, 1), f, spec, (1.0, 2, 1, 1.0))
    assert sides.constant == 16 * 2**4
    # {x1 > 0} is half of each ball
    assert sides.lhs == pytest.approx(0.5 * math.pi * 0.3**2, rel=0.05)
    exact_rhs = sides.constant / 0.3**2 * (0.6**4 * math.pi / 8)
    assert sides.rhs == pytest.approx(exact_rhs, rel=0.05)
    assert 0 < sides.ratio <= 1


def test_caccioppoli_geometry_and_dimension_errors():
    m = build_box_mesh(2, SQUARE, 6)
    f = const_field(m, 0.0)
    with pytest.raises(GeometryError):
        caccioppoli_sides(None, f, CaccioppoliCheckSpec((0.8, 0.0), 0.1, 0.5, 1.0), (1, 2, 2, 1))
    with pytest.raises(ValueError):
        caccioppoli_sides(identity_tensor(3, 2), f, CaccioppoliCheckSpec((0, 0), 0.1, 0.5, 1.0), (1, 2, 2, 1))


def test_caccioppoli_infinite_ratio_convention():
    # gradient above L inside B_s but no mass above L: impossible for
    # continuous fields, so fake it with a degenerate level
    m = build_box_mesh(2, SQUARE, 6)
    f = DiscreteField.from_function(m, lambda x: np.stack([x[:, 0], x[:, 1]], 1))
    sides = caccioppoli_sides(identity_tensor(2, 2), f, CaccioppoliCheckSpec((0, 0), 0.2, 0.5, -10.0), (0.0, 2, 2, 1.0))
    assert sides.rhs == 0.0 and sides.ratio == math.inf


# -- excess traces ------------------------------------------------------------

def test_excess_trace_zero_field():
    m = build_box_mesh(3, CUBE, 4)
    tr = excess_trace(const_field(m, 0.0), (0, 0, 0), 0.6, 1.0, 5)
    assert tr.J == [0.0] * 6 and tr.p_star == 6.0
    assert fit_decay(tr) == (None, False)


def test_excess_trace_constant_field_closed_form():
    m = build_box_mesh(3, CUBE, 12)
    d = 2.0
    tr = excess_trace(const_field(m, d), (0, 0, 0), 0.6, d, 6)
    assert tr.is_nonincreasing()
    for h, rho, J in zip(tr.h, tr.rho, tr.J):
        over = (d / 2 ** (h + 1)) ** 6
        discrete = 2 * integrate(1.0, m, Ball((0, 0, 0), rho)) * over
        assert J == pytest.approx(discrete, rel=1e-12)
        assert J == pytest.approx(2 * (4 / 3) * math.pi * rho**3 * over, rel=0.03)


def test_excess_trace_rows_and_errors():
    m = build_box_mesh(2, SQUARE, 6)
    tr = excess_trace(const_field(m, 1.0), (0, 0), 0.5, 1.0, 3)
    assert [r[0] for r in tr.rows()] == [0, 1, 2, 3]
    assert tr.rows()[1][1] == 0.75
    with pytest.raises(ValueError):
        excess_trace(const_field(m, 1.0), (0, 0), 0.5, 1.0, 1)
    with pytest.raises(GeometryError):
        excess_trace(const_field(m, 1.0), (0.9, 0), 0.5, 1.0, 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), d=st.floats(1.0, 4.0), R=st.floats(0.2, 0.99))
def test_excess_trace_nonincreasing_random(seed, d, R):
    m = build_box_mesh(2, SQUARE, 8)
    f = DiscreteField(m, np.random.default_rng(seed).normal(scale=2.0, size=(m.n_vertices, 2)))
    tr = excess_trace(f, (0.0, 0.0), R, d, 8)
    assert tr.is_nonincreasing() and min(tr.J) >= 0


def test_fit_decay_synthetic_oracle():
    J = [2.0 ** -(h + 1) for h in range(6)]
    tr = ExcessTrace(d=1, R=0.5, H=5, p=2.0, p_star=4.0, theta=1.0, h=list(range(6)), J=J)
    ref = max(J[h + 1] / ((2.0 ** (4.0**2 / 2.0)) ** h * J[h] ** 2) for h in range(5))
    C, ok = fit_decay(tr)
    assert ok and C == pytest.approx(ref, rel=1e-12) and C == pytest.approx(1.0, rel=1e-12)


def test_fit_decay_needs_three_positive_entries():
    tr = ExcessTrace(d=1, R=0.5, H=3, p=2.0, p_star=4.0, theta=1.0, J=[0.1, 0.01, 0.0, 0.0])
    assert fit_decay(tr) == (None, False)


# -- boundedness --------------------------------------------------------------

def test_boundedness_constant_fields():
    m = build_box_mesh(2, SQUARE, 6)
    assert boundedness_level(const_field(m, 0.0), (0, 0), 0.5) == 1.0
    assert boundedness_level(const_field(m, 3.5), (0, 0), 0.5) == 4.0
    assert boundedness_level(const_field(m, 0.0), (0, 0), 0.5, L0=1.5) == 4.0
    assert two_sided_bound(const_field(m, -3.5), (0, 0), 0.5) == (1.0, 4.0)


def test_boundedness_exhaustion():
    m = build_box_mesh(2, SQUARE, 6)
    with pytest.raises(UnboundedAtResolution) as exc:
        boundedness_level(const_field(m, 100.0), (0, 0), 0.5, d_max=16.0)
    assert exc.value.d_max == 16.0


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_higher_levels_also_certify(seed):
    m = build_box_mesh(2, SQUARE, 6)
    f = DiscreteField(m, np.random.default_rng(seed).uniform(-5, 5, size=(m.n_vertices, 2)))
    d = boundedness_level(f, (0, 0), 0.8)
    for extra in (1.0, 1.7, 4.0):
        assert excess_trace(f, (0, 0), 0.8, d + extra, 20).J[-1] <= 1e-12


def test_radial_level_grows_as_cutoff_shrinks():
    f = RadialField(1.2, 2)
    m = build_box_mesh(2, ((-0.3, -0.3), (0.3, 0.3)), 60)
    levels = [boundedness_level(radial_field_on_mesh(f, m, c), (0, 0), 0.3 * (1 - 1e-12)) for c in (0.1, 0.01)]
    assert levels == [2.0, 4.0]


# -- condition (1.9) -------------------------------------------------------------

def test_condition19_lhs_examples():
    y, p = condition19_example_data(2)
    assert condition19_lhs(T4, np.zeros(3), y, p) == pytest.approx(-24 / 13, rel=1e-14)
    assert condition19_lhs(T4, np.zeros(3), y, np.zeros((2, 3))) == 0.0
    with pytest.raises(ValueError):
        condition19_lhs(T4, np.zeros(3), np.zeros(2), p)


@settings(max_examples=60, deadline=None)
@given(y=st.tuples(st.floats(-5, 5), st.floats(-5, 5)), seed=st.integers(0, 1000))
def test_condition19_lhs_matches_brute_force(y, seed):
    y = np.array(y)
    if np.linalg.norm(y) < 1e-3:
        y = y + 1.0
    p = np.random.default_rng(seed).normal(size=(2, 3))
    for T in (T4, identity_tensor(3, 2)):
        E = T(np.zeros(3), y)
        assert condition19_lhs(T, np.zeros(3), y, p) == pytest.approx(brute_lhs(E, y, p), rel=1e-12, abs=1e-12)
    ident = condition19_lhs(identity_tensor(3, 2), np.zeros(3), y, p)
    assert ident == pytest.approx(np.sum((y @ p / np.linalg.norm(y)) ** 2), rel=1e-12) and ident >= 0


def test_condition19_rhs_examples():
    p0 = np.zeros((2, 3))
    assert condition19_rhs(Condition19Input((1.0, 2.0), p0, 0.5, 1.0)) == 0.0
    p = np.zeros((2, 3))
    p[0, 0] = p[1, 1] = 1.0
    y = (1.0, 2.0)
    assert condition19_rhs(Condition19Input(y, p, 0.5, 1.0, d_x=1.0)) == pytest.approx(-11.0)
    vals = [condition19_rhs(Condition19Input(y, p, 10.0**-m, 1.0, d_x=1.0)) for m in range(1, 7)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_condition19_input_validation():
    p = np.zeros((2, 3))
    for kwargs in ({"delta": 1.0, "lambda_19": 1.0}, {"delta": 0.5, "lambda_19": -1.0},
                   {"delta": 0.5, "lambda_19": 1.0, "d_x": -1.0},
                   {"delta": 0.5, "lambda_19": 1.0, "L": 5.0}):
        with pytest.raises(ValueError):
            Condition19Input((1.0, 2.0), p, **kwargs)


def test_condition19_ratio_examples():
    assert condition19_example_ratio(2) == pytest.approx(-24 / 13, rel=1e-15)
    assert condition19_example_ratio(4) == pytest.approx(-100 / 41, rel=1e-15)
    assert abs(condition19_example_ratio(10**6) + 3) < 1e-5
    with pytest.raises(ValueError):
        condition19_example_ratio(1)
    with pytest.raises(ValueError):
        condition19_example_ratio(2.5)
    rows = condition19_scan(range(2, 8))
    assert [r[3] for r in rows] == [False, False, True, True, True, True]
    assert rows[0][2] == VIOLATION_THRESHOLD == -2.4


def test_condition19_counterexample_violates_for_every_delta():
    rows = condition19_delta_scan(T4, 4, lambda_19=1.0, d_x=1.0, g_x=2.0)
    assert len(rows) == 20 and all(bad for *_, bad in rows)
    lhs, rhs = condition19_counterexample(T4, 4, 0.999, 0.5, 0.0, 0.0)
    assert lhs < rhs


# -- radial fields -------------------------------------------------------------

def test_radial_eval_examples():
    assert np.linalg.norm(radial_eval(RadialField(2.0, 3), [0.5, 0, 0])) == pytest.approx(2.0)
    x = np.array([0.3, -0.4, 1.2])
    np.testing.assert_allclose(radial_eval(RadialField(1.0, 3), x), x / np.linalg.norm(x))
    assert np.linalg.norm(radial_eval(RadialField(1.2, 3), [1e-3, 0, 0])) == pytest.approx(10**0.6, rel=1e-12)
    with pytest.raises(ValueError):
        radial_eval(RadialField(1.2, 3), np.zeros(3))
    with pytest.raises(ValueError):
        RadialField(0.9)


def test_radial_jacobian_matches_finite_differences():
    f = RadialField(1.3, 3)
    x = np.array([0.2, -0.5, 0.4])
    eps = 1e-6
    fd = np.column_stack([(radial_eval(f, x + eps * e) - radial_eval(f, x - eps * e)) / (2 * eps) for e in np.eye(3)])
    np.testing.assert_allclose(radial_jacobian(f, x), fd, rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("n,gamma", [(3, 1.2), (3, 1.4), (2, 1.1)])
def test_radial_seminorm_closed_form(n, gamma):
    # |Du|^2 = rho^(-2 gamma) ((n-1) + (1-gamma)^2)
    area = 2 * math.pi ** (n / 2) / math.gamma(n / 2)
    for r in (1e-2, 1e-4):
        _, semi = radial_diagnostics(RadialField(gamma, n), r, 1.0)
        e = n - 2 * gamma
        exact = area * ((n - 1) + (1 - gamma) ** 2) * (1 - r**e) / e
        assert semi**2 == pytest.approx(exact, rel=1e-10)


def test_radial_sup_examples():
    sup, _ = radial_diagnostics(RadialField(1.2, 3), 1e-4)
    assert sup == pytest.approx(10**0.8, rel=1e-12)
    assert radial_diagnostics(RadialField(1.0, 3), 0.1)[0] == 1.0
    with pytest.raises(ValueError):
        radial_diagnostics(RadialField(1.2, 3), 1.0, 1.0)


def test_radial_field_on_mesh_cutoff():
    f = RadialField(1.2, 2)
    m = build_box_mesh(2, SQUARE, 8)
    u = radial_field_on_mesh(f, m, 0.1)
    r = np.linalg.norm(m.vertices, axis=1)
    far = r >= 0.1
    np.testing.assert_allclose(u.values[far], radial_eval(f, m.vertices[far]))
    assert np.all(np.isfinite(u.values))
    with pytest.raises(ValueError):
        radial_field_on_mesh(RadialField(1.2, 3), m, 0.1)
