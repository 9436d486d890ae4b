import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilinear_lab.coefficients import (
    CoefficientTensor,
    EllipticityError,
    ExampleTensorSpec,
    SampleSpec,
    TensorEvaluationError,
    build_example_tensor,
    check_boundedness,
    check_ellipticity,
    check_staircase_support,
    check_structure,
    constant_offdiag_tensor,
    diagonal_tensor,
    evaluate_tensor,
    example_sample_spec,
    flatten_entries,
    identity_tensor,
    quadratic_form,
    reflect_tensor,
    zero_tensor,
)

T4 = build_example_tensor()
SPEC4 = ExampleTensorSpec()
SMALL = SampleSpec(x_box=(0.0, 1.0), y_box=(-4.0, 4.0), x_points=2, y_points=33)

finite = st.floats(-20, 20, allow_nan=False)


def entry(T, x, y, a, b, i, j):
    # 1-based mathematical indices
    return float(T(np.asarray(x, float), np.asarray(y, float))[a - 1, b - 1, i - 1, j - 1])


def test_identity_entries():
    E = identity_tensor(3, 2)(np.zeros(3), np.array([1.0, -5.0]))
    assert E.shape == (2, 2, 3, 3)
    np.testing.assert_array_equal(flatten_entries(E), np.eye(6))


def test_example_entries_at_anchors():
    x = np.full(3, 0.3)
    assert entry(T4, x, (0, 0), 1, 2, 1, 1) == 2.0
    assert entry(T4, x, (0, 0), 2, 1, 1, 2) == -10.0
    assert entry(T4, x, (3, 2), 2, 1, 1, 2) == -10.0
    assert entry(T4, x, (2, 3), 1, 2, 1, 1) == 2.0
    assert entry(T4, x, (5, 1), 2, 2, 1, 1) == 27.0
    assert entry(T4, x, (5, 1), 1, 1, 3, 3) == 1.0
    assert entry(T4, x, (0, 0), 1, 2, 2, 2) == 0.0


@settings(max_examples=200, deadline=None)
@given(y1=finite, y2=finite)
def test_bump_ranges_and_support(y1, y2):
    y = np.array([y1, y2])
    b, w = float(SPEC4.b(y)), float(SPEC4.w(y))
    assert 0.0 <= b <= 2.0
    assert -10.0 <= w <= 0.0
    # brute-force distance to anchor sets
    ks = np.arange(2, 30)
    sb = np.vstack([[0, 0], np.column_stack([ks, ks + 1])])
    sw = sb[:, ::-1]
    if np.min(np.linalg.norm(sb - y, axis=1)) >= 0.25:
        assert b == 0.0
    if np.min(np.linalg.norm(sw - y, axis=1)) >= 0.25:
        assert w == 0.0


def test_bump_radius_validated():
    with pytest.raises(ValueError):
        ExampleTensorSpec(bump_radius=0.0)
    with pytest.raises(ValueError):
        ExampleTensorSpec(bump_radius=0.8)


def test_non_finite_evaluation_carries_point():
    bad = CoefficientTensor(2, 1, lambda x, y: np.full(x.shape[:-1] + (1, 1, 2, 2), np.inf), name="bad")
    with pytest.raises(TensorEvaluationError) as exc:
        evaluate_tensor(bad, np.array([0.1, 0.2]), np.array([3.0]))
    np.testing.assert_array_equal(exc.value.y, [3.0])


def test_quadratic_form_examples():
    xi = np.zeros((2, 3))
    xi[0, 0] = xi[0, 1] = 1.0
    assert quadratic_form(T4, np.zeros(3), np.zeros(2), xi) == pytest.approx(4.0)
    unit = np.random.default_rng(0).normal(size=(2, 3))
    unit /= np.linalg.norm(unit)
    assert quadratic_form(identity_tensor(3, 2), np.zeros(3), np.ones(2), unit) == pytest.approx(1.0)


def test_quadratic_form_matches_flattened_matrix():
    rng = np.random.default_rng(1)
    for _ in range(100):
        y = rng.uniform(-4, 4, 2)
        y[:] = rng.choice([y, [0.05, -0.1], [3.1, 1.9]])
        xi = rng.normal(size=(2, 3))
        M = flatten_entries(T4(np.zeros(3), y))
        ref = xi.ravel() @ M @ xi.ravel()
        assert quadratic_form(T4, np.zeros(3), y, xi) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_example_form_is_at_least_norm_squared():
    rng = np.random.default_rng(2)
    ys = np.vstack([rng.uniform(-10, 10, (300, 2)), [[0, 0], [3, 2], [2, 3], [0.1, 0.05]]])
    xi = rng.normal(size=(len(ys), 2, 3))
    xi /= np.linalg.norm(xi, axis=(1, 2), keepdims=True)
    vals = quadratic_form(T4, np.zeros((len(ys), 3)), ys, xi)
    assert np.all(vals >= 1.0 - 1e-12)


def test_boundedness_examples():
    assert check_boundedness(identity_tensor(3, 2), SMALL) == (True, 1.0)
    assert check_boundedness(zero_tensor(3, 2), SMALL) == (True, 0.0)
    assert check_boundedness(T4, SMALL) == (True, 27.0)


def test_ellipticity_examples():
    ok, nu = check_ellipticity(identity_tensor(3, 2), SMALL)
    assert ok and nu == pytest.approx(1.0)
    ok, nu = check_ellipticity(T4, SMALL)
    assert ok and nu >= 1.0 - 1e-9
    degenerate = diagonal_tensor([np.diag([2.0, 2.0, 1.0]), np.zeros((3, 3))])
    ok, nu = check_ellipticity(degenerate, SMALL)
    assert not ok and nu == pytest.approx(0.0, abs=1e-14)


def test_ellipticity_error_type_carries_point():
    err = EllipticityError("boom", x=[0.0], y=[1.0])
    assert err.y == [1.0]


def test_ellipticity_lower_bounds_form():
    ok, nu = check_ellipticity(T4, SMALL)
    rng = np.random.default_rng(3)
    ys = SMALL.y_samples(T4)
    xi = rng.normal(size=(1000, 2, 3))
    xi /= np.linalg.norm(xi, axis=(1, 2), keepdims=True)
    y = ys[rng.integers(0, len(ys), 1000)]
    assert np.all(quadratic_form(T4, np.zeros((1000, 3)), y, xi) >= nu - 1e-9)


def test_staircase_diagonal_is_vacuous():
    ok, L0, wit = check_staircase_support(diagonal_tensor([np.eye(3), np.eye(3)]), SMALL)
    assert ok and L0 == 1.0 and wit == []


def test_staircase_constant_offdiag_witness():
    spec = SampleSpec(x_box=(0.0, 1.0), y_box=(0.0, 0.0), x_points=1, y_points=1, extra_y=((2.0, 0.0),))
    ok, L0, wit = check_staircase_support(constant_offdiag_tensor(), spec, [1.0, 1.5])
    assert not ok and L0 is None
    w = wit[0]
    assert (w.y, w.L, w.alpha, w.beta, w.implication) == ([2.0, 0.0], 1.0, 1, 2, "A3'")


def test_staircase_example_passes_at_one():
    ok, L0, wit = check_staircase_support(T4, SMALL)
    assert ok and L0 == 1.0 and wit == []


def test_staircase_stable_under_refinement():
    coarse = SampleSpec(x_box=(0.0, 1.0), y_box=(-6.0, 6.0), x_points=1, y_points=49)
    fine = SampleSpec(x_box=(0.0, 1.0), y_box=(-6.0, 6.0), x_points=1, y_points=97)
    assert check_staircase_support(T4, coarse)[:2] == check_staircase_support(T4, fine)[:2] == (True, 1.0)


def test_staircase_rejects_bad_grid():
    with pytest.raises(ValueError):
        check_staircase_support(T4, SMALL, [2.0, 1.0])


def test_staircase_untestable_grid_certifies_nothing():
    # no sample exceeds L = 5, so nothing is certified
    ok, L0, _ = check_staircase_support(T4, SMALL, [5.0, 6.0])
    assert not ok and L0 is None


@settings(max_examples=100, deadline=None)
@given(x=st.tuples(finite, finite, finite), y=st.tuples(finite, finite))
def test_reflect_is_involution(x, y):
    x, y = np.array(x), np.array(y)
    np.testing.assert_array_equal(reflect_tensor(reflect_tensor(T4))(x, y), T4(x, y))


def test_reflect_examples():
    R = reflect_tensor(T4)
    assert entry(R, np.zeros(3), (-2, -3), 1, 2, 1, 1) == 2.0
    I = identity_tensor(3, 2)
    np.testing.assert_array_equal(reflect_tensor(I)(np.zeros(3), np.ones(2)), I(np.zeros(3), np.ones(2)))
    assert (-2.0, -3.0) in R.anchors


def test_reflected_lower_implication_becomes_upper():
    # where T passes the lower implication, the reflection passes the upper one
    ys = SMALL.y_samples(T4)
    E = T4(np.zeros((len(ys), 3)), ys)
    ER = reflect_tensor(T4)(np.zeros((len(ys), 3)), -ys)
    np.testing.assert_array_equal(E, ER)
    ok, L0, _ = check_staircase_support(reflect_tensor(T4), SMALL)
    assert ok and L0 == 1.0


def test_structure_report_fields():
    rep = check_structure(T4, SMALL)
    d = rep.as_dict()
    assert rep.passed and d["tensor"] == "example4"
    assert d["c"] >= d["nu"] > 0
    assert d["sample_spec"]["y_points_per_axis"] == 33
    bad = check_structure(constant_offdiag_tensor(), SMALL)
    assert not bad.passed and bad.witnesses


def test_example_sample_spec_contains_anchors():
    ys = example_sample_spec().y_samples(T4)
    assert len(ys) >= 101**2
    for a in [(0.0, 0.0), (2.0, 3.0), (9.0, 10.0), (10.0, 9.0)]:
        assert np.any(np.all(ys == a, axis=1))
