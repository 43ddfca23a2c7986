import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evqr.errors import DimensionMismatch
from evqr.measures import DiscreteMeasure, Problem, center_covariates, cost_matrix, validate_problem


def test_zero_weight_atoms_are_dropped():
    mu = DiscreteMeasure([0.5, 0.0, 0.5], [[0.0], [9.0], [1.0]])
    assert mu.size == 2
    np.testing.assert_array_equal(mu.points[:, 0], [0.0, 1.0])


@pytest.mark.parametrize(
    "weights, points",
    [
        ([0.5, 0.6], [[0.0], [1.0]]),
        ([1.5, -0.5], [[0.0], [1.0]]),
        ([np.nan, 1.0], [[0.0], [1.0]]),
        ([0.5, 0.5], [[0.0], [np.inf]]),
        ([0.0], [[0.0]]),
    ],
)
def test_bad_measures_rejected(weights, points):
    with pytest.raises(ValueError):
        DiscreteMeasure(weights, points)


def test_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        DiscreteMeasure([0.5, 0.5], np.zeros((3, 1)))


def test_arrays_are_read_only():
    mu = DiscreteMeasure([1.0], [[2.0]])
    with pytest.raises(ValueError):
        mu.points[0, 0] = 1.0


def test_cost_matrix_uses_trailing_columns():
    mu = DiscreteMeasure([1.0], [[1.0, 2.0]])
    nu = DiscreteMeasure([0.5, 0.5], [[100.0, 1.0, 2.0], [-7.0, 0.0, 0.0]])
    np.testing.assert_allclose(cost_matrix(mu, nu), [[0.0, 2.5]])


def test_problem_centers_and_accumulates_shift():
    mu = DiscreteMeasure([1.0], [[0.0]])
    nu = DiscreteMeasure([0.25, 0.75], [[2.0, 0.0], [6.0, 1.0]])
    p = Problem(mu, nu, 1.0)
    np.testing.assert_allclose(p.centering_shift, [5.0])
    np.testing.assert_allclose(p.b @ p.x, [0.0], atol=1e-15)
    # re-centering an already centered instance keeps the total shift
    q = Problem(mu, p.nu, 2.0, centering_shift=p.centering_shift)
    np.testing.assert_allclose(q.centering_shift, [5.0])
    assert (p.n, p.m, p.d_x, p.d_y) == (1, 2, 1, 1)


def test_problem_rejects_bad_epsilon_and_dims():
    mu = DiscreteMeasure([1.0], [[0.0, 0.0]])
    nu = DiscreteMeasure([1.0], [[0.0]])
    with pytest.raises(DimensionMismatch):
        Problem(mu, nu, 1.0)
    with pytest.raises(ValueError):
        Problem(DiscreteMeasure([1.0], [[0.0]]), nu, 0.0)


def test_validation_flags_collinear_covariates():
    mu = DiscreteMeasure([1.0], [[0.0]])
    # two covariates but all atoms on the line x2 = 2 x1
    pts = np.array([[1.0, 2.0, 0.0], [-1.0, -2.0, 1.0], [0.5, 1.0, 3.0]])
    p = Problem(mu, DiscreteMeasure(np.full(3, 1 / 3), pts), 1.0)
    rep = validate_problem(p)
    assert not rep.feasible
    assert rep.messages
    assert rep.to_dict()["feasible"] is False


def test_validation_without_covariates_is_feasible():
    p = Problem(DiscreteMeasure([1.0], [[0.0]]), DiscreteMeasure([0.5, 0.5], [[0.0], [1.0]]), 1.0)
    assert validate_problem(p).feasible


@given(
    w=st.lists(st.floats(0.01, 10), min_size=2, max_size=8),
    seed=st.integers(0, 2**32 - 1),
)
def test_centering_removes_mean(w, seed):
    rng = np.random.default_rng(seed)
    w = np.array(w) / np.sum(w)
    pts = rng.normal(3.0, 2.0, (len(w), 3))
    nu = DiscreteMeasure(w, pts)
    centered, shift = center_covariates(nu, 2)
    np.testing.assert_allclose(centered.mean()[:2], 0.0, atol=1e-12)
    np.testing.assert_allclose(centered.points[:, 2], pts[:, 2])
    np.testing.assert_allclose(shift, nu.mean()[:2])
