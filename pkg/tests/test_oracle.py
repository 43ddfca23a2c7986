import numpy as np
import pytest
from conftest import random_problem
from hypothesis import given
from hypothesis import strategies as st

from evqr import solver as sv
from evqr.errors import ConstraintInfeasible, SizeGuard
from evqr.measures import DiscreteMeasure, Problem
from evqr.oracle import oracle_compare, oracle_solve


def test_oracle_forced_product():
    mu = DiscreteMeasure([0.5, 0.5], [[0.0], [2.0]])
    nu = DiscreteMeasure([0.5, 0.5], [[-1.0, 0.0], [1.0, 1.0]])
    res = oracle_solve(Problem(mu, nu, 0.7))
    np.testing.assert_allclose(res.pi.pi, 0.25, atol=1e-13)
    assert res.kkt_residual <= 1e-13


def test_oracle_constraints_hold(rng):
    p = random_problem(rng, 5, 6, d_x=2, d_y=2, epsilon=0.5)
    res = oracle_solve(p)
    pi = res.pi.pi
    np.testing.assert_allclose(pi.sum(axis=1), p.a, atol=1e-13)
    np.testing.assert_allclose(pi.sum(axis=0), p.b, atol=1e-13)
    np.testing.assert_allclose(pi @ p.x, 0.0, atol=1e-13)
    np.testing.assert_allclose(p.a @ res.potentials.f, 0.0, atol=1e-12)
    np.testing.assert_allclose(p.a @ res.potentials.g, 0.0, atol=1e-12)


def test_oracle_matches_block_solver_5x6():
    p = random_problem(np.random.default_rng(3), 5, 6, d_x=2, epsilon=0.5)
    cmp = oracle_compare(p)
    assert cmp.coupling_l1_gap <= 1e-6
    assert cmp.value_gap <= 1e-8
    assert cmp.potential_sup_gap <= 1e-6


@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.integers(1, 5),
    m=st.integers(2, 6),
    d_x=st.integers(0, 2),
    d_y=st.integers(1, 2),
    eps=st.sampled_from([0.2, 1.0]),
)
def test_oracle_never_below_block_solver(seed, n, m, d_x, d_y, eps):
    p = random_problem(np.random.default_rng(seed), n, m, d_x=d_x, d_y=d_y, epsilon=eps)
    res = oracle_solve(p)
    _, pots, _ = sv.solve(p)
    block = sv.dual_value(p, pots)
    assert res.value >= block - 1e-10 * (1 + abs(res.value))


def test_size_guard(rng):
    p = random_problem(rng, 15, 14, d_x=1)
    with pytest.raises(SizeGuard):
        oracle_solve(p)


def test_both_sides_reject_infeasible():
    mu = DiscreteMeasure([1.0], [[0.0]])
    nu = DiscreteMeasure([0.5, 0.5], [[3.0, 0.0], [3.0, 1.0]])
    p = Problem(mu, nu, 1.0)
    with pytest.raises(ConstraintInfeasible):
        oracle_solve(p)
    with pytest.raises(ConstraintInfeasible, match="both"):
        oracle_compare(p)
