from __future__ import annotations

import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqmct.divergence import d_m, weighted_kl
from seqmct.errors import DimensionMismatch, InvalidDistribution
from seqmct.experiments import synthetic_linear_mdp, tilt_base_kernel, TILT_F
from seqmct.markov import exponential_tilt, make_rng, random_kernel, stationary_distribution
from seqmct.nullsets import (
    FiniteUnion,
    LinearClass,
    ParametricInterval,
    Singleton,
    StationaryPolytope,
    d_m_inf,
    project_polytope_euclidean,
    project_weighted_kl,
)


def cvx_polytope(w, Q, pi):
    """Exponential-cone reference solution of the stationary-polytope projection."""
    m = len(pi)
    c = w[:, None] * Q
    P = cp.Variable((m, m), nonneg=True)
    mask = c > 0
    obj = cp.Maximize(cp.sum(cp.multiply(c[mask], cp.log(P[mask]))))
    prob = cp.Problem(obj, [cp.sum(P, axis=1) == 1, pi @ P == pi])
    prob.solve(solver=cp.CLARABEL)
    Pv = np.clip(P.value, 1e-300, None)
    return weighted_kl(w, Q, Pv / Pv.sum(axis=1, keepdims=True))


def grid_two_state(w, Q, step=1e-4):
    """Brute force over the one-parameter family of 2x2 kernels fixing (1/2, 1/2)."""
    p = np.arange(step, 1.0, step)
    # pi = (1/2, 1/2) invariant  <=>  P = [[1-p, p], [p, 1-p]]
    v = w[0] * (Q[0, 0] * np.log(Q[0, 0] / (1 - p)) + Q[0, 1] * np.log(Q[0, 1] / p))
    v += w[1] * (Q[1, 0] * np.log(Q[1, 0] / p) + Q[1, 1] * np.log(Q[1, 1] / (1 - p)))
    return v.min()


def test_two_state_grid_oracle():
    S = StationaryPolytope([0.5, 0.5])
    w, Q = np.array([10.0, 10.0]), np.array([[0.9, 0.1], [0.2, 0.8]])
    ref = grid_two_state(w, Q)
    for method in ("newton", "pgd"):
        assert abs(S.project(w, Q, method=method).value - ref) <= 1e-4
    assert S.project(w, Q, tol=1e-10).value == pytest.approx(0.19932778682345742, abs=1e-9)


def random_instance(seed, m, sparse=False):
    rng = make_rng(seed)
    pi = rng.dirichlet(np.ones(m) * 2)
    Q = random_kernel(m, rng).rows.copy()
    if sparse:
        Q[rng.random((m, m)) < 0.3] = 0.0
        Q[np.arange(m), rng.integers(m, size=m)] += 0.1
        Q /= Q.sum(axis=1, keepdims=True)
    w = rng.integers(0, 50, size=m).astype(float)
    w[0] = max(w[0], 1.0)
    return pi, Q, w


@pytest.mark.parametrize("seed", range(12))
def test_newton_pgd_and_conic_agree_dense(seed):
    m = 3 + seed % 4
    pi, Q, w = random_instance(seed, m)
    S = StationaryPolytope(pi)
    newton = S.project(w, Q, tol=1e-9)
    pgd = S.project(w, Q, tol=1e-9, method="pgd")
    ref = cvx_polytope(w, Q, pi)
    scale = max(1.0, ref)
    assert newton.converged
    assert abs(newton.value - ref) <= 1e-6 * scale
    assert abs(pgd.value - ref) <= 1e-4 * scale
    assert S.membership_residual(newton.argmin) <= 1e-8


@pytest.mark.parametrize("seed", range(12))
def test_newton_certificate_on_sparse_counts(seed):
    # zero counts make the problem degenerate; the reported gap must still
    # bound the distance to the conic reference solution
    m = 3 + seed % 4
    pi, Q, w = random_instance(seed, m, sparse=True)
    S = StationaryPolytope(pi)
    res = S.project(w, Q)
    ref = cvx_polytope(w, Q, pi)
    assert np.isfinite(res.gap_estimate)
    assert res.value - ref <= res.gap_estimate + 1e-7 * max(1.0, ref)
    assert res.value - ref >= -1e-6 * max(1.0, ref)  # conic solver accuracy
    assert abs(res.value - ref) <= 2e-6 * max(1.0, ref)
    assert S.membership_residual(res.argmin) <= 1e-8


def test_qbad_divergence_reference(qbad, pi_target):
    S = StationaryPolytope(pi_target)
    a = d_m_inf(qbad, S, tol=1e-10).value
    b = StationaryPolytope(pi_target, method="pgd").project(stationary_distribution(qbad), qbad.rows, 1e-10).value
    assert a == pytest.approx(0.047137518780688, abs=1e-9)
    assert a == pytest.approx(b, abs=1e-7)


def test_member_has_zero_divergence(qgood, pi_target):
    assert d_m_inf(qgood, StationaryPolytope(pi_target)).value <= 1e-8


@given(st.integers(0, 5000))
def test_projection_value_is_below_any_member(seed):
    pi, Q, w = random_instance(seed, 4)
    S = StationaryPolytope(pi)
    v = S.project(w, Q, tol=1e-8).value
    # random members of the polytope: Euclidean projections of random kernels
    rng = make_rng(seed + 1)
    for _ in range(3):
        M = project_polytope_euclidean(random_kernel(4, rng).rows, pi)
        M = np.clip(M, 1e-15, None)
        assert v <= weighted_kl(w, Q, M / M.sum(axis=1, keepdims=True)) + 1e-9


def test_warm_start_sequence_matches_cold():
    pi, Q, w = random_instance(4, 5)
    S = StationaryPolytope(pi)
    warm = None
    for k in range(1, 6):
        res = S.project(w * k, Q, tol=1e-9, warm=warm)
        warm = res.warm
        cold = S.project(w * k, Q, tol=1e-9)
        assert res.value == pytest.approx(cold.value, rel=1e-7, abs=1e-12)


def test_zero_weights_project_to_zero():
    S = StationaryPolytope([0.2, 0.3, 0.5])
    assert S.project(np.zeros(3), np.full((3, 3), 1 / 3)).value == 0.0


def test_polytope_rejects_bad_target():
    with pytest.raises(InvalidDistribution):
        StationaryPolytope([1.0, 0.0])


def test_singleton():
    rng = make_rng(5)
    Q, P = random_kernel(4, rng), random_kernel(4, rng)
    assert d_m_inf(Q, Singleton(P)).value == pytest.approx(d_m(Q, P).value)
    assert d_m_inf(P, Singleton(P)).value == 0.0


def test_union_takes_minimum(qbad, pi_target):
    rng = make_rng(8)
    P = random_kernel(5, rng)
    U = FiniteUnion([Singleton(P), StationaryPolytope(pi_target)])
    vals = [d_m(qbad, P).value, d_m_inf(qbad, StationaryPolytope(pi_target)).value]
    assert d_m_inf(qbad, U).value == pytest.approx(min(vals), rel=1e-7)
    with pytest.raises(DimensionMismatch):
        FiniteUnion([Singleton(P), StationaryPolytope([0.5, 0.5])])


# --------------------------------------------------------------------------- tilt interval


def tilt_grid(Q, S, n=4001):
    pi = stationary_distribution(Q)
    return min(weighted_kl(pi, Q.rows, exponential_tilt(S.P0, S.f, t).rows) for t in np.linspace(S.lo, S.hi, n))


@pytest.mark.parametrize("theta", [-0.6, 0.0, 0.3, 0.6, 1.2])
def test_tilt_projection_against_grid(theta):
    P0 = tilt_base_kernel(0)
    S = ParametricInterval(P0, TILT_F, 0.4, 0.8)
    Q = exponential_tilt(P0, TILT_F, theta)
    res = d_m_inf(Q, S)
    assert res.value <= tilt_grid(Q, S) + 1e-12
    assert res.value >= tilt_grid(Q, S) - 1e-6
    if 0.4 <= theta <= 0.8:
        assert res.value <= 1e-10
    assert S.membership_residual(res.argmin) <= 1e-8


def test_tilt_membership():
    P0 = tilt_base_kernel(0)
    S = ParametricInterval(P0, TILT_F, 0.4, 0.8)
    assert S.membership_residual(exponential_tilt(P0, TILT_F, 0.5)) == 0.0
    assert S.membership_residual(exponential_tilt(P0, TILT_F, -0.6)) > 0.5


# --------------------------------------------------------------------------- linear class


@pytest.fixture(scope="module")
def linear_setup():
    Q, Phi, Pi = synthetic_linear_mdp(8, 3, 3, 0)
    return Q, LinearClass(Phi, Pi, 3)


def test_linear_member_projects_to_zero(linear_setup):
    _, L = linear_setup
    rng = make_rng(2)
    mu = rng.dirichlet(np.ones(L.S), size=L.d).T  # columns are next-state laws
    P = L.kernel_of(mu)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert L.membership_residual(P) <= 1e-8
    assert d_m_inf(P, L).value <= 1e-6


def test_linear_projection_against_polytope_relaxation(linear_setup):
    Q, L = linear_setup
    res = d_m_inf(Q, L)
    assert res.value > 0.05
    # the minimizer is feasible and attains the reported value
    assert L.membership_residual(res.argmin) <= 1e-5
    assert res.value == pytest.approx(weighted_kl(stationary_distribution(Q), Q.rows, res.argmin.rows), rel=1e-9)


def test_linear_projection_beats_random_members(linear_setup):
    Q, L = linear_setup
    pi = stationary_distribution(Q)
    v = d_m_inf(Q, L).value
    rng = make_rng(3)
    for _ in range(20):
        mu = rng.dirichlet(np.ones(L.S), size=L.d).T
        assert v <= weighted_kl(pi, Q.rows, L.kernel_of(mu)) + 1e-7


def test_linear_pickle_drops_cache(linear_setup):
    import pickle

    Q, L = linear_setup
    d_m_inf(Q, L)
    L2 = pickle.loads(pickle.dumps(L))
    assert L2._problems == {}
    assert d_m_inf(Q, L2).value == pytest.approx(d_m_inf(Q, L).value, rel=1e-8)


def test_project_weighted_kl_dispatch(qbad, pi_target):
    S = StationaryPolytope(pi_target)
    pi = stationary_distribution(qbad)
    assert project_weighted_kl(pi, qbad.rows, S).value == pytest.approx(d_m_inf(qbad, S).value)
