from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from seqmct.markov import make_rng, random_kernel, stationary_distribution, validate_kernel
from seqmct.poisson import (
    c_p_formula,
    poisson_series,
    pseudo_spectral_gap,
    sensitivity_constant,
    solve_poisson,
    time_reversal,
)

from conftest import kernels

CASES = kernels(50, seed=3)


@pytest.mark.parametrize("P", CASES, ids=lambda P: f"m{P.m}")
def test_poisson_against_series(P):
    f = make_rng(P.m).normal(size=P.m)
    sol = solve_poisson(P, f)
    assert sol.residual <= 1e-10
    assert abs(sol.pi_dot) <= 1e-10
    assert np.allclose(sol.omega, poisson_series(P, f, 2000), atol=1e-8)


def test_constant_f_gives_zero():
    P = random_kernel(5, make_rng(0))
    assert np.abs(solve_poisson(P, np.full(5, 3.0)).omega).max() < 1e-12


def test_rows_equal_closed_form():
    p = np.array([0.2, 0.3, 0.5])
    P = np.tile(p, (3, 1))
    f = np.array([1.0, -2.0, 4.0])
    assert np.allclose(solve_poisson(P, f).omega, f - p @ f, atol=1e-12)
    assert sensitivity_constant(P).c_p == 2.0


def eig_lambda2(M):
    ev = np.sort(np.real(np.linalg.eigvals(M)))
    return max(ev[-2], 0.0)


@pytest.mark.parametrize("P", CASES[:20], ids=lambda P: f"m{P.m}")
def test_gap_per_k_matches_unsymmetrized_eigenvalues(P):
    rep = pseudo_spectral_gap(P, 6)
    R = time_reversal(P).rows
    for k in range(1, 7):
        Pk = np.linalg.matrix_power(P.rows, k)
        Rk = np.linalg.matrix_power(R, k)
        assert rep.per_k[k - 1] == pytest.approx((1 - eig_lambda2(Rk @ Pk)) / k, abs=1e-9)
    assert rep.gamma_ps == max(rep.per_k)
    assert 0 < rep.gamma_ps <= 1


def test_time_reversal_of_reversible_chain():
    # birth-death chains are reversible
    P = validate_kernel([[0.5, 0.5, 0], [0.25, 0.5, 0.25], [0, 0.5, 0.5]])
    assert np.allclose(time_reversal(P).rows, P.rows)


def test_time_reversal_preserves_stationary(qbad):
    R = time_reversal(qbad)
    assert np.allclose(stationary_distribution(R), stationary_distribution(qbad))


@pytest.mark.parametrize("P", CASES, ids=lambda P: f"m{P.m}")
def test_sensitivity_bound_holds(P):
    c = sensitivity_constant(P)
    F = make_rng(P.m + 100).normal(size=(P.m, 20))
    for f in F.T:
        assert np.abs(solve_poisson(P, f).omega).max() <= c.c_p * np.abs(f).max()


def test_c_p_formula_branches():
    assert c_p_formula(1.0, 0.2) == 2.0
    g, ps = 0.5, 0.25
    assert c_p_formula(g, ps) == pytest.approx((0.5 ** (-1.0)) / 0.5 / (1 - np.sqrt(0.5)))


@given(st.integers(0, 500), st.integers(2, 6))
def test_poisson_is_linear(seed, m):
    rng = make_rng(seed)
    P = random_kernel(m, rng)
    f, g = rng.normal(size=m), rng.normal(size=m)
    a = solve_poisson(P, 2 * f - g).omega
    b = 2 * solve_poisson(P, f).omega - solve_poisson(P, g).omega
    assert np.allclose(a, b, atol=1e-10)
