"""KL-type divergences between kernels and the closed-form surrogate statistic."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError
from .markov import stationary_distribution, validate_distribution, validate_kernel
from .poisson import solve_poisson, solve_poisson_many

DEGENERATE_TOL = 1e-12


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    finite_flag: bool

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class SurrogateWitness:
    value: float
    eta_star: float
    omega_star: np.ndarray
    g_star: np.ndarray
    a: np.ndarray
    degenerate: bool = False


def _xlogy_ratio(q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Elementwise ``q log(q/p)`` with ``0 log 0 = 0`` and ``+inf`` on support violations."""
    out = np.zeros(np.broadcast(q, p).shape)
    pos = q > 0
    with np.errstate(divide="ignore"):
        out[pos] = q[pos] * (np.log(q[pos]) - np.log(np.broadcast_to(p, out.shape)[pos]))
    return out


def kl(q, p) -> float:
    """Natural-log KL divergence between two distributions."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.shape != p.shape:
        raise DimensionMismatch(f"lengths {q.shape} and {p.shape} differ")
    return max(float(_xlogy_ratio(q, p).sum()), 0.0)


def row_kl(Q, P) -> np.ndarray:
    """Vector of ``KL(Q(i,.) || P(i,.))``."""
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    if Q.shape != P.shape:
        raise DimensionMismatch(f"shapes {Q.shape} and {P.shape} differ")
    return np.maximum(_xlogy_ratio(Q, P).sum(axis=1), 0.0)


def weighted_kl(weights, Qhat, P) -> float:
    """``sum_x w_x KL(Qhat(x,.) || P(x,.))`` over rows with ``w_x > 0``."""
    w = np.asarray(weights, dtype=float)
    Qhat = np.asarray(Qhat, dtype=float)
    P = np.asarray(P, dtype=float)
    rows = w > 0
    if not rows.any():
        return 0.0
    return float(w[rows] @ row_kl(Qhat[rows], P[rows]))


def binary_kl(x: float, y: float) -> float:
    """Bernoulli KL ``d(x, y)``; ``x`` in [0, 1], ``y`` in (0, 1)."""
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x = {x} outside [0, 1]")
    if not 0.0 < y < 1.0:
        raise DomainError(f"y = {y} must lie strictly inside (0, 1)")
    return kl([x, 1.0 - x], [y, 1.0 - y])


def d_m(Q, P) -> DivergenceValue:
    """Stationary-weighted KL ``sum_i pi_Q(i) KL(Q(i,.) || P(i,.))``."""
    Q = validate_kernel(Q)
    P = validate_kernel(P)
    if Q.m != P.m:
        raise DimensionMismatch(f"state counts {Q.m} and {P.m} differ")
    pi = stationary_distribution(Q)
    v = weighted_kl(pi, Q.rows, P.rows)
    return DivergenceValue(v, bool(np.isfinite(v)))


def pinsker_ratio(pi_q, P, g) -> float:
    """``(E_{pi_q} g - E_{pi_P} g)^2 / (2 ||w_{P,g}||_inf^2)``; 0 for constant ``g``."""
    P = validate_kernel(P)
    g = np.asarray(g, dtype=float)
    if np.ptp(g) <= 1e-14 * max(1.0, np.abs(g).max()):
        return 0.0
    sol = solve_poisson(P, g)
    pi_p = stationary_distribution(P)
    diff = float(np.asarray(pi_q) @ g - pi_p @ g)
    return diff * diff / (2.0 * float(np.abs(sol.omega).max()) ** 2)


def pinsker_ratio_batch(pi_q, P, G: np.ndarray, lu=None) -> np.ndarray:
    """:func:`pinsker_ratio` for every column of ``G`` with a single factorization."""
    P = validate_kernel(P)
    W, pi_p = solve_poisson_many(P, G, lu)
    diff = (np.asarray(pi_q) - pi_p) @ G
    norm = np.abs(W).max(axis=0)
    out = np.zeros(G.shape[1])
    ok = norm > 1e-14 * np.maximum(1.0, np.abs(G).max(axis=0))
    out[ok] = diff[ok] ** 2 / (2.0 * norm[ok] ** 2)
    return out


def pinsker_bound(Q, P, g) -> float:
    """Lower bound on ``d_m(Q, P)`` from the test function ``g``."""
    Q = validate_kernel(Q)
    P = validate_kernel(P)
    if Q.m != P.m:
        raise DimensionMismatch(f"state counts {Q.m} and {P.m} differ")
    return pinsker_ratio(stationary_distribution(Q), P, g)


def weighted_median_inf(values: np.ndarray, weights: np.ndarray) -> float:
    """Smallest ``eta`` with at least half the weight at or below it."""
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    k = int(np.searchsorted(cum, 0.5 * cum[-1] - 1e-12, side="left"))
    return float(values[order][min(k, len(values) - 1)])


def median_sign_witness(r: np.ndarray, pi_p: np.ndarray) -> tuple[float, np.ndarray]:
    """Maximizer of ``sum_i pi_i r_i w_i`` over ``|w| <= 1``, ``<pi, w> = 0``.

    Tie coordinates (``r_i == eta``) share one value so the mass spread is
    proportional to ``pi``.
    """
    r = np.asarray(r, dtype=float)
    eta = weighted_median_inf(r, pi_p)
    scale = max(1.0, np.abs(r).max())
    tie = np.abs(r - eta) <= 1e-12 * scale
    up = (r > eta) & ~tie
    down = (r < eta) & ~tie
    omega = np.zeros(r.shape[0])
    omega[up] = 1.0
    omega[down] = -1.0
    t = (pi_p[down].sum() - pi_p[up].sum()) / pi_p[tie].sum()
    omega[tie] = float(np.clip(t, -1.0, 1.0))
    return eta, omega


def surrogate_statistic(pi_hat, P) -> SurrogateWitness:
    """Closed-form maximizer of the Pinsker ratio over ``g = (I - P) w``.

    ``a = (I - P^T) pi_hat``, ``r = a / pi_P``; with ``eta`` the lower weighted
    median of ``r`` the optimal ``w`` is ``sign(r - eta)`` off the tie set and a
    common value on it chosen so that ``<pi_P, w> = 0``.
    """
    P = validate_kernel(P)
    P.require_ergodic()
    pi_hat = validate_distribution(pi_hat, P.m)
    pi_p = stationary_distribution(P)
    a = pi_hat - P.rows.T @ pi_hat
    if np.abs(a).max() <= DEGENERATE_TOL:
        z = np.zeros(P.m)
        return SurrogateWitness(0.0, 0.0, z, z.copy(), a, True)
    eta, omega = median_sign_witness(a / pi_p, pi_p)
    g = omega - P.rows @ omega
    value = 0.5 * float(a @ omega) ** 2
    return SurrogateWitness(value, eta, omega, g, a, False)
