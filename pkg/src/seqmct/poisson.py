"""Poisson equation, time reversal, pseudo-spectral gap and the sensitivity constant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, EigenFailure, SingularSystem
from .markov import TransitionKernel, stationary_distribution, validate_kernel

LAMBDA_SNAP = 1e-12


@dataclass(frozen=True)
class PoissonSolution:
    omega: np.ndarray
    residual: float
    pi_dot: float


@dataclass(frozen=True)
class SpectralReport:
    gamma_ps: float
    achieving_k: int
    k_max: int
    per_k: list = field(default_factory=list)

    def to_dict(self):
        return {
            "gamma_ps": self.gamma_ps,
            "achieving_k": self.achieving_k,
            "k_max": self.k_max,
            "per_k": list(self.per_k),
        }


@dataclass(frozen=True)
class SensitivityConstant:
    c_p: float
    gamma_ps_used: float
    pi_star: float

    def to_dict(self):
        return {"c_p": self.c_p, "gamma_ps_used": self.gamma_ps_used, "pi_star": self.pi_star}


def fundamental_lu(P: TransitionKernel):
    """LU factors of ``I - P + 1 pi`` (reusable across right-hand sides)."""
    pi = stationary_distribution(P)
    m = P.m
    Z = np.eye(m) - P.rows + np.outer(np.ones(m), pi)
    lu = scipy.linalg.lu_factor(Z, check_finite=True)
    if np.min(np.abs(np.diag(lu[0]))) < 1e-14:
        raise SingularSystem("I - P + 1 pi is numerically singular")
    return lu, pi


def solve_poisson_many(P, F: np.ndarray, lu=None):
    """Solutions for every column of ``F`` (shape m x k); returns (Omega, pi)."""
    P = validate_kernel(P)
    if lu is None:
        lu, pi = fundamental_lu(P)
    else:
        pi = stationary_distribution(P)
    F = np.asarray(F, dtype=float)
    rhs = F - (pi @ F)[None, :]
    W = scipy.linalg.lu_solve(lu, rhs)
    # remove the (tiny) component along 1 so that <pi, omega> = 0 exactly
    W -= (pi @ W)[None, :]
    return W, pi


def solve_poisson(P, f) -> PoissonSolution:
    """Solve ``(I - P) w = f - (pi f) 1`` with ``<pi, w> = 0``."""
    P = validate_kernel(P)
    P.require_ergodic()
    f = np.asarray(f, dtype=float)
    if f.shape != (P.m,):
        raise DimensionMismatch(f"f has shape {f.shape}, expected ({P.m},)")
    W, pi = solve_poisson_many(P, f[:, None])
    w = W[:, 0]
    if not np.all(np.isfinite(w)):
        raise SingularSystem("Poisson solve produced non-finite values")
    target = f - pi @ f
    residual = float(np.abs(w - P.rows @ w - target).max())
    return PoissonSolution(w, residual, float(pi @ w))


def poisson_series(P, f, n_terms: int) -> np.ndarray:
    """Truncated series ``sum_{n<=N} (P^n - 1 pi) f`` (reference implementation)."""
    P = validate_kernel(P)
    pi = stationary_distribution(P)
    f = np.asarray(f, dtype=float)
    g = f - pi @ f
    out = np.zeros_like(g)
    v = g.copy()
    for _ in range(n_terms + 1):
        out += v
        v = P.rows @ v
    return out


def time_reversal(P) -> TransitionKernel:
    """``P*(i, j) = P(j, i) pi_j / pi_i``."""
    P = validate_kernel(P)
    pi = stationary_distribution(P)
    R = P.rows.T * pi[None, :] / pi[:, None]
    R = R / R.sum(axis=1, keepdims=True)
    return TransitionKernel(R, f"reversal({P.label})" if P.label else "")


def _lambda2_symmetrized(M: np.ndarray, pi: np.ndarray) -> float:
    s = np.sqrt(pi)
    S = s[:, None] * M / s[None, :]
    S = 0.5 * (S + S.T)
    try:
        ev = np.linalg.eigvalsh(S)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    ev = np.clip(ev, 0.0, 1.0)
    lam2 = float(ev[-2])
    return 0.0 if lam2 <= LAMBDA_SNAP else lam2


def pseudo_spectral_gap(P, k_max: int | None = None) -> SpectralReport:
    """Pseudo-spectral gap truncated at ``k_max`` (default ``2 m``).

    ``per_k[k-1] = (1 - lambda_2((P*)^k P^k)) / k``; each product is
    reversible w.r.t. pi and is diagonalized in its symmetrized form.
    """
    P = validate_kernel(P)
    P.require_ergodic()
    if k_max is None:
        k_max = 2 * P.m
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    pi = stationary_distribution(P)
    Pr = time_reversal(P).rows
    Pk = np.eye(P.m)
    Rk = np.eye(P.m)
    per_k = []
    for k in range(1, k_max + 1):
        Pk = Pk @ P.rows
        Rk = Rk @ Pr
        lam2 = _lambda2_symmetrized(Rk @ Pk, pi)
        per_k.append((1.0 - lam2) / k)
    best = int(np.argmax(per_k))
    gamma = float(per_k[best])
    if not gamma > 0:
        raise EigenFailure("pseudo-spectral gap is zero up to k_max; increase k_max")
    return SpectralReport(gamma, best + 1, int(k_max), per_k)


def c_p_formula(gamma_ps: float, pi_star: float) -> float:
    """Two-branch bound on ``sup ||w_{P,f}||_inf / ||f||_inf``."""
    if gamma_ps >= 1.0:
        return 2.0
    g = float(gamma_ps)
    return (1.0 - g) ** (-1.0 / (2.0 * g)) / np.sqrt(pi_star) / (1.0 - np.sqrt(1.0 - g))


def sensitivity_constant(P, k_max: int | None = None) -> SensitivityConstant:
    P = validate_kernel(P)
    rep = pseudo_spectral_gap(P, k_max)
    pi_star = float(stationary_distribution(P).min())
    return SensitivityConstant(c_p_formula(rep.gamma_ps, pi_star), rep.gamma_ps, pi_star)
