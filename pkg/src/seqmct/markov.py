"""Finite-state Markov kernels: validation, stationary laws, primitivity, simulation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import _jit
from .errors import (
    DimensionMismatch,
    EigenFailure,
    InvalidDistribution,
    NegativeEntry,
    NonSquare,
    NoConvergence,
    NotErgodic,
    RowSumViolation,
)

RENORM_TOL = 1e-9
DIRECT_SOLVE_MAX_M = 200


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Validated row-stochastic matrix.

    Construct through :func:`validate_kernel`; the constructor itself trusts
    its input. ``rows`` is stored read-only.
    """

    rows: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def m(self) -> int:
        return self.rows.shape[0]

    @cached_property
    def ergodicity(self) -> tuple[bool, str]:
        return _primitivity(self.rows)

    @property
    def ergodic(self) -> bool:
        return self.ergodicity[0]

    @cached_property
    def stationary(self) -> np.ndarray:
        pi = _stationary(self.rows)
        pi.setflags(write=False)
        return pi

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.rows, axis=1)
        for i in range(self.m):
            c[i, np.flatnonzero(self.rows[i])[-1]:] = 1.0
        return c

    def require_ergodic(self):
        ok, why = self.ergodicity
        if not ok:
            raise NotErgodic(f"kernel is not ergodic ({why})")

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rows, dtype=dtype)

    def __getstate__(self):
        return {"rows": np.array(self.rows), "label": self.label}

    def __setstate__(self, state):
        object.__setattr__(self, "rows", state["rows"])
        object.__setattr__(self, "label", state["label"])
        self.rows.setflags(write=False)

    def __repr__(self):
        return f"TransitionKernel(m={self.m}, label={self.label!r})"


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    seed: int
    kernel_id: str = ""

    def __len__(self):
        return len(self.states)


def validate_kernel(rows, label: str = "") -> TransitionKernel:
    """Check shape, sign and row sums; renormalize rows off by at most 1e-9."""
    if isinstance(rows, TransitionKernel):
        return rows
    a = np.array(rows, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NonSquare(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] < 2:
        raise NonSquare("need at least 2 states")
    if not np.all(np.isfinite(a)):
        raise NegativeEntry("matrix has non-finite entries")
    if np.any(a < 0):
        i, j = np.argwhere(a < 0)[0]
        raise NegativeEntry(f"entry ({i},{j}) = {a[i, j]} is negative")
    s = a.sum(axis=1)
    dev = np.abs(s - 1.0)
    if np.any(dev > RENORM_TOL):
        i = int(np.argmax(dev))
        raise RowSumViolation(f"row {i} sums to {s[i]!r}")
    a = a / s[:, None]
    return TransitionKernel(a, label)


def validate_distribution(p, m: int | None = None, strict: bool = False) -> np.ndarray:
    v = np.array(p, dtype=float).ravel()
    if m is not None and v.shape[0] != m:
        raise DimensionMismatch(f"distribution has length {v.shape[0]}, expected {m}")
    if not np.all(np.isfinite(v)) or np.any(v < 0):
        raise InvalidDistribution("distribution entries must be finite and nonnegative")
    s = v.sum()
    if abs(s - 1.0) > RENORM_TOL:
        raise InvalidDistribution(f"distribution sums to {s!r}")
    v = v / s
    if strict and np.any(v <= 0):
        raise InvalidDistribution("distribution must be strictly positive")
    return v


def _primitivity(P: np.ndarray) -> tuple[bool, str]:
    m = P.shape[0]
    A = P > 0
    # irreducibility: reachability closure
    R = A | np.eye(m, dtype=bool)
    for _ in range(int(np.ceil(np.log2(max(m, 2)))) + 1):
        R = (R.astype(np.int64) @ R.astype(np.int64)) > 0
    if not R.all():
        return False, "reducible"
    # Wielandt: primitive iff A^K > 0 with K = m^2 - 2m + 2
    K = m * m - 2 * m + 2
    result = None
    base = A.copy()
    k = K
    while k:
        if k & 1:
            result = base if result is None else (result.astype(np.int64) @ base.astype(np.int64)) > 0
        k >>= 1
        if k:
            base = (base.astype(np.int64) @ base.astype(np.int64)) > 0
    if result.all():
        return True, "primitive"
    return False, "periodic"


def _stationary(P: np.ndarray) -> np.ndarray:
    m = P.shape[0]
    if m <= DIRECT_SOLVE_MAX_M:
        A = np.vstack([P.T - np.eye(m), np.ones((1, m))])
        b = np.zeros(m + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
    else:
        pi = np.full(m, 1.0 / m)
        for _ in range(1_000_000):
            nxt = pi @ P
            if np.abs(nxt - pi).sum() <= 1e-13:
                pi = nxt
                break
            pi = nxt
        else:
            raise NoConvergence("power iteration for the stationary law did not converge")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(P) -> np.ndarray:
    """Stationary law of an ergodic kernel (read-only array)."""
    P = validate_kernel(P)
    P.require_ergodic()
    pi = P.stationary
    if np.abs(pi @ P.rows - pi).sum() > 1e-10 or np.any(pi <= 0):
        raise NoConvergence("stationary solve did not meet residual 1e-10")
    return pi


def is_ergodic(P) -> tuple[bool, str]:
    """``(True, "primitive")`` or ``(False, "reducible" | "periodic")``."""
    return validate_kernel(P).ergodicity


def l1_inf_distance(A, B) -> float:
    """Largest row-wise l1 distance."""
    a = np.asarray(A, dtype=float)
    b = np.asarray(B, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return float(np.abs(a - b).sum(axis=1).max())


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox stream for ``seed``."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def run_seed(seed: int, run_index: int) -> int:
    return int(seed) ^ int(run_index)


def simulate(P, mu, horizon: int, seed: int) -> Trajectory:
    """Sample ``X_0 ~ mu`` and ``horizon`` transitions of ``P`` using a Philox stream."""
    P = validate_kernel(P)
    mu = validate_distribution(mu, P.m)
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    rng = make_rng(seed)
    u = rng.random(horizon + 1)
    c0 = np.cumsum(mu)
    c0[np.flatnonzero(mu)[-1]:] = 1.0
    x0 = int(np.searchsorted(c0, u[0], side="right"))
    states = _jit.simulate_path(P.cdf, x0, u[1:])
    states.setflags(write=False)
    return Trajectory(states, int(seed), P.label)


def exponential_tilt(P0, f, theta: float, tol: float = 1e-12, max_iter: int = 100_000) -> TransitionKernel:
    """Member ``P_theta`` of the exponential family generated by ``P0`` and ``f``.

    ``P_theta(i, j) = P0(i, j) exp(theta f_j) v(j) / (rho v(i))`` with
    ``(rho, v)`` the Perron pair of the tilted matrix.
    """
    P0 = validate_kernel(P0)
    f = np.asarray(f, dtype=float)
    if f.shape != (P0.m,):
        raise DimensionMismatch(f"f has shape {f.shape}, expected ({P0.m},)")
    if theta == 0.0:
        return TransitionKernel(np.array(P0.rows), P0.label)
    rho, v, _ = perron_pair(P0.rows * np.exp(theta * f)[None, :], tol, max_iter)
    return _tilt_from_pair(P0.rows, f, theta, rho, v)


def perron_pair(M: np.ndarray, tol: float = 1e-12, max_iter: int = 100_000):
    rho, v, it, ok = _jit.perron_pair(np.ascontiguousarray(M, dtype=float), tol, max_iter)
    if not ok or rho <= 0 or np.any(v <= 0):
        raise EigenFailure(f"Perron pair not found to tolerance {tol} in {max_iter} iterations")
    return rho, v, it


def _tilt_from_pair(P0, f, theta, rho, v):
    Pt = P0 * np.exp(theta * f)[None, :] * v[None, :] / (rho * v[:, None])
    Pt /= Pt.sum(axis=1, keepdims=True)
    return TransitionKernel(Pt, f"tilt({theta:g})")


def random_kernel(m: int, rng: np.random.Generator, concentration: float = 1.0) -> TransitionKernel:
    """Kernel with i.i.d. Dirichlet rows (strictly positive almost surely)."""
    rows = rng.dirichlet(np.full(m, concentration), size=m)
    rows = np.maximum(rows, 1e-12)
    return TransitionKernel(rows / rows.sum(axis=1, keepdims=True))


def densify(P, eps: float) -> TransitionKernel:
    """``(1 - eps) P + eps/m`` -- an ergodic kernel within ``2 eps`` of ``P`` in l1,inf.

    Never applied implicitly.
    """
    P = validate_kernel(P)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return TransitionKernel((1 - eps) * P.rows + eps / P.m, P.label)
