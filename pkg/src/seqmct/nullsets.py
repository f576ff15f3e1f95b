"""Composite hypothesis classes and weighted-KL projections onto them.

Every class exposes ``project(weights, Qhat, tol, warm)`` minimizing

    F(P) = sum_x w_x KL(Qhat(x,.) || P(x,.))

over its members, and ``membership_residual(P)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import minimize_scalar

from . import _jit
from .divergence import weighted_kl
from .errors import DimensionMismatch, Infeasible, InvalidDistribution, NotErgodic
from .markov import (
    TransitionKernel,
    exponential_tilt,
    l1_inf_distance,
    perron_pair,
    stationary_distribution,
    validate_distribution,
    validate_kernel,
)

DEFAULT_TOL = 1e-6


@dataclass
class ProjectionResult:
    value: float
    argmin: TransitionKernel
    iterations: int
    converged: bool
    gap_estimate: float
    warm: Any = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            "value": self.value,
            "argmin": np.asarray(self.argmin.rows).tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "gap_estimate": self.gap_estimate,
        }


def _check_inputs(weights, Qhat, m):
    w = np.asarray(weights, dtype=float).ravel()
    Q = np.asarray(Qhat, dtype=float)
    if Q.shape != (m, m) or w.shape != (m,):
        raise DimensionMismatch(f"expected {m} weights and a {m}x{m} kernel, got {w.shape} and {Q.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    return w, Q


class NullSet:
    """Base class; subclasses set ``kind`` and ``m``."""

    kind = "abstract"
    m: int

    def project(self, weights, Qhat, tol: float = DEFAULT_TOL, warm=None) -> ProjectionResult:
        raise NotImplementedError

    def membership_residual(self, P) -> float:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "m": self.m}


# --------------------------------------------------------------------------- singleton


class Singleton(NullSet):
    kind = "singleton"

    def __init__(self, P0):
        self.P0 = validate_kernel(P0)
        self.m = self.P0.m

    def project(self, weights, Qhat, tol=DEFAULT_TOL, warm=None):
        w, Q = _check_inputs(weights, Qhat, self.m)
        v = weighted_kl(w, Q, self.P0.rows)
        return ProjectionResult(v, self.P0, 0, bool(np.isfinite(v)), 0.0)

    def membership_residual(self, P):
        return l1_inf_distance(validate_kernel(P).rows, self.P0.rows)


# --------------------------------------------------------------------------- stationary polytope


@dataclass
class _BarrierState:
    P: np.ndarray
    mu: float
    W: float
    value: float = float("nan")


def project_simplex_rows(Y: np.ndarray) -> np.ndarray:
    """Euclidean projection of every row of ``Y`` onto the probability simplex."""
    n, m = Y.shape
    U = -np.sort(-Y, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, m + 1)
    cond = U - css / idx > 0
    rho = m - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(Y - theta[:, None], 0.0)


def project_polytope_euclidean(Y: np.ndarray, pi: np.ndarray, max_iter: int = 20000, tol: float = 1e-13):
    """Dykstra's algorithm for the nearest matrix with simplex rows and ``pi P = pi``."""
    x = np.array(Y, dtype=float)
    p = np.zeros_like(x)
    nrm = pi @ pi
    for _ in range(max_iter):
        y = project_simplex_rows(x + p)
        p = x + p - y
        r = pi @ y - pi
        x_new = y - np.outer(pi, r) / nrm
        if np.abs(x_new - x).max() <= tol and np.abs(r).max() <= tol:
            return y
        x = x_new
    return project_simplex_rows(x)


class StationaryPolytope(NullSet):
    """All kernels that leave a fixed, strictly positive ``pi`` invariant.

    ``method="newton"`` (default) runs a primal log-barrier path-following
    Newton method; ``gap_estimate`` bounds the suboptimality of the returned
    point.  Successive calls can pass the previous result's ``warm`` state,
    which is always feasible because the constraints do not depend on the data.  ``method="pgd"`` is an
    independent projected-gradient solver (Dykstra projections) kept for
    cross-checking.
    """

    kind = "stationary"

    def __init__(self, pi_target, method: str = "newton"):
        pi = validate_distribution(pi_target)
        if np.any(pi <= 0):
            raise InvalidDistribution("target distribution must be strictly positive")
        if pi.shape[0] < 2:
            raise InvalidDistribution("need at least 2 states")
        if method not in ("newton", "pgd"):
            raise ValueError(f"unknown method {method!r}")
        self.pi = pi
        self.m = pi.shape[0]
        self.method = method

    def describe(self):
        return {"kind": self.kind, "m": self.m, "pi": self.pi.tolist()}

    def membership_residual(self, P):
        P = validate_kernel(P)
        return float(np.abs(self.pi @ P.rows - self.pi).sum())

    def project(self, weights, Qhat, tol=DEFAULT_TOL, warm=None, start=None, method=None):
        w, Q = _check_inputs(weights, Qhat, self.m)
        method = method or self.method
        if method == "pgd":
            return self._project_pgd(w, Q, tol, start)
        return self._project_newton(w, Q, tol, warm)

    # primal barrier Newton ---------------------------------------------------------

    def _project_newton(self, w, Q, tol, warm):
        c = np.ascontiguousarray(w[:, None] * Q)
        c[c < 0] = 0.0
        W = float(c.sum())
        if W <= 0:
            P = np.tile(self.pi, (self.m, 1))
            return ProjectionResult(0.0, TransitionKernel(P), 0, True, 0.0)
        need = c > 0
        n0 = int((~need).sum())
        const = float((c[need] * np.log(Q[need])).sum())
        floor = 1e-12 * W
        mu0 = 1e-3 * W / max(n0, 1)
        if isinstance(warm, _BarrierState) and warm.P.shape == (self.m, self.m):
            P = warm.P.copy()
            mu = min(warm.mu * W / warm.W, mu0) if warm.mu > 0 else mu0
        else:
            P = np.tile(self.pi, (self.m, 1))
            mu = mu0
        iters = 0
        best = None
        restarted = False
        while True:
            try:
                half_dec, it, ok = _jit.barrier_stage(c, self.pi, P, mu if n0 else 0.0, 100)
            except np.linalg.LinAlgError:
                half_dec, it, ok = np.inf, 0, False
            iters += it
            if not ok or not np.all(P > 0):
                if best is None and not restarted:
                    # warm point unusable: restart from the centre of the polytope
                    restarted = True
                    P = np.tile(self.pi, (self.m, 1))
                    mu = mu0
                    continue
                if best is None:
                    res = self._project_pgd(w, Q, tol, None)
                    res.iterations += iters
                    return res
                P, mu, gap = best
                converged = False
                break
            gap = mu * n0 + half_dec
            value = const - float((c[need] * np.log(P[need])).sum())
            best = (P.copy(), mu, gap)
            if n0 == 0 or gap <= max(0.5 * tol * value, floor):
                converged = True
                break
            mu *= 0.01
        state = _BarrierState(P.copy(), mu, W)
        P = P / P.sum(axis=1, keepdims=True)
        value = weighted_kl(w, Q, P)
        state.value = value
        return ProjectionResult(value, TransitionKernel(P), int(iters), converged, float(gap), state)

    # projected gradient ------------------------------------------------------------

    def _project_pgd(self, w, Q, tol, start, max_iter: int = 50000):
        c = w[:, None] * Q
        W = c.sum()
        if W <= 0:
            P = np.tile(self.pi, (self.m, 1))
            return ProjectionResult(0.0, TransitionKernel(P), 0, True, 0.0)
        c = c / W
        need = c > 0
        interior = np.tile(self.pi, (self.m, 1))
        if start is None:
            P = project_polytope_euclidean(Q, self.pi)
        else:
            P = np.array(validate_kernel(start).rows)
        P = (1 - 1e-3) * P + 1e-3 * interior

        def h(X):
            return -float((c[need] * np.log(X[need])).sum())

        fx = h(P)
        step = 1.0
        it = 0
        converged = False
        for it in range(1, max_iter + 1):
            grad = np.zeros_like(P)
            grad[need] = -c[need] / P[need]
            while True:
                Pn = project_polytope_euclidean(P - step * grad, self.pi)
                if np.all(Pn[need] > 1e-12):
                    d = Pn - P
                    fn = h(Pn)
                    if fn <= fx + (grad * d).sum() + (d * d).sum() / (2 * step) + 1e-15:
                        break
                step *= 0.5
                if step < 1e-20:
                    Pn, fn, d = P, fx, np.zeros_like(P)
                    break
            moved = np.abs(d).max()
            dec = fx - fn
            P, fx = Pn, fn
            step = min(step * 1.5, 1e6)
            if moved <= 1e-12 or dec <= 1e-3 * tol * max(abs(fx), 1e-12) and moved <= 1e-7:
                converged = True
                break
        value = weighted_kl(w, Q, P)
        return ProjectionResult(value, TransitionKernel(P), it, converged, float("nan"))


# --------------------------------------------------------------------------- linear class


class LinearClass(NullSet):
    """Kernels ``Phi mu^T Pi`` with ``||mu_s||_2 <= radius`` for every row ``s`` of ``mu``.

    ``Phi`` is (n x d) with n state-action pairs, ``Pi`` is (S x n) and maps
    next-state distributions to next-pair distributions.  Members must also
    be row-stochastic.  Projections are solved as exponential-cone programs
    (cvxpy with the Clarabel interior-point solver).
    """

    kind = "linear"

    def __init__(self, Phi, Pi_policy, d: int | None = None, radius: float | None = None, check: bool = True):
        Phi = np.array(Phi, dtype=float)
        Pi = np.array(Pi_policy, dtype=float)
        if Phi.ndim != 2 or Pi.ndim != 2:
            raise DimensionMismatch("Phi and Pi must be matrices")
        n, dd = Phi.shape
        if d is None:
            d = dd
        if d != dd:
            raise DimensionMismatch(f"Phi has {dd} columns but d = {d}")
        if Pi.shape[1] != n:
            raise DimensionMismatch(f"Pi has {Pi.shape[1]} columns, expected {n}")
        if np.any(np.linalg.norm(Phi, axis=1) > 1 + 1e-9):
            raise Infeasible("feature rows must have l2 norm at most 1")
        self.Phi = Phi
        self.Pi = Pi
        self.d = int(d)
        self.S = Pi.shape[0]
        self.m = n
        self.radius = float(math.sqrt(d) if radius is None else radius)
        self._problems = {}
        if check:
            self._feasibility_check()

    def describe(self):
        return {"kind": self.kind, "m": self.m, "d": self.d, "S": self.S, "radius": self.radius}

    def __getstate__(self):
        st = dict(self.__dict__)
        st["_problems"] = {}
        return st

    def kernel_of(self, mu: np.ndarray) -> np.ndarray:
        return self.Phi @ mu.T @ self.Pi

    def _base_constraints(self, cp, mu):
        P = self.Phi @ mu.T @ self.Pi
        return P, [P >= 0, cp.sum(P, axis=1) == 1, cp.norm(mu, 2, axis=1) <= self.radius]

    def _feasibility_check(self):
        import cvxpy as cp

        mu = cp.Variable((self.S, self.d))
        _, cons = self._base_constraints(cp, mu)
        prob = cp.Problem(cp.Minimize(cp.sum_squares(mu)), cons)
        try:
            prob.solve(solver=cp.CLARABEL)
        except cp.SolverError as exc:
            raise Infeasible(f"linear class feasibility check failed: {exc}") from exc
        if prob.status not in ("optimal", "optimal_inaccurate"):
            raise Infeasible(f"linear class is empty (solver status {prob.status})")

    def _problem(self, mask: np.ndarray):
        key = mask.tobytes()
        if key in self._problems:
            return self._problems[key]
        import cvxpy as cp

        idx = np.flatnonzero(mask.ravel())
        mu = cp.Variable((self.S, self.d))
        P, cons = self._base_constraints(cp, mu)
        cpar = cp.Parameter(len(idx), nonneg=True)
        obj = cp.Maximize(cpar @ cp.log(cp.reshape(P, (self.m * self.m,), order="C")[idx]))
        prob = cp.Problem(obj, cons)
        entry = (prob, mu, cpar, idx)
        if len(self._problems) > 64:
            self._problems.clear()
        self._problems[key] = entry
        return entry

    def project(self, weights, Qhat, tol=DEFAULT_TOL, warm=None):
        import cvxpy as cp

        w, Q = _check_inputs(weights, Qhat, self.m)
        c = w[:, None] * Q
        W = c.sum()
        mask = c > 0
        if W <= 0:
            return ProjectionResult(0.0, self._fallback_kernel(), 0, True, 0.0)
        prob, mu, cpar, idx = self._problem(mask)
        cpar.value = c.ravel()[idx] / W
        # an inaccurate solve is reported through ``converged`` instead of a warning
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            try:
                prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
            except cp.SolverError:
                prob.solve(solver=cp.SCS, eps=1e-9)
        status = prob.status
        if status in ("infeasible", "infeasible_inaccurate"):
            raise Infeasible("linear class projection reported infeasible")
        if mu.value is None or status in ("unbounded", "unbounded_inaccurate"):
            # every member vanishes on an observed transition
            return ProjectionResult(float("inf"), self._fallback_kernel(), 0, False, float("nan"))
        P = np.clip(self.kernel_of(mu.value), 0.0, None)
        P /= P.sum(axis=1, keepdims=True)
        value = weighted_kl(w, Q, P)
        iters = int(prob.solver_stats.num_iters or 0) if prob.solver_stats else 0
        return ProjectionResult(value, TransitionKernel(P), iters, status == "optimal", float("nan"), mu.value)

    def _fallback_kernel(self):
        return TransitionKernel(np.full((self.m, self.m), 1.0 / self.m))

    def membership_residual(self, P):
        """Frobenius distance from ``P`` to the closest factorization in the class."""
        P = validate_kernel(P).rows
        if P.shape != (self.m, self.m):
            raise DimensionMismatch("kernel size does not match the class")
        A = np.kron(self.Pi.T, self.Phi)  # vec(Phi mu^T Pi) = (Pi^T kron Phi) vec(mu^T)
        sol, *_ = np.linalg.lstsq(A, P.ravel(order="F"), rcond=None)
        muT = sol.reshape(self.d, self.S, order="F")
        if np.all(np.linalg.norm(muT, axis=0) <= self.radius + 1e-12):
            return float(np.linalg.norm(self.Phi @ muT @ self.Pi - P))
        import cvxpy as cp

        mu = cp.Variable((self.S, self.d))
        prob = cp.Problem(
            cp.Minimize(cp.norm(self.Phi @ mu.T @ self.Pi - P, "fro")),
            [cp.norm(mu, 2, axis=1) <= self.radius],
        )
        prob.solve(solver=cp.CLARABEL)
        return float(np.linalg.norm(self.kernel_of(mu.value) - P))


# --------------------------------------------------------------------------- tilt interval


class ParametricInterval(NullSet):
    """``{P_theta : theta in [lo, hi]}`` for the exponential tilt of ``P0`` by ``f``."""

    kind = "tilt"
    n_grid = 50

    def __init__(self, P0, f, theta_lo: float, theta_hi: float):
        P0 = validate_kernel(P0)
        if not P0.ergodic:
            raise NotErgodic("base kernel of the tilt family must be ergodic")
        f = np.asarray(f, dtype=float)
        if f.shape != (P0.m,):
            raise DimensionMismatch(f"f has shape {f.shape}, expected ({P0.m},)")
        if not theta_lo <= theta_hi:
            raise ValueError("theta_lo must not exceed theta_hi")
        self.P0 = P0
        self.f = f
        self.lo = float(theta_lo)
        self.hi = float(theta_hi)
        self.m = P0.m
        self._logP0 = np.where(P0.rows > 0, np.log(np.where(P0.rows > 0, P0.rows, 1.0)), -np.inf)
        self._grid = None

    def describe(self):
        return {"kind": self.kind, "m": self.m, "theta_lo": self.lo, "theta_hi": self.hi, "f": self.f.tolist()}

    def __getstate__(self):
        st = dict(self.__dict__)
        st["_grid"] = None
        return st

    def log_kernel(self, theta: float) -> np.ndarray:
        """Entrywise log of ``P_theta`` (``-inf`` off the support of ``P0``)."""
        if theta == 0.0:
            return self._logP0
        rho, v, _ = perron_pair(self.P0.rows * np.exp(theta * self.f)[None, :])
        lv = np.log(v)
        return self._logP0 + theta * self.f[None, :] + lv[None, :] - lv[:, None] - math.log(rho)

    def kernel(self, theta: float) -> TransitionKernel:
        return exponential_tilt(self.P0, self.f, theta)

    def _grid_cache(self):
        if self._grid is None:
            thetas = np.linspace(self.lo, self.hi, self.n_grid) if self.hi > self.lo else np.array([self.lo])
            self._grid = (thetas, np.stack([self.log_kernel(t) for t in thetas]))
        return self._grid

    @staticmethod
    def _objective(c, logP, const):
        need = c > 0
        if np.any(np.isneginf(logP[need])):
            return float("inf")
        return const - float((c[need] * logP[need]).sum())

    def project(self, weights, Qhat, tol=DEFAULT_TOL, warm=None):
        w, Q = _check_inputs(weights, Qhat, self.m)
        c = w[:, None] * Q
        need = c > 0
        const = float((c[need] * np.log(Q[need])).sum())
        thetas, logPs = self._grid_cache()
        if need.any() and np.any(np.isneginf(logPs[0][need])):
            P = self.kernel(self.lo)
            return ProjectionResult(float("inf"), P, 0, False, float("nan"))
        vals = const - np.einsum("ij,kij->k", np.where(need, c, 0.0), np.where(need, logPs, 0.0))
        k = int(np.argmin(vals))
        evals = len(thetas)
        if len(thetas) == 1:
            theta = thetas[0]
        else:
            a = thetas[max(k - 1, 0)]
            b = thetas[min(k + 1, len(thetas) - 1)]
            opt = minimize_scalar(
                lambda t: self._objective(c, self.log_kernel(t), const),
                bounds=(a, b),
                method="bounded",
                options={"xatol": 1e-9},
            )
            theta = float(opt.x)
            evals += int(opt.nfev)
            if self._objective(c, self.log_kernel(theta), const) > vals[k]:
                theta = thetas[k]
        P = self.kernel(theta)
        value = weighted_kl(w, Q, P.rows)
        return ProjectionResult(max(value, 0.0), P, evals, True, float("nan"), theta)

    @staticmethod
    def _golden(fun, a, b, xtol=1e-9):
        invphi = (math.sqrt(5) - 1) / 2
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = fun(c), fun(d)
        n = 2
        while b - a > xtol:
            if fc <= fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = fun(c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = fun(d)
            n += 1
        return (c if fc <= fd else d), n

    def membership_residual(self, P):
        """Distance of the best-fitting parameter to the interval plus the fit error."""
        P = validate_kernel(P).rows
        span = self.hi - self.lo + 1.0
        lo, hi = self.lo - 5 * span, self.hi + 5 * span

        def fit(t):
            return l1_inf_distance(exponential_tilt(self.P0, self.f, t).rows, P)

        grid = np.linspace(lo, hi, 201)
        errs = [fit(t) for t in grid]
        k = int(np.argmin(errs))
        t, _ = self._golden(fit, grid[max(k - 1, 0)], grid[min(k + 1, 200)], 1e-12)
        dist = max(self.lo - t, 0.0, t - self.hi)
        r = fit(t) + dist
        return 0.0 if r <= 1e-10 else float(r)


# --------------------------------------------------------------------------- union


class FiniteUnion(NullSet):
    kind = "union"

    def __init__(self, members):
        members = list(members)
        if not members:
            raise Infeasible("a union needs at least one member")
        ms = {s.m for s in members}
        if len(ms) != 1:
            raise DimensionMismatch("union members have different state counts")
        self.members = members
        self.m = ms.pop()

    def describe(self):
        return {"kind": self.kind, "m": self.m, "members": [s.describe() for s in self.members]}

    def project(self, weights, Qhat, tol=DEFAULT_TOL, warm=None):
        warms = warm if isinstance(warm, list) and len(warm) == len(self.members) else [None] * len(self.members)
        results = [s.project(weights, Qhat, tol, wv) for s, wv in zip(self.members, warms)]
        best = min(range(len(results)), key=lambda i: results[i].value)
        r = results[best]
        return ProjectionResult(
            r.value,
            r.argmin,
            sum(x.iterations for x in results),
            r.converged,
            r.gap_estimate,
            [x.warm for x in results],
        )

    def membership_residual(self, P):
        return min(s.membership_residual(P) for s in self.members)


# --------------------------------------------------------------------------- module-level API


def project_weighted_kl(weights, Qhat, S: NullSet, tol: float = DEFAULT_TOL, warm=None) -> ProjectionResult:
    """Minimize ``sum_x w_x KL(Qhat(x,.) || P(x,.))`` over ``P`` in ``S``."""
    return S.project(weights, np.asarray(Qhat, dtype=float), tol, warm)


def d_m_inf(Q, S: NullSet, tol: float = DEFAULT_TOL) -> ProjectionResult:
    """Infimum of the stationary-weighted KL from ``Q`` to the class ``S``."""
    Q = validate_kernel(Q)
    return project_weighted_kl(stationary_distribution(Q), Q.rows, S, tol)


def membership_residual(P, S: NullSet) -> float:
    return S.membership_residual(P)
