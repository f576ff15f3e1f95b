"""Sequential test engine: one-sided generalized likelihood-ratio test and its two-sided composition.

The statistic after ``t`` observed transitions is

    L_t = inf_{P in null} sum_{x: N_x > 0} N_x KL(Qhat_t(x,.) || P(x,.))

and the test rejects the first time ``L_t >= beta_t`` with

    beta_t = log(1/alpha) + (m - 1) sum_x log(e (1 + N_x / (m - 1))).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionMismatch, InvalidState
from .markov import TransitionKernel, simulate, validate_distribution, validate_kernel
from .nullsets import DEFAULT_TOL, NullSet

RUNNING = "running"
REJECTED = "rejected"
CENSORED = "censored"

CSV_COLUMNS = ["run_id", "t", "L_t", "beta_t", "status", "tau", "decision", "seed"]


def default_check_interval(m: int) -> int:
    return 1 if m <= 10 else 100


def threshold(counts, alpha: float, m: int | None = None) -> float:
    """``log(1/alpha) + (m-1) * sum_x log(e (1 + N_x/(m-1)))``."""
    N = np.asarray(counts, dtype=float)
    if m is None:
        m = N.shape[0]
    if m < 2:
        raise ConfigError("threshold needs m >= 2")
    k = m - 1
    return -math.log(alpha) + k * float(np.sum(1.0 + np.log1p(N / k)))


@dataclass
class TestConfig:
    alpha: float
    null_set: NullSet
    check_interval: int | None = None
    max_horizon: int = 100_000
    solver_tol: float = DEFAULT_TOL

    __test__ = False

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError(f"alpha = {self.alpha} must lie in (0, 1]")
        if self.check_interval is None:
            self.check_interval = default_check_interval(self.null_set.m)
        if self.check_interval < 1:
            raise ConfigError("check_interval must be >= 1")
        if self.max_horizon < 1:
            raise ConfigError("max_horizon must be >= 1")


@dataclass
class TwoSidedConfig:
    alpha: float
    beta: float
    set_P: NullSet
    set_Q: NullSet
    check_interval: int | None = None
    max_horizon: int = 100_000
    solver_tol: float = DEFAULT_TOL

    def __post_init__(self):
        for name in ("alpha", "beta"):
            v = getattr(self, name)
            if not 0.0 < v < 0.5:
                raise ConfigError(f"{name} = {v} must lie in (0, 0.5)")
        if self.set_P.m != self.set_Q.m:
            raise DimensionMismatch("the two hypothesis classes have different state counts")
        if self.check_interval is None:
            self.check_interval = default_check_interval(self.set_P.m)

    def side(self, which: str) -> TestConfig:
        if which == "P":
            return TestConfig(self.alpha, self.set_P, self.check_interval, self.max_horizon, self.solver_tol)
        return TestConfig(self.beta, self.set_Q, self.check_interval, self.max_horizon, self.solver_tol)


@dataclass
class TestState:
    """Running counts and statistic of one test; mutated in place by :func:`step`."""

    m: int
    x_prev: int
    t: int = 0
    Nx: np.ndarray = None
    Nxy: np.ndarray = None
    L: float = 0.0
    beta: float = float("nan")
    status: str = RUNNING
    tau: int | None = None
    trace: list = field(default_factory=list)
    warm: object = field(default=None, repr=False)

    __test__ = False

    def __post_init__(self):
        if self.Nx is None:
            self.Nx = np.zeros(self.m, dtype=np.int64)
        if self.Nxy is None:
            self.Nxy = np.zeros((self.m, self.m), dtype=np.int64)

    @property
    def Qhat(self) -> np.ndarray:
        """Empirical kernel; unvisited rows are uniform."""
        Q = np.full((self.m, self.m), 1.0 / self.m)
        seen = self.Nx > 0
        Q[seen] = self.Nxy[seen] / self.Nx[seen, None]
        return Q


def init_state(m: int, x0: int) -> TestState:
    if not 0 <= x0 < m:
        raise DimensionMismatch(f"initial state {x0} outside [0, {m})")
    return TestState(m=m, x_prev=int(x0))


def _evaluate(state: TestState, config: TestConfig):
    res = config.null_set.project(state.Nx.astype(float), state.Qhat, config.solver_tol, state.warm)
    state.warm = res.warm
    state.L = float(res.value)
    state.beta = threshold(state.Nx, config.alpha, state.m)
    if state.L >= state.beta:
        state.status = REJECTED
        state.tau = state.t
    elif state.t >= config.max_horizon:
        state.status = CENSORED
    state.trace.append((state.t, state.L, state.beta))


def _due(t: int, config: TestConfig) -> bool:
    return t % config.check_interval == 0 or t >= config.max_horizon


def step(state: TestState, config: TestConfig, x_next: int) -> TestState:
    """Absorb one transition ``x_prev -> x_next`` and evaluate the test if a check is due."""
    if state.status != RUNNING:
        raise InvalidState(f"cannot step a test in status {state.status!r}")
    if not 0 <= x_next < state.m:
        raise DimensionMismatch(f"state {x_next} outside [0, {state.m})")
    x = state.x_prev
    state.Nx[x] += 1
    state.Nxy[x, x_next] += 1
    state.t += 1
    state.x_prev = int(x_next)
    if _due(state.t, config):
        _evaluate(state, config)
    return state


def _advance(state: TestState, path: np.ndarray, t_new: int):
    """Bulk-count the transitions ``path[state.t] -> ... -> path[t_new]``."""
    src = path[state.t : t_new]
    dst = path[state.t + 1 : t_new + 1]
    m = state.m
    state.Nx += np.bincount(src, minlength=m)
    state.Nxy += np.bincount(src * m + dst, minlength=m * m).reshape(m, m)
    state.t = t_new
    state.x_prev = int(path[t_new])


def check_times(config: TestConfig, horizon: int | None = None):
    H = config.max_horizon if horizon is None else horizon
    ci = config.check_interval
    ts = list(range(ci, H + 1, ci))
    if not ts or ts[-1] != H:
        ts.append(H)
    return ts


def run_path(path: np.ndarray, config: TestConfig, m: int) -> TestState:
    """Run the test along a pre-simulated path (``len(path) >= max_horizon + 1``)."""
    state = init_state(m, int(path[0]))
    for t in check_times(config):
        _advance(state, path, t)
        _evaluate(state, config)
        if state.status != RUNNING:
            break
    return state


# --------------------------------------------------------------------------- records


@dataclass
class RunRecord:
    """Outcome of one Monte Carlo trajectory."""

    run_id: str
    seed: int
    status: str
    tau: int | None
    trace_t: np.ndarray
    trace_L: np.ndarray
    trace_beta: np.ndarray
    decision: int | None = None
    sides: dict = field(default_factory=dict)

    @classmethod
    def from_state(cls, run_id, seed, state: TestState):
        tr = np.array(state.trace, dtype=float).reshape(-1, 3)
        return cls(
            str(run_id),
            int(seed),
            state.status,
            state.tau,
            tr[:, 0].astype(np.int64),
            tr[:, 1],
            tr[:, 2],
        )

    @property
    def stopped_at(self) -> int:
        if len(self.trace_t):
            return int(self.trace_t[-1])
        return max((r.stopped_at for r in self.sides.values()), default=0)

    def csv_rows(self):
        rows = []
        if self.sides:
            for name in sorted(self.sides):
                rows.extend(self.sides[name].csv_rows())
        n = len(self.trace_t)
        for i in range(n):
            st = RUNNING if i < n - 1 else self.status
            rows.append(
                [self.run_id, int(self.trace_t[i]), fmt(self.trace_L[i]), fmt(self.trace_beta[i]), st, "", "", self.seed]
            )
        tau = "" if self.tau is None else int(self.tau)
        dec = "" if self.decision is None else int(self.decision)
        if n:
            last = [int(self.trace_t[-1]), fmt(self.trace_L[-1]), fmt(self.trace_beta[-1])]
        else:
            last = [self.stopped_at, "", ""]
        rows.append([self.run_id, *last, self.status, tau, dec, self.seed])
        return rows

    def to_dict(self):
        d = {
            "run_id": self.run_id,
            "seed": self.seed,
            "status": self.status,
            "tau": self.tau,
            "decision": self.decision,
            "checks": len(self.trace_t),
        }
        if self.sides:
            d["sides"] = {k: v.to_dict() for k, v in self.sides.items()}
        return d


def fmt(x) -> str:
    return format(float(x), ".12g")


def write_records_csv(records, fh=None) -> str:
    """Serialize records (header + rows, LF endings); returns the text when ``fh`` is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerows(r.csv_rows())
    return buf.getvalue() if fh is None else ""


# --------------------------------------------------------------------------- drivers


def _path(P_gen, mu, horizon, seed):
    P_gen = validate_kernel(P_gen)
    mu = validate_distribution(mu, P_gen.m)
    return P_gen, simulate(P_gen, mu, horizon, seed).states


def run_one_sided(P_gen, mu, config: TestConfig, seed: int, run_id="0") -> RunRecord:
    """Simulate from ``P_gen`` and run the test until rejection or ``max_horizon``."""
    P_gen, path = _path(P_gen, mu, config.max_horizon, seed)
    if P_gen.m != config.null_set.m:
        raise DimensionMismatch("generator and null class have different state counts")
    state = run_path(path, config, P_gen.m)
    return RunRecord.from_state(run_id, seed, state)


def run_alpha_sweep(P_gen, mu, config: TestConfig, alphas, seed: int, run_id="0") -> list[RunRecord]:
    """Common-random-numbers sweep: one path, one statistic trace, every ``alpha``.

    Each returned record equals ``run_one_sided`` at that ``alpha`` with the
    same seed, because the statistic does not depend on ``alpha`` and the
    projection warm starts follow the same sequence of checks.
    """
    alphas = [float(a) for a in alphas]
    P_gen, path = _path(P_gen, mu, config.max_horizon, seed)
    m = P_gen.m
    state = init_state(m, int(path[0]))
    cfg = TestConfig(min(alphas), config.null_set, config.check_interval, config.max_horizon, config.solver_tol)
    ts, Ls, psis = [], [], []
    k = m - 1
    for t in check_times(cfg):
        _advance(state, path, t)
        _evaluate(state, cfg)
        ts.append(t)
        Ls.append(state.L)
        psis.append(k * float(np.sum(1.0 + np.log1p(state.Nx / k))))
        if state.status != RUNNING:
            break
    ts = np.array(ts, dtype=np.int64)
    Ls = np.array(Ls)
    psis = np.array(psis)
    out = []
    for a in alphas:
        beta = -math.log(a) + psis
        hit = np.flatnonzero(Ls >= beta)
        if hit.size:
            n = hit[0] + 1
            status, tau = REJECTED, int(ts[hit[0]])
        else:
            n = len(ts)
            status, tau = CENSORED, None
            if ts[-1] < config.max_horizon:  # cannot happen: smallest alpha stops last
                raise InvalidState("sweep ended before the horizon without rejection")
        out.append(RunRecord(str(run_id), int(seed), status, tau, ts[:n].copy(), Ls[:n].copy(), beta[:n].copy()))
    return out


def run_two_sided(gen, mu, config: TwoSidedConfig, seed: int, run_id="0") -> RunRecord:
    """Run the tests of both classes on one path; stop at the first rejection.

    Decision 1 (reject the P-class) when its test fires no later than the
    Q-class test, decision 0 when only the Q-class test fires first, and no
    decision when neither fires before the horizon.
    """
    gen, path = _path(gen, mu, config.max_horizon, seed)
    m = gen.m
    cfgP, cfgQ = config.side("P"), config.side("Q")
    sP = init_state(m, int(path[0]))
    sQ = init_state(m, int(path[0]))
    for t in check_times(cfgP):
        _advance(sP, path, t)
        _advance(sQ, path, t)
        _evaluate(sP, cfgP)
        _evaluate(sQ, cfgQ)
        if sP.status == REJECTED or sQ.status == REJECTED:
            break
        if sP.status != RUNNING:
            break
    recP = RunRecord.from_state(f"{run_id}-P", seed, sP)
    recQ = RunRecord.from_state(f"{run_id}-Q", seed, sQ)
    if sP.status == REJECTED:
        status, tau, decision = REJECTED, sP.tau, 1
    elif sQ.status == REJECTED:
        status, tau, decision = REJECTED, sQ.tau, 0
    else:
        status, tau, decision = CENSORED, None, None
    empty = np.zeros(0)
    return RunRecord(
        str(run_id),
        int(seed),
        status,
        tau,
        np.zeros(0, dtype=np.int64),
        empty,
        empty,
        decision,
        {"P": recP, "Q": recQ},
    )
