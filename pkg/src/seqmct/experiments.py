"""Scenario definitions and the Monte Carlo harness around the sequential tests.

A scenario fixes a generator kernel, one (or two) hypothesis classes, an
alpha grid and a run budget.  Every run ``i`` draws its path from the Philox
stream ``run_seed(seed, i)``; all alphas share that path (common random
numbers).  Outputs go to ``out_dir/<name>/{traces.csv, summary.csv, report.json}``.

Scenario JSON schema (keys not listed take their defaults)::

    {
      "name": "mcmc_bad",
      "mode": "one_sided" | "two_sided",
      "generator": KERNEL,
      "null": NULL,                 # the P-class in two-sided mode
      "alternative": NULL,          # the Q-class, two-sided only
      "alpha_grid": [0.05],
      "beta": null,                 # two-sided; defaults to each alpha
      "runs": 100, "horizon": 100000, "check_interval": null, "seed": 0,
      "mu": null                    # initial law; default = generator's stationary law
    }

KERNEL is a list of rows, a built-in name (``qbad``, ``qgood``), a file path,
or a dict with ``kind`` in ``kernel`` (``rows``), ``file`` (``path``),
``tilt`` (``theta``, ``f``, optional ``P0`` / ``P0_seed``) or ``linear_mdp``
(``S``, ``A``, ``seed``).  NULL is a mini-language string (see
:func:`seqmct.fileio.parse_null`) or a dict with ``kind`` in ``singleton``
(``kernel``), ``stationary`` (``pi``), ``tilt`` (``lo``, ``hi``, ``f``,
optional ``P0`` / ``P0_seed``), ``linear`` (``d``, ``S``, ``A``, ``seed``)
or ``union`` (``members``).
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import fileio
from .bounds import one_sided_lower_bound, two_sided_lower_bounds
from .divergence import row_kl
from .errors import ConfigError, SeqmctError
from .markov import (
    TransitionKernel,
    exponential_tilt,
    make_rng,
    random_kernel,
    run_seed,
    simulate,
    stationary_distribution,
    validate_distribution,
    validate_kernel,
)
from .nullsets import FiniteUnion, LinearClass, NullSet, ParametricInterval, Singleton, StationaryPolytope, d_m_inf
from .poisson import solve_poisson
from .sequential import (
    CENSORED,
    REJECTED,
    RunRecord,
    TestConfig,
    TwoSidedConfig,
    fmt,
    run_alpha_sweep,
    run_two_sided,
    write_records_csv,
)

FAILED = "failed"
MEMBERSHIP_TOL = 1e-8

Q_BAD = np.array(
    [
        [0.1, 0.5, 0.1, 0.1, 0.2],
        [0.2, 0.1, 0.4, 0.2, 0.1],
        [0.1, 0.1, 0.1, 0.6, 0.1],
        [0.3, 0.2, 0.1, 0.1, 0.3],
        [0.1, 0.1, 0.1, 0.1, 0.6],
    ]
)
Q_GOOD = np.array(
    [
        [0.5, 0.2, 0.0, 0.0, 0.3],
        [0.2, 0.5, 0.3, 0.0, 0.0],
        [0.0, 0.15, 0.5, 0.35, 0.0],
        [0.0, 0.0, 0.35, 0.5, 0.15],
        [0.075, 0.0, 0.0, 0.075, 0.85],
    ]
)
PI_TARGET = np.array([0.1, 0.1, 0.2, 0.2, 0.4])
TILT_F = np.array([1.0, 1.0, 0.0, -1.0, -1.0])
TILT_ALPHAS = [1e-1, 5e-2, 1e-2, 1e-3, 1e-4]

NAMED_KERNELS = {"qbad": Q_BAD, "qgood": Q_GOOD}


def tilt_base_kernel(seed: int = 0, m: int = 5) -> TransitionKernel:
    """Random base kernel of the tilt family (Dirichlet(1) rows, Philox ``seed``)."""
    return random_kernel(m, make_rng(seed))


def rbf_features(n: int, d: int) -> np.ndarray:
    """``d - 1`` Gaussian bumps over the pair index plus a bias column, rows summing to 1."""
    if d < 2:
        raise ConfigError("feature dimension must be at least 2")
    k = np.arange(n, dtype=float)[:, None]
    centers = np.linspace(0.0, n - 1.0, d - 1)[None, :]
    sigma = (n - 1.0) / max(d - 2, 1)
    Phi = np.hstack([np.exp(-0.5 * ((k - centers) / sigma) ** 2), np.ones((n, 1))])
    return Phi / Phi.sum(axis=1, keepdims=True)


def synthetic_linear_mdp(S: int = 8, A: int = 3, d: int = 3, seed: int = 0):
    """Seeded random MDP under the uniform policy.

    Returns ``(Q, Phi, Pi)``: the chain on state-action pairs, the RBF
    features and the policy matrix with ``Pi[s, s*A + a] = 1/A``.
    """
    rng = make_rng(seed)
    n = S * A
    p = rng.dirichlet(np.ones(S), size=n)
    Pi = np.zeros((S, n))
    for s in range(S):
        Pi[s, s * A : (s + 1) * A] = 1.0 / A
    return validate_kernel(p @ Pi, f"mdp(S={S},A={A},seed={seed})"), rbf_features(n, d), Pi


# --------------------------------------------------------------------------- spec resolution


def _base_kernel(spec, base_dir):
    if isinstance(spec, dict) and "P0" in spec:
        return build_kernel(spec["P0"], base_dir)
    return tilt_base_kernel(int(spec.get("P0_seed", 0)) if isinstance(spec, dict) else 0)


def build_kernel(spec, base_dir: str = ".") -> TransitionKernel:
    if isinstance(spec, TransitionKernel):
        return spec
    if isinstance(spec, (list, np.ndarray)):
        return validate_kernel(np.asarray(spec, dtype=float))
    if isinstance(spec, str):
        if spec in NAMED_KERNELS:
            return validate_kernel(NAMED_KERNELS[spec], spec)
        path = spec if os.path.isabs(spec) else os.path.join(base_dir, spec)
        return fileio.read_kernel(path)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"cannot interpret kernel spec {spec!r}")
    kind = spec["kind"]
    if kind == "kernel":
        return validate_kernel(np.asarray(spec["rows"], dtype=float))
    if kind == "file":
        return build_kernel(str(spec["path"]), base_dir)
    if kind == "named":
        return build_kernel(str(spec["name"]), base_dir)
    if kind == "tilt":
        f = np.asarray(spec.get("f", TILT_F), dtype=float)
        return exponential_tilt(_base_kernel(spec, base_dir), f, float(spec["theta"]))
    if kind == "linear_mdp":
        Q, _, _ = synthetic_linear_mdp(int(spec.get("S", 8)), int(spec.get("A", 3)), 2, int(spec.get("seed", 0)))
        return Q
    raise ConfigError(f"unknown kernel kind {kind!r}")


def build_null(spec, base_dir: str = ".") -> NullSet:
    if isinstance(spec, NullSet):
        return spec
    if isinstance(spec, str):
        return fileio.parse_null(spec, base_dir)
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"cannot interpret null spec {spec!r}")
    kind = spec["kind"]
    if kind == "singleton":
        return Singleton(build_kernel(spec["kernel"], base_dir))
    if kind == "stationary":
        return StationaryPolytope(np.asarray(spec.get("pi", PI_TARGET), dtype=float))
    if kind == "tilt":
        f = np.asarray(spec.get("f", TILT_F), dtype=float)
        return ParametricInterval(_base_kernel(spec, base_dir), f, float(spec["lo"]), float(spec["hi"]))
    if kind == "linear":
        _, Phi, Pi = synthetic_linear_mdp(int(spec.get("S", 8)), int(spec.get("A", 3)), int(spec["d"]), int(spec.get("seed", 0)))
        return LinearClass(Phi, Pi, int(spec["d"]))
    if kind == "union":
        return FiniteUnion([build_null(s, base_dir) for s in spec["members"]])
    raise ConfigError(f"unknown null kind {kind!r}")


# --------------------------------------------------------------------------- scenarios


@dataclass
class Scenario:
    name: str
    generator: object
    null: object
    alpha_grid: list = field(default_factory=lambda: [0.05])
    runs: int = 100
    horizon: int = 100_000
    check_interval: int | None = None
    seed: int = 0
    mode: str = "one_sided"
    alternative: object = None
    beta: float | None = None
    mu: list | None = None
    base_dir: str = "."

    def __post_init__(self):
        if self.mode not in ("one_sided", "two_sided"):
            raise ConfigError(f"mode must be one_sided or two_sided, got {self.mode!r}")
        self.alpha_grid = [float(a) for a in self.alpha_grid]
        if not self.alpha_grid:
            raise ConfigError("alpha_grid is empty")
        for a in self.alpha_grid:
            if not 0.0 < a < 1.0:
                raise ConfigError(f"alpha {a} outside (0, 1)")
        if self.runs < 1 or self.horizon < 1:
            raise ConfigError("runs and horizon must be positive")
        if self.mode == "two_sided" and self.alternative is None:
            raise ConfigError("two-sided scenarios need an 'alternative' class")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str = "."):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown scenario keys: {sorted(extra)}")
        for key in ("name", "generator", "null"):
            if key not in d:
                raise ConfigError(f"scenario is missing {key!r}")
        d = dict(d)
        d.setdefault("base_dir", base_dir)
        return cls(**d)

    @classmethod
    def from_file(cls, path):
        return cls.from_dict(fileio.load_json(path), os.path.dirname(os.path.abspath(path)))

    def resolve(self):
        """Build ``(generator, null, alternative, mu)``."""
        gen = build_kernel(self.generator, self.base_dir)
        gen.require_ergodic()
        null = build_null(self.null, self.base_dir)
        alt = build_null(self.alternative, self.base_dir) if self.alternative is not None else None
        if null.m != gen.m or (alt is not None and alt.m != gen.m):
            raise ConfigError("generator and hypothesis classes have different state counts")
        mu = stationary_distribution(gen) if self.mu is None else validate_distribution(self.mu, gen.m)
        return gen, null, alt, mu


def builtin_scenario(name: str, **overrides) -> Scenario:
    """Named experiment set-ups; keyword arguments override fields."""
    tilt = lambda lo, hi: {"kind": "tilt", "lo": lo, "hi": hi}  # noqa: E731
    table = {
        "mcmc_bad": dict(generator="qbad", null={"kind": "stationary", "pi": PI_TARGET.tolist()}, alpha_grid=[0.05]),
        "mcmc_good": dict(
            generator="qgood", null={"kind": "stationary", "pi": PI_TARGET.tolist()}, alpha_grid=[0.05], horizon=10_000
        ),
        "tilt_sweep": dict(generator={"kind": "tilt", "theta": -0.6}, null=tilt(0.4, 0.8), alpha_grid=TILT_ALPHAS),
        "two_sided_from_P": dict(
            mode="two_sided",
            generator={"kind": "tilt", "theta": 0.6},
            null=tilt(0.4, 0.8),
            alternative=tilt(-0.8, -0.4),
            alpha_grid=[0.05],
        ),
        "two_sided_from_Q": dict(
            mode="two_sided",
            generator={"kind": "tilt", "theta": -0.6},
            null=tilt(0.4, 0.8),
            alternative=tilt(-0.8, -0.4),
            alpha_grid=[0.05],
        ),
        "baseline": dict(
            generator={"kind": "tilt", "theta": -0.6},
            null={"kind": "singleton", "kernel": {"kind": "tilt", "theta": 0.2}},
            alpha_grid=TILT_ALPHAS,
        ),
    }
    for d in (3, 5, 7):
        table[f"linear_mdp_d{d}"] = dict(
            generator={"kind": "linear_mdp", "S": 8, "A": 3, "seed": 0},
            null={"kind": "linear", "d": d, "S": 8, "A": 3, "seed": 0},
            alpha_grid=[0.01],
            check_interval=100,
            runs=20,
        )
    if name not in table:
        raise ConfigError(f"unknown scenario {name!r}; choose from {sorted(table)}")
    cfg = dict(table[name])
    cfg.update(overrides)
    return Scenario(name=name, **cfg)


BUILTIN_SCENARIOS = (
    "mcmc_bad",
    "mcmc_good",
    "tilt_sweep",
    "two_sided_from_P",
    "two_sided_from_Q",
    "baseline",
    "linear_mdp_d3",
    "linear_mdp_d5",
    "linear_mdp_d7",
)


# --------------------------------------------------------------------------- summary


@dataclass
class SummaryStats:
    alpha: float
    runs: int
    rejected: int
    censored: int
    failed: int
    false_rejections: int
    wrong_decisions: int
    mean_tau: float
    std_tau: float
    mean_slope: float
    std_slope: float
    d_inf: float
    lower_bound: float
    lower_bound_general: float

    def to_dict(self):
        return asdict(self)


SUMMARY_COLUMNS = ["scenario"] + list(SummaryStats.__dataclass_fields__)


def tail_slope(t: np.ndarray, L: np.ndarray, tau: int | None = None) -> float:
    """Least-squares slope of ``L`` against ``t`` over the checks with ``t >= tau / 2``."""
    t = np.asarray(t, dtype=float)
    L = np.asarray(L, dtype=float)
    if t.size == 0:
        return float("nan")
    end = float(t[-1] if tau is None else tau)
    sel = (t >= 0.5 * end) & (t <= end)
    if sel.sum() < 2:
        return float("nan")
    ts, Ls = t[sel], L[sel]
    dt = ts - ts.mean()
    return float(dt @ (Ls - Ls.mean()) / (dt @ dt))


def _mean_std(x):
    x = np.asarray([v for v in x if v is not None and np.isfinite(v)], dtype=float)
    if x.size == 0:
        return float("nan"), float("nan")
    return float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0


def aligned_bands(records, max_points: int = 1000) -> dict:
    """Mean and mean +/- 3 sd of ``L_t`` across runs at each shared check index."""
    recs = [r for r in records if len(r.trace_t)]
    if not recs:
        return {"t": [], "mean": [], "lower": [], "upper": [], "count": []}
    n = max(len(r.trace_t) for r in recs)
    idx = np.unique(np.linspace(0, n - 1, min(n, max_points)).round().astype(int))
    M = np.full((len(recs), idx.size), np.nan)
    T = np.full(idx.size, np.nan)
    for i, r in enumerate(recs):
        k = idx < len(r.trace_t)
        M[i, k] = r.trace_L[idx[k]]
        T[k] = np.where(np.isnan(T[k]), r.trace_t[idx[k]], T[k])
    present = ~np.isnan(M)
    cnt = present.sum(axis=0)
    X = np.where(present, M, 0.0)
    mean = X.sum(axis=0) / cnt
    ss = (np.where(present, M - mean, 0.0) ** 2).sum(axis=0)
    sd = np.sqrt(ss / np.maximum(cnt - 1, 1))
    return {
        "t": T.astype(int).tolist(),
        "mean": mean.tolist(),
        "lower": (mean - 3 * sd).tolist(),
        "upper": (mean + 3 * sd).tolist(),
        "count": cnt.tolist(),
    }


def fit_tau_vs_log_alpha(alphas, mean_taus) -> dict:
    """Least-squares line ``mean tau = a + b log(1/alpha)``."""
    x = -np.log(np.asarray(alphas, dtype=float))
    y = np.asarray(mean_taus, dtype=float)
    ok = np.isfinite(y)
    if ok.sum() < 2:
        return {"slope": float("nan"), "intercept": float("nan"), "r2": float("nan"), "points": int(ok.sum())}
    b, a = np.polyfit(x[ok], y[ok], 1)
    pred = a + b * x[ok]
    ss = float(((y[ok] - y[ok].mean()) ** 2).sum())
    r2 = 1.0 - float(((y[ok] - pred) ** 2).sum()) / ss if ss > 0 else 1.0
    return {"slope": float(b), "intercept": float(a), "r2": r2, "points": int(ok.sum())}


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    return x


# --------------------------------------------------------------------------- harness


def _run_task(args):
    mode, gen, mu, config, alphas, seed, i = args
    rid = str(i)
    try:
        if mode == "one_sided":
            return run_alpha_sweep(gen, mu, config, alphas, seed, rid)
        return [run_two_sided(gen, mu, c, seed, rid) for c in config]
    except (SeqmctError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return exc


def _workers() -> int:
    raw = os.environ.get("SEQMCT_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"SEQMCT_THREADS must be an integer, got {raw!r}") from exc
    return os.cpu_count() or 1


def _failed_record(i, seed, exc):
    z = np.zeros(0)
    rec = RunRecord(str(i), int(seed), FAILED, None, np.zeros(0, dtype=np.int64), z, z)
    rec.error = f"{type(exc).__name__}: {exc}"
    return rec


@dataclass
class ScenarioResult:
    scenario: Scenario
    summaries: list
    records: dict  # alpha -> list[RunRecord]
    report: dict


def run_scenario(s: Scenario, out_dir=None, workers: int | None = None) -> ScenarioResult:
    """Execute every run of ``s``; write CSV/JSON artifacts when ``out_dir`` is given."""
    t0 = time.perf_counter()
    gen, null, alt, mu = s.resolve()
    two = s.mode == "two_sided"
    alphas = s.alpha_grid
    if two:
        configs = [
            TwoSidedConfig(a, s.beta if s.beta is not None else a, null, alt, s.check_interval, s.horizon) for a in alphas
        ]
        ci = configs[0].check_interval
    else:
        configs = TestConfig(min(alphas), null, s.check_interval, s.horizon)
        ci = configs.check_interval
    seeds = [run_seed(s.seed, i) for i in range(s.runs)]
    tasks = [(s.mode, gen, mu, configs, alphas, sd, i) for i, sd in enumerate(seeds)]
    nw = min(workers or _workers(), s.runs)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as ex:
            outs = list(ex.map(_run_task, tasks, chunksize=max(1, s.runs // (4 * nw))))
    else:
        outs = [_run_task(t) for t in tasks]

    records = {a: [] for a in alphas}
    errors = []
    for i, out in enumerate(outs):
        if isinstance(out, Exception):
            errors.append({"run": i, "error": f"{type(out).__name__}: {out}"})
            for a in alphas:
                records[a].append(_failed_record(i, seeds[i], out))
            continue
        for a, rec in zip(alphas, out):
            rec.run_id = f"{a:g}/{rec.run_id}"
            for side in rec.sides.values():
                side.run_id = f"{a:g}/{side.run_id}"
            records[a].append(rec)

    # theory overlay
    in_null = null.membership_residual(gen) <= MEMBERSHIP_TOL
    in_alt = alt is not None and alt.membership_residual(gen) <= MEMBERSHIP_TOL
    if two:
        target = alt if in_null else null
        d_inf = float(d_m_inf(gen, target).value)
    else:
        d_inf = float(d_m_inf(gen, null).value)

    summaries = []
    for a, cfg_i in zip(alphas, range(len(alphas))):
        recs = records[a]
        ok = [r for r in recs if r.status != FAILED]
        rej = [r for r in ok if r.status == REJECTED]
        taus = [r.tau for r in rej]
        if two:
            b = configs[cfg_i].beta
            under_Q, under_P = two_sided_lower_bounds(gen, gen, null, alt, a, b)
            rep = under_P if in_null else under_Q
            slopes = []
            for r in rej:
                side = r.sides["P" if r.decision == 1 else "Q"]
                slopes.append(tail_slope(side.trace_t, side.trace_L, r.tau))
            # decision 1 rejects the P-class (``null``), decision 0 the Q-class
            wrong = sum(1 for r in rej if (in_null and r.decision == 1) or (in_alt and r.decision == 0))
            false_rej = 0
        else:
            rep = one_sided_lower_bound(gen, null, a)
            slopes = [tail_slope(r.trace_t, r.trace_L, r.tau) for r in rej]
            false_rej = len(rej) if in_null else 0
            wrong = false_rej
        mt, st = _mean_std(taus)
        ms, ss = _mean_std(slopes)
        summaries.append(
            SummaryStats(
                alpha=a,
                runs=len(recs),
                rejected=len(rej),
                censored=sum(1 for r in ok if r.status == CENSORED),
                failed=len(recs) - len(ok),
                false_rejections=false_rej,
                wrong_decisions=wrong,
                mean_tau=mt,
                std_tau=st,
                mean_slope=ms,
                std_slope=ss,
                d_inf=d_inf,
                lower_bound=rep.bound,
                lower_bound_general=rep.bound_general,
            )
        )

    fit = fit_tau_vs_log_alpha(alphas, [x.mean_tau for x in summaries])
    fit["reference_slope"] = 1.0 / d_inf if d_inf > 0 else float("inf")
    report = {
        "scenario": {k: v for k, v in asdict(s).items() if k != "base_dir"},
        "generator": {"label": gen.label, "m": gen.m, "in_null": bool(in_null), "in_alternative": bool(in_alt)},
        "null": null.describe(),
        "alternative": alt.describe() if alt is not None else None,
        "check_interval": ci,
        "summaries": [x.to_dict() for x in summaries],
        "tau_vs_log_inv_alpha": fit,
        "bands": {f"{a:g}": aligned_bands(_band_records(records[a], two)) for a in alphas},
        "errors": errors,
        "elapsed_seconds": None,
    }
    result = ScenarioResult(s, summaries, records, report)
    if out_dir is not None:
        write_artifacts(result, out_dir)
    report["elapsed_seconds"] = time.perf_counter() - t0
    return result


def _band_records(recs, two):
    if not two:
        return recs
    return [r.sides["P" if r.decision != 0 else "Q"] for r in recs if r.sides]


def write_artifacts(result: ScenarioResult, out_dir) -> str:
    """Write ``traces.csv``, ``summary.csv`` and ``report.json``; returns the directory."""
    d = os.path.join(str(out_dir), result.scenario.name)
    os.makedirs(d, exist_ok=True)
    with open(os.path.join(d, "traces.csv"), "w", encoding="utf-8", newline="") as fh:
        write_records_csv([r for a in result.scenario.alpha_grid for r in result.records[a]], fh)
    with open(os.path.join(d, "summary.csv"), "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for x in result.summaries:
            vals = [result.scenario.name] + [
                str(v) if isinstance(v, int) else fmt(v) for v in x.to_dict().values()
            ]
            fh.write(",".join(vals) + "\n")
    rep = dict(result.report)
    rep.pop("elapsed_seconds", None)  # keeps the file byte-stable across reruns
    with open(os.path.join(d, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_json_safe(rep), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return d


# --------------------------------------------------------------------------- diagnostics


@dataclass
class WaldReport:
    T: int
    runs: int
    mean_sum: float
    predicted: float
    pi_f: float
    omega_start: float
    mean_omega_end: float
    z_score: float
    z_score_plain: float

    def to_dict(self):
        return asdict(self)


def wald_identity_check(P, f, mu, T: int, runs: int, seed: int) -> WaldReport:
    """Monte Carlo check of ``E[S_T] = (pi f) T + E[w(X_0)] - E[w(X_T)]``.

    ``S_T = sum_{k<T} f(X_k)``.  The main z-score uses ``Y = S_T + w(X_T)``,
    whose mean is ``(pi f) T + mu.w`` exactly; ``z_score_plain`` compares
    ``S_T`` with the right-hand side where ``E[w(X_T)]`` is the sample mean.
    """
    P = validate_kernel(P)
    P.require_ergodic()
    f = np.asarray(f, dtype=float)
    mu = validate_distribution(mu, P.m)
    sol = solve_poisson(P, f)
    w = sol.omega
    pif = float(stationary_distribution(P) @ f)
    sums = np.empty(runs)
    ends = np.empty(runs)
    for i in range(runs):
        x = simulate(P, mu, T, run_seed(seed, i)).states
        sums[i] = f[x[:T]].sum()
        ends[i] = w[x[T]]
    w0 = float(mu @ w)
    pred = pif * T + w0
    Y = sums + ends
    sd = Y.std(ddof=1)
    z = (Y.mean() - pred) / (sd / math.sqrt(runs)) if sd > 0 else (0.0 if abs(Y.mean() - pred) < 1e-9 else math.inf)
    sd2 = sums.std(ddof=1)
    rhs = pif * T + w0 - ends.mean()
    z2 = (sums.mean() - rhs) / (sd2 / math.sqrt(runs)) if sd2 > 0 else (0.0 if abs(sums.mean() - rhs) < 1e-9 else math.inf)
    return WaldReport(T, runs, float(sums.mean()), pred - float(ends.mean()), pif, w0, float(ends.mean()), float(z), float(z2))


@dataclass
class LooserBoundReport:
    alpha: float
    f: list
    pi_f: float
    f_max: float
    leading_term: float
    looser_leading_term: float
    strict: bool
    flags: list

    def to_dict(self):
        return asdict(self)


def looser_bound_comparison(Q, S, alpha: float) -> LooserBoundReport:
    """Compare ``log(1/alpha)/(pi f_P)`` with the cruder ``log(1/alpha)/max f_P``.

    ``f_P`` is the vector of row divergences ``KL(Q(i,.) || P(i,.))`` against
    the single member ``P`` of ``S``.  A constant ``f_P`` makes both terms
    equal and is reported with the ``ConstantF`` flag.
    """
    Q = validate_kernel(Q)
    if isinstance(S, Singleton):
        P = S.P0
    elif isinstance(S, NullSet):
        raise ConfigError("the comparison is defined for singleton classes")
    else:
        P = validate_kernel(S)
    if not 0 < alpha < 1:
        raise ConfigError(f"alpha = {alpha} must lie in (0, 1)")
    f = row_kl(Q.rows, P.rows)
    pi = stationary_distribution(Q)
    pif = float(pi @ f)
    fmax = float(f.max())
    flags = []
    if np.ptp(f) <= 1e-12 * max(1.0, fmax):
        flags.append("ConstantF")
    la = -math.log(alpha)
    lead = la / pif if pif > 0 else math.inf
    loose = la / fmax if fmax > 0 else math.inf
    return LooserBoundReport(alpha, f.tolist(), pif, fmax, lead, loose, bool(pif < fmax), flags)


def two_state_counterexample():
    """2-state ``(Q, P)`` with row divergences ``(0.1, 0.5)`` and ``pi_Q = (0.25, 0.75)``."""
    Q = np.array([[0.7, 0.3], [0.1, 0.9]])

    def row(q, target, lo, hi):
        g = lambda p: float(row_kl(np.array([[q, 1 - q]]), np.array([[p, 1 - p]]))[0]) - target  # noqa: E731
        return brentq(g, lo, hi, xtol=1e-15)

    p0 = row(0.7, 0.1, 1e-9, 0.7)
    p1 = row(0.1, 0.5, 0.1, 1 - 1e-12)
    P = np.array([[p0, 1 - p0], [p1, 1 - p1]])
    return validate_kernel(Q, "Q2"), validate_kernel(P, "P2")
