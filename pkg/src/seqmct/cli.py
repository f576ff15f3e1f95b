"""Command-line front end.

Every subcommand reads its inputs, calls one library routine and prints the
result (12 significant digits, or JSON with ``--json``).  Exit status is 0 on
success, 1 on a domain error (JSON error object on stderr) and 2 on a usage
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import fileio
from .bounds import one_sided_lower_bound, two_sided_lower_bounds
from .errors import SeqmctError
from .experiments import Scenario, builtin_scenario, run_scenario
from .markov import exponential_tilt, is_ergodic, simulate, stationary_distribution
from .nullsets import d_m_inf, project_weighted_kl
from .poisson import pseudo_spectral_gap, sensitivity_constant
from .sequential import TestConfig, TwoSidedConfig, run_one_sided, run_two_sided, write_records_csv

fmt = fileio.format_number


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if x != x or x in (float("inf"), float("-inf")):
            return str(x)
        return float(fmt(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(args, payload: dict, human: list[str]):
    if args.json:
        print(json.dumps(_clean(payload), sort_keys=True))
    else:
        for line in human:
            print(line)


def _vec(v) -> str:
    return " ".join(fmt(x) for x in np.asarray(v, dtype=float).ravel())


def _mat(A) -> list[str]:
    return [_vec(row) for row in np.asarray(A, dtype=float)]


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _mu(args, P):
    if getattr(args, "mu", None):
        return fileio.read_distribution(args.mu, P.m)
    return stationary_distribution(P)


# --------------------------------------------------------------------------- subcommands


def cmd_validate(args):
    P = fileio.read_kernel(args.chain)
    ok, kind = is_ergodic(P)
    payload = {"m": P.m, "ergodic": ok, "structure": kind}
    human = [f"m {P.m}", f"ergodic {str(ok).lower()} ({kind})"]
    if ok:
        pi = stationary_distribution(P)
        payload["stationary"] = pi
        human.append(f"stationary {_vec(pi)}")
    if args.pi:
        target = fileio.read_distribution(args.pi, P.m)
        res = float(np.abs(target @ P.rows - target).sum())
        payload["stationarity_residual_l1"] = res
        human.append(f"stationarity_residual_l1 {fmt(res)}")
    _emit(args, payload, human)


def cmd_simulate(args):
    P = fileio.read_kernel(args.chain)
    traj = simulate(P, _mu(args, P), args.horizon, _seed(args))
    text = " ".join(str(int(x)) for x in traj.states) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    if args.json:
        print(json.dumps({"seed": _seed(args), "horizon": args.horizon, "states": traj.states.tolist()}))
    elif not args.out:
        sys.stdout.write(text)


def _projection_payload(res):
    return {
        "value": res.value,
        "argmin": res.argmin.rows if res.argmin is not None else None,
        "iterations": res.iterations,
        "converged": res.converged,
    }


def cmd_project(args):
    N = fileio.read_matrix(args.counts)
    S = fileio.parse_null(args.null)
    w = N.sum(axis=1)
    Qhat = np.where(w[:, None] > 0, N / np.where(w > 0, w, 1.0)[:, None], 1.0 / N.shape[0])
    res = project_weighted_kl(w, Qhat, S, args.tol)
    human = [f"value {fmt(res.value)}", f"converged {str(res.converged).lower()}", "argmin"] + _mat(res.argmin.rows)
    _emit(args, _projection_payload(res), human)


def cmd_dinf(args):
    P = fileio.read_kernel(args.chain)
    S = fileio.parse_null(args.null)
    res = d_m_inf(P, S, args.tol)
    human = [f"d_inf {fmt(res.value)}", f"converged {str(res.converged).lower()}", "argmin"] + _mat(res.argmin.rows)
    if args.out:
        fileio.write_matrix(args.out, res.argmin.rows)
        human.append(f"argmin written to {args.out}")
    _emit(args, _projection_payload(res), human)


def _bound_lines(tag, r):
    return [
        f"{tag}bound {fmt(r.bound)}",
        f"{tag}leading_term {fmt(r.leading_term)}",
        f"{tag}correction {fmt(r.correction)}",
        f"{tag}bound_general {fmt(r.bound_general)}",
        f"{tag}d_inf {fmt(r.d_inf)}",
        f"{tag}c_q {fmt(r.c_q)}",
        f"{tag}pi_star {fmt(r.pi_star)}",
        f"{tag}flags {','.join(r.flags) or '-'}",
    ]


def cmd_bound(args):
    Q = fileio.read_kernel(args.chain)
    S = fileio.parse_null(args.null)
    if args.alternative:
        if not args.p_chain:
            raise SystemExit(_usage("bound: --alternative needs --p-chain"))
        P = fileio.read_kernel(args.p_chain)
        beta = args.alpha if args.beta is None else args.beta
        uq, up = two_sided_lower_bounds(Q, P, S, fileio.parse_null(args.alternative), args.alpha, beta, args.kmax)
        _emit(args, {"under_Q": uq.to_dict(), "under_P": up.to_dict()}, _bound_lines("Q.", uq) + _bound_lines("P.", up))
        return
    r = one_sided_lower_bound(Q, S, args.alpha, args.kmax)
    _emit(args, r.to_dict(), _bound_lines("", r))


def _write_csv(args, records):
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_records_csv(records, fh)
    elif not args.json:
        sys.stdout.write(write_records_csv(records))


def cmd_test(args):
    P = fileio.read_kernel(args.chain)
    S = fileio.parse_null(args.null)
    cfg = TestConfig(args.alpha, S, args.check_interval, args.horizon, args.tol)
    rec = run_one_sided(P, _mu(args, P), cfg, _seed(args))
    _write_csv(args, [rec])
    summary = rec.to_dict()
    if args.json:
        print(json.dumps(_clean(summary), sort_keys=True))
    else:
        msg = f"status {rec.status} tau {rec.tau if rec.tau is not None else '-'}"
        print(msg, file=sys.stdout if args.out else sys.stderr)


def cmd_two_sided(args):
    P = fileio.read_kernel(args.chain)
    cfg = TwoSidedConfig(
        args.alpha,
        args.alpha if args.beta is None else args.beta,
        fileio.parse_null(args.null),
        fileio.parse_null(args.alternative),
        args.check_interval,
        args.horizon,
        args.tol,
    )
    rec = run_two_sided(P, _mu(args, P), cfg, _seed(args))
    _write_csv(args, [rec])
    if args.json:
        print(json.dumps(_clean(rec.to_dict()), sort_keys=True))
    else:
        dec = {1: "reject-P", 0: "reject-Q", None: "none"}[rec.decision]
        msg = f"status {rec.status} tau {rec.tau if rec.tau is not None else '-'} decision {dec}"
        print(msg, file=sys.stdout if args.out else sys.stderr)


def cmd_scenario(args):
    if os.path.isfile(args.name):
        s = Scenario.from_file(args.name)
    else:
        s = builtin_scenario(args.name)
    if args.runs is not None:
        s.runs = args.runs
    if args.seed is not None:
        s.seed = args.seed
    if args.horizon is not None:
        s.horizon = args.horizon
    res = run_scenario(s, args.out or "results")
    payload = {"name": s.name, "summaries": [x.to_dict() for x in res.summaries], "fit": res.report["tau_vs_log_inv_alpha"]}
    human = []
    for x in res.summaries:
        human.append(
            f"alpha {fmt(x.alpha)} runs {x.runs} rejected {x.rejected} censored {x.censored} failed {x.failed} "
            f"wrong {x.wrong_decisions} mean_tau {fmt(x.mean_tau)} mean_slope {fmt(x.mean_slope)} "
            f"d_inf {fmt(x.d_inf)} bound {fmt(x.lower_bound)}"
        )
    fit = res.report["tau_vs_log_inv_alpha"]
    if fit["points"] >= 2:
        human.append(f"fit slope {fmt(fit['slope'])} reference {fmt(fit['reference_slope'])} r2 {fmt(fit['r2'])}")
    _emit(args, payload, human)


def cmd_tilt(args):
    P0 = fileio.read_kernel(args.p0)
    f = fileio.read_vector(args.f)
    Pt = exponential_tilt(P0, f, args.theta)
    if args.out:
        fileio.write_matrix(args.out, Pt.rows)
    _emit(args, {"theta": args.theta, "kernel": Pt.rows}, [str(Pt.m)] + _mat(Pt.rows))


def cmd_spectral(args):
    P = fileio.read_kernel(args.chain)
    rep = pseudo_spectral_gap(P, args.kmax)
    c = sensitivity_constant(P, args.kmax)
    payload = dict(rep.to_dict(), c_p=c.c_p, pi_star=c.pi_star)
    human = [
        f"gamma_ps {fmt(rep.gamma_ps)}",
        f"achieving_k {rep.achieving_k}",
        f"k_max {rep.k_max}",
        f"c_p {fmt(c.c_p)}",
        f"pi_star {fmt(c.pi_star)}",
    ]
    _emit(args, payload, human)


# --------------------------------------------------------------------------- parser


def _usage(msg):
    print(f"seqmct: {msg}", file=sys.stderr)
    return 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default 0; scenarios keep their own)")
    common.add_argument("--out", default=None, help="output file or directory")

    p = argparse.ArgumentParser(prog="seqmct", description="Sequential tests for Markov chains")
    sub = p.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    def chain(sp):
        sp.add_argument("--chain", required=True, help="transition matrix file")

    def testing(sp):
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--horizon", type=int, default=100_000)
        sp.add_argument("--check-interval", type=int, default=None)
        sp.add_argument("--mu", default=None, help="initial distribution file (default: stationary)")
        sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("validate", cmd_validate, "check a transition matrix")
    chain(sp)
    sp.add_argument("--pi", default=None, help="distribution to test for stationarity")

    sp = add("simulate", cmd_simulate, "sample a trajectory")
    chain(sp)
    sp.add_argument("--horizon", type=int, required=True)
    sp.add_argument("--mu", default=None)

    sp = add("project", cmd_project, "weighted-KL projection of a count matrix")
    sp.add_argument("--counts", required=True, help="transition count matrix file")
    sp.add_argument("--null", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("dinf", cmd_dinf, "divergence from a kernel to a class")
    chain(sp)
    sp.add_argument("--null", required=True)
    sp.add_argument("--tol", type=float, default=1e-9)

    sp = add("bound", cmd_bound, "lower bound on the expected stopping time")
    chain(sp)
    sp.add_argument("--null", required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--alternative", default=None, help="second class for the two-sided bound")
    sp.add_argument("--p-chain", default=None, help="kernel in the first class (two-sided)")
    sp.add_argument("--kmax", type=int, default=None)

    sp = add("test", cmd_test, "run the one-sided sequential test on a simulated path")
    chain(sp)
    sp.add_argument("--null", required=True)
    testing(sp)

    sp = add("two-sided", cmd_two_sided, "run the two-sided test on a simulated path")
    chain(sp)
    sp.add_argument("--null", required=True, help="first class (decision 1 rejects it)")
    sp.add_argument("--alternative", required=True, help="second class")
    sp.add_argument("--beta", type=float, default=None)
    testing(sp)

    sp = add("scenario", cmd_scenario, "run a built-in or JSON scenario")
    sp.add_argument("name", help="built-in scenario name or JSON file")
    sp.add_argument("--runs", type=int, default=None)
    sp.add_argument("--horizon", type=int, default=None)

    sp = add("tilt", cmd_tilt, "exponential tilt of a kernel")
    sp.add_argument("--p0", required=True)
    sp.add_argument("--f", required=True)
    sp.add_argument("--theta", type=float, required=True)

    sp = add("spectral", cmd_spectral, "pseudo-spectral gap and sensitivity constant")
    chain(sp)
    sp.add_argument("--kmax", type=int, default=None)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except SeqmctError as exc:
        print(json.dumps(exc.to_dict(), sort_keys=True), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
