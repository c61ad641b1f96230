"""Command line entry point: ``certify``, ``trajectory`` and ``mdp``.

Exit codes: 0 when every requested check passes, 1 on a violated check, 2 on
invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import finite_mdp as fm
from . import lqr, suite
from .errors import (
    CertificationError,
    ConvergenceError,
    DissipError,
    InputError,
    NotApplicableError,
)
from .gaussian import DissimilarityKind, GaussianMeasure

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
SEED_ENV = "MDP_DISSIP_SEED"


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InputError("config must be a JSON object")
    return data


def _emit(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _dump(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InputError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def _kinds(args):
    if args.kind is None:
        return [DissimilarityKind.KL, DissimilarityKind.WASSERSTEIN2]
    return [DissimilarityKind(args.kind)]


def _initial_measure(data: dict) -> GaussianMeasure:
    try:
        return GaussianMeasure(np.asarray(data["mu0"], dtype=float),
                               np.atleast_2d(np.asarray(data["Sigma0"], dtype=float)))
    except KeyError as exc:
        raise InputError(f"config is missing key {exc}") from None


def cmd_certify(args) -> int:
    data = _load_json(args.config)
    problem = lqr.LqrProblem.from_dict(data)
    report = {"problem": {k: getattr(problem, k).tolist() for k in ("A", "B", "T", "U", "R", "Sigma_w")}}
    try:
        cert = lqr.certify(problem)
    except (CertificationError, ConvergenceError) as exc:
        report.update(passed=False, error=str(exc))
        _emit(_dump(report), args.out)
        return EXIT_VIOLATION
    overrides = data.get("overrides") or {}
    if overrides:
        cert = cert.with_constants(**overrides)
    seed = _seed(args)
    report["certificate"] = cert.to_dict()
    report["overrides"] = overrides
    report["seed"] = seed
    report["sweeps"] = {}
    passed = True
    for kind in _kinds(args):
        sweep = lqr.verify_dissipativity_sweep(
            cert, kind, lqr.SweepConfig(count=args.sweep, seed=seed))
        report["sweeps"][kind.value] = sweep.to_dict()
        passed &= sweep.passed
    if args.deep:
        deep = suite.appendix_suite(cert, seed=seed)
        report["appendix_suite"] = deep
        passed &= deep["passed"]
    report["passed"] = bool(passed)
    _emit(_dump(report), args.out)
    return EXIT_OK if passed else EXIT_VIOLATION


def trajectory_csv(records, n: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["k"] + [f"mu_{i}" for i in range(n)]
    header += [f"sigma_{i}_{j}" for i in range(n) for j in range(n)]
    header += ["stage_cost", "storage", "rotated_cost", "d_kl", "w2", "bound"]
    writer.writerow(header)
    fmt = "{:.17g}".format
    for r in records:
        row = [str(r.k)] + [fmt(v) for v in r.measure.mean]
        row += [fmt(v) for v in r.measure.covariance.ravel()]
        row += [fmt(v) for v in (r.stage_cost, r.storage, r.rotated_cost, r.d_kl, r.w2, r.bound)]
        writer.writerow(row)
    return buf.getvalue()


def cmd_trajectory(args) -> int:
    data = _load_json(args.config)
    problem = lqr.LqrProblem.from_dict(data)
    rho0 = _initial_measure(data)
    cert = lqr.certify(problem)
    if args.steps < 1:
        raise InputError("--steps must be at least 1")
    kind = DissimilarityKind(args.kind or "kl")
    records = lqr.simulate_trajectory(rho0, cert, args.steps, kind)
    _emit(trajectory_csv(records, cert.n), args.out)
    ok = all(r.rotated_cost - r.bound >= lqr.MARGIN_TOL for r in records)
    return EXIT_OK if ok else EXIT_VIOLATION


def _mdp_report(mdp: fm.FiniteMdp, steps: int, trials: int, seed: int) -> dict:
    sol = fm.solve_steady_state(mdp)
    gain, bias, rvi_policy = fm.relative_value_iteration(mdp)
    policy, L0 = sol.policy, sol.L0
    report = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "policy": sol.policy.tolist(),
        "L0": L0,
        "rho_star": sol.rho_star.tolist(),
        "skipped_policies": sol.skipped,
        "gain": gain,
        "bias": bias.tolist(),
        "rvi_policy": rvi_policy.tolist(),
        "bellman_residual": fm.bellman_residual(mdp, gain, bias),
        "gain_matches": abs(gain - L0) <= 1e-8,
    }
    start = int(np.argmin(mdp.policy_cost(policy)))
    rho0 = np.zeros(mdp.num_states)
    rho0[start] = 1.0
    _, h = fm.policy_bias(policy, mdp)
    series = fm.bias_value(rho0, policy, mdp, L0)
    formula = float(rho0 @ h - sol.rho_star @ h)
    report["bias_value"] = {"rho0": rho0.tolist(), "series": series, "formula": formula,
                            "agree": abs(series - formula) <= 1e-8}
    tele = fm.telescoping_check(rho0, policy, mdp, L0, steps)
    report["telescoping"] = {"steps": steps, "passed": tele.passed, "max_error": tele.max_error,
                             "negative_steps": tele.negative_steps}
    rng = np.random.default_rng(seed)
    lams = [np.zeros(mdp.num_states)] + [rng.normal(size=mdp.num_states) for _ in range(trials)]
    try:
        witnesses = [fm.lemma1_witness(mdp, policy, lam, L0) for lam in lams]
    except NotApplicableError as exc:
        report["lemma1_witness"] = {"applicable": False, "reason": str(exc)}
        lemma_ok = True
    else:
        lemma_ok = all(w.contradiction_certified for w in witnesses)
        report["lemma1_witness"] = {
            "applicable": True,
            "support": witnesses[0].support,
            "trials": len(witnesses),
            "all_certified": lemma_ok,
            "zero_storage_violating_states": witnesses[0].violating_states,
            "zero_storage_rotated_excess": witnesses[0].rotated_excess,
        }
    report["passed"] = bool(report["gain_matches"] and report["bias_value"]["agree"]
                            and tele.passed and lemma_ok)
    return report


def cmd_mdp(args) -> int:
    mdp = fm.FiniteMdp.from_dict(_load_json(args.config))
    if args.steps < 1 or args.sweep < 0:
        raise InputError("--steps must be positive and --sweep nonnegative")
    report = _mdp_report(mdp, args.steps, args.sweep, _seed(args))
    _emit(_dump(report), args.out)
    return EXIT_OK if report["passed"] else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mdp-dissip", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, steps, sweep):
        p.add_argument("--config", required=True, help="JSON problem or fixture file")
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--steps", type=int, default=steps)
        p.add_argument("--sweep", type=int, default=sweep)
        p.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (falls back to ${SEED_ENV}, then 0)")
        p.add_argument("--kind", choices=[k.value for k in DissimilarityKind], default=None)
        p.add_argument("--deep", action="store_true", help="also run the appendix property suite")

    common(sub.add_parser("certify", help="certify an LQR problem and sweep the margin"), 30, 1000)
    common(sub.add_parser("trajectory", help="write the closed-loop trajectory as CSV"), 30, 1000)
    common(sub.add_parser("mdp", help="finite-MDP steady state, bias and rotation checks"), 50, 20)
    return parser


COMMANDS = {"certify": cmd_certify, "trajectory": cmd_trajectory, "mdp": cmd_mdp}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (DissipError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT if isinstance(exc, (InputError, ValueError)) else EXIT_VIOLATION


if __name__ == "__main__":
    sys.exit(main())
