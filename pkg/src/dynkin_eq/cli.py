"""Command-line front end.

Subcommands: check, gamma, solve, verify, enumerate, simulate, negotiate,
gallery. Policies on the command line are comma-separated state labels, with
the empty string denoting the empty policy. Output is a human table by
default or newline-delimited JSON records with --format json; both modes
report identical verdicts.

Exit codes: 0 success (and verdict matches --expect when supplied),
1 verdict or assertion mismatch, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import equilibrium, gallery, model, negotiation, valuation
from .model import HorizonError, OrderingError, ScenarioError, SizeGuardError
from .valuation import StoppingPolicy

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2


class _Emitter:
    def __init__(self, fmt: str):
        self.fmt = fmt

    def record(self, _rec: str, **fields) -> None:
        if self.fmt == "json":
            print(json.dumps({"record": _rec, **fields}, default=_jsonable))
        else:
            body = "  ".join(f"{k}={_tablestr(v)}" for k, v in fields.items())
            print(f"{_rec}: {body}" if body else f"{_rec}")


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _tablestr(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, (list, tuple)):
        return "{" + ",".join(str(v) for v in value) + "}"
    return str(value)


def _parse_policy(s: model.Scenario, text: str) -> StoppingPolicy:
    text = text.strip()
    if not text:
        return StoppingPolicy.empty(s.n)
    labels = [part.strip() for part in text.split(",") if part.strip()]
    return StoppingPolicy.from_labels(s, labels)


def _load(args) -> model.Scenario:
    if not args.scenario:
        raise ScenarioError("--scenario PATH is required for this subcommand")
    s = model.load_scenario(Path(args.scenario))
    overrides = {}
    if getattr(args, "horizon", None) is not None:
        overrides["horizon"] = args.horizon
    if getattr(args, "margin", None) is not None:
        overrides["comparison_margin"] = args.margin
    if getattr(args, "paths", None) is not None:
        overrides["mc_paths"] = args.paths
    if getattr(args, "seed", None) is not None:
        overrides["mc_seed"] = args.seed
    return s.with_numerics(**overrides) if overrides else s


def _policy_labels(s: model.Scenario, p: StoppingPolicy) -> list[str]:
    return p.labels(s)


def _expect(args, verdict: str) -> int:
    if args.expect is not None and args.expect != verdict:
        print(f"expected verdict {args.expect!r}, got {verdict!r}", file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


# ---------------------------------------------------------------------------
# subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_check(args, out: _Emitter) -> int:
    s = _load(args)
    mode = "war-of-attrition" if args.war_of_attrition else "basic"
    report = model.validate(s, mode)
    for c in report.checks:
        out.record("check", name=c.name, passed=c.passed, detail=c.detail)
    for i in (1, 2):
        rep = model.check_supermartingale(s, i)
        out.record(
            "supermartingale",
            player=i,
            passed=rep.passed,
            grid_passed=rep.grid_passed,
            sup_ratio=rep.sup_ratio,
            worst_state=rep.worst_state,
            worst_excess=rep.worst_excess,
            analytic=rep.analytic,
        )
    verdict = "pass" if report.passed else "fail"
    out.record("verdict", verdict=verdict)
    return _expect(args, verdict)


def _cmd_gamma(args, out: _Emitter) -> int:
    s = _load(args)
    T = _parse_policy(s, args.other)
    trace = equilibrium.gamma(s, args.player, T)
    for k, step in enumerate(trace.steps):
        out.record(
            "iterate", n=k + 1, player=args.player,
            policy_bitmask=step.bits, policy_labels=_policy_labels(s, step),
        )
    out.record(
        "fixed-point",
        player=args.player,
        policy_bitmask=trace.fixed_point.bits,
        policy_labels=_policy_labels(s, trace.fixed_point),
        iterations=trace.iterations,
    )
    return EXIT_OK


def _emit_outcome(s: model.Scenario, outcome, out: _Emitter) -> str:
    for k, (player, policy) in enumerate(outcome.policies):
        out.record(
            "iterate", n=k, player=player,
            policy_bitmask=policy.bits, policy_labels=_policy_labels(s, policy),
        )
    if outcome.terminal == "fixed-point":
        S, T = outcome.fixed_point
        verdict = outcome.classification.verdict
        out.record(
            "terminal", kind="fixed-point",
            S=_policy_labels(s, S), T=_policy_labels(s, T),
            verdict=verdict,
            witness_player=outcome.classification.witness_player,
            witness_state=outcome.classification.witness_state,
            boundary_states=list(outcome.classification.boundary_states),
            rounds=outcome.rounds,
        )
    else:
        verdict = "cycle"
        out.record(
            "terminal", kind="cycle",
            cycle=[( _policy_labels(s, S), _policy_labels(s, T)) for S, T in outcome.cycle],
            cycle_start=outcome.cycle_start,
            rounds=outcome.rounds,
        )
    return verdict


def _cmd_solve(args, out: _Emitter) -> int:
    s = _load(args)
    start = _parse_policy(s, args.start)
    outcome = equilibrium.alternate(
        s, start=start, first_mover=args.first_mover, exhaustive=args.exhaustive
    )
    verdict = _emit_outcome(s, outcome, out)
    return _expect(args, verdict)


def _cmd_verify(args, out: _Emitter) -> int:
    s = _load(args)
    S = _parse_policy(s, args.S)
    T = _parse_policy(s, args.T)
    cl = equilibrium.verify(s, S, T, exhaustive=args.exhaustive)
    out.record(
        "classification",
        verdict=cl.verdict,
        witness_player=cl.witness_player,
        witness_state=cl.witness_state,
        sufficient=cl.sufficient,
        boundary_states=list(cl.boundary_states),
    )
    return _expect(args, cl.verdict)


def _cmd_enumerate(args, out: _Emitter) -> int:
    s = _load(args)
    T = _parse_policy(s, args.other)
    found = equilibrium.enumerate_intra(s, args.player, T)
    for p in found:
        out.record("equilibrium", player=args.player, policy_bitmask=p.bits,
                   policy_labels=_policy_labels(s, p))
    out.record("count", player=args.player, equilibria=len(found))
    return EXIT_OK


def _cmd_simulate(args, out: _Emitter) -> int:
    s = _load(args)
    S = _parse_policy(s, args.S)
    T = _parse_policy(s, args.T)
    states = [args.x] if args.x else list(s.states.labels)
    seed = args.seed if args.seed is not None else s.numerics.mc_seed
    paths = args.paths if args.paths is not None else s.numerics.mc_paths
    tol_extra = model.tail_bound(s, args.player, s.numerics.horizon)
    worst = 0.0
    for lab in states:
        dp = valuation.joint_value(s, args.player, S, T, lab, args.mode)
        mean, stderr = valuation.mc_estimate(
            s, args.player, S, T, lab, paths=paths, seed=seed, mode=args.mode
        )
        diff = abs(mean - dp)
        tol = 3 * stderr + tol_extra
        worst = max(worst, diff - tol)
        out.record(
            "simulate", state=lab, player=args.player, dp=dp, mc_mean=mean,
            mc_stderr=stderr, seed=seed, paths=paths, within_3se=diff <= tol,
        )
    verdict = "pass" if worst <= 0 else "fail"
    out.record("verdict", verdict=verdict)
    return _expect(args, verdict)


def _cmd_negotiate(args, out: _Emitter) -> int:
    params = negotiation.NegotiationParams(
        R=args.R, N=args.N, u=args.u, p=args.p,
        beta1=args.beta1, beta2=args.beta2, m=args.m,
        first_mover=args.first_mover,
        eta=args.margin if args.margin is not None else 1e-3,
        horizon=args.horizon,
    )
    report = negotiation.solve_negotiation(params)
    s = report.scenario
    out.record(
        "negotiation",
        alpha1_firm1=report.alpha1_by_firm[0],
        alpha1_firm2=report.alpha1_by_firm[1],
        threshold_firm1=report.threshold_by_firm[0],
        threshold_firm2=report.threshold_by_firm[1],
        y_star_firm1=report.y_star_by_firm[0],
        y_star_firm2=report.y_star_by_firm[1],
        beta_bar=report.beta_bar,
        beta_underbar=report.beta_underbar,
        first_mover=report.first_mover,
        case=report.case_label,
        boundary_flag=report.boundary_flag,
    )
    for finding in report.findings:
        out.record("finding", message=finding)
    verdict = _emit_outcome(s, report.outcome, out)
    if args.expect is not None and args.expect == report.case_label:
        return EXIT_OK
    return _expect(args, verdict)


def _cmd_gallery(args, out: _Emitter) -> int:
    fixture = gallery.build_fixture(args.name)
    if args.emit:
        print(json.dumps(model.scenario_to_document(fixture.scenario), indent=2))
        return EXIT_OK
    if args.run_assertions:
        failures = 0
        softs = None
        for result in gallery.run_fixture(fixture):
            if result.expectation.op == "soft_sweep":
                softs = result.got
            out.record(
                "assertion",
                op=result.expectation.op,
                note=result.expectation.note,
                passed=result.passed,
                got=_shorten(result.got),
            )
            failures += 0 if result.passed else 1
        if softs is not None:
            out.record("summary", soft_equilibria=softs)
        out.record("verdict", verdict="pass" if failures == 0 else "fail", failures=failures)
        return EXIT_OK if failures == 0 else EXIT_MISMATCH
    print(json.dumps(model.scenario_to_document(fixture.scenario), indent=2))
    return EXIT_OK


def _shorten(value, limit: int = 200):
    text = repr(value)
    return value if len(text) <= limit else text[:limit] + "..."


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sub, scenario=True):
    if scenario:
        sub.add_argument("--scenario", help="path to a scenario JSON document")
        sub.add_argument("--horizon", type=int, help="override numerics.horizon")
        sub.add_argument("--margin", type=float, help="override numerics.comparison_margin")
    sub.add_argument("--format", choices=("table", "json"), default="table")
    sub.add_argument("--expect", help="exit 1 unless the final verdict equals this")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynkin-eq",
        description="solvers for two-player stopping games under non-exponential discounting",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("check", help="validation, impatience, and drift-condition reports")
    p.add_argument("--war-of-attrition", action="store_true", help="also check f <= h <= g")
    _add_common(p)
    p.set_defaults(fn=_cmd_check)

    p = subs.add_parser("gamma", help="single-player best-reply iteration")
    p.add_argument("--player", type=int, choices=(1, 2), required=True)
    p.add_argument("--other", default="", help="other player's policy (comma-separated labels)")
    _add_common(p)
    p.set_defaults(fn=_cmd_gamma)

    p = subs.add_parser("solve", help="alternating best-reply procedure")
    p.add_argument("--start", default="", help="starting policy (comma-separated labels)")
    p.add_argument("--first-mover", type=int, choices=(1, 2), default=2, dest="first_mover")
    p.add_argument("--exhaustive", action="store_true", help="classify the terminal exhaustively")
    _add_common(p)
    p.set_defaults(fn=_cmd_solve)

    p = subs.add_parser("verify", help="classify a policy pair")
    p.add_argument("--S", default="", help="player 1 policy")
    p.add_argument("--T", default="", help="player 2 policy")
    p.add_argument("--exhaustive", action="store_true")
    _add_common(p)
    p.set_defaults(fn=_cmd_verify)

    p = subs.add_parser("enumerate", help="all single-player stable policies against a fixed one")
    p.add_argument("--player", type=int, choices=(1, 2), required=True)
    p.add_argument("--other", default="")
    _add_common(p)
    p.set_defaults(fn=_cmd_enumerate)

    p = subs.add_parser("simulate", help="Monte Carlo versus recursion comparison")
    p.add_argument("--player", type=int, choices=(1, 2), required=True)
    p.add_argument("--S", default="")
    p.add_argument("--T", default="")
    p.add_argument("--x", help="single start state (default: all states)")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("hitting", "entrance"), default="hitting")
    _add_common(p)
    p.set_defaults(fn=_cmd_simulate)

    p = subs.add_parser("negotiate", help="two-firm lattice negotiation")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--N", type=float, required=True)
    p.add_argument("--u", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--beta1", type=float, required=True)
    p.add_argument("--beta2", type=float, required=True)
    p.add_argument("--m", type=int, default=20)
    p.add_argument("--first-mover", type=int, choices=(1, 2), default=None, dest="first_mover")
    p.add_argument("--horizon", type=int, help="override the automatic horizon")
    p.add_argument("--margin", type=float, help="comparison margin (default 1e-3)")
    _add_common(p, scenario=False)
    p.set_defaults(fn=_cmd_negotiate)

    p = subs.add_parser("gallery", help="built-in fixtures: emit or assert")
    p.add_argument("name", choices=sorted(gallery.FIXTURES))
    p.add_argument("--emit", action="store_true", help="print the scenario document")
    p.add_argument("--assert", dest="run_assertions", action="store_true",
                   help="run the fixture's expected assertions")
    _add_common(p, scenario=False)
    p.set_defaults(fn=_cmd_gallery)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags already; normalize other codes
        return EXIT_INPUT if exc.code not in (0,) else 0
    out = _Emitter(args.format)
    try:
        return args.fn(args, out)
    except (ScenarioError, SizeGuardError, OrderingError, HorizonError,
            negotiation.LatticeRangeError, negotiation.SeriesError,
            gallery.FixtureConstraintError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
