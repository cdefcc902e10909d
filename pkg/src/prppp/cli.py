"""Command-line entry point: ``prppp {generate,solve,verify,replay,oracle}``.

Exit codes: 0 ok, 1 verification failure, 2 usage, 3 infeasible instance,
4 fingerprint mismatch, 5 incomplete trace.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from collections import Counter
from pathlib import Path

from .costs import evaluate_global_cost, supplier_visible_cost
from .engine import EngineConfig, FingerprintMismatch, InfeasibleInstanceError, improve, parse_trace, replay
from .feasibility import check_feasibility
from .agents import SupplierView
from .model import InstanceError, Profile, generate_instance, load_instance, load_plan
from .oracle import OracleBoundsError, optimality_gap, solve_exact

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_FINGERPRINT, EXIT_INCOMPLETE = 0, 1, 2, 3, 4, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _positive(value: str) -> int:
    n = int(value)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _pair(kind):
    def parse(value: str):
        lo, hi = value.split(",")
        return kind(lo), kind(hi)

    return parse


def _emit(doc, pretty: bool) -> None:
    if pretty:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        print(json.dumps(doc, sort_keys=True))


def _load_instance_or_exit(path: str):
    try:
        return load_instance(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    except InstanceError as exc:
        print(f"error: invalid instance: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_INFEASIBLE)


def cmd_generate(args) -> int:
    profile = Profile(
        demand=args.demand,
        holding=args.holding,
        unit_cost=args.u,
        setup_cost=args.f,
        box=args.box,
        scale=args.scale,
        n_vehicles=args.vehicles,
    )
    instance = generate_instance(args.seed, args.n, args.t, profile)
    text = instance.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _config_from_args(args) -> EngineConfig:
    doc = {}
    if args.config:
        doc.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for key in ("max_rounds", "agenda_size", "stall_rounds", "preference_depth", "seed"):
        value = getattr(args, key)
        if value is not None:
            doc[key] = value
    return EngineConfig.from_dict(doc)


def cmd_solve(args) -> int:
    instance = _load_instance_or_exit(args.instance)
    try:
        config = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    started = time.perf_counter()
    try:
        plan, trace = improve(instance, config)
    except (InfeasibleInstanceError, InstanceError) as exc:
        print(f"error: infeasible instance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    wall = time.perf_counter() - started
    if args.plan:
        Path(args.plan).write_text(plan.to_json(), encoding="utf-8")
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl(), encoding="utf-8")
    view = SupplierView.redact(instance)
    proposed, accepted = Counter(), Counter()
    for r in trace.transactions:
        proposed[r.transaction.kind.value] += 1
        if r.accepted:
            accepted[r.transaction.kind.value] += 1
    summary = {
        "fingerprint": trace.fingerprint,
        "initial_supplier_visible_cost": supplier_visible_cost(view, trace.initial_plan),
        "final_supplier_visible_cost": supplier_visible_cost(view, plan),
        "rounds": len(trace.rounds),
        "proposed": dict(sorted(proposed.items())),
        "accepted": dict(sorted(accepted.items())),
        "revision": trace.final_revision,
        "wall_time_s": round(wall, 4),
    }
    if args.omniscient:
        test_only = {
            "initial_global_cost": evaluate_global_cost(instance, trace.initial_plan),
            "final_global_cost": evaluate_global_cost(instance, plan),
        }
        try:
            test_only["oracle_gap"] = optimality_gap(instance, plan)
        except (OracleBoundsError, ZeroDivisionError):
            test_only["oracle_gap"] = None
        summary["omniscient_test_only"] = test_only
    _emit(summary, args.pretty)
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = _load_instance_or_exit(args.instance)
    try:
        plan = load_plan(Path(args.plan).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    violations = check_feasibility(instance, plan)
    for v in violations:
        print(json.dumps(v.to_dict(), sort_keys=True))
    return EXIT_VERIFY if violations else EXIT_OK


def cmd_replay(args) -> int:
    instance = _load_instance_or_exit(args.instance)
    try:
        with open(args.trace, encoding="utf-8") as fh:
            parsed = parse_trace(fh)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = replay(instance, parsed)
    except FingerprintMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FINGERPRINT
    text = result.plan.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    if not result.complete:
        print(f"incomplete trace: replayed to revision {result.revision}", file=sys.stderr)
        return EXIT_INCOMPLETE
    ok = bool(result.digest_ok)
    if args.plan:
        ok = ok and Path(args.plan).read_text(encoding="utf-8") == text
    if not args.out:
        sys.stdout.write(text)
    if not ok:
        print("error: replayed plan differs from the recorded plan", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_oracle(args) -> int:
    instance = _load_instance_or_exit(args.instance)
    try:
        result = solve_exact(instance, max_nodes=args.max_nodes, time_limit=args.time_limit)
    except OracleBoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(result.to_dict(), args.pretty)
    return EXIT_OK if result.plan is not None else EXIT_INFEASIBLE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prppp", description="Negotiated production routing with private retailer costs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a seeded random instance")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--n", type=_positive, required=True, help="number of retailers")
    g.add_argument("--t", type=_positive, required=True, help="horizon length")
    g.add_argument("--vehicles", type=_positive, default=1)
    g.add_argument("--demand", type=_pair(int), default=(0, 15), metavar="LO,HI")
    g.add_argument("--holding", type=_pair(float), default=(1.0, 5.0), metavar="LO,HI")
    g.add_argument("--u", type=float, default=8.0)
    g.add_argument("--f", type=float, default=500.0)
    g.add_argument("--box", type=float, default=100.0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--out", "-o")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the negotiation engine")
    s.add_argument("instance")
    s.add_argument("--config", help="engine config JSON")
    s.add_argument("--max-rounds", dest="max_rounds", type=_positive)
    s.add_argument("--agenda-size", dest="agenda_size", type=_positive)
    s.add_argument("--stall-rounds", dest="stall_rounds", type=_positive)
    s.add_argument("--preference-depth", dest="preference_depth", type=_positive)
    s.add_argument("--seed", type=int)
    s.add_argument("--trace", help="write the trace (JSONL) here")
    s.add_argument("--plan", help="write the final plan (JSON) here")
    s.add_argument("--omniscient", action="store_true", help="also report global costs (test only)")
    s.add_argument("--pretty", action="store_true")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a plan against every constraint")
    v.add_argument("instance")
    v.add_argument("plan")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("replay", help="re-apply a trace and compare plans")
    r.add_argument("instance")
    r.add_argument("trace")
    r.add_argument("--plan", help="stored plan to compare byte-for-byte")
    r.add_argument("--out", "-o", help="write the replayed plan here")
    r.set_defaults(func=cmd_replay)

    o = sub.add_parser("oracle", help="exhaustive exact solve (n <= 4, T <= 3, one vehicle)")
    o.add_argument("instance")
    o.add_argument("--max-nodes", dest="max_nodes", type=_positive)
    o.add_argument("--time-limit", dest="time_limit", type=float)
    o.add_argument("--pretty", action="store_true")
    o.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
