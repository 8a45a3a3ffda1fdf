"""Command line front end.

    tagsim probe     [config flags] [--kind ...]       detection-rate matrix
    tagsim simulate  <scenario> [config flags]         run one scenario verbosely
    tagsim overhead  <trace> --alignments 8,16,32,64   trace RAM analysis

Exit codes: 0 success; 1 when `simulate` detects its injected bug (so
shell scripts can assert detection); 2 for usage or input errors.
JSON output is deterministic: identical arguments and seed produce
byte-identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

from .arena import TagPolicy
from .detection import estimate_detection
from .errors import AllocationError, ScenarioError, TraceError, UsageError
from .scenarios import Scenario, ScenarioKind, run_scenario
from .tagspace import MtConfig, StoreMode
from .traces import analyze_trace, load_trace

_PROBE_DEFAULT_KINDS = (ScenarioKind.HEAP_USE_AFTER_FREE, ScenarioKind.NON_LINEAR_OVERFLOW)

_KIND_ALIASES = {"intra-granule": ScenarioKind.INTRA_GRANULE_OVERFLOW}


def _kind_names() -> list[str]:
    return [k.value for k in ScenarioKind] + sorted(_KIND_ALIASES)


def _parse_kind(name: str) -> ScenarioKind:
    if name in _KIND_ALIASES:
        return _KIND_ALIASES[name]
    try:
        return ScenarioKind(name)
    except ValueError:
        raise UsageError(f"unknown scenario {name!r}") from None


def _add_config_flags(sub: argparse.ArgumentParser, default_format: str) -> None:
    sub.add_argument("--tg", type=int, default=16, help="granule size in bytes")
    sub.add_argument("--ts", type=int, default=8, help="tag width in bits")
    sub.add_argument("--policy", choices=["random", "adjacent-distinct", "sampled"],
                     default="random", help="tag assignment policy")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--precision-ext", action="store_true",
                     help="byte-precise checking of partial final granules")
    sub.add_argument("--zero-on-tag", action="store_true",
                     help="zero memory while tagging it")
    sub.add_argument("--store-mode", choices=["precise", "imprecise"], default="precise")
    sub.add_argument("--quarantine", type=int, default=0, metavar="BYTES",
                     help="free-quarantine byte budget (0 disables)")
    sub.add_argument("--sampling-rate", type=float, default=1.0)
    sub.add_argument("--format", choices=["plain", "json"], default=default_format)


def _config_from(args) -> MtConfig:
    return MtConfig(
        tg=args.tg,
        ts=args.ts,
        zero_on_tag=args.zero_on_tag,
        precision_ext=args.precision_ext,
        sampling_rate=args.sampling_rate,
        store_mode=StoreMode.PRECISE if args.store_mode == "precise" else StoreMode.IMPRECISE_STORES,
        quarantine_capacity=args.quarantine,
    )


def _policy_from(args) -> TagPolicy:
    if args.policy == "adjacent-distinct":
        return TagPolicy.adjacent_distinct()
    if args.policy == "sampled":
        return TagPolicy.sampled(args.sampling_rate)
    return TagPolicy.random()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tagsim",
                                     description="memory tagging simulator")
    commands = parser.add_subparsers(dest="command", required=True)

    probe = commands.add_parser("probe", help="Monte-Carlo detection rates")
    probe.add_argument("--kind", action="append", choices=_kind_names(),
                       help="scenario kind (repeatable; default: the probabilistic pair)")
    probe.add_argument("--trials", type=int, default=10000)
    _add_config_flags(probe, default_format="json")

    simulate = commands.add_parser("simulate", help="run one scenario")
    simulate.add_argument("scenario", choices=_kind_names())
    simulate.add_argument("--size", type=int, default=None)
    simulate.add_argument("--offset", type=int, default=None)
    simulate.add_argument("--reuse-depth", type=int, default=0)
    _add_config_flags(simulate, default_format="plain")

    overhead = commands.add_parser("overhead", help="trace RAM overhead table")
    overhead.add_argument("trace", help="allocation trace file")
    overhead.add_argument("--alignments", default="8,16,32,64",
                          help="comma-separated alignment list")
    _add_config_flags(overhead, default_format="json")

    return parser


def _emit_json(payload) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def _cmd_probe(args) -> int:
    cfg = _config_from(args)
    policy = _policy_from(args)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    kinds = [_parse_kind(k) for k in args.kind] if args.kind else list(_PROBE_DEFAULT_KINDS)
    reports = [estimate_detection(kind, cfg, trials=args.trials, seed=args.seed,
                                  policy=policy) for kind in kinds]
    if args.format == "json":
        _emit_json([r.to_json_dict() for r in reports])
    else:
        for r in reports:
            print(r.render())
    return 0


def _cmd_simulate(args) -> int:
    cfg = _config_from(args)
    policy = _policy_from(args)
    kind = _parse_kind(args.scenario)
    scenario = Scenario(kind=kind, size=args.size, offset=args.offset,
                        reuse_depth=args.reuse_depth, seed=args.seed, policy=policy)
    result = run_scenario(scenario, cfg)
    if args.format == "json":
        payload = {
            "kind": kind.value,
            "detected": result.detected,
            "report": result.report.to_json_dict() if result.report else None,
            "config": cfg.to_dict(),
            "seed": args.seed,
        }
        if result.observed is not None:
            payload["observed"] = result.observed.hex()
        _emit_json(payload)
    else:
        print(f"scenario={kind.value} seed={args.seed} tg={cfg.tg} ts={cfg.ts}"
              f" policy={args.policy}")
        if result.observed is not None:
            print(f"observed={result.observed.hex()}")
        if result.report is not None:
            print(result.report.render())
        print(f"detected={1 if result.detected else 0}")
    return 1 if result.detected else 0


def _cmd_overhead(args) -> int:
    try:
        alignments = [int(a) for a in args.alignments.split(",") if a.strip()]
    except ValueError:
        raise UsageError(f"bad --alignments value {args.alignments!r}") from None
    events = load_trace(args.trace)
    report = analyze_trace(events, alignments, ts=args.ts)
    if args.format == "json":
        _emit_json(report.to_json_dict())
    else:
        print(report.render())
    return 0


_COMMANDS = {"probe": _cmd_probe, "simulate": _cmd_simulate, "overhead": _cmd_overhead}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage and 0 on --help; keep its code
        return int(exc.code) if exc.code is not None else 0
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, TraceError, ScenarioError, AllocationError) as exc:
        print(f"tagsim: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tagsim: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
