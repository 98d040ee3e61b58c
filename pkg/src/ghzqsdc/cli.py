"""Command-line entry point: ``ghzqsdc run`` and ``ghzqsdc report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .channel import NoiseModel
from .harness import (
    EXIT_CONFIG,
    EXIT_OK,
    MODES,
    ConfigError,
    EavesdropSpec,
    SimulationConfig,
    report_stats,
    run_simulation,
)


def _noise(text: str) -> NoiseModel:
    try:
        px, py, pz = (float(v) for v in text.split(","))
        return NoiseModel(px, py, pz)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--noise expects px,py,pz ({exc})") from None


def _eavesdrop(text: str) -> EavesdropSpec | None:
    try:
        return EavesdropSpec.parse(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _messages(text: str) -> str:
    if text in ("cyclic", "random") or text.startswith("fixed:"):
        return text
    raise argparse.ArgumentTypeError("--messages must be fixed:BITS, cyclic or random")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghzqsdc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a batch of groups")
    run.add_argument("--parties", "-M", type=int, default=3, help="number of senders M (2..6)")
    run.add_argument("--groups", "-N", type=int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--mode", choices=MODES, default="qsdc")
    run.add_argument("--noise", type=_noise, default=NoiseModel(), metavar="PX,PY,PZ")
    run.add_argument(
        "--eavesdrop",
        type=_eavesdrop,
        default=None,
        metavar="SPEC",
        help="off, or particle list with optional group fraction, e.g. 1,5@0.5",
    )
    run.add_argument("--test-fraction", type=float, default=0.1)
    run.add_argument("--verify-mode", choices=("expectation", "sampled"), default="expectation")
    run.add_argument("--messages", type=_messages, default="cyclic", metavar="{fixed:B,..,cyclic,random}")
    run.add_argument("--out", type=Path, default=Path("transcript.jsonl"))
    run.add_argument("--max-failure-rate", type=float, default=0.0)
    run.add_argument("--proceed-on-reject", action="store_true", help="run message rounds even if the channel test fails")
    run.add_argument("--timestamp", action="store_true", help="record creation time in the header")

    report = sub.add_parser("report", help="summarize a transcript file")
    report.add_argument("transcript", type=Path)
    report.add_argument("--json", action="store_true", help="print the machine-readable summary")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    if args.command == "report":
        try:
            stats = report_stats(args.transcript)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(json.dumps(stats.to_dict(), indent=2) if args.json else stats.render())
        return EXIT_OK

    config = SimulationConfig(
        num_senders=args.parties,
        groups=args.groups,
        seed=args.seed,
        mode=args.mode,
        noise=args.noise,
        eavesdrop=args.eavesdrop,
        test_fraction=args.test_fraction,
        verify_mode=args.verify_mode,
        messages=args.messages,
        out=args.out,
        max_failure_rate=args.max_failure_rate,
        proceed_on_reject=args.proceed_on_reject,
        timestamp=args.timestamp,
    )
    result = run_simulation(config)
    if "error" in result.summary:
        print(f"error: {result.summary['error']}", file=sys.stderr)
        return result.exit_code
    _print_summary(result.summary)
    return result.exit_code


def _print_summary(summary: dict) -> None:
    ver = summary.get("verification")
    if ver:
        state = "passed" if ver["passed"] else f"REJECTED ({len(ver['failures'])} failing checks)"
        print(f"channel test ({ver['mode']}, {ver['groups_tested']} groups): {state}")
    rounds = summary.get("rounds")
    if rounds:
        s = rounds["success"]
        print(f"rounds: {rounds['groups']}  success rate {s['rate']:.6f} +/- {s['stderr']:.6f}")
    for sender, k in summary.get("keys", {}).items():
        print(f"sender {sender}: {k['bits']} shared key bits, ends agree: {k['match']}")
    for p in summary.get("sweep", []):
        print(
            f"{p['kind']:>6} {p['strength']:<6g} detection {p['rate']:.4f} "
            f"[{p['ci95'][0]:.4f}, {p['ci95'][1]:.4f}] over {p['trials']}"
        )
    print(f"exit code {summary['exit_code']}")


if __name__ == "__main__":
    sys.exit(main())
