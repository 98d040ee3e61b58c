"""Batch runs, transcript persistence and statistics over transcripts."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .channel import (
    NoiseModel,
    SweepConfig,
    VerificationReport,
    apply_noise,
    choose_test_groups,
    detection_statistics,
    intercept_resend,
    verify_channel,
)
from .protocol import (
    GroupRegister,
    RoundTranscript,
    Status,
    distribute,
    extract_shared_keys,
    group_rng,
    run_group,
)
from .quantum import BellOutcome, Pauli
from .swapping import (
    MAX_SENDERS,
    MIN_SENDERS,
    OP_FLIPS,
    InconsistentTranscript,
    MessageTuple,
    decode_analytic,
)

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODES = ("qsdc", "qkd", "verify", "sweep")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_REJECTED = 3
EXIT_DECODE_FAILURES = 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EavesdropSpec:
    """Intercept-resend on fixed particles of a random fraction of groups."""

    targets: tuple[int, ...]
    fraction: float = 1.0

    @classmethod
    def parse(cls, text: str) -> "EavesdropSpec | None":
        """``off``, ``"1"``, ``"1,5"`` or ``"1,5@0.25"``."""
        text = text.strip()
        if text.lower() in ("", "off", "none"):
            return None
        targets, _, frac = text.partition("@")
        try:
            qubits = tuple(int(q) for q in targets.split(","))
            fraction = float(frac) if frac else 1.0
        except ValueError:
            raise ConfigError(f"bad eavesdrop spec {text!r}") from None
        return cls(qubits, fraction)

    def __str__(self) -> str:
        return ",".join(map(str, self.targets)) + (f"@{self.fraction:g}" if self.fraction != 1.0 else "")


@dataclass(frozen=True)
class SimulationConfig:
    num_senders: int = 3
    groups: int = 1000
    seed: int = 0
    mode: str = "qsdc"
    noise: NoiseModel = field(default_factory=NoiseModel)
    eavesdrop: EavesdropSpec | None = None
    test_fraction: float = 0.1
    verify_mode: str = "expectation"
    messages: str = "cyclic"
    out: Path = Path("transcript.jsonl")
    max_failure_rate: float = 0.0
    proceed_on_reject: bool = False
    timestamp: bool = False

    def validate(self) -> None:
        if not MIN_SENDERS <= self.num_senders <= MAX_SENDERS:
            raise ConfigError(f"--parties must be in {MIN_SENDERS}..{MAX_SENDERS}, got {self.num_senders}")
        if self.groups < 1:
            raise ConfigError(f"--groups must be at least 1, got {self.groups}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"--seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.mode not in MODES:
            raise ConfigError(f"--mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError(f"--test-fraction must be in [0, 1), got {self.test_fraction}")
        if self.verify_mode not in ("expectation", "sampled"):
            raise ConfigError(f"unknown verification mode {self.verify_mode!r}")
        if not 0.0 <= self.max_failure_rate <= 1.0:
            raise ConfigError(f"failure threshold must be in [0, 1], got {self.max_failure_rate}")
        n = 2 * (self.num_senders + 1)
        if self.eavesdrop is not None:
            if any(not 1 <= q <= n for q in self.eavesdrop.targets):
                raise ConfigError(f"eavesdrop targets must be particles 1..{n}")
            if not 0.0 <= self.eavesdrop.fraction <= 1.0:
                raise ConfigError("eavesdrop fraction must be in [0, 1]")
        if self.noise.qubits is not None and any(not 1 <= q <= n for q in self.noise.qubits):
            raise ConfigError(f"noise qubits must be particles 1..{n}")
        message_source(self)

    def to_dict(self) -> dict:
        """Everything that determines the output, which excludes the output path."""
        noise = asdict(self.noise)
        if noise["qubits"] is not None:
            noise["qubits"] = sorted(noise["qubits"])
        return {
            "M": self.num_senders,
            "groups": self.groups,
            "seed": self.seed,
            "mode": self.mode,
            "noise": noise,
            "eavesdrop": None if self.eavesdrop is None else str(self.eavesdrop),
            "test_fraction": self.test_fraction,
            "verify_mode": self.verify_mode,
            "messages": self.messages,
            "max_failure_rate": self.max_failure_rate,
            "proceed_on_reject": self.proceed_on_reject,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def message_source(config: SimulationConfig) -> Callable[[int], MessageTuple]:
    m = config.num_senders
    spec = config.messages
    if spec == "cyclic":
        return lambda g: MessageTuple.from_int(g % 2 ** (m + 1), m)
    if spec == "random":
        return lambda g: MessageTuple.from_int(
            int(group_rng(config.seed, g, "message").integers(2 ** (m + 1))), m
        )
    if spec.startswith("fixed:"):
        try:
            msg = MessageTuple.parse(spec[len("fixed:"):])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if msg.num_senders != m:
            raise ConfigError(f"fixed message {msg} has {msg.num_senders} senders, expected {m}")
        return lambda g: msg
    raise ConfigError(f"--messages must be fixed:BITS, cyclic or random, got {spec!r}")


def run_rng(seed: int, stream: str) -> np.random.Generator:
    """Generator for run-level (not per-group) randomness."""
    return group_rng(seed, 2**32, stream)


# -- serialization ---------------------------------------------------------------


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _key_dict(records) -> list[dict]:
    return [
        {
            "sender": r.sender,
            "certain": "".join(map(str, r.certain_bits)),
            "random": "".join(map(str, r.random_bits)),
        }
        for r in records
    ]


def transcript_record(t: RoundTranscript, fingerprint: str) -> dict:
    return {
        "record": "group",
        "schema": SCHEMA_VERSION,
        "fingerprint": fingerprint,
        "group_id": t.group_id,
        "M": t.num_senders,
        "message": str(t.message),
        "operations": [op.value for op in t.operations],
        "sender_outcomes": [o.token for o in t.sender_outcomes],
        "receiver_outcome": t.receiver_outcome.token,
        "candidates": [[o.token for o in c] for c in t.candidates.sorted()],
        "decoded": None if t.decoded is None else str(t.decoded),
        "status": t.status.value,
        "classical": [
            [m.kind.value, m.sender, m.recipient] + ([m.payload.token] if m.payload else [])
            for m in t.classical_log
        ],
        "keys": {
            "receiver": _key_dict(extract_shared_keys(t, "receiver")),
            "sender": _key_dict(extract_shared_keys(t, "sender")),
        },
    }


def verification_records(report: VerificationReport, fingerprint: str) -> list[dict]:
    by_group: dict[int, list] = {g: [] for g in report.groups_tested}
    for r in report.stabilizers_checked:
        by_group[r.group_id].append([r.half, f"S{r.stabilizer}", round(r.value, 12) + 0.0])
    failed = {g for g, _, _ in report.failure_positions}
    return [
        {
            "record": "verification",
            "schema": SCHEMA_VERSION,
            "fingerprint": fingerprint,
            "group_id": g,
            "mode": report.mode,
            "checks": checks,
            "passed": g not in failed,
        }
        for g, checks in by_group.items()
    ]


def redecode(record: dict) -> str | None:
    """Decode a stored group record from its announced outcomes alone."""
    receiver = BellOutcome.from_token(record["receiver_outcome"])
    announced = [BellOutcome.from_token(t) for t in record["sender_outcomes"]]
    try:
        return str(decode_analytic(receiver, announced, int(record["M"])))
    except InconsistentTranscript:
        return None


# -- running ---------------------------------------------------------------------


@dataclass
class RunResult:
    exit_code: int
    summary: dict
    transcript_path: Path | None = None
    summary_path: Path | None = None


def _binomial(successes: int, trials: int) -> dict:
    rate = successes / trials if trials else float("nan")
    se = math.sqrt(rate * (1 - rate) / trials) if trials else float("nan")
    return {"count": successes, "trials": trials, "rate": rate, "stderr": se}


def _prepare_groups(config: SimulationConfig) -> list[GroupRegister]:
    hooks = []
    if not config.noise.is_identity:
        hooks.append(lambda g: apply_noise(g, config.noise, group_rng(config.seed, g.group_id, "channel")))
    if config.eavesdrop is not None:
        spec = config.eavesdrop

        def eavesdrop(g: GroupRegister) -> GroupRegister:
            rng = group_rng(config.seed, g.group_id, "eavesdrop")
            if rng.random() < spec.fraction:
                return intercept_resend(g, spec.targets, rng)
            return g

        hooks.append(eavesdrop)
    return distribute(config.groups, config.num_senders, run_rng(config.seed, "distribute"), hooks)


def _verify(config: SimulationConfig, groups: Iterable[GroupRegister]) -> VerificationReport:
    merged = VerificationReport(config.verify_mode, [])
    for g in groups:
        r = verify_channel([g], config.verify_mode, group_rng(config.seed, g.group_id, "verify"))
        merged.groups_tested.extend(r.groups_tested)
        merged.stabilizers_checked.extend(r.stabilizers_checked)
        merged.failure_positions.extend(r.failure_positions)
    return merged


def summary_path_for(out: Path) -> Path:
    return out.with_name(out.name + ".summary.json")


def run_simulation(config: SimulationConfig) -> RunResult:
    try:
        config.validate()
    except ConfigError as exc:
        return RunResult(EXIT_CONFIG, {"error": str(exc)})

    fp = config.fingerprint()
    header = {"record": "header", "schema": SCHEMA_VERSION, "fingerprint": fp, "config": config.to_dict()}
    if config.timestamp:
        header["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    lines = [header]
    summary: dict = {"schema": SCHEMA_VERSION, "fingerprint": fp, "config": config.to_dict()}
    exit_code = EXIT_OK

    if config.mode == "sweep":
        sweep = SweepConfig(
            num_senders=config.num_senders,
            groups_per_point=config.groups,
            mode=config.verify_mode,
            attack_targets=config.eavesdrop.targets if config.eavesdrop else (1,),
        )
        points = detection_statistics(sweep, run_rng(config.seed, "verify"))
        lines.extend({"record": "sweep", "schema": SCHEMA_VERSION, "fingerprint": fp, **p.to_dict()} for p in points)
        summary["sweep"] = [p.to_dict() for p in points]
        return _finish(config, lines, summary, exit_code)

    groups = _prepare_groups(config)
    if config.mode == "verify":
        tested_ids = [g.group_id for g in groups]
    else:
        tested_ids = choose_test_groups(config.groups, config.test_fraction, run_rng(config.seed, "verify"))
    tested = set(tested_ids)

    if tested:
        report = _verify(config, (g for g in groups if g.group_id in tested))
        lines.extend(verification_records(report, fp))
        summary["verification"] = report.to_dict()
        if not report.passed:
            exit_code = EXIT_REJECTED
    else:
        summary["verification"] = None

    if config.mode == "verify" or (exit_code == EXIT_REJECTED and not config.proceed_on_reject):
        return _finish(config, lines, summary, exit_code)

    messages = message_source(config)
    transcripts = [
        run_group(g, messages(g.group_id), group_rng(config.seed, g.group_id, "protocol"))
        for g in groups
        if g.group_id not in tested
    ]
    lines.extend(transcript_record(t, fp) for t in transcripts)

    statuses = Counter(t.status for t in transcripts)
    n = len(transcripts)
    summary["rounds"] = {
        "groups": n,
        "success": _binomial(statuses[Status.OK], n),
        "wrong": statuses[Status.WRONG],
        "inconsistent": statuses[Status.INCONSISTENT],
        "failure_rate": (n - statuses[Status.OK]) / n if n else 0.0,
    }
    if config.mode == "qkd":
        summary["keys"] = _key_summary(transcripts, config.num_senders)
    if n and summary["rounds"]["failure_rate"] > config.max_failure_rate and exit_code == EXIT_OK:
        exit_code = EXIT_DECODE_FAILURES
    return _finish(config, lines, summary, exit_code)


def _key_summary(transcripts: list[RoundTranscript], num_senders: int) -> dict:
    views: dict[str, dict[int, list[str]]] = {"receiver": {}, "sender": {}}
    for t in transcripts:
        if t.decoded is None:
            continue
        for view in views:
            for r in extract_shared_keys(t, view):
                views[view].setdefault(r.sender, []).append("".join(map(str, r.bits)))
    out = {}
    for k in range(1, num_senders + 1):
        rx = "".join(views["receiver"].get(k, []))
        tx = "".join(views["sender"].get(k, []))
        out[str(k)] = {"bits": len(rx), "receiver_key": rx, "sender_key": tx, "match": rx == tx}
    return out


def _finish(config: SimulationConfig, lines: list[dict], summary: dict, exit_code: int) -> RunResult:
    summary["exit_code"] = exit_code
    out = Path(config.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in lines:
            fh.write(_dumps(rec) + "\n")
    spath = summary_path_for(out)
    spath.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    log.info("wrote %d records to %s", len(lines), out)
    return RunResult(exit_code, summary, out, spath)


# -- reporting -------------------------------------------------------------------


@dataclass
class StatsReport:
    groups: int = 0
    successes: int = 0
    verification_groups: int = 0
    verification_failures: int = 0
    key_bits: dict[int, int] = field(default_factory=dict)
    channel_outcomes: Counter = field(default_factory=Counter)
    num_senders: int | None = None
    mismatches: list[dict] = field(default_factory=list)
    malformed: list[dict] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        return self.successes / self.groups if self.groups else float("nan")

    def outcome_table(self) -> list[dict]:
        """Pre-encoding outcome tuples against the uniform ``2**-(M+1)`` prediction."""
        if not self.groups or self.num_senders is None:
            return []
        n = sum(self.channel_outcomes.values())
        p = 2.0 ** -(self.num_senders + 1)
        sigma = math.sqrt(n * p * (1 - p))
        rows = []
        for key, count in sorted(self.channel_outcomes.items()):
            in_support = _in_support(key)
            expected = n * p if in_support else 0.0
            rows.append(
                {
                    "outcomes": key,
                    "count": count,
                    "frequency": count / n,
                    "expected": p if in_support else 0.0,
                    "z": (count - expected) / sigma if in_support and sigma else None,
                    "in_support": in_support,
                }
            )
        return rows

    def to_dict(self) -> dict:
        return {
            "groups": self.groups,
            "successes": self.successes,
            "success_rate": None if not self.groups else self.success_rate,
            "verification": {"groups": self.verification_groups, "failed": self.verification_failures},
            "key_bits": {str(k): v for k, v in sorted(self.key_bits.items())},
            "key_bits_per_group": {
                str(k): v / self.groups for k, v in sorted(self.key_bits.items()) if self.groups
            },
            "outcome_table": self.outcome_table(),
            "mismatches": self.mismatches,
            "malformed": self.malformed,
        }

    def render(self) -> str:
        lines = [f"groups: {self.groups}"]
        if self.groups:
            lines.append(f"success rate: {self.success_rate:.6f} ({self.successes}/{self.groups})")
        if self.verification_groups:
            lines.append(
                f"verification: {self.verification_failures}/{self.verification_groups} tested groups failed"
            )
        for k, v in sorted(self.key_bits.items()):
            lines.append(f"sender {k}: {v} key bits ({v / self.groups:g} per group)")
        table = self.outcome_table()
        if table:
            lines.append("channel outcomes (count, frequency, z):")
            for row in table:
                z = "out of support" if row["z"] is None else f"{row['z']:+.2f}"
                lines.append(f"  {row['outcomes']}  {row['count']:6d}  {row['frequency']:.5f}  {z}")
        for m in self.mismatches:
            lines.append(f"line {m['line']}: stored decode {m['stored']} != re-decode {m['redecoded']}")
        for m in self.malformed:
            lines.append(f"line {m['line']}: malformed record ({m['error']})")
        return "\n".join(lines)


def _in_support(key: str) -> bool:
    outcomes = [BellOutcome.from_token(t) for t in key.split()]
    same_type = len({o.type_bit for o in outcomes}) == 1
    return same_type and sum(o.sign_bit for o in outcomes) % 2 == 0


def _channel_outcomes(record: dict) -> str:
    """Undo the recorded operations to get the outcomes the bare channel produced."""
    ops = [Pauli(op) for op in record["operations"]]
    announced = [BellOutcome.from_token(t) for t in record["sender_outcomes"]]
    pre = [a.flipped(*OP_FLIPS[op]) for a, op in zip(announced, ops, strict=True)]
    return " ".join(o.token for o in pre + [BellOutcome.from_token(record["receiver_outcome"])])


def report_stats(path: Path | str) -> StatsReport:
    report = StatsReport()
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                kind = rec["record"]
                if rec.get("schema") != SCHEMA_VERSION:
                    raise ValueError(f"unsupported schema {rec.get('schema')!r}")
                if kind == "group":
                    _account_group(report, rec, lineno)
                elif kind == "verification":
                    report.verification_groups += 1
                    report.verification_failures += not rec["passed"]
                elif kind not in ("header", "sweep"):
                    raise ValueError(f"unknown record kind {kind!r}")
            except (ValueError, KeyError, TypeError) as exc:
                report.malformed.append({"line": lineno, "error": f"{type(exc).__name__}: {exc}"})
    return report


def _account_group(report: StatsReport, rec: dict, lineno: int) -> None:
    m = int(rec["M"])
    if len(rec["sender_outcomes"]) != m:
        raise ValueError(f"expected {m} sender outcomes")
    channel = _channel_outcomes(rec)
    redecoded = redecode(rec)
    report.groups += 1
    report.num_senders = m
    report.successes += rec["decoded"] is not None and rec["decoded"] == rec["message"]
    report.channel_outcomes[channel] += 1
    for k in rec["keys"]["receiver"]:
        bits = len(k["certain"]) + len(k["random"])
        report.key_bits[int(k["sender"])] = report.key_bits.get(int(k["sender"]), 0) + bits
    if redecoded != rec["decoded"]:
        report.mismatches.append(
            {"line": lineno, "group_id": rec["group_id"], "stored": rec["decoded"], "redecoded": redecoded}
        )
