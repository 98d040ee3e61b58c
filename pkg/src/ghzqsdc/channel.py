"""Transit noise, intercept-resend attacks and stabilizer tests of the shared GHZ registers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from .protocol import GroupRegister, distribute
from .quantum import (
    Pauli,
    apply_single_qubit,
    ghz_stabilizers,
    measure_computational,
    measure_stabilizer,
    stabilizer_expectation,
)

EXPECTATION_TOL = 1e-9


@dataclass(frozen=True)
class NoiseModel:
    """Independent single-qubit Pauli errors on distributed particles.

    ``qubits`` restricts the channel to a subset of particle indices; ``None``
    means every particle.
    """

    p_x: float = 0.0
    p_y: float = 0.0
    p_z: float = 0.0
    qubits: frozenset[int] | None = None

    def __post_init__(self) -> None:
        probs = (self.p_x, self.p_y, self.p_z)
        if any(not 0.0 <= p <= 1.0 for p in probs) or sum(probs) > 1.0 + 1e-12:
            raise ValueError(f"invalid Pauli error probabilities {probs}")
        if self.qubits is not None:
            object.__setattr__(self, "qubits", frozenset(int(q) for q in self.qubits))

    @classmethod
    def depolarizing(cls, p: float, qubits: Iterable[int] | None = None) -> "NoiseModel":
        return cls(p / 3, p / 3, p / 3, None if qubits is None else frozenset(qubits))

    @property
    def is_identity(self) -> bool:
        return self.p_x == self.p_y == self.p_z == 0.0

    def sample(self, rng: np.random.Generator) -> Pauli:
        u = rng.random()
        if u < self.p_x:
            return Pauli.X
        if u < self.p_x + self.p_y:
            return Pauli.Y
        if u < self.p_x + self.p_y + self.p_z:
            return Pauli.Z
        return Pauli.I


def apply_noise(group: GroupRegister, model: NoiseModel, rng: np.random.Generator) -> GroupRegister:
    """One trajectory of the Pauli channel; one uniform draw per affected qubit."""
    state = group.state
    for q in range(1, state.num_qubits + 1):
        if model.qubits is not None and q not in model.qubits:
            continue
        state = apply_single_qubit(state, q, model.sample(rng))
    return group.with_state(state)


def intercept_resend(
    group: GroupRegister, target_qubits: Iterable[int], rng: np.random.Generator
) -> GroupRegister:
    """Measure each target particle in the computational basis and forward it."""
    state = group.state
    for q in sorted(set(target_qubits)):
        _, state = measure_computational(state, q, rng)
    return group.with_state(state)


# -- verification --------------------------------------------------------------


@dataclass(frozen=True)
class StabilizerRecord:
    group_id: int
    half: int  # 0 for particles 1..M+1, 1 for M+2..2(M+1)
    stabilizer: int  # k of S_k
    value: float


@dataclass
class VerificationReport:
    mode: str
    groups_tested: list[int]
    stabilizers_checked: list[StabilizerRecord] = field(default_factory=list)
    failure_positions: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failure_positions

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "groups_tested": len(self.groups_tested),
            "group_ids": self.groups_tested,
            "stabilizers_checked": len(self.stabilizers_checked),
            "passed": self.passed,
            "failures": [
                {"group_id": g, "half": h, "stabilizer": f"S{k}"} for g, h, k in self.failure_positions
            ],
        }


def _half_stabilizers(group: GroupRegister):
    n = group.half_size
    base = ghz_stabilizers(n)
    for half in (0, 1):
        yield half, [s.embed(half * n, 2 * n) for s in base]


def verify_channel(
    groups: Sequence[GroupRegister], mode: str, rng: np.random.Generator | None = None
) -> VerificationReport:
    """Test sacrificed groups against the GHZ stabilizers.

    ``expectation`` checks every stabilizer of both halves exactly;
    ``sampled`` projectively measures one uniformly chosen stabilizer per
    half, as the parties could do with local measurements.
    """
    if not groups:
        raise ValueError("verification needs at least one group")
    if mode not in ("expectation", "sampled"):
        raise ValueError(f"unknown verification mode {mode!r}")
    if mode == "sampled" and rng is None:
        raise ValueError("sampled verification needs a random generator")

    report = VerificationReport(mode, [g.group_id for g in groups])
    for g in groups:
        state = g.state
        for half, stabs in _half_stabilizers(g):
            if mode == "expectation":
                checks = [(k, stabilizer_expectation(state, s)) for k, s in enumerate(stabs, 1)]
                bad = [k for k, v in checks if abs(v - 1.0) > EXPECTATION_TOL]
            else:
                k = int(rng.integers(len(stabs))) + 1
                value, state = measure_stabilizer(state, stabs[k - 1], rng)
                checks = [(k, float(value))]
                bad = [k] if value != 1 else []
            report.stabilizers_checked.extend(
                StabilizerRecord(g.group_id, half, k, v) for k, v in checks
            )
            report.failure_positions.extend((g.group_id, half, k) for k in bad)
    return report


def choose_test_groups(num_groups: int, fraction: float, rng: np.random.Generator) -> list[int]:
    """Group ids sacrificed for verification, chosen uniformly without replacement."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"test fraction must be in [0, 1), got {fraction}")
    count = int(round(fraction * num_groups))
    if fraction > 0 and count == 0:
        count = 1
    count = min(count, num_groups - 1) if num_groups > 1 else 0
    return sorted(int(i) for i in rng.choice(num_groups, size=count, replace=False))


# -- sweeps --------------------------------------------------------------------


@dataclass(frozen=True)
class SweepConfig:
    num_senders: int = 3
    groups_per_point: int = 200
    mode: str = "expectation"
    noise_kind: str = "depolarizing"  # one of x, y, z, depolarizing
    noise_levels: tuple[float, ...] = (0.0, 0.01, 0.05, 0.1, 0.2)
    noise_qubits: tuple[int, ...] | None = None
    attack_fractions: tuple[float, ...] = (0.0, 0.25, 0.5, 1.0)
    attack_targets: tuple[int, ...] = (1,)

    def noise_model(self, level: float) -> NoiseModel:
        qubits = None if self.noise_qubits is None else frozenset(self.noise_qubits)
        if self.noise_kind == "depolarizing":
            return NoiseModel.depolarizing(level, qubits)
        if self.noise_kind not in ("x", "y", "z"):
            raise ValueError(f"unknown noise kind {self.noise_kind!r}")
        return NoiseModel(**{f"p_{self.noise_kind}": level}, qubits=qubits)


@dataclass(frozen=True)
class SweepPoint:
    kind: str  # "noise" or "attack"
    strength: float
    trials: int
    detections: int
    ci_low: float
    ci_high: float

    @property
    def rate(self) -> float:
        return self.detections / self.trials

    @property
    def stderr(self) -> float:
        p = self.rate
        return math.sqrt(p * (1 - p) / self.trials)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "strength": self.strength,
            "trials": self.trials,
            "detections": self.detections,
            "rate": self.rate,
            "stderr": self.stderr,
            "ci95": [self.ci_low, self.ci_high],
        }


def _point(kind: str, strength: float, detections: int, trials: int) -> SweepPoint:
    ci = binomtest(detections, trials).proportion_ci(confidence_level=0.95)
    return SweepPoint(kind, strength, trials, detections, float(ci.low), float(ci.high))


def _detects(group: GroupRegister, mode: str, rng: np.random.Generator) -> bool:
    return not verify_channel([group], mode, rng).passed


def detection_statistics(config: SweepConfig, rng: np.random.Generator) -> list[SweepPoint]:
    """Fraction of individually tested groups that fail verification, per sweep point."""
    n = config.groups_per_point
    points = []
    for level in config.noise_levels:
        model = config.noise_model(level)
        groups = distribute(n, config.num_senders, rng, hooks=[lambda g: apply_noise(g, model, rng)])
        hits = sum(_detects(g, config.mode, rng) for g in groups)
        points.append(_point("noise", level, hits, n))
    for frac in config.attack_fractions:
        groups = distribute(n, config.num_senders, rng)
        hits = 0
        for g in groups:
            if rng.random() < frac:
                g = intercept_resend(g, config.attack_targets, rng)
            hits += _detects(g, config.mode, rng)
        points.append(_point("attack", frac, hits, n))
    return points
