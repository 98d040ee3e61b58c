"""One receiver, ``M`` senders: distribution, encoding, measurement and decoding.

Party ``k`` for ``k = 1..M`` is a sender and owns particles ``k`` and
``k + M + 1``. The receiver is party ``M + 1`` and owns particles ``M + 1``
and ``2(M + 1)``. The receiver prepared the GHZ registers, so the receiver
is also the distributing party.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .quantum import (
    BellOutcome,
    Pauli,
    PureState,
    apply_single_qubit,
    make_ghz,
    measure_bell,
    tensor,
)
from .swapping import (
    MAX_SENDERS,
    MIN_SENDERS,
    OP_FLIPS,
    OTHER_OPS,
    SENDER1_OPS,
    CandidateSet,
    DecoderInvariantError,
    InconsistentTranscript,
    MessageTuple,
    candidate_set,
    decode_analytic,
    decode_search,
    encode_bits_to_ops,
)

_STREAMS = {"distribute": 0, "channel": 1, "eavesdrop": 2, "protocol": 3, "verify": 4, "message": 5}


def group_rng(seed: int, group_id: int, stream: str = "protocol") -> np.random.Generator:
    """Independent generator for one group and one purpose, derived from the master seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(group_id), _STREAMS[stream]))
    return np.random.default_rng(ss)


class ProtocolError(RuntimeError):
    """A party acted out of order."""


def _check_senders(num_senders: int) -> None:
    if not MIN_SENDERS <= num_senders <= MAX_SENDERS:
        raise ValueError(f"M must be in {MIN_SENDERS}..{MAX_SENDERS}, got {num_senders}")


def ownership_map(num_senders: int) -> dict[int, int]:
    n = num_senders + 1
    return {q: (q - 1) % n + 1 for q in range(1, 2 * n + 1)}


@dataclass(frozen=True, eq=False)
class GroupRegister:
    group_id: int
    num_senders: int
    state: PureState
    ownership: dict[int, int] = field(default=None)  # type: ignore[assignment]
    # Indices of the two prepared GHZ registers placed in this group.
    sources: tuple[int, int] = (0, 1)

    def __post_init__(self) -> None:
        n = self.num_senders + 1
        if self.state.num_qubits != 2 * n:
            raise ValueError(f"group for M={self.num_senders} needs {2 * n} qubits")
        if self.ownership is None:
            object.__setattr__(self, "ownership", ownership_map(self.num_senders))

    @property
    def receiver(self) -> int:
        return self.num_senders + 1

    @property
    def half_size(self) -> int:
        return self.num_senders + 1

    def pair_of(self, party: int) -> tuple[int, int]:
        return (party, party + self.half_size)

    def with_state(self, state: PureState) -> "GroupRegister":
        return replace(self, state=state)


GroupHook = Callable[[GroupRegister], GroupRegister]


def distribute(
    num_groups: int,
    num_senders: int,
    rng: np.random.Generator,
    hooks: Sequence[GroupHook] = (),
    first_id: int = 0,
) -> list[GroupRegister]:
    """Prepare ``2N`` GHZ registers and pair them into ``N`` groups at random.

    ``hooks`` are applied to each group in order, modelling what happens to
    the particles in transit (noise, interception).
    """
    if num_groups < 1:
        raise ValueError(f"need at least one group, got {num_groups}")
    _check_senders(num_senders)
    ghz = make_ghz(num_senders + 1)
    base = tensor(ghz, ghz)
    order = rng.permutation(2 * num_groups)
    groups = []
    for i in range(num_groups):
        g = GroupRegister(
            first_id + i, num_senders, base, sources=(int(order[2 * i]), int(order[2 * i + 1]))
        )
        for hook in hooks:
            g = hook(g)
        groups.append(g)
    return groups


# -- classical channel ---------------------------------------------------------


class MessageKind(enum.Enum):
    MEASUREMENT_DONE = "MeasurementDone"
    RESULTS_REQUEST = "ResultsRequest"
    RESULTS_ANNOUNCEMENT = "ResultsAnnouncement"


@dataclass(frozen=True)
class ClassicalMessage:
    kind: MessageKind
    sender: int
    recipient: int
    group_id: int
    payload: BellOutcome | None = None

    def __post_init__(self) -> None:
        if (self.kind is MessageKind.RESULTS_ANNOUNCEMENT) != (self.payload is not None):
            raise ValueError(f"{self.kind.value} payload mismatch: {self.payload!r}")


class ClassicalChannel:
    """Ordered in-process queues, one per recipient, plus a full log."""

    def __init__(self) -> None:
        self.log: list[ClassicalMessage] = []
        self._queues: dict[int, deque[ClassicalMessage]] = {}

    def send(self, msg: ClassicalMessage) -> None:
        self.log.append(msg)
        self._queues.setdefault(msg.recipient, deque()).append(msg)

    def receive(self, party: int) -> list[ClassicalMessage]:
        q = self._queues.get(party)
        if not q:
            return []
        out = list(q)
        q.clear()
        return out


# -- parties ---------------------------------------------------------------------


class Sender:
    def __init__(self, party: int, num_senders: int, bits: tuple[int, ...], group_id: int):
        self.party = party
        self.num_senders = num_senders
        self.bits = bits
        self.group_id = group_id
        self.receiver = num_senders + 1
        self.op = SENDER1_OPS[bits] if party == 1 else OTHER_OPS[bits]
        self.outcome: BellOutcome | None = None
        self.phase = "ready"

    @property
    def pair(self) -> tuple[int, int]:
        return (self.party, self.party + self.num_senders + 1)

    def encode(self, state: PureState) -> PureState:
        if self.phase != "ready":
            raise ProtocolError(f"sender {self.party} cannot encode in phase {self.phase}")
        self.phase = "encoded"
        return apply_single_qubit(state, self.party, self.op)

    def measure(self, state: PureState, rng: np.random.Generator, channel: ClassicalChannel) -> PureState:
        if self.phase != "encoded":
            raise ProtocolError(f"sender {self.party} cannot measure in phase {self.phase}")
        self.outcome, state = measure_bell(state, self.pair, rng)
        self.phase = "measured"
        channel.send(
            ClassicalMessage(MessageKind.MEASUREMENT_DONE, self.party, self.receiver, self.group_id)
        )
        return state

    def handle(self, channel: ClassicalChannel) -> None:
        for msg in channel.receive(self.party):
            if msg.kind is not MessageKind.RESULTS_REQUEST:
                raise ProtocolError(f"sender {self.party} got unexpected {msg.kind.value}")
            if self.phase != "measured":
                raise ProtocolError(f"sender {self.party} asked for results before measuring")
            channel.send(
                ClassicalMessage(
                    MessageKind.RESULTS_ANNOUNCEMENT,
                    self.party,
                    self.receiver,
                    self.group_id,
                    self.outcome,
                )
            )
            self.phase = "announced"

    def key_record(self) -> "SharedKeyRecord":
        assert self.outcome is not None
        return SharedKeyRecord.from_outcome(self.party, self.bits, self.op, self.outcome)


class Receiver:
    def __init__(self, num_senders: int, group_id: int):
        self.num_senders = num_senders
        self.party = num_senders + 1
        self.group_id = group_id
        self.done: set[int] = set()
        self.outcome: BellOutcome | None = None
        self.candidates: CandidateSet | None = None
        self.announced: dict[int, BellOutcome] = {}
        self.requested = False

    @property
    def pair(self) -> tuple[int, int]:
        return (self.party, 2 * self.party)

    def handle(self, channel: ClassicalChannel) -> None:
        for msg in channel.receive(self.party):
            if msg.kind is MessageKind.MEASUREMENT_DONE:
                self.done.add(msg.sender)
            elif msg.kind is MessageKind.RESULTS_ANNOUNCEMENT:
                if not self.requested:
                    raise ProtocolError("announcement arrived before it was requested")
                self.announced[msg.sender] = msg.payload
            else:
                raise ProtocolError(f"receiver got unexpected {msg.kind.value}")

    def measure(self, state: PureState, rng: np.random.Generator) -> PureState:
        if self.outcome is not None:
            raise ProtocolError("receiver already measured")
        self.outcome, state = measure_bell(state, self.pair, rng)
        self.candidates = candidate_set(self.outcome, self.num_senders)
        return state

    def request_results(self, channel: ClassicalChannel) -> None:
        if len(self.done) != self.num_senders:
            missing = sorted(set(range(1, self.num_senders + 1)) - self.done)
            raise ProtocolError(f"senders {missing} have not reported a finished measurement")
        if self.outcome is None:
            raise ProtocolError("receiver must measure before requesting results")
        self.requested = True
        for k in range(1, self.num_senders + 1):
            channel.send(ClassicalMessage(MessageKind.RESULTS_REQUEST, self.party, k, self.group_id))

    def announced_tuple(self) -> tuple[BellOutcome, ...]:
        if len(self.announced) != self.num_senders:
            raise ProtocolError("not every sender has announced")
        return tuple(self.announced[k] for k in range(1, self.num_senders + 1))

    def decode(self) -> MessageTuple:
        announced = self.announced_tuple()
        decoded = decode_analytic(self.outcome, announced, self.num_senders)
        audit = decode_search(self.outcome, announced, self.num_senders)
        if audit != decoded:
            raise DecoderInvariantError(f"analytic decode {decoded} != search decode {audit}")
        return decoded


# -- key material ----------------------------------------------------------------


def outcome_bits(outcome: BellOutcome) -> tuple[int, int]:
    """Key encoding of an outcome: type (Phi=0, Psi=1) then sign (+=0, -=1)."""
    return (outcome.type_bit, outcome.sign_bit)


@dataclass(frozen=True)
class SharedKeyRecord:
    """Key bits one sender shares with the receiver from one group.

    ``random_bits`` encode the pair outcome before the sender's operation,
    which only the sender and the receiver can reconstruct.
    """

    sender: int
    certain_bits: tuple[int, ...]
    random_bits: tuple[int, int]

    @classmethod
    def from_outcome(
        cls, sender: int, bits: tuple[int, ...], op: Pauli, announced: BellOutcome
    ) -> "SharedKeyRecord":
        original = announced.flipped(*OP_FLIPS[op])
        return cls(sender, tuple(bits), outcome_bits(original))

    @property
    def bits(self) -> tuple[int, ...]:
        return self.certain_bits + self.random_bits

    def __len__(self) -> int:
        return len(self.bits)


# -- transcript ------------------------------------------------------------------


class Status(str, enum.Enum):
    OK = "ok"
    WRONG = "wrong"  # decoded cleanly but differs from what was sent
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class RoundTranscript:
    group_id: int
    num_senders: int
    message: MessageTuple
    operations: tuple[Pauli, ...]
    sender_outcomes: tuple[BellOutcome, ...]
    receiver_outcome: BellOutcome
    candidates: CandidateSet
    decoded: MessageTuple | None
    classical_log: tuple[ClassicalMessage, ...]
    key_material: tuple[SharedKeyRecord, ...]
    sender_keys: tuple[SharedKeyRecord, ...]

    @property
    def status(self) -> Status:
        if self.decoded is None:
            return Status.INCONSISTENT
        return Status.OK if self.decoded == self.message else Status.WRONG

    @property
    def succeeded(self) -> bool:
        return self.status is Status.OK

    def pre_announcement_log(self) -> tuple[ClassicalMessage, ...]:
        for i, msg in enumerate(self.classical_log):
            if msg.kind is MessageKind.RESULTS_REQUEST:
                return self.classical_log[:i]
        return self.classical_log


def run_group(group: GroupRegister, message: MessageTuple, rng: np.random.Generator) -> RoundTranscript:
    m = group.num_senders
    if message.num_senders != m:
        raise ValueError(f"message shaped for M={message.num_senders}, group has M={m}")
    channel = ClassicalChannel()
    senders = [Sender(k, m, message.bits_of(k), group.group_id) for k in range(1, m + 1)]
    receiver = Receiver(m, group.group_id)

    state = group.state
    for s in senders:
        state = s.encode(state)
    for s in senders:
        state = s.measure(state, rng, channel)
    receiver.handle(channel)
    state = receiver.measure(state, rng)
    receiver.request_results(channel)
    for s in senders:
        s.handle(channel)
    receiver.handle(channel)

    try:
        decoded = receiver.decode()
    except InconsistentTranscript:
        decoded = None

    announced = receiver.announced_tuple()
    keys: tuple[SharedKeyRecord, ...] = ()
    if decoded is not None:
        keys = _receiver_keys(decoded, announced)
    return RoundTranscript(
        group_id=group.group_id,
        num_senders=m,
        message=message,
        operations=tuple(s.op for s in senders),
        sender_outcomes=tuple(s.outcome for s in senders),
        receiver_outcome=receiver.outcome,
        candidates=receiver.candidates,
        decoded=decoded,
        classical_log=tuple(channel.log),
        key_material=keys,
        sender_keys=tuple(s.key_record() for s in senders),
    )


def _receiver_keys(
    decoded: MessageTuple, announced: Sequence[BellOutcome]
) -> tuple[SharedKeyRecord, ...]:
    ops = encode_bits_to_ops(decoded)
    return tuple(
        SharedKeyRecord.from_outcome(k, decoded.bits_of(k), ops[k - 1], announced[k - 1])
        for k in range(1, decoded.num_senders + 1)
    )


def extract_shared_keys(transcript: RoundTranscript, view: str = "receiver") -> list[SharedKeyRecord]:
    """Per-sender key records as computed by the receiver or by the senders.

    A transcript that failed to decode yields no key material.
    """
    if transcript.decoded is None:
        return []
    if view == "receiver":
        return list(_receiver_keys(transcript.decoded, transcript.sender_outcomes))
    if view == "sender":
        return list(transcript.sender_keys)
    raise ValueError(f"view must be 'receiver' or 'sender', got {view!r}")


def run_groups(
    groups: Iterable[GroupRegister],
    messages: Callable[[int], MessageTuple],
    seed: int,
) -> list[RoundTranscript]:
    """Run every group with its own generator; results come back in group order."""
    return [
        run_group(g, messages(g.group_id), group_rng(seed, g.group_id, "protocol"))
        for g in sorted(groups, key=lambda g: g.group_id)
    ]
