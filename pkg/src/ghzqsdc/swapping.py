"""Bell-pair decompositions and the receiver's inference and decoding rules.

Sender ``k`` (1-based) of an ``M``-sender protocol encodes on qubit ``k`` and
Bell-measures the pair ``(k, k + M + 1)``. Sender 1 may use all four
operations and carries two bits; every other sender uses I or X and carries
one bit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .quantum import BELL_MATRIX, BELL_OUTCOMES, NORM_TOL, BellOutcome, Pauli, PureState

MIN_SENDERS = 2
MAX_SENDERS = 6


class InconsistentTranscript(ValueError):
    """No allowed operation tuple explains the announced outcomes."""


class DecoderInvariantError(RuntimeError):
    """More than one operation tuple explains an announcement."""


# -- messages and operations ------------------------------------------------

SENDER1_OPS: dict[tuple[int, int], Pauli] = {
    (0, 0): Pauli.I,
    (0, 1): Pauli.X,
    (1, 0): Pauli.Y,
    (1, 1): Pauli.Z,
}
OTHER_OPS: dict[tuple[int], Pauli] = {(0,): Pauli.I, (1,): Pauli.X}

_SENDER1_BITS = {op: bits for bits, op in SENDER1_OPS.items()}
_OTHER_BITS = {op: bits for bits, op in OTHER_OPS.items()}

# (type flip, sign flip) on the Bell pair whose first qubit receives the operation.
OP_FLIPS: dict[Pauli, tuple[int, int]] = {
    Pauli.I: (0, 0),
    Pauli.X: (1, 0),
    Pauli.Y: (1, 1),
    Pauli.Z: (0, 1),
}
_FLIPS_TO_OP = {flips: op for op, flips in OP_FLIPS.items()}


@dataclass(frozen=True)
class MessageTuple:
    """Bits sent in one group: two from sender 1, one from each other sender."""

    sender1_bits: tuple[int, int]
    other_bits: tuple[int, ...]

    def __post_init__(self) -> None:
        s1 = tuple(int(b) for b in self.sender1_bits)
        rest = tuple(int(b) for b in self.other_bits)
        if len(s1) != 2:
            raise ValueError(f"sender 1 carries exactly 2 bits, got {s1}")
        if any(b not in (0, 1) for b in s1 + rest):
            raise ValueError("message bits must be 0 or 1")
        object.__setattr__(self, "sender1_bits", s1)
        object.__setattr__(self, "other_bits", rest)

    @property
    def num_senders(self) -> int:
        return 1 + len(self.other_bits)

    def bits_of(self, sender: int) -> tuple[int, ...]:
        if sender == 1:
            return self.sender1_bits
        return (self.other_bits[sender - 2],)

    def per_sender(self) -> list[tuple[int, ...]]:
        return [self.bits_of(k) for k in range(1, self.num_senders + 1)]

    def __str__(self) -> str:
        return ",".join("".join(map(str, b)) for b in self.per_sender())

    @classmethod
    def parse(cls, text: str) -> "MessageTuple":
        """Inverse of ``str``: ``"01,0,1"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) < 2:
            raise ValueError(f"message {text!r} needs at least two senders")
        if len(parts[0]) != 2 or any(len(p) != 1 for p in parts[1:]):
            raise ValueError(f"malformed message {text!r}")
        try:
            return cls(tuple(int(c) for c in parts[0]), tuple(int(p) for p in parts[1:]))
        except ValueError:
            raise ValueError(f"malformed message {text!r}") from None

    @classmethod
    def from_int(cls, value: int, num_senders: int) -> "MessageTuple":
        """Message number ``value`` in ``0 .. 2**(M+1) - 1``, big-endian over the bits."""
        nbits = num_senders + 1
        if not 0 <= value < 2**nbits:
            raise ValueError(f"message index {value} out of range for M={num_senders}")
        bits = [(value >> (nbits - 1 - i)) & 1 for i in range(nbits)]
        return cls(tuple(bits[:2]), tuple(bits[2:]))


def all_messages(num_senders: int) -> Iterator[MessageTuple]:
    for v in range(2 ** (num_senders + 1)):
        yield MessageTuple.from_int(v, num_senders)


def encode_bits_to_ops(message: MessageTuple) -> tuple[Pauli, ...]:
    ops = [SENDER1_OPS[message.sender1_bits]]
    ops.extend(OTHER_OPS[(b,)] for b in message.other_bits)
    return tuple(ops)


def ops_to_bits(ops: Sequence[Pauli]) -> MessageTuple:
    """Inverse of :func:`encode_bits_to_ops`."""
    if len(ops) < 2:
        raise ValueError("need at least two senders")
    try:
        s1 = _SENDER1_BITS[ops[0]]
        rest = tuple(_OTHER_BITS[op][0] for op in ops[1:])
    except KeyError as exc:
        raise ValueError(f"operation {exc.args[0]} not allowed for that sender") from None
    return MessageTuple(s1, rest)


def allowed_op_tuples(num_senders: int) -> Iterator[tuple[Pauli, ...]]:
    yield from itertools.product(SENDER1_OPS.values(), *[OTHER_OPS.values()] * (num_senders - 1))


def apply_ops_to_outcomes(
    outcomes: Sequence[BellOutcome], ops: Sequence[Pauli]
) -> tuple[BellOutcome, ...]:
    """Relabel pre-operation pair outcomes by the effect of each sender's operation."""
    return tuple(o.flipped(*OP_FLIPS[op]) for o, op in zip(outcomes, ops, strict=True))


def canonical_pairing(num_senders: int) -> list[tuple[int, int]]:
    """Pairs ``(k, k+M+1)``; the last pair is the receiver's."""
    n = num_senders + 1
    return [(k, k + n) for k in range(1, n + 1)]


def _check_senders(num_senders: int) -> None:
    if not MIN_SENDERS <= num_senders <= MAX_SENDERS:
        raise ValueError(f"M must be in {MIN_SENDERS}..{MAX_SENDERS}, got {num_senders}")


# -- decomposition ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PairDecomposition:
    """Coefficients of a state in a product Bell basis.

    ``terms`` holds every Bell-outcome tuple (one entry per pair, in pairing
    order), including zero coefficients.
    """

    pairing: tuple[tuple[int, int], ...]
    terms: dict[tuple[BellOutcome, ...], complex]

    def nonzero(self, atol: float = NORM_TOL) -> dict[tuple[BellOutcome, ...], complex]:
        return {k: c for k, c in self.terms.items() if abs(c) > atol}

    def norm_squared(self) -> float:
        return float(sum(abs(c) ** 2 for c in self.terms.values()))

    def reconstruct(self) -> PureState:
        """Rebuild the state from ``sum_t c_t |Bell_t>``."""
        k = len(self.pairing)
        coeffs = np.zeros((4,) * k, dtype=complex)
        index = {o: i for i, o in enumerate(BELL_OUTCOMES)}
        for outcomes, c in self.terms.items():
            coeffs[tuple(index[o] for o in outcomes)] = c
        return _from_bell_coefficients(coeffs, self.pairing)


def _check_pairing(num_qubits: int, pairing: Sequence[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    pairing = tuple((int(a), int(b)) for a, b in pairing)
    flat = [q for p in pairing for q in p]
    if sorted(flat) != list(range(1, num_qubits + 1)):
        raise ValueError(f"pairing {pairing} is not a perfect matching of 1..{num_qubits}")
    return pairing


def bell_decomposition(state: PureState, pairing: Sequence[tuple[int, int]]) -> PairDecomposition:
    pairing = _check_pairing(state.num_qubits, pairing)
    k = len(pairing)
    order = [q - 1 for p in pairing for q in p]
    psi = np.transpose(state.tensor_view(), order).reshape((4,) * k)
    bra = BELL_MATRIX.conj()
    for axis in range(k):
        psi = np.moveaxis(np.tensordot(bra, psi, axes=([1], [axis])), 0, axis)
    terms = {
        outcomes: complex(psi[idx])
        for idx, outcomes in zip(
            itertools.product(range(4), repeat=k),
            itertools.product(BELL_OUTCOMES, repeat=k),
        )
    }
    return PairDecomposition(pairing, terms)


def _from_bell_coefficients(coeffs: np.ndarray, pairing: Sequence[tuple[int, int]]) -> PureState:
    k = len(pairing)
    psi = coeffs
    for axis in range(k):
        psi = np.moveaxis(np.tensordot(BELL_MATRIX.T, psi, axes=([1], [axis])), 0, axis)
    order = [q - 1 for p in pairing for q in p]
    psi = psi.reshape((2,) * (2 * k))
    psi = np.transpose(psi, np.argsort(order))
    return PureState(2 * k, psi.reshape(-1))


# -- candidate inference --------------------------------------------------------


@dataclass(frozen=True)
class CandidateSet:
    """Sender-pair outcomes compatible with the receiver's own outcome, before encoding."""

    receiver_outcome: BellOutcome
    candidates: frozenset[tuple[BellOutcome, ...]]

    def __len__(self) -> int:
        return len(self.candidates)

    def __contains__(self, item) -> bool:
        return tuple(item) in self.candidates

    def sorted(self) -> list[tuple[BellOutcome, ...]]:
        return sorted(self.candidates, key=lambda t: [o.value for o in t])


def candidate_set(receiver_outcome: BellOutcome, num_senders: int) -> CandidateSet:
    """Same-type tuples whose signs, together with the receiver's, have even parity."""
    if num_senders < MIN_SENDERS:
        raise ValueError(f"M must be at least {MIN_SENDERS}, got {num_senders}")
    t = receiver_outcome.type_bit
    out = set()
    for head in itertools.product((0, 1), repeat=num_senders - 1):
        last = (sum(head) + receiver_outcome.sign_bit) % 2
        out.add(tuple(BellOutcome.from_bits(t, s) for s in head + (last,)))
    return CandidateSet(receiver_outcome, frozenset(out))


def candidate_set_bruteforce(receiver_outcome: BellOutcome, num_senders: int) -> CandidateSet:
    """Read the candidates off the decomposition of the undisturbed channel state."""
    from .quantum import make_ghz, tensor

    n = num_senders + 1
    decomp = bell_decomposition(tensor(make_ghz(n), make_ghz(n)), canonical_pairing(num_senders))
    found = {t[:-1] for t in decomp.nonzero() if t[-1] is receiver_outcome}
    return CandidateSet(receiver_outcome, frozenset(found))


# -- decoding -------------------------------------------------------------------


def _check_announcement(announced: Sequence[BellOutcome], num_senders: int) -> tuple[BellOutcome, ...]:
    announced = tuple(announced)
    if len(announced) != num_senders:
        raise ValueError(f"expected {num_senders} announced outcomes, got {len(announced)}")
    return announced


def consistent_op_tuples(
    receiver_outcome: BellOutcome, announced: Sequence[BellOutcome], num_senders: int
) -> list[tuple[Pauli, ...]]:
    """Every allowed operation tuple mapping some candidate onto ``announced``.

    Each operation is its own inverse on outcome labels, so undoing ``ops`` on
    the announcement and looking the result up in the candidate set is the
    same as applying ``ops`` to every candidate.
    """
    announced = _check_announcement(announced, num_senders)
    cands = candidate_set(receiver_outcome, num_senders).candidates
    return [
        ops
        for ops in allowed_op_tuples(num_senders)
        if apply_ops_to_outcomes(announced, ops) in cands
    ]


def decode_search(
    receiver_outcome: BellOutcome, announced: Sequence[BellOutcome], num_senders: int
) -> MessageTuple:
    matches = consistent_op_tuples(receiver_outcome, announced, num_senders)
    if not matches:
        raise InconsistentTranscript(
            f"no operation tuple explains {[str(a) for a in announced]} given {receiver_outcome}"
        )
    if len(matches) > 1:
        raise DecoderInvariantError(f"{len(matches)} operation tuples explain the announcement")
    return ops_to_bits(matches[0])


def decode_analytic(
    receiver_outcome: BellOutcome, announced: Sequence[BellOutcome], num_senders: int
) -> MessageTuple:
    """Closed form of :func:`decode_search`.

    Each sender's type flip is its announced type against the receiver's;
    sender 1's sign flip is the total sign parity of all announced outcomes
    and the receiver's outcome.
    """
    announced = _check_announcement(announced, num_senders)
    type_flips = [a.type_bit ^ receiver_outcome.type_bit for a in announced]
    sign_flip = (sum(a.sign_bit for a in announced) + receiver_outcome.sign_bit) % 2
    ops = [_FLIPS_TO_OP[(type_flips[0], sign_flip)]]
    ops.extend(Pauli.X if f else Pauli.I for f in type_flips[1:])
    return ops_to_bits(ops)
