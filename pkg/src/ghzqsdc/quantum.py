"""Dense pure-state simulation for small qubit registers.

Qubits are numbered from 1. Qubit 1 is the most significant bit of the
amplitude index, so ``|q1 q2 ... qn>`` sits at index ``int("q1q2...qn", 2)``.
States are immutable; every operation returns a new :class:`PureState`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
PHASE_TOL = 1e-9
ZERO_PROB = 1e-24
MAX_QUBITS = 16

SQRT1_2 = 1.0 / np.sqrt(2.0)


class Pauli(enum.Enum):
    """Single-qubit operations used for encoding, noise and stabilizers.

    ``Y`` is the real matrix ``i*sigma_y = |0><1| - |1><0|``, not sigma_y.
    Wherever it is used the phase is unobservable.
    """

    I = "I"
    X = "X"
    Y = "Y"
    Z = "Z"

    @property
    def matrix(self) -> np.ndarray:
        return _PAULI_MATRICES[self]


_PAULI_MATRICES = {
    Pauli.I: np.array([[1, 0], [0, 1]], dtype=complex),
    Pauli.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Pauli.Y: np.array([[0, 1], [-1, 0]], dtype=complex),
    Pauli.Z: np.array([[1, 0], [0, -1]], dtype=complex),
}
for _m in _PAULI_MATRICES.values():
    _m.setflags(write=False)


class BellOutcome(enum.Enum):
    """The four Bell states, valued as ``(type_bit, sign_bit)``.

    type 0 is Phi, 1 is Psi; sign 0 is +, 1 is -.
    """

    PHI_PLUS = (0, 0)
    PHI_MINUS = (0, 1)
    PSI_PLUS = (1, 0)
    PSI_MINUS = (1, 1)

    @property
    def type_bit(self) -> int:
        return self.value[0]

    @property
    def sign_bit(self) -> int:
        return self.value[1]

    @property
    def token(self) -> str:
        return ("F", "P")[self.type_bit] + ("+", "-")[self.sign_bit]

    @property
    def vector(self) -> np.ndarray:
        """Amplitudes over ``|00>, |01>, |10>, |11>``."""
        return _BELL_VECTORS[self]

    @classmethod
    def from_bits(cls, type_bit: int, sign_bit: int) -> "BellOutcome":
        return cls((int(type_bit), int(sign_bit)))

    @classmethod
    def from_token(cls, token: str) -> "BellOutcome":
        try:
            return _TOKENS[token]
        except KeyError:
            raise ValueError(f"unknown Bell outcome token {token!r}") from None

    def flipped(self, type_flip: int, sign_flip: int) -> "BellOutcome":
        return _FLIP_TABLE[self, type_flip, sign_flip]

    def __str__(self) -> str:
        return self.token


_BELL_VECTORS = {
    BellOutcome.PHI_PLUS: np.array([1, 0, 0, 1], dtype=complex) * SQRT1_2,
    BellOutcome.PHI_MINUS: np.array([1, 0, 0, -1], dtype=complex) * SQRT1_2,
    BellOutcome.PSI_PLUS: np.array([0, 1, 1, 0], dtype=complex) * SQRT1_2,
    BellOutcome.PSI_MINUS: np.array([0, 1, -1, 0], dtype=complex) * SQRT1_2,
}
for _v in _BELL_VECTORS.values():
    _v.setflags(write=False)

_TOKENS = {o.token: o for o in BellOutcome}
_FLIP_TABLE = {
    (o, t, s): BellOutcome((o.value[0] ^ t, o.value[1] ^ s))
    for o in BellOutcome
    for t in (0, 1)
    for s in (0, 1)
}

BELL_OUTCOMES: tuple[BellOutcome, ...] = tuple(BellOutcome)

# Rows are the Bell vectors; (BELL_MATRIX.conj() @ v) gives Bell coefficients of a 2-qubit v.
BELL_MATRIX = np.stack([o.vector for o in BELL_OUTCOMES])
BELL_MATRIX.setflags(write=False)


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector over ``num_qubits`` qubits."""

    num_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        n = self.num_qubits
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ValueError(f"num_qubits must be a positive integer, got {n!r}")
        if n > MAX_QUBITS:
            raise ValueError(f"at most {MAX_QUBITS} qubits are supported, got {n}")
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape[0] != 2**n:
            raise ValueError(f"expected {2**n} amplitudes for {n} qubits, got {amps.shape[0]}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (norm^2 = {norm})")
        amps.setflags(write=False)
        object.__setattr__(self, "num_qubits", int(n))
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, num_qubits: int, amplitudes) -> "PureState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(num_qubits, amps / norm)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def tensor_view(self) -> np.ndarray:
        """Amplitudes as an ``(2,)*n`` array; axis ``k-1`` is qubit ``k``."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def inner(self, other: "PureState") -> complex:
        """``<self|other>``."""
        _check_same_size(self, other)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def allclose(self, other: "PureState", atol: float = NORM_TOL) -> bool:
        return self.num_qubits == other.num_qubits and bool(
            np.allclose(self.amplitudes, other.amplitudes, rtol=0.0, atol=atol)
        )

    def equal_up_to_phase(self, other: "PureState", atol: float = PHASE_TOL) -> bool:
        if self.num_qubits != other.num_qubits:
            return False
        overlap = self.inner(other)
        if abs(overlap) < 0.5:
            return False
        phase = overlap / abs(overlap)
        return bool(
            np.allclose(self.amplitudes * phase, other.amplitudes, rtol=0.0, atol=atol)
        )

    def support(self, atol: float = NORM_TOL) -> list[int]:
        return [int(i) for i in np.flatnonzero(np.abs(self.amplitudes) > atol)]

    def __repr__(self) -> str:
        terms = []
        for i in self.support():
            a = self.amplitudes[i]
            terms.append(f"({a.real:+.4g}{a.imag:+.4g}j)|{i:0{self.num_qubits}b}>")
        return "PureState(" + " ".join(terms) + ")"


def _check_same_size(a: PureState, b: PureState) -> None:
    if a.num_qubits != b.num_qubits:
        raise ValueError(f"qubit counts differ: {a.num_qubits} vs {b.num_qubits}")


def _check_qubit(state: PureState, qubit: int) -> None:
    if not 1 <= qubit <= state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range 1..{state.num_qubits}")


def _check_pair(state: PureState, pair: tuple[int, int]) -> tuple[int, int]:
    i, j = pair
    _check_qubit(state, i)
    _check_qubit(state, j)
    if i == j:
        raise ValueError(f"Bell pair needs two distinct qubits, got ({i}, {j})")
    return i, j


def make_basis_state(num_qubits: int, bits: Sequence[int] | str) -> PureState:
    """Computational basis state; ``bits[0]`` is qubit 1."""
    bits = [int(b) for b in bits]
    if len(bits) != num_qubits:
        raise ValueError(f"got {len(bits)} bits for {num_qubits} qubits")
    if any(b not in (0, 1) for b in bits):
        raise ValueError(f"bits must be 0 or 1, got {bits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[int("".join(map(str, bits)), 2)] = 1.0
    return PureState(num_qubits, amps)


def make_ghz(num_qubits: int) -> PureState:
    if num_qubits < 2:
        raise ValueError(f"GHZ state needs at least 2 qubits, got {num_qubits}")
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[0] = amps[-1] = SQRT1_2
    return PureState(num_qubits, amps)


def make_bell(outcome: BellOutcome) -> PureState:
    return PureState(2, outcome.vector)


def tensor(a: PureState, b: PureState) -> PureState:
    """``a ⊗ b``; a's qubits come first."""
    return PureState(a.num_qubits + b.num_qubits, np.kron(a.amplitudes, b.amplitudes))


def _apply_matrix(state: PureState, qubit: int, matrix: np.ndarray) -> np.ndarray:
    psi = state.tensor_view()
    out = np.tensordot(matrix, psi, axes=([1], [qubit - 1]))
    return np.moveaxis(out, 0, qubit - 1)


def apply_single_qubit(state: PureState, qubit: int, op: Pauli) -> PureState:
    _check_qubit(state, qubit)
    if op is Pauli.I:
        return state
    return PureState(state.num_qubits, _apply_matrix(state, qubit, op.matrix))


def apply_pauli_string(state: PureState, pattern: Sequence[Pauli]) -> PureState:
    if len(pattern) != state.num_qubits:
        raise ValueError(f"pattern length {len(pattern)} != {state.num_qubits} qubits")
    out = state
    for q, op in enumerate(pattern, start=1):
        out = apply_single_qubit(out, q, op)
    return out


def _pair_front(state: PureState, pair: tuple[int, int]) -> np.ndarray:
    """Reshape to ``(4, rest)`` with rows indexed by ``2*bit_i + bit_j``."""
    i, j = pair
    psi = np.moveaxis(state.tensor_view(), (i - 1, j - 1), (0, 1))
    return psi.reshape(4, -1)


def _pair_back(block: np.ndarray, n: int, pair: tuple[int, int]) -> np.ndarray:
    i, j = pair
    psi = block.reshape((2, 2) + (2,) * (n - 2))
    return np.moveaxis(psi, (0, 1), (i - 1, j - 1)).reshape(-1)


def bell_probabilities(state: PureState, pair: tuple[int, int]) -> dict[BellOutcome, float]:
    pair = _check_pair(state, pair)
    coeffs = BELL_MATRIX.conj() @ _pair_front(state, pair)
    probs = np.sum(np.abs(coeffs) ** 2, axis=1)
    return {o: float(p) for o, p in zip(BELL_OUTCOMES, probs)}


def bell_project(
    state: PureState, pair: tuple[int, int], outcome: BellOutcome
) -> tuple[float, PureState | None]:
    """Project ``pair`` onto one Bell state.

    Returns the Born probability and the renormalized post-measurement state,
    or ``None`` in place of the state when the probability is zero.
    """
    pair = _check_pair(state, pair)
    rest = outcome.vector.conj() @ _pair_front(state, pair)
    prob = float(np.vdot(rest, rest).real)
    if prob < ZERO_PROB:
        return 0.0, None
    block = np.outer(outcome.vector, rest / np.sqrt(prob))
    return prob, PureState(state.num_qubits, _pair_back(block, state.num_qubits, pair))


def measure_bell(
    state: PureState, pair: tuple[int, int], rng: np.random.Generator
) -> tuple[BellOutcome, PureState]:
    """Sample a Bell measurement on ``pair``; consumes one uniform draw."""
    probs = bell_probabilities(state, pair)
    total = sum(probs.values())
    if abs(total - 1.0) > 1e-9:
        raise RuntimeError(f"Bell probabilities sum to {total}")
    u = rng.random() * total
    acc = 0.0
    chosen = None
    for o in BELL_OUTCOMES:
        if probs[o] <= 0.0:
            continue
        chosen = o
        acc += probs[o]
        if u < acc:
            break
    assert chosen is not None
    _, collapsed = bell_project(state, pair, chosen)
    assert collapsed is not None
    return chosen, collapsed


def measure_computational(
    state: PureState, qubit: int, rng: np.random.Generator
) -> tuple[int, PureState]:
    """Z-basis measurement of one qubit with Born-rule sampling."""
    _check_qubit(state, qubit)
    psi = np.moveaxis(state.tensor_view(), qubit - 1, 0).reshape(2, -1)
    p1 = float(np.vdot(psi[1], psi[1]).real)
    bit = int(rng.random() < p1)
    kept = np.zeros_like(psi)
    kept[bit] = psi[bit] / np.sqrt(p1 if bit else 1.0 - p1)
    out = np.moveaxis(kept.reshape((2,) * state.num_qubits), 0, qubit - 1)
    return bit, PureState(state.num_qubits, out.reshape(-1))


# -- stabilizers -----------------------------------------------------------


@dataclass(frozen=True)
class StabilizerOperator:
    """A Pauli string over I, X and Z, one entry per qubit."""

    pattern: tuple[Pauli, ...]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "pattern", tuple(Pauli(p) for p in self.pattern))
        if any(p is Pauli.Y for p in self.pattern):
            raise ValueError("stabilizer patterns are built from I, X and Z only")

    def __len__(self) -> int:
        return len(self.pattern)

    def embed(self, offset: int, total: int) -> "StabilizerOperator":
        """Place this pattern at qubits ``offset+1 ..`` of a ``total``-qubit register."""
        n = len(self.pattern)
        if offset < 0 or offset + n > total:
            raise ValueError(f"cannot embed {n} qubits at offset {offset} in {total}")
        pattern = (Pauli.I,) * offset + self.pattern + (Pauli.I,) * (total - offset - n)
        return StabilizerOperator(pattern, self.label)

    def __str__(self) -> str:
        return "".join(p.value for p in self.pattern)


def ghz_stabilizers(num_qubits: int) -> list[StabilizerOperator]:
    """``[S_1, ..., S_n]``: all-X, then Z on qubits 1 and k for k = 2..n."""
    if num_qubits < 2:
        raise ValueError(f"GHZ stabilizers need at least 2 qubits, got {num_qubits}")
    out = [StabilizerOperator((Pauli.X,) * num_qubits, "S1")]
    for k in range(2, num_qubits + 1):
        pattern = [Pauli.I] * num_qubits
        pattern[0] = pattern[k - 1] = Pauli.Z
        out.append(StabilizerOperator(tuple(pattern), f"S{k}"))
    return out


def stabilizer_expectation(state: PureState, s: StabilizerOperator) -> float:
    if len(s) != state.num_qubits:
        raise ValueError(f"stabilizer length {len(s)} != {state.num_qubits} qubits")
    value = state.inner(apply_pauli_string(state, s.pattern))
    if abs(value.imag) >= NORM_TOL:
        raise ArithmeticError(f"expectation has imaginary part {value.imag}")
    return float(value.real)


def measure_stabilizer(
    state: PureState, s: StabilizerOperator, rng: np.random.Generator
) -> tuple[int, PureState]:
    """Projective measurement of a Pauli string; returns the eigenvalue (+1/-1)."""
    if len(s) != state.num_qubits:
        raise ValueError(f"stabilizer length {len(s)} != {state.num_qubits} qubits")
    flipped = apply_pauli_string(state, s.pattern).amplitudes
    plus = (state.amplitudes + flipped) / 2
    p_plus = float(np.vdot(plus, plus).real)
    if rng.random() < p_plus:
        return 1, PureState.from_unnormalized(state.num_qubits, plus)
    minus = (state.amplitudes - flipped) / 2
    return -1, PureState.from_unnormalized(state.num_qubits, minus)
