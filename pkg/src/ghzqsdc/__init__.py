"""Simulator for simultaneous direct communication from M senders to one receiver
over shared GHZ states and entanglement swapping."""

from .quantum import BellOutcome, Pauli, PureState, make_ghz, tensor
from .swapping import MessageTuple, candidate_set, decode_analytic, decode_search
from .protocol import distribute, extract_shared_keys, run_group

__all__ = [
    "BellOutcome",
    "MessageTuple",
    "Pauli",
    "PureState",
    "candidate_set",
    "decode_analytic",
    "decode_search",
    "distribute",
    "extract_shared_keys",
    "make_ghz",
    "run_group",
    "tensor",
]
