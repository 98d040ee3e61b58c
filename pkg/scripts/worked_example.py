"""Decode the M=3 example round and show the consistent operation tuple and keys."""

import numpy as np

from ghzqsdc import MessageTuple, decode_analytic, decode_search, distribute, extract_shared_keys, run_group
from ghzqsdc.protocol import group_rng
from ghzqsdc.quantum import BellOutcome
from ghzqsdc.swapping import candidate_set, consistent_op_tuples

MESSAGE = MessageTuple((0, 1), (0, 1))
ANNOUNCED = ("P-", "F+", "P-")
RECEIVER = "F+"


def main():
    receiver = BellOutcome.from_token(RECEIVER)
    announced = tuple(BellOutcome.from_token(t) for t in ANNOUNCED)
    print(f"announced {' '.join(ANNOUNCED)}, receiver {RECEIVER}")
    print("candidates:", ", ".join(" ".join(map(str, c)) for c in candidate_set(receiver, 3).sorted()))
    ops = consistent_op_tuples(receiver, announced, 3)
    print("consistent operations:", [tuple(op.name for op in t) for t in ops])
    print("search decode:  ", decode_search(receiver, announced, 3))
    print("analytic decode:", decode_analytic(receiver, announced, 3))

    # find a seed whose simulated round lands on the same outcomes
    (group,) = distribute(1, 3, np.random.default_rng(0))
    for seed in range(5000):
        t = run_group(group, MESSAGE, group_rng(seed, 0))
        if tuple(map(str, t.sender_outcomes)) == ANNOUNCED and str(t.receiver_outcome) == RECEIVER:
            break
    else:
        raise SystemExit("no seed reproduced the round")
    print(f"\nsimulated with seed {seed}: decoded {t.decoded}")
    for rec in extract_shared_keys(t):
        print(f"  sender {rec.sender}: certain {rec.certain_bits} random {rec.random_bits}")


if __name__ == "__main__":
    main()
