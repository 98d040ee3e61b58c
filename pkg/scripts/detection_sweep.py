"""Detection rate of the stabilizer check against noise strength and attack fraction."""

import argparse
import json

import numpy as np

from ghzqsdc.channel import SweepConfig, detection_statistics


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-M", "--parties", type=int, default=3)
    ap.add_argument("-n", "--groups", type=int, default=500, help="groups per point")
    ap.add_argument("--mode", choices=["expectation", "sampled"], default="sampled")
    ap.add_argument("--noise", choices=["x", "y", "z", "depolarizing"], default="depolarizing")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args(argv)

    cfg = SweepConfig(num_senders=args.parties, groups_per_point=args.groups, mode=args.mode, noise_kind=args.noise)
    points = detection_statistics(cfg, np.random.default_rng(args.seed))
    if args.json:
        print(json.dumps([p.to_dict() for p in points], indent=2))
        return
    print(f"{'kind':<7}{'strength':>9}{'rate':>9}{'95% CI':>20}")
    for p in points:
        print(f"{p.kind:<7}{p.strength:>9.3f}{p.rate:>9.4f}   [{p.ci_low:.4f}, {p.ci_high:.4f}]")


if __name__ == "__main__":
    main()
