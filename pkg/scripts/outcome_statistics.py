"""Run noiseless groups through the harness and tabulate channel outcomes."""

import argparse
import tempfile
from pathlib import Path

from ghzqsdc.harness import SimulationConfig, report_stats, run_simulation


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-M", "--parties", type=int, default=3)
    ap.add_argument("-N", "--groups", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args(argv)

    with tempfile.TemporaryDirectory() as tmp:
        out = args.out or Path(tmp) / "outcomes.jsonl"
        cfg = SimulationConfig(num_senders=args.parties, groups=args.groups, seed=args.seed, test_fraction=0.0, out=out)
        result = run_simulation(cfg)
        if result.exit_code:
            raise SystemExit(result.exit_code)
        stats = report_stats(out)
        print(stats.render())
        worst = max(abs(r["z"]) for r in stats.outcome_table() if r["z"] is not None)
        print(f"max |z| = {worst:.2f}")


if __name__ == "__main__":
    main()
