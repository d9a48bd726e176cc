#!/usr/bin/env python3
"""Cold-start comparison: attacks active from round 0, undefended baseline
vs the dual defense. Prints a final-accuracy table.

Usage: python scripts/run_cold_start.py [outdir]
"""

import os
import sys

from ddfed.harness import preset_experiment, run_experiment

ATTACKS = ["ipm", "alie", "scaling"]


def main(argv):
    out = argv[1] if len(argv) > 1 else "out/cold_start"
    os.makedirs(out, exist_ok=True)
    print(f"{'attack':10s} {'fedavg':>8s} {'ddfed':>8s}")
    for attack in ATTACKS:
        finals = {}
        for defense in ("fedavg", "ddfed"):
            cfg = preset_experiment(defense, attack, cold_start=True)
            rows = run_experiment(
                cfg, out_csv=os.path.join(out, f"{defense}__{attack}.csv")
            )
            finals[defense] = rows[-1].test_accuracy
        print(f"{attack:10s} {finals['fedavg']:8.3f} {finals['ddfed']:8.3f}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
