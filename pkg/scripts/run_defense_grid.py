#!/usr/bin/env python3
"""Run the desk-scale defense-comparison grid: every baseline plus the dual
defense against each poisoning attack, one metrics CSV per cell plus a
manifest consumable by the plot frontend.

Usage: python scripts/run_defense_grid.py [outdir] [--resume]
"""

import sys

from ddfed.harness import compare_grid, preset_experiment

DEFENSES = ["fedavg", "krum", "median", "trimmed_mean", "clipping_median",
            "cos_defense", "ddfed"]
ATTACKS = ["none", "ipm", "alie", "scaling"]


def main(argv):
    out = argv[1] if len(argv) > 1 and not argv[1].startswith("-") else "out/defense_grid"
    resume = "--resume" in argv
    base = preset_experiment("fedavg", "none")
    manifest = compare_grid(base, DEFENSES, ATTACKS, out, resume=resume)
    for cell in manifest["cells"]:
        print(f"{cell['defense']:16s} x {cell['attack']:8s} {cell['status']}")
    print(f"grid written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
