#!/usr/bin/env python3
"""Sensor-failure navigation: drive trained checkpoints with one input
stream zeroed at inference time (a dead camera or a dead depth sensor) and
compare success rates across architectures and environments.

Expects checkpoints produced by run_desk_experiment.py (or `fusionnav
train`) under --run:

    python3 scripts/run_sensor_failure_trials.py --run runs/desk
"""

import argparse
import sys
from pathlib import Path

from fusionnav.evaluation import export_paths, make_model_pilot, run_trials
from fusionnav.maps import builtin_maps
from fusionnav.models import FUSION_KINDS, load_model
from fusionnav.world import CameraModel


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--run", default="runs/desk")
    parser.add_argument("--trials", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    run_dir = Path(args.run)
    cam = CameraModel()
    maps = builtin_maps()
    groups = {
        "known": [m for m in maps.values() if m.tag == "known"],
        "unknown": [m for m in maps.values() if m.tag == "unknown"],
    }

    print(f"{'network':8s} {'inputs':12s} {'known':>8s} {'unknown':>8s}")
    for arch in FUSION_KINDS:
        ckpt = run_dir / f"{arch}.ckpt"
        if not ckpt.is_file():
            print(f"{arch:8s} (no checkpoint under {run_dir}; run the desk experiment first)")
            continue
        net = load_model(ckpt)
        for fail, label in ((None, "fused"), ("color", "depth only"), ("depth", "color only")):
            rates = {}
            for tag, tag_maps in groups.items():
                summary = run_trials(
                    make_model_pilot(net, fail_modality=fail),
                    tag_maps,
                    n_trials=args.trials,
                    seed=args.seed,
                    cam=cam,
                )
                rates[tag] = summary.success_rate
                export_paths(summary, run_dir / "sensor_failure" / f"{arch}_{label.replace(' ', '_')}_{tag}")
            print(f"{arch:8s} {label:12s} {rates['known']:8.2f} {rates['unknown']:8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
