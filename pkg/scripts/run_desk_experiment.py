#!/usr/bin/env python3
"""Full desk experiment: collect demonstrations, run the training protocol
for all three fusion architectures, score them offline, and drive them
closed-loop in the known and held-out maps.

Writes checkpoints, loss curves, grid tables, metrics, and trial paths under
--out, and prints the comparison tables as it goes.

    python3 scripts/run_desk_experiment.py --out runs/desk --seed 0
"""

import argparse
import sys
import time
from pathlib import Path

from fusionnav.dataset import collect_expert_dataset, save_dataset
from fusionnav.evaluation import (
    evaluate_offline,
    export_paths,
    make_expert_pilot,
    make_model_pilot,
    run_trials,
)
from fusionnav.maps import builtin_maps
from fusionnav.models import FUSION_KINDS
from fusionnav.training import TrainConfig, run_experiment
from fusionnav.world import CameraModel


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/desk")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--episodes", type=int, default=60)
    parser.add_argument("--trials", type=int, default=3)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cam = CameraModel()
    maps = builtin_maps()
    known = [m for m in maps.values() if m.tag == "known"]
    unknown = [m for m in maps.values() if m.tag == "unknown"]

    start = time.perf_counter()
    print(f"collecting {args.episodes} expert episodes on {len(known)} known maps ...")
    episodes = collect_expert_dataset(
        known, make_expert_pilot, cam, episodes=args.episodes, seed=args.seed
    )
    save_dataset(episodes, out / "demos")
    n = sum(len(e.samples) for e in episodes)
    print(f"  {n} samples ({sum(e.flagged for e in episodes)} flagged)\n")

    results = {}
    print(f"{'network':8s} {'best lr':>8s} {'epochs':>6s} {'MAE':>8s} {'RMSE':>8s} {'MedAE':>8s} {'VS':>6s}")
    for arch in FUSION_KINDS:
        result = run_experiment(arch, episodes, TrainConfig(seed=args.seed), out_dir=out)
        report = evaluate_offline(result.net, result.parts["test"])
        results[arch] = (result, report)
        print(
            f"{arch:8s} {result.best_lr:8.0e} {result.record.stop_epoch:6d} "
            f"{report.mae:8.4f} {report.rmse:8.4f} {report.medae:8.5f} {report.vs:6.3f}"
        )

    print("\nclosed-loop trials (successes/trials per map):")
    pilots = {"expert": make_expert_pilot()}
    pilots.update({arch: make_model_pilot(results[arch][0].net) for arch in FUSION_KINDS})
    for name, pilot in pilots.items():
        for tag, tag_maps in (("known", known), ("unknown", unknown)):
            summary = run_trials(pilot, tag_maps, n_trials=args.trials, seed=args.seed, cam=cam)
            export_paths(summary, out / "trials" / f"{name}_{tag}")
            per_map = " ".join(f"{m}:{s}/{t}" for m, (s, t) in summary.per_map.items())
            print(f"  {name:8s} {tag:8s} rate={summary.success_rate:.2f}  {per_map}")

    print(f"\ntotal {time.perf_counter() - start:.0f}s; artifacts under {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
