"""Command-line entry point for the whole pipeline.

Every artifact-producing subcommand writes a manifest.json next to its
outputs recording the exact command, config snapshot, seeds, and output
checksums, so a run can be reproduced from the manifest alone.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 missing or
mismatched input files.
"""

import argparse
import hashlib
import json
import shutil
import sys
import time
from dataclasses import asdict
from pathlib import Path

from fusionnav.config import ConfigFileError, load_runtime_config
from fusionnav.dataset import collect_expert_dataset, load_dataset, save_dataset
from fusionnav.maps import MapFormatError, resolve_maps
from fusionnav.models import FUSION_KINDS, load_model
from fusionnav.nn import ShapeError
from fusionnav.training import (
    ConfigurationError,
    GridSearchError,
    TrainingDivergedError,
    grid_search_lr,
    run_experiment,
    write_grid_table,
)
from fusionnav.evaluation import (
    evaluate_offline,
    export_paths,
    make_expert_pilot,
    make_model_pilot,
    run_ablation,
    run_trials,
    write_ablation_report,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_MISSING = 3


class MissingInputError(Exception):
    """Input files absent or inconsistent with each other."""


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir: Path, command: str, args: argparse.Namespace, runtime, artifacts):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
        "config": asdict(runtime),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "artifacts": {
            str(Path(p).relative_to(out_dir)): _sha256(Path(p)) for p in artifacts
        },
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _load_episodes(data_dir: str):
    path = Path(data_dir)
    if not path.is_dir():
        raise MissingInputError(f"dataset directory not found: {path}")
    return load_dataset(path)


def _artifact_files(out_dir: Path):
    return sorted(
        p for p in out_dir.rglob("*") if p.is_file() and p.name != "manifest.json"
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_collect(args, runtime):
    maps = resolve_maps(args.maps)
    pilot_factory = lambda: make_expert_pilot(
        omega_max=runtime.omega_max,
        fov=runtime.camera.horizontal_fov,
        k_sectors=runtime.expert.k_sectors,
        kp=runtime.expert.kp,
    )
    episodes = collect_expert_dataset(
        maps,
        pilot_factory,
        runtime.camera,
        episodes=args.episodes,
        seed=args.seed,
        omega_max=runtime.omega_max,
        robot_radius=runtime.robot_radius,
    )
    out = Path(args.out)
    save_dataset(episodes, out)
    n = sum(len(e.samples) for e in episodes)
    flagged = sum(e.flagged for e in episodes)
    write_manifest(out, "collect", args, runtime, _artifact_files(out))
    print(f"collected {len(episodes)} episodes ({n} samples, {flagged} flagged) -> {out}")
    return EXIT_OK


def cmd_teleop(args, runtime):
    from fusionnav.teleop import serve

    maps = {m.map_id: m for m in resolve_maps(args.maps)}
    write_manifest(Path(args.out), "teleop", args, runtime, [])
    print(f"teleop service on ws://{args.host}:{args.port}/ws maps={list(maps)}")
    serve(
        maps,
        args.host,
        args.port,
        args.out,
        runtime=runtime,
        tick_wall_seconds=args.tick_seconds,
        static_dir=args.ui,
    )
    return EXIT_OK


def cmd_gridsearch(args, runtime):
    from fusionnav.dataset import part_episodes, split_episodes, stack_part
    from fusionnav.models import FusionNet, desk_config

    episodes = [e for e in _load_episodes(args.data) if not e.flagged]
    if not episodes:
        raise MissingInputError(f"no unflagged episodes under {args.data}")
    config = runtime.train
    if args.seed is not None:
        config = type(config)(**{**asdict(config), "seed": args.seed})
    split = split_episodes(episodes, seed=config.seed)
    train_part = stack_part(part_episodes(episodes, split.train))
    model_config = desk_config(args.arch)
    best_lr, table = grid_search_lr(
        lambda: FusionNet.build(model_config, seed=config.seed), train_part, config
    )
    print("lr,final_train_loss")
    for lr, loss in table:
        marker = "  <- selected" if lr == best_lr else ""
        print(f"{lr:g},{loss:.6f}{marker}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_grid_table(table, out / f"{args.arch}_grid.csv")
        write_manifest(out, "gridsearch", args, runtime, _artifact_files(out))
    return EXIT_OK


def cmd_train(args, runtime):
    episodes = _load_episodes(args.data)
    config = runtime.train
    if args.seed is not None:
        config = type(config)(**{**asdict(config), "seed": args.seed})
    out = Path(args.out)
    result = run_experiment(args.arch, episodes, config, out_dir=out)
    report = evaluate_offline(result.net, result.parts["test"])
    write_manifest(out, "train", args, runtime, _artifact_files(out))
    print(
        f"{args.arch}: best_lr={result.best_lr:g} epochs={result.record.stop_epoch} "
        f"best_epoch={result.record.best_epoch} val={result.record.best_val_loss:.6f}"
    )
    print(
        f"test: mae={report.mae:.6f} rmse={report.rmse:.6f} "
        f"medae={report.medae:.6f} vs={'undef' if report.vs is None else f'{report.vs:.4f}'}"
    )
    print(f"checkpoint: {result.record.checkpoint_path}")
    return EXIT_OK


def cmd_eval(args, runtime):
    from fusionnav.dataset import part_episodes, split_episodes, stack_part

    ckpt = Path(args.ckpt)
    if not ckpt.is_file():
        raise MissingInputError(f"checkpoint not found: {ckpt}")
    net = load_model(ckpt)
    episodes = [e for e in _load_episodes(args.data) if not e.flagged]
    seed = args.seed if args.seed is not None else runtime.train.seed
    split = split_episodes(episodes, seed=seed)
    test_part = stack_part(part_episodes(episodes, split.test))
    sample_shape = test_part[0].shape[2:]
    model_shape = (net.config.input_h, net.config.input_w)
    if sample_shape != model_shape:
        raise MissingInputError(
            f"checkpoint expects {model_shape[0]}x{model_shape[1]} images but the "
            f"dataset holds {sample_shape[0]}x{sample_shape[1]}"
        )
    report = evaluate_offline(net, test_part)
    vs_text = "undef" if report.vs is None else f"{report.vs:.4f}"
    print("network,mae,rmse,medae,vs,n")
    print(
        f"{net.config.fusion_kind},{report.mae:.6f},{report.rmse:.6f},"
        f"{report.medae:.6f},{vs_text},{report.n}"
    )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(
            "network,mae,rmse,medae,vs,n\n"
            f"{net.config.fusion_kind},{report.mae!r},{report.rmse!r},"
            f"{report.medae!r},{vs_text},{report.n}\n"
        )
        write_manifest(out, "eval", args, runtime, _artifact_files(out))
    return EXIT_OK


def cmd_ablate(args, runtime):
    episodes = _load_episodes(args.data)
    config = runtime.train
    if args.seed is not None:
        config = type(config)(**{**asdict(config), "seed": args.seed})
    out = Path(args.out)
    reports = run_ablation(args.arch, episodes, config, out_dir=out)
    write_manifest(out, "ablate", args, runtime, _artifact_files(out))
    print((out / "ablation_report.txt").read_text().rstrip())
    return EXIT_OK


def cmd_navigate(args, runtime):
    maps = resolve_maps(args.maps)
    if args.expert:
        pilot = make_expert_pilot(
            omega_max=runtime.omega_max,
            fov=runtime.camera.horizontal_fov,
            k_sectors=runtime.expert.k_sectors,
            kp=runtime.expert.kp,
        )
    else:
        ckpt = Path(args.ckpt)
        if not ckpt.is_file():
            raise MissingInputError(f"checkpoint not found: {ckpt}")
        fail = "color" if args.fail_color else ("depth" if args.fail_depth else None)
        pilot = make_model_pilot(load_model(ckpt), fail_modality=fail)
    summary = run_trials(
        pilot,
        maps,
        n_trials=args.trials,
        budget=args.budget,
        v=runtime.linear_velocity,
        cadence=runtime.cadence,
        omega_max=runtime.omega_max,
        robot_radius=runtime.robot_radius,
        cam=runtime.camera,
        seed=args.seed,
    )
    out = Path(args.out)
    export_paths(summary, out)
    write_manifest(out, "navigate", args, runtime, _artifact_files(out))
    for result in summary.results:
        print(f"{result.map_id} trial {result.trial}: {result.outcome} ({result.duration:.1f}s)")
    for map_id, (successes, trials) in summary.per_map.items():
        print(f"{map_id}: {successes}/{trials}")
    print(f"success rate: {summary.success_rate:.3f}")
    return EXIT_OK


EXPORT_PATTERNS = {
    "paths": ("*_trial*.csv", "summary.csv"),
    "losses": ("*_losses.csv", "*_grid.csv"),
    "metrics": ("metrics.csv", "ablation_report.txt"),
}


def cmd_export(args, runtime):
    run_dir = Path(args.run)
    if not run_dir.is_dir():
        raise MissingInputError(f"run directory not found: {run_dir}")
    matches = []
    for pattern in EXPORT_PATTERNS[args.what]:
        matches.extend(sorted(run_dir.rglob(pattern)))
    if not matches:
        raise MissingInputError(f"no {args.what} files under {run_dir}")
    out = Path(args.out) if args.out else None
    for source in matches:
        if out is None:
            print(source)
        else:
            out.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(source, out / source.name)
            print(out / source.name)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusionnav",
        description="RGB-D fusion steering: collect, train, evaluate, navigate.",
    )
    parser.add_argument("--config", help="key=value config file (default: $FUSIONNAV_CONFIG)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="record expert demonstrations")
    p.add_argument("--maps", default="known")
    p.add_argument("--episodes", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("teleop", help="serve the teleoperation bridge")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--maps", default="all")
    p.add_argument("--out", required=True)
    p.add_argument("--tick-seconds", type=float, default=0.15,
                   help="wall-clock pacing per tick (simulated time stays at the cadence)")
    p.add_argument("--ui", help="static directory to serve at / (the browser client)")
    p.set_defaults(func=cmd_teleop)

    p = sub.add_parser("gridsearch", help="initial-LR grid table")
    p.add_argument("--arch", required=True, choices=FUSION_KINDS)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gridsearch)

    p = sub.add_parser("train", help="grid search + full training run")
    p.add_argument("--arch", required=True, choices=FUSION_KINDS)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="offline metrics of a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="single-modality retraining study")
    p.add_argument("--arch", required=True, choices=FUSION_KINDS)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("navigate", help="closed-loop trials")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--ckpt")
    group.add_argument("--expert", action="store_true")
    p.add_argument("--maps", default="known")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--budget", type=float, default=120.0)
    p.add_argument("--seed", type=int, default=0)
    fail = p.add_mutually_exclusive_group()
    fail.add_argument("--fail-color", action="store_true")
    fail.add_argument("--fail-depth", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_navigate)

    p = sub.add_parser("export", help="gather plotting-ready CSV files")
    p.add_argument("--run", required=True)
    p.add_argument("--what", required=True, choices=sorted(EXPORT_PATTERNS))
    p.add_argument("--out")
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        runtime = load_runtime_config(args.config)
        return args.func(args, runtime)
    except (MissingInputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (
        ConfigFileError,
        ConfigurationError,
        MapFormatError,
        ShapeError,
        GridSearchError,
        TrainingDivergedError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
