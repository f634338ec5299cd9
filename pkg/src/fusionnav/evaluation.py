"""Offline metrics, the single-modality ablation harness, and closed-loop
navigation trials with path export.

Offline scores are mean / root-mean-square / median absolute error in rad/s
plus the explained-variance score (1 - Var(residual)/Var(truth), population
variances; undefined when the truth has zero variance). Trials drive a pilot
at the fixed linear velocity and cadence until it crosses the goal line,
collides, exceeds the time budget, or stalls (returns within 5 cm of a spot
it occupied at least 10 s earlier, which also catches tight circling).
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from fusionnav.dataset import Episode, Sample
from fusionnav.kinematics import Pose
from fusionnav.models import FusionNet
from fusionnav.training import TrainConfig, predict, run_experiment
from fusionnav.world import (
    CameraModel,
    SimState,
    crossed_goal,
    expert_policy,
    render_rgbd,
    step,
)

STALL_WINDOW = 10.0  # seconds
STALL_RADIUS = 0.05  # meters
TRIAL_BUDGET = 120.0  # seconds
TRIAL_JITTER_XY = (0.04, 0.08)
TRIAL_JITTER_THETA = 0.12


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    medae: float
    vs: float | None  # None when Var(truth) == 0
    n: int


def compute_metrics(pred, truth) -> MetricsReport:
    """Regression metrics over flat prediction/ground-truth lists."""
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("cannot compute metrics over zero samples")
    err = pred - truth
    abs_err = np.abs(err)
    mae = float(np.mean(abs_err))
    rmse = float(np.sqrt(np.mean(err * err)))
    medae = float(np.median(abs_err))
    var_truth = float(np.var(truth))
    if var_truth == 0.0:
        vs = None
    else:
        vs = 1.0 - float(np.var(truth - pred)) / var_truth
    return MetricsReport(mae=mae, rmse=rmse, medae=medae, vs=vs, n=pred.size)


def evaluate_offline(net: FusionNet, test_part) -> MetricsReport:
    """Metrics of a model over a stacked (color, depth, omega) part, computed
    from one forward pass over all samples."""
    color, depth, omega = test_part
    if color.shape[0] == 0:
        raise ValueError("test part is empty")
    preds = net.forward(color, depth)
    return compute_metrics(preds.reshape(-1), omega.reshape(-1))


# ---------------------------------------------------------------------------
# zero-modality ablation


def zero_modality(part, which: str):
    """Return a view of a dataset part with one modality all-zeros and the
    other modality and labels untouched (the originals are shared, not
    copied). Accepts a stacked (color, depth, omega) tuple or a list of
    episodes."""
    if which not in ("color", "depth"):
        raise ValueError(f"modality must be 'color' or 'depth', got {which!r}")
    if isinstance(part, tuple):
        color, depth, omega = part
        if which == "color":
            return np.zeros_like(color), depth, omega
        return color, np.zeros_like(depth), omega
    zeros_cache: dict = {}

    def zeros_like(arr):
        key = (arr.shape, arr.dtype.str)
        if key not in zeros_cache:
            zeros_cache[key] = np.zeros(arr.shape, dtype=arr.dtype)
        return zeros_cache[key]

    out = []
    for episode in part:
        samples = [
            Sample(
                color=zeros_like(s.color) if which == "color" else s.color,
                depth=zeros_like(s.depth) if which == "depth" else s.depth,
                omega_label=s.omega_label,
                v=s.v,
                pose=s.pose,
                t=s.t,
                map_id=s.map_id,
            )
            for s in episode.samples
        ]
        out.append(
            Episode(
                samples=samples,
                source=episode.source,
                map_id=episode.map_id,
                episode_id=episode.episode_id,
                flagged=episode.flagged,
            )
        )
    return out


def run_ablation(arch: str, episodes: list, config: TrainConfig, out_dir=None, model_config=None):
    """Retrain the architecture twice, once per single modality (the other
    zeroed in the training data), and score each run on its correspondingly
    zeroed test split. Returns {"color": MetricsReport, "depth": MetricsReport}."""
    reports = {}
    for keep in ("color", "depth"):
        zeroed = zero_modality(episodes, "depth" if keep == "color" else "color")
        sub_dir = None if out_dir is None else Path(out_dir) / f"{keep}_only"
        result = run_experiment(arch, zeroed, config, out_dir=sub_dir, model_config=model_config)
        reports[keep] = evaluate_offline(result.net, result.parts["test"])
    if out_dir is not None:
        write_ablation_report({arch: reports}, Path(out_dir) / "ablation_report.txt")
    return reports


def _fmt_metric(value):
    return f"{value * 1e3:10.3f}"


def write_ablation_report(results: dict, path) -> None:
    """Plain-text table, one row per (network, input type): MAE/RMSE/MedAE
    (scaled by 1e3) and VS."""
    lines = [
        f"{'Network':12s} {'Input Type':14s} {'MAE x1e3':>10s} {'RMSE x1e3':>10s} "
        f"{'MedAE x1e3':>10s} {'VS':>8s}"
    ]
    for arch, reports in results.items():
        for keep in ("color", "depth"):
            report = reports[keep]
            vs_text = "undef" if report.vs is None else f"{report.vs:.3f}"
            lines.append(
                f"{arch:12s} {keep + ' only':14s} {_fmt_metric(report.mae)} "
                f"{_fmt_metric(report.rmse)} {_fmt_metric(report.medae)} {vs_text:>8s}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# pilots


def make_expert_pilot(omega_max: float = 1.0, fov: float = CameraModel.horizontal_fov,
                      k_sectors: int = 9, kp: float = 2.0):
    def pilot(frame):
        return expert_policy(frame.depth, omega_max, fov=fov, k_sectors=k_sectors, kp=kp)

    pilot.name = "expert"
    return pilot


def make_model_pilot(net: FusionNet, fail_modality: str | None = None):
    """Drive with a trained net; fail_modality zeroes one input stream at
    inference time to mimic a dead sensor."""
    if fail_modality not in (None, "color", "depth"):
        raise ValueError(f"fail_modality must be None/'color'/'depth', got {fail_modality!r}")

    def pilot(frame):
        color = frame.color[None]
        depth = frame.depth[None]
        if fail_modality == "color":
            color = np.zeros_like(color)
        elif fail_modality == "depth":
            depth = np.zeros_like(depth)
        return float(net.forward(color, depth)[0, 0])

    pilot.name = "model" if fail_modality is None else f"model-no-{fail_modality}"
    return pilot


# ---------------------------------------------------------------------------
# closed-loop trials


@dataclass
class TrialResult:
    map_id: str
    pilot: str
    trial: int
    outcome: str  # success | collision | timeout | stall
    path: list  # (t, x, y, theta, v, omega) per tick
    duration: float


@dataclass
class TrialSummary:
    results: list
    success_rate: float
    per_map: dict  # map_id -> (successes, trials)


def _trial_spawn(world, trial: int, seed: int, map_index: int) -> Pose:
    if trial == 0:
        return world.spawn
    rng = np.random.default_rng((seed, map_index, trial))
    return Pose(
        world.spawn.x + rng.uniform(-TRIAL_JITTER_XY[0], TRIAL_JITTER_XY[0]),
        world.spawn.y + rng.uniform(-TRIAL_JITTER_XY[1], TRIAL_JITTER_XY[1]),
        world.spawn.theta + rng.uniform(-TRIAL_JITTER_THETA, TRIAL_JITTER_THETA),
    )


def run_single_trial(world, pilot, cam: CameraModel, *, spawn=None, budget: float = TRIAL_BUDGET,
                     v: float = 0.1, cadence: float = 0.2, omega_max: float = 1.0,
                     robot_radius: float = 0.18, trial: int = 0) -> TrialResult:
    state = SimState(
        world=world,
        pose=spawn if spawn is not None else world.spawn,
        omega_max=omega_max,
        robot_radius=robot_radius,
    )
    path = []
    history = []  # (t, x, y) of visited poses for stall detection
    outcome = "timeout"
    while state.t < budget - 1e-9:
        frame = render_rgbd(world, state.pose, cam, state.t)
        omega = float(np.clip(pilot(frame), -omega_max, omega_max))
        path.append((state.t, state.pose.x, state.pose.y, state.pose.theta, v, omega))
        history.append((state.t, state.pose.x, state.pose.y))
        prev = state.pose
        state = step(state, v, omega, cadence)
        if state.collided:
            outcome = "collision"
            break
        if crossed_goal(world, prev.x, prev.y, state.pose.x, state.pose.y):
            outcome = "success"
            break
        stalled = any(
            state.t - t_old >= STALL_WINDOW - 1e-9
            and math.hypot(state.pose.x - x_old, state.pose.y - y_old) < STALL_RADIUS
            for t_old, x_old, y_old in history
        )
        if stalled:
            outcome = "stall"
            break
    return TrialResult(
        map_id=world.map_id,
        pilot=getattr(pilot, "name", "pilot"),
        trial=trial,
        outcome=outcome,
        path=path,
        duration=state.t,
    )


def run_trials(pilot, maps: list, *, n_trials: int = 3, budget: float = TRIAL_BUDGET,
               v: float = 0.1, cadence: float = 0.2, omega_max: float = 1.0,
               robot_radius: float = 0.18, cam: CameraModel | None = None,
               seed: int = 0) -> TrialSummary:
    """n_trials per map: trial 0 from the canonical spawn, later trials from
    deterministically jittered spawns (the stand-in for run-to-run physical
    variation)."""
    cam = cam if cam is not None else CameraModel()
    results = []
    per_map = {}
    for map_index, world in enumerate(maps):
        successes = 0
        for trial in range(n_trials):
            result = run_single_trial(
                world,
                pilot,
                cam,
                spawn=_trial_spawn(world, trial, seed, map_index),
                budget=budget,
                v=v,
                cadence=cadence,
                omega_max=omega_max,
                robot_radius=robot_radius,
                trial=trial,
            )
            results.append(result)
            successes += result.outcome == "success"
        per_map[world.map_id] = (successes, n_trials)
    total_success = sum(1 for r in results if r.outcome == "success")
    return TrialSummary(
        results=results,
        success_rate=total_success / len(results) if results else 0.0,
        per_map=per_map,
    )


def export_paths(summary: TrialSummary, out_dir) -> list:
    """One CSV per trial plus a summary CSV; identical inputs produce
    byte-identical files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    summary_lines = ["map_id,pilot,trial,outcome,duration"]
    for result in summary.results:
        name = f"{result.pilot}_{result.map_id}_trial{result.trial}.csv"
        lines = ["t,x,y,theta,v,omega"]
        for t, x, y, theta, v, omega in result.path:
            lines.append(f"{t!r},{x!r},{y!r},{theta!r},{v!r},{omega!r}")
        (out_dir / name).write_text("\n".join(lines) + "\n")
        written.append(out_dir / name)
        summary_lines.append(
            f"{result.map_id},{result.pilot},{result.trial},{result.outcome},{result.duration!r}"
        )
    rate = summary.success_rate
    summary_lines.append(f"# pooled success rate: {rate!r}")
    for map_id, (successes, trials) in summary.per_map.items():
        summary_lines.append(f"# {map_id}: {successes}/{trials}")
    (out_dir / "summary.csv").write_text("\n".join(summary_lines) + "\n")
    written.append(out_dir / "summary.csv")
    return written
