"""Demonstration recording, on-disk container, episode splitting, batching.

An episode is one rollout's worth of (frame, command) pairs recorded at the
fixed control cadence; the label of each sample is the angular velocity that
was actually commanded at that tick, and the frame is rendered at the
pre-step pose. Episodes whose rollout ended in a collision are truncated at
the last safe sample and flagged; flagged episodes are excluded from
training by default.

Container: one directory per episode holding a plain-text manifest plus one
little-endian float32 buffer per field, and a dataset-level index file. All
sample fields are stored (and held in memory) as float32, so save/load
round-trips are bit-exact.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from fusionnav.kinematics import Pose
from fusionnav.world import (
    CameraModel,
    SimState,
    WorldMap,
    crossed_goal,
    render_rgbd,
    step,
)

FORMAT_VERSION = 1
_MAGIC = "FUSIONNAV-EPISODE"
FIXED_LINEAR_VELOCITY = 0.1  # m/s, the navigation convention
CADENCE = 0.2  # seconds between commands


class DatasetError(Exception):
    """Base class for dataset container problems."""


class ManifestError(DatasetError):
    """Malformed or incomplete episode manifest."""


class VersionMismatchError(DatasetError):
    """Episode container written by an unsupported format version."""


class LengthMismatchError(DatasetError):
    """Field buffer length disagrees with the declared sample count."""


@dataclass
class Sample:
    color: np.ndarray  # [3, H, W] float32 in [0, 1]
    depth: np.ndarray  # [1, H, W] float32 in [0, 1]
    omega_label: float  # rad/s, the command actually issued this tick
    v: float  # m/s
    pose: Pose
    t: float  # seconds
    map_id: str


@dataclass
class Episode:
    samples: list
    source: str  # "expert" | "teleop"
    map_id: str
    episode_id: str = ""
    flagged: bool = False  # rollout ended in a collision; truncated


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple
    val: tuple
    test: tuple
    seed: int


def _f32(value: float) -> float:
    return float(np.float32(value))


def record_episode(
    world: WorldMap,
    pilot,
    cam: CameraModel,
    *,
    v: float = FIXED_LINEAR_VELOCITY,
    cadence: float = CADENCE,
    max_duration: float = 30.0,
    omega_max: float = 1.0,
    robot_radius: float = 0.18,
    spawn: Pose | None = None,
    source: str = "expert",
    episode_id: str = "",
) -> Episode:
    """Roll the pilot out on a map, one sample per control tick.

    The pilot is called with the rendered frame and returns an angular
    velocity; the command is clamped to +/-omega_max before being applied
    and recorded. Recording stops at the goal line, at max_duration, or at
    a collision, in which case the sample whose command caused the crash is
    dropped and the episode is flagged.
    """
    state = SimState(
        world=world,
        pose=spawn if spawn is not None else world.spawn,
        omega_max=omega_max,
        robot_radius=robot_radius,
    )
    samples: list = []
    flagged = False
    while state.t < max_duration - 1e-9:
        frame = render_rgbd(world, state.pose, cam, state.t)
        omega = float(np.clip(pilot(frame), -omega_max, omega_max))
        candidate = Sample(
            color=frame.color,
            depth=frame.depth,
            omega_label=_f32(omega),
            v=_f32(v),
            pose=Pose(_f32(state.pose.x), _f32(state.pose.y), _f32(state.pose.theta)),
            t=_f32(state.t),
            map_id=world.map_id,
        )
        prev = state.pose
        state = step(state, v, omega, cadence)
        if state.collided:
            flagged = True
            break  # drop the sample whose command crashed
        samples.append(candidate)
        if crossed_goal(world, prev.x, prev.y, state.pose.x, state.pose.y):
            break
    return Episode(
        samples=samples,
        source=source,
        map_id=world.map_id,
        episode_id=episode_id,
        flagged=flagged,
    )


# default spawn jitter for demonstration collection; wide enough to teach
# recovery steering, narrow enough that the expert still succeeds
COLLECT_JITTER_XY = (0.07, 0.18)
COLLECT_JITTER_THETA = 0.25


def jittered_spawn(world: WorldMap, rng) -> Pose:
    return Pose(
        world.spawn.x + rng.uniform(-COLLECT_JITTER_XY[0], COLLECT_JITTER_XY[0]),
        world.spawn.y + rng.uniform(-COLLECT_JITTER_XY[1], COLLECT_JITTER_XY[1]),
        world.spawn.theta + rng.uniform(-COLLECT_JITTER_THETA, COLLECT_JITTER_THETA),
    )


def collect_expert_dataset(
    maps: list,
    pilot_factory,
    cam: CameraModel,
    *,
    episodes: int = 60,
    seed: int = 0,
    omega_max: float = 1.0,
    robot_radius: float = 0.18,
    max_duration: float = 30.0,
) -> list:
    """Record seeded expert demonstrations cycling over the given maps with
    jittered spawn poses."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(episodes):
        world = maps[i % len(maps)]
        episode = record_episode(
            world,
            pilot_factory(),
            cam,
            omega_max=omega_max,
            robot_radius=robot_radius,
            max_duration=max_duration,
            spawn=jittered_spawn(world, rng),
            source="expert",
            episode_id=f"ep{i:04d}",
        )
        out.append(episode)
    return out


# ---------------------------------------------------------------------------
# container


_FIELDS = ("color", "depth", "omega", "v", "pose", "t")


def _episode_arrays(episode: Episode) -> dict:
    n = len(episode.samples)
    return {
        "color": np.stack([s.color for s in episode.samples]) if n else np.zeros((0, 3, 0, 0), np.float32),
        "depth": np.stack([s.depth for s in episode.samples]) if n else np.zeros((0, 1, 0, 0), np.float32),
        "omega": np.array([s.omega_label for s in episode.samples], np.float32),
        "v": np.array([s.v for s in episode.samples], np.float32),
        "pose": np.array(
            [(s.pose.x, s.pose.y, s.pose.theta) for s in episode.samples], np.float32
        ).reshape(n, 3),
        "t": np.array([s.t for s in episode.samples], np.float32),
    }


def save_episode(episode: Episode, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    arrays = _episode_arrays(episode)
    lines = [
        f"{_MAGIC} {FORMAT_VERSION}",
        f"map_id {episode.map_id}",
        f"source {episode.source}",
        f"flagged {int(episode.flagged)}",
        f"samples {len(episode.samples)}",
    ]
    for name in _FIELDS:
        arr = arrays[name]
        per_sample = ",".join(str(d) for d in arr.shape[1:]) or "1"
        lines.append(f"field {name} f32 {per_sample}")
        arr.astype("<f4", copy=False).tofile(directory / f"{name}.bin")
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_episode(directory) -> Episode:
    directory = Path(directory)
    manifest_path = directory / "manifest.txt"
    if not manifest_path.is_file():
        raise ManifestError(f"{directory}: no manifest.txt")
    lines = manifest_path.read_text().splitlines()
    if not lines:
        raise ManifestError(f"{manifest_path}: empty manifest")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != _MAGIC:
        raise ManifestError(f"{manifest_path}: bad magic line {lines[0]!r}")
    version = int(magic[1])
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"{manifest_path}: found version {version}, expected {FORMAT_VERSION}"
        )
    meta = {}
    fields = {}
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] == "field":
            if len(parts) != 4 or parts[2] != "f32":
                raise ManifestError(f"{manifest_path}: bad field line {line!r}")
            fields[parts[1]] = tuple(int(d) for d in parts[3].split(","))
        elif len(parts) >= 2:
            meta[parts[0]] = parts[1]
        else:
            raise ManifestError(f"{manifest_path}: bad line {line!r}")
    for key in ("map_id", "source", "flagged", "samples"):
        if key not in meta:
            raise ManifestError(f"{manifest_path}: missing {key!r}")
    if set(fields) != set(_FIELDS):
        raise ManifestError(
            f"{manifest_path}: fields {sorted(fields)} do not match {sorted(_FIELDS)}"
        )
    n = int(meta["samples"])
    arrays = {}
    for name in _FIELDS:
        shape = fields[name]
        path = directory / f"{name}.bin"
        if not path.is_file():
            raise LengthMismatchError(f"{path}: missing field buffer")
        raw = np.fromfile(path, dtype="<f4")
        expected = n * int(np.prod(shape))
        if raw.size != expected:
            raise LengthMismatchError(
                f"{path}: has {raw.size} values, manifest implies {expected}"
            )
        arrays[name] = raw.reshape((n,) + shape if shape != (1,) else (n,))
    samples = []
    for i in range(n):
        samples.append(
            Sample(
                color=np.ascontiguousarray(arrays["color"][i]),
                depth=np.ascontiguousarray(arrays["depth"][i]),
                omega_label=float(arrays["omega"][i]),
                v=float(arrays["v"][i]),
                pose=Pose(*(float(c) for c in arrays["pose"][i])),
                t=float(arrays["t"][i]),
                map_id=meta["map_id"],
            )
        )
    return Episode(
        samples=samples,
        source=meta["source"],
        map_id=meta["map_id"],
        episode_id=directory.name,
        flagged=bool(int(meta["flagged"])),
    )


def save_dataset(episodes: list, root) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    index_lines = []
    for i, episode in enumerate(episodes):
        name = episode.episode_id or f"ep{i:04d}"
        save_episode(replace(episode, episode_id=name), root / name)
        index_lines.append(f"{name} {episode.map_id} {episode.source} {int(episode.flagged)}")
    (root / "index.txt").write_text("\n".join(index_lines) + "\n")


def load_dataset(root) -> list:
    root = Path(root)
    index_path = root / "index.txt"
    if not index_path.is_file():
        raise ManifestError(f"{root}: no index.txt")
    episodes = []
    for line_no, line in enumerate(index_path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ManifestError(f"{index_path}:{line_no}: bad index line {line!r}")
        episode = load_episode(root / parts[0])
        if (episode.map_id, episode.source, episode.flagged) != (
            parts[1],
            parts[2],
            bool(int(parts[3])),
        ):
            raise ManifestError(
                f"{index_path}:{line_no}: index disagrees with episode manifest"
            )
        episodes.append(episode)
    return episodes


def validate_episode(episode: Episode) -> None:
    """Check the invariants every stored episode must satisfy."""
    times = [s.t for s in episode.samples]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise DatasetError(f"{episode.episode_id}: sample times not strictly increasing")
    for s in episode.samples:
        if s.map_id != episode.map_id:
            raise DatasetError(f"{episode.episode_id}: sample map_id differs")
        for img in (s.color, s.depth):
            if img.min() < 0.0 or img.max() > 1.0:
                raise DatasetError(f"{episode.episode_id}: image values outside [0, 1]")
        if not math.isfinite(s.omega_label):
            raise DatasetError(f"{episode.episode_id}: non-finite label")


# ---------------------------------------------------------------------------
# splitting and batching


def split_episodes(episodes: list, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> DatasetSplit:
    """Seeded shuffle of episode ids, then a contiguous train/val/test
    partition. Val and test counts round down (but stay at least 1); the
    remainder goes to train."""
    if len(episodes) < 3:
        raise ValueError(f"need at least 3 episodes to split, got {len(episodes)}")
    ids = [e.episode_id for e in episodes]
    if len(set(ids)) != len(ids):
        raise ValueError("episode ids must be unique to split")
    order = list(np.random.default_rng(seed).permutation(len(ids)))
    shuffled = [ids[i] for i in order]
    n = len(ids)
    n_val = max(1, int(ratios[1] * n))
    n_test = max(1, int(ratios[2] * n))
    n_train = n - n_val - n_test
    if n_train < 1:
        raise ValueError(f"ratios {ratios} leave no training episodes for n={n}")
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        val=tuple(shuffled[n_train : n_train + n_val]),
        test=tuple(shuffled[n_train + n_val :]),
        seed=seed,
    )


def part_episodes(episodes: list, ids) -> list:
    by_id = {e.episode_id: e for e in episodes}
    return [by_id[i] for i in ids]


def stack_part(episodes: list):
    """Flatten a split part into (color [N,3,H,W], depth [N,1,H,W],
    omega [N,1]) float32 arrays, in episode order."""
    samples = [s for e in episodes for s in e.samples]
    if not samples:
        raise ValueError("split part has no samples")
    color = np.stack([s.color for s in samples])
    depth = np.stack([s.depth for s in samples])
    omega = np.array([[s.omega_label] for s in samples], dtype=np.float32)
    return color, depth, omega


def batches(part: list, batch_size: int = 32, seed: int = 0, epoch: int = 0):
    """Yield shuffled (color, depth, omega) batches; the shuffle is keyed by
    (seed, epoch) and the final short batch is kept."""
    color, depth, omega = part if isinstance(part, tuple) else stack_part(part)
    n = color.shape[0]
    order = np.random.default_rng((seed, epoch)).permutation(n)
    for start in range(0, n, batch_size):
        idx = order[start : start + batch_size]
        yield color[idx], depth[idx], omega[idx]
