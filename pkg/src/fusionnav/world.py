"""Deterministic 2.5D world: segment maps, column-raycast RGB-D rendering,
collision checks, a scripted follow-the-widest-gap pilot, and fixed-cadence
stepping.

Geometry lives in the plane; walls are vertical ribbons of uniform height
rendered as a per-column band whose thickness encodes distance. Everything
here is a pure function of its inputs, so frames and rollouts are bitwise
reproducible.
"""

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from fusionnav.kinematics import Pose, integrate_pose

SKY_RGB = (200, 220, 255)
FLOOR_RGB = (80, 80, 80)
RAY_TIE_EPS = 1e-12
DEFAULT_ROBOT_RADIUS = 0.18
DEFAULT_OMEGA_MAX = 1.0


class InvalidStateError(RuntimeError):
    """Raised when stepping a simulation state that has already collided."""


class MapFormatError(ValueError):
    """Raised for unparseable or invalid map files."""


@dataclass(frozen=True)
class CameraModel:
    image_w: int = 80
    image_h: int = 60
    horizontal_fov: float = 1.21  # radians, D415-class
    wall_height: float = 1.0  # meters
    camera_height: float = 0.5  # meters, mid-wall
    max_depth: float = 10.0  # meters

    def __post_init__(self):
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError(f"fov must be in (0, pi), got {self.horizontal_fov}")
        if self.max_depth <= 0:
            raise ValueError(f"max_depth must be positive, got {self.max_depth}")


@dataclass(frozen=True)
class WorldMap:
    """Segment-based environment: colored wall segments, a spawn pose, a goal
    line to cross, and a known/unknown tag."""

    map_id: str
    segments: tuple  # of (x1, y1, x2, y2, (r, g, b))
    spawn: Pose
    goal_line: tuple  # (x1, y1, x2, y2)
    tag: str  # "known" | "unknown"

    def __post_init__(self):
        if not self.segments:
            raise MapFormatError(f"map {self.map_id!r} has no segments")
        if self.tag not in ("known", "unknown"):
            raise MapFormatError(f"map {self.map_id!r} has bad tag {self.tag!r}")


@lru_cache(maxsize=128)
def _segment_arrays(world: WorldMap):
    """[S, 4] endpoint array and [S, 3] uint8 color array for a map."""
    pts = np.array([s[:4] for s in world.segments], dtype=np.float64)
    cols = np.array([s[4] for s in world.segments], dtype=np.uint8)
    pts.setflags(write=False)
    cols.setflags(write=False)
    return pts, cols


@dataclass(frozen=True)
class RgbdFrame:
    color: np.ndarray  # [3, H, W] float32 in [0, 1]
    depth: np.ndarray  # [1, H, W] float32 in [0, 1] (distance / max_depth)
    pose_at_capture: Pose
    t: float


@dataclass(frozen=True)
class SimState:
    world: WorldMap
    pose: Pose
    t: float = 0.0
    robot_radius: float = DEFAULT_ROBOT_RADIUS
    omega_max: float = DEFAULT_OMEGA_MAX
    collided: bool = False


# ---------------------------------------------------------------------------
# raycasting


def _scan_rays(world, origin_x, origin_y, angles):
    """Cast many rays at once. Returns (distances [R], seg_index [R]) with
    seg_index -1 for misses; miss distances are +inf."""
    pts, _ = _segment_arrays(world)
    dx = np.cos(angles)[:, None]  # [R, 1]
    dy = np.sin(angles)[:, None]
    ex = (pts[:, 2] - pts[:, 0])[None, :]  # [1, S]
    ey = (pts[:, 3] - pts[:, 1])[None, :]
    px = (pts[:, 0] - origin_x)[None, :]
    py = (pts[:, 1] - origin_y)[None, :]
    denom = dx * ey - dy * ex  # [R, S]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (px * ey - py * ex) / denom
        s = (px * dy - py * dx) / denom
    valid = (np.abs(denom) > 1e-15) & (t > RAY_TIE_EPS) & (s >= 0.0) & (s <= 1.0)
    t = np.where(valid, t, np.inf)
    best = t.min(axis=1)
    # tie-break within RAY_TIE_EPS by lowest segment index
    tied = t <= (best + RAY_TIE_EPS)[:, None]
    idx = np.argmax(tied, axis=1)
    idx = np.where(np.isfinite(best), idx, -1)
    return best, idx


def raycast(world: WorldMap, origin: Pose, ray_angle_offset: float, d_max: float):
    """Nearest wall along heading+offset. Returns (distance, rgb-or-None);
    distance is clamped to d_max and the color is None at or past it."""
    dist, idx = _scan_rays(
        world, origin.x, origin.y, np.array([origin.theta + ray_angle_offset])
    )
    d, i = float(dist[0]), int(idx[0])
    if i < 0 or d >= d_max:
        return d_max, None
    return d, world.segments[i][4]


# ---------------------------------------------------------------------------
# rendering


def column_angles(cam: CameraModel) -> np.ndarray:
    """Ray angle offset of each image column; column 0 looks left."""
    c = np.arange(cam.image_w)
    return cam.horizontal_fov * (0.5 - (c + 0.5) / cam.image_w)


def render_rgbd(world: WorldMap, pose: Pose, cam: CameraModel, t: float) -> RgbdFrame:
    """Render one synchronized color+depth frame at the given pose.

    Per column: the nearest wall hit paints a vertical band centered on the
    horizon whose half-height is (H/fov) * (wall_height/2) / distance; sky
    above, floor below. Miss columns split sky/floor at mid-image with depth
    1.0 everywhere.
    """
    h, w = cam.image_h, cam.image_w
    angles = pose.theta + column_angles(cam)
    dist, idx = _scan_rays(world, pose.x, pose.y, angles)
    hit = (idx >= 0) & (dist < cam.max_depth)
    dist = np.where(hit, dist, cam.max_depth)

    _, seg_colors = _segment_arrays(world)
    wall_rgb = seg_colors[np.where(hit, idx, 0)].astype(np.float64) / 255.0  # [W, 3]

    center_offset = np.arange(h) + 0.5 - h / 2.0  # [H], negative above horizon
    half_band = (h / cam.horizontal_fov) * (cam.wall_height / 2.0) / np.maximum(dist, 1e-9)
    wall_mask = (np.abs(center_offset)[:, None] <= half_band[None, :]) & hit[None, :]

    color = np.empty((h, w, 3), dtype=np.float64)
    above = center_offset < 0.0
    color[above, :, :] = np.array(SKY_RGB, dtype=np.float64) / 255.0
    color[~above, :, :] = np.array(FLOOR_RGB, dtype=np.float64) / 255.0
    color[wall_mask] = np.broadcast_to(wall_rgb[None, :, :], (h, w, 3))[wall_mask]

    depth = np.where(wall_mask, (dist / cam.max_depth)[None, :], 1.0)

    return RgbdFrame(
        color=np.ascontiguousarray(color.transpose(2, 0, 1)).astype(np.float32),
        depth=depth[None, :, :].astype(np.float32),
        pose_at_capture=pose,
        t=t,
    )


# ---------------------------------------------------------------------------
# collision


def point_segment_distances(x: float, y: float, world: WorldMap) -> np.ndarray:
    pts, _ = _segment_arrays(world)
    ax, ay = pts[:, 0], pts[:, 1]
    bx, by = pts[:, 2], pts[:, 3]
    ex, ey = bx - ax, by - ay
    length_sq = ex * ex + ey * ey
    with np.errstate(divide="ignore", invalid="ignore"):
        proj = ((x - ax) * ex + (y - ay) * ey) / length_sq
    proj = np.clip(np.where(length_sq > 0, proj, 0.0), 0.0, 1.0)
    cx, cy = ax + proj * ex, ay + proj * ey
    return np.hypot(x - cx, y - cy)


def check_collision(world: WorldMap, pose: Pose, radius: float) -> bool:
    """True iff any wall segment comes strictly closer than radius."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return bool(point_segment_distances(pose.x, pose.y, world).min() < radius)


def crossed_goal(world: WorldMap, x0: float, y0: float, x1: float, y1: float) -> bool:
    """Did the motion chord (x0,y0)->(x1,y1) cross the goal line?"""
    gx0, gy0, gx1, gy1 = world.goal_line

    def orient(ax, ay, bx, by, cx, cy):
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)

    d1 = orient(x0, y0, x1, y1, gx0, gy0)
    d2 = orient(x0, y0, x1, y1, gx1, gy1)
    d3 = orient(gx0, gy0, gx1, gy1, x0, y0)
    d4 = orient(gx0, gy0, gx1, gy1, x1, y1)
    return (d1 * d2 < 0) and (d3 * d4 <= 0)


# ---------------------------------------------------------------------------
# scripted pilot


def sector_sizes(width: int, k: int) -> list:
    """Partition `width` columns into k nearly equal, mirror-symmetric runs.

    Any remainder is spread outward in symmetric pairs (an odd leftover goes
    to the center), so a mirror-image scan produces mirror-image sectors.
    """
    base, rem = divmod(width, k)
    sizes = [base] * k
    if rem % 2 == 1:
        sizes[k // 2] += 1
        rem -= 1
    pair = 0
    while rem > 0:
        sizes[pair] += 1
        sizes[k - 1 - pair] += 1
        rem -= 2
        pair += 1
    return sizes


def expert_policy(
    frame_depth: np.ndarray,
    omega_max: float,
    fov: float = CameraModel.horizontal_fov,
    k_sectors: int = 9,
    kp: float = 2.0,
) -> float:
    """Steer toward the deepest angular sector of the mid-image depth scan.

    The center row is split into k mirror-symmetric sectors scored by mean
    depth; the winner's center angle (ties: most central, then leftmost)
    times kp gives the command, clamped to +/-omega_max. Positive means a
    left turn.
    """
    _, h, w = frame_depth.shape
    scan = np.asarray(frame_depth[0, h // 2, :], dtype=np.float64)
    scored = []
    start = 0
    for index, size in enumerate(sector_sizes(w, k_sectors)):
        mid_col = start + (size - 1) / 2.0
        # centered form keeps symmetric sectors at exactly opposite angles
        angle = fov * (w / 2.0 - (mid_col + 0.5)) / w
        scored.append((float(scan[start : start + size].mean()), angle, index))
        start += size
    top = max(score for score, _, _ in scored)
    _, _, best_angle = min(
        (abs(angle), index, angle)
        for score, angle, index in scored
        if score >= top - 1e-12
    )
    return float(np.clip(kp * best_angle, -omega_max, omega_max))


# ---------------------------------------------------------------------------
# stepping

COLLISION_SUBSTEPS = 5  # 4 intermediate poses + the final one


def step(state: SimState, v: float, omega: float, dt: float) -> SimState:
    """Advance one control tick: clamp omega, integrate the arc, and check
    collisions at sub-sampled poses so fast turns cannot tunnel through a
    wall. Returns a new state; the input is untouched."""
    if state.collided:
        raise InvalidStateError("cannot step a collided simulation state")
    if not (dt > 0):
        raise ValueError(f"dt must be positive, got {dt}")
    omega = float(np.clip(omega, -state.omega_max, state.omega_max))
    collided = False
    new_pose = state.pose
    for i in range(1, COLLISION_SUBSTEPS + 1):
        partial = integrate_pose(state.pose, v, omega, dt * i / COLLISION_SUBSTEPS)
        if i == COLLISION_SUBSTEPS:
            new_pose = partial
        if not collided and check_collision(state.world, partial, state.robot_radius):
            collided = True
    return replace(state, pose=new_pose, t=state.t + dt, collided=collided)
