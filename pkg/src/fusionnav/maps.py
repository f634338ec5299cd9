"""Shipped desk-scale environments plus the plain-text map file format.

Four "known" corridors are used for demonstration collection and two
"unknown" layouts are held out for generalization trials. All maps are
closed (every depth ray terminates on a wall), built as mitered polyline
corridors, and navigable by the scripted gap-following pilot from the
canonical spawn and from the jittered spawns used during collection.

Map file format, one record per line, whitespace-delimited decimals::

    # comment
    tag known|unknown
    spawn x y theta
    goal x1 y1 x2 y2
    segment x1 y1 x2 y2 r g b
"""

import math
from pathlib import Path

import numpy as np

from fusionnav.kinematics import Pose
from fusionnav.world import (
    DEFAULT_ROBOT_RADIUS,
    MapFormatError,
    WorldMap,
    check_collision,
    point_segment_distances,
)

# wall palette: distinct hues per surface so the color stream carries layout
RED = (190, 60, 60)
BLUE = (60, 90, 190)
AMBER = (225, 170, 50)
PURPLE = (170, 60, 190)
ORANGE = (210, 120, 40)
TEAL = (40, 170, 170)
END_WALL = (70, 170, 80)
BACK_WALL = (120, 120, 120)

GOAL_SETBACK = 0.35  # goal line sits this far before the corridor end


def polyline_corridor(map_id, tag, legs, half_width, wall_colors):
    """Closed corridor following a chain of (heading_deg, length) legs.

    Walls are the centerline offset by +/-half_width with mitered joints and
    the near end is closed behind the spawn. The far end is capped with a
    V-notch (apex pointing away): a flat cap makes oblique rays fractionally
    deeper than the axial one, which keeps the gap-following pilot hunting
    the corners; the notch makes the corridor axis strictly deepest so
    straight runs get steady commands. The goal line spans the corridor
    GOAL_SETBACK before the cap.
    """
    pts = [np.array([-0.4, 0.0])]
    for heading_deg, length in legs:
        heading = math.radians(heading_deg)
        pts.append(pts[-1] + length * np.array([math.cos(heading), math.sin(heading)]))
    dirs = [(b - a) / np.linalg.norm(b - a) for a, b in zip(pts, pts[1:])]
    normals = [np.array([-d[1], d[0]]) for d in dirs]

    def offset(sign):
        out = [pts[0] + sign * half_width * normals[0]]
        for i in range(1, len(pts) - 1):
            miter = normals[i - 1] + normals[i]
            miter = miter / np.linalg.norm(miter)
            out.append(pts[i] + sign * half_width * miter / float(miter @ normals[i]))
        out.append(pts[-1] + sign * half_width * normals[-1])
        return out

    left, right = offset(+1.0), offset(-1.0)
    segments = []
    for i in range(len(left) - 1):
        color = wall_colors[i % len(wall_colors)]
        segments.append((*left[i], *left[i + 1], color))
    for i in range(len(right) - 1):
        color = wall_colors[(i + 1) % len(wall_colors)]
        segments.append((*right[i], *right[i + 1], color))
    apex = pts[-1] + 0.8 * half_width * dirs[-1]
    segments.append((*left[-1], *apex, END_WALL))
    segments.append((*apex, *right[-1], END_WALL))
    segments.append((*left[0], *right[0], BACK_WALL))
    segments = tuple(
        (float(x0), float(y0), float(x1), float(y1), c) for x0, y0, x1, y1, c in segments
    )

    goal_center = pts[-1] - GOAL_SETBACK * dirs[-1]
    n = normals[-1]
    goal = (
        float(goal_center[0] - half_width * n[0]),
        float(goal_center[1] - half_width * n[1]),
        float(goal_center[0] + half_width * n[0]),
        float(goal_center[1] + half_width * n[1]),
    )
    return WorldMap(
        map_id=map_id,
        segments=segments,
        spawn=Pose(0.0, 0.0, 0.0),
        goal_line=goal,
        tag=tag,
    )


def builtin_maps() -> dict:
    """All shipped maps, keyed by id, in a stable order."""
    worlds = [
        polyline_corridor(
            "known_straight", "known", [(0, 1.5)], 0.55, [RED, BLUE]
        ),
        polyline_corridor(
            "known_veer_left", "known",
            [(0, 0.5), (35, 0.75), (25, 0.55)], 0.52, [RED, AMBER],
        ),
        polyline_corridor(
            "known_veer_right", "known",
            [(0, 0.5), (-35, 0.75), (-25, 0.55)], 0.52, [BLUE, PURPLE],
        ),
        polyline_corridor(
            "known_weave", "known",
            [(0, 0.5), (25, 0.65), (-25, 0.75), (0, 0.4)], 0.55, [AMBER, BLUE],
        ),
        polyline_corridor(
            "unknown_zigzag", "unknown",
            [(0, 0.5), (-30, 0.7), (10, 0.7), (-15, 0.45)], 0.52, [ORANGE, TEAL],
        ),
        polyline_corridor(
            "unknown_curve", "unknown",
            [(0, 0.5), (20, 0.6), (-25, 0.7), (15, 0.5)], 0.55, [TEAL, ORANGE],
        ),
    ]
    return {w.map_id: w for w in worlds}


def validate_map(world: WorldMap, radius: float = DEFAULT_ROBOT_RADIUS) -> None:
    """Check the structural invariants a usable map must satisfy."""
    if check_collision(world, world.spawn, radius):
        raise MapFormatError(f"map {world.map_id!r}: spawn pose is in collision")
    gx0, gy0, gx1, gy1 = world.goal_line
    goal_only = WorldMap(
        map_id="_goal",
        segments=((gx0, gy0, gx1, gy1, (0, 0, 0)),),
        spawn=world.spawn,
        goal_line=world.goal_line,
        tag=world.tag,
    )
    if point_segment_distances(world.spawn.x, world.spawn.y, goal_only).min() < radius:
        raise MapFormatError(f"map {world.map_id!r}: goal line touches the spawn disc")


# ---------------------------------------------------------------------------
# file format


def save_map_file(world: WorldMap, path) -> None:
    lines = [f"# map {world.map_id}", f"tag {world.tag}"]
    lines.append(f"spawn {world.spawn.x!r} {world.spawn.y!r} {world.spawn.theta!r}")
    gx0, gy0, gx1, gy1 = world.goal_line
    lines.append(f"goal {gx0!r} {gy0!r} {gx1!r} {gy1!r}")
    for x0, y0, x1, y1, (r, g, b) in world.segments:
        lines.append(f"segment {x0!r} {y0!r} {x1!r} {y1!r} {r} {g} {b}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_map_file(path) -> WorldMap:
    path = Path(path)
    segments = []
    spawn = None
    goal = None
    tag = None
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        kind, args = fields[0], fields[1:]
        try:
            if kind == "segment":
                if len(args) != 7:
                    raise ValueError("expected 7 fields")
                x0, y0, x1, y1 = (float(v) for v in args[:4])
                r, g, b = (int(v) for v in args[4:])
                if not all(0 <= c <= 255 for c in (r, g, b)):
                    raise ValueError("color out of range")
                segments.append((x0, y0, x1, y1, (r, g, b)))
            elif kind == "spawn":
                x, y, theta = (float(v) for v in args)
                spawn = Pose(x, y, theta)
            elif kind == "goal":
                goal = tuple(float(v) for v in args)
                if len(goal) != 4:
                    raise ValueError("expected 4 fields")
            elif kind == "tag":
                (tag,) = args
            else:
                raise ValueError(f"unknown record {kind!r}")
        except ValueError as exc:
            raise MapFormatError(f"{path}:{line_no}: {exc}") from exc
    if spawn is None or goal is None or tag is None or not segments:
        raise MapFormatError(f"{path}: missing spawn/goal/tag/segment records")
    world = WorldMap(
        map_id=path.stem, segments=tuple(segments), spawn=spawn, goal_line=goal, tag=tag
    )
    validate_map(world)
    return world


def resolve_maps(spec: str) -> list:
    """Resolve a CLI map spec to a list of maps.

    Accepts: `known` / `unknown` / `all` (builtin tags), a comma-separated
    list of builtin ids, or a path to a map file / directory of `*.map`
    files.
    """
    builtins = builtin_maps()
    if spec in ("known", "unknown"):
        return [m for m in builtins.values() if m.tag == spec]
    if spec == "all":
        return list(builtins.values())
    path = Path(spec)
    if path.is_dir():
        files = sorted(path.glob("*.map"))
        if not files:
            raise MapFormatError(f"no *.map files under {path}")
        return [load_map_file(f) for f in files]
    if path.is_file():
        return [load_map_file(path)]
    ids = [s for s in spec.split(",") if s]
    missing = [i for i in ids if i not in builtins]
    if missing:
        raise MapFormatError(
            f"unknown map ids {missing}; builtins are {sorted(builtins)}"
        )
    return [builtins[i] for i in ids]
