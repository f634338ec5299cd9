"""WebSocket bridge for human demonstration: streams rendered frames and
robot state at the control cadence, latches steering commands, and records
teleoperated episodes in the standard dataset container.

Simulated time is authoritative: every tick advances t by exactly the
cadence no matter how fast or slow the wall-clock loop runs (pacing only
targets the configured wall interval). One session per connection; each
session owns its own simulator state.

Protocol (JSON text frames)
    server -> client, every tick:
        {"type": "state", "t": .., "pose": {"x","y","theta"},
         "omega_applied": .., "collided": .., "recording": ..,
         "color": {"w","h","encoding":"raw-rgb8-base64","data"},
         "depth": {"w","h","encoding":"raw-f32le-base64","data"}}
    client -> server:
        {"type":"cmd","omega":number} | {"type":"record","on":bool}
        | {"type":"reset","map_id":string} | {"type":"list_maps"}
    responses: {"type":"ack",...} | {"type":"maps","ids":[..]}
    unknown/malformed input: {"type":"error","reason":..}
"""

import asyncio
import base64
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from fusionnav.config import RuntimeConfig
from fusionnav.dataset import Episode, Sample, save_episode
from fusionnav.kinematics import Pose
from fusionnav.world import SimState, WorldMap, render_rgbd, step


def encode_color(color: np.ndarray) -> str:
    """[3,H,W] float in [0,1] -> base64 of interleaved row-major RGB8."""
    rgb8 = np.clip(np.rint(color * 255.0), 0, 255).astype(np.uint8)
    return base64.b64encode(rgb8.transpose(1, 2, 0).tobytes()).decode("ascii")


def encode_depth(depth: np.ndarray) -> str:
    """[1,H,W] float32 -> base64 of row-major little-endian f32."""
    return base64.b64encode(depth[0].astype("<f4", copy=False).tobytes()).decode("ascii")


def _f32(value: float) -> float:
    return float(np.float32(value))


@dataclass
class Session:
    maps: dict
    out_dir: Path
    runtime: RuntimeConfig
    next_episode_index: object = None  # shared service-level counter
    state: SimState = None  # type: ignore[assignment]
    pending_omega: float = 0.0
    recording: bool = False
    buffer: list = field(default_factory=list)

    def __post_init__(self):
        if self.next_episode_index is None:
            counter = iter(range(1 << 30))
            self.next_episode_index = lambda: next(counter)
        first = next(iter(self.maps.values()))
        self._reset_state(first)

    def _reset_state(self, world: WorldMap):
        self.state = SimState(
            world=world,
            pose=world.spawn,
            omega_max=self.runtime.omega_max,
            robot_radius=self.runtime.robot_radius,
        )
        self.pending_omega = 0.0

    def state_message(self, frame) -> dict:
        cam = self.runtime.camera
        return {
            "type": "state",
            "t": self.state.t,
            "pose": {
                "x": self.state.pose.x,
                "y": self.state.pose.y,
                "theta": self.state.pose.theta,
            },
            "omega_applied": self.pending_omega,
            "collided": self.state.collided,
            "recording": self.recording,
            "color": {
                "w": cam.image_w,
                "h": cam.image_h,
                "encoding": "raw-rgb8-base64",
                "data": encode_color(frame.color),
            },
            "depth": {
                "w": cam.image_w,
                "h": cam.image_h,
                "encoding": "raw-f32le-base64",
                "data": encode_depth(frame.depth),
            },
        }

    def tick(self) -> dict:
        """Render, build the state message, then apply the latched command.
        Returns the message; mutates the session."""
        world = self.state.world
        frame = render_rgbd(world, self.state.pose, self.runtime.camera, self.state.t)
        message = self.state_message(frame)
        if self.state.collided:
            return message  # frozen: no stepping a collided state
        omega = self.pending_omega
        candidate = None
        if self.recording:
            candidate = Sample(
                color=frame.color,
                depth=frame.depth,
                omega_label=_f32(omega),
                v=_f32(self.runtime.linear_velocity),
                pose=Pose(
                    _f32(self.state.pose.x),
                    _f32(self.state.pose.y),
                    _f32(self.state.pose.theta),
                ),
                t=_f32(self.state.t),
                map_id=world.map_id,
            )
        self.state = step(
            self.state, self.runtime.linear_velocity, omega, self.runtime.cadence
        )
        if self.state.collided:
            if self.recording:
                # same truncation rule as scripted recording: the sample whose
                # command crashed is dropped and the episode is flagged
                self.finish_recording(flagged=True)
        elif candidate is not None:
            self.buffer.append(candidate)
        return message

    def start_recording(self):
        self.recording = True
        self.buffer = []

    def finish_recording(self, flagged: bool = False):
        if not self.recording:
            return None
        self.recording = False
        if not self.buffer and not flagged:
            return None
        episode_id = f"teleop{self.next_episode_index():04d}"
        episode = Episode(
            samples=self.buffer,
            source="teleop",
            map_id=self.state.world.map_id,
            episode_id=episode_id,
            flagged=flagged,
        )
        self.out_dir.mkdir(parents=True, exist_ok=True)
        save_episode(episode, self.out_dir / episode_id)
        self._append_index(episode)
        self.buffer = []
        return episode_id

    def _append_index(self, episode: Episode):
        index = self.out_dir / "index.txt"
        line = f"{episode.episode_id} {episode.map_id} {episode.source} {int(episode.flagged)}\n"
        with open(index, "a") as fh:
            fh.write(line)

    def handle(self, message: dict) -> dict | None:
        """Apply one client message; returns a response message or None."""
        kind = message.get("type")
        if kind == "cmd":
            try:
                omega = float(message["omega"])
            except (KeyError, TypeError, ValueError):
                return {"type": "error", "reason": "cmd needs a numeric 'omega'"}
            clamped = abs(omega) > self.runtime.omega_max
            self.pending_omega = float(
                np.clip(omega, -self.runtime.omega_max, self.runtime.omega_max)
            )
            if clamped:
                return {
                    "type": "ack",
                    "cmd": "cmd",
                    "clamped": True,
                    "omega_applied": self.pending_omega,
                }
            return None
        if kind == "record":
            turn_on = bool(message.get("on"))
            if turn_on and not self.recording:
                self.start_recording()
                return {"type": "ack", "cmd": "record", "on": True}
            if not turn_on and self.recording:
                episode_id = self.finish_recording()
                return {"type": "ack", "cmd": "record", "on": False, "episode_id": episode_id}
            return {"type": "ack", "cmd": "record", "on": self.recording}
        if kind == "reset":
            map_id = message.get("map_id")
            if map_id not in self.maps:
                return {"type": "error", "reason": f"unknown map_id {map_id!r}"}
            self.finish_recording()
            self._reset_state(self.maps[map_id])
            return {"type": "ack", "cmd": "reset", "map_id": map_id}
        if kind == "list_maps":
            return {"type": "maps", "ids": list(self.maps)}
        return {"type": "error", "reason": f"unknown message type {kind!r}"}


def build_app(
    maps: dict,
    out_dir,
    runtime: RuntimeConfig | None = None,
    tick_wall_seconds: float = 0.15,
    static_dir=None,
) -> FastAPI:
    """The teleop service as an ASGI app (one Session per connection)."""
    runtime = runtime if runtime is not None else RuntimeConfig()
    out_dir = Path(out_dir)
    app = FastAPI()
    episode_counter = iter(range(1 << 30))
    next_episode_index = lambda: next(episode_counter)

    @app.websocket("/ws")
    async def ws_endpoint(websocket: WebSocket):
        await websocket.accept()
        session = Session(
            maps=maps, out_dir=out_dir, runtime=runtime,
            next_episode_index=next_episode_index,
        )
        send_lock = asyncio.Lock()

        async def ticker():
            next_deadline = time.monotonic()
            while True:
                message = session.tick()
                async with send_lock:
                    await websocket.send_text(json.dumps(message))
                next_deadline += tick_wall_seconds
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
                else:
                    next_deadline = time.monotonic()  # fell behind; re-anchor
                    await asyncio.sleep(0)

        tick_task = asyncio.create_task(ticker())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    parsed = json.loads(text)
                    if not isinstance(parsed, dict):
                        raise ValueError("not an object")
                except ValueError:
                    response = {"type": "error", "reason": "malformed JSON message"}
                else:
                    response = session.handle(parsed)
                if response is not None:
                    async with send_lock:
                        await websocket.send_text(json.dumps(response))
        except WebSocketDisconnect:
            pass
        finally:
            tick_task.cancel()
            session.finish_recording()

    if static_dir is not None and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    return app


def serve(maps, host, port, out_dir, runtime=None, tick_wall_seconds=0.15, static_dir=None):
    """Run the service until interrupted (binds the port synchronously)."""
    import uvicorn

    app = build_app(
        maps, out_dir, runtime=runtime, tick_wall_seconds=tick_wall_seconds,
        static_dir=static_dir,
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")
