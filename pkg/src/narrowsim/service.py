"""Teleop endpoint: live state frames out, human steering commands in.

One control loop per session owns its env (single writer). Sockets never
touch the env; they park the latest command on the session and the loop
picks it up at the next tick, so a slow or bursty client can never change
step timing. Frames go out as JSON text; every executed step is one frame.
The loop paces at wall clock (0.2 s per tick) because a human is driving;
tests shrink the tick to run fast.

Command semantics per tick: the last action message wins, no message means
the previous action is held, a reset zeroes the held action and emits a
distinguished frame with step 0 instead of stepping. A finished episode
auto-resets on the following tick the same way. Record toggles apply at the
tick boundary; while recording, each executed step appends exactly one
record pairing the observation the driver saw with the action that ran.
"""

from __future__ import annotations

import asyncio
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .env import EnvConfig, NarrowSpaceEnv
from .geometry import TrackWorld, bundled_track_names, load_bundled_track, scan
from .safety import Observation
from .vehicle import Action

DEFAULT_TICK_SECONDS = 0.2


@dataclass
class TeleopSession:
    """One env plus the knobs clients are allowed to poke between ticks."""

    name: str
    env: NarrowSpaceEnv
    recording: bool = False
    demo_records: list = field(default_factory=list)
    clients: dict = field(default_factory=dict)  # WebSocket -> outbox queue
    held_action: Action = Action(0.0, 0.0)
    pending_action: Action | None = None
    reset_requested: bool = False
    record_request: bool | None = None
    needs_reset: bool = True
    last_obs: Observation | None = None
    task: asyncio.Task | None = None

    @property
    def connected_clients(self) -> int:
        return len(self.clients)


def _zero_components(mode: str) -> dict:
    zeros = {"f": 0.0, "o": 0.0, "m": 0.0, "t": 0.0}
    if mode == "wg":
        zeros["wg"] = 0.0
    return zeros


def _frame(session: TeleopSession, *, obs: Observation, action: Action, reward: float,
           components: dict, done: bool, reason: str, scans, reset: bool) -> dict:
    pose = session.env.pose
    return {
        "type": "state",
        "step": session.env.steps,
        "pose": [pose.x, pose.y, pose.theta],
        "action": [action.v, action.w],
        "scans": [float(r) for r in scans],
        "v_obs": [float(r) for r in obs.v_obs],
        "extras": [float(e) for e in obs.extras],
        "reward": float(reward),
        "reward_components": {k: float(v) for k, v in components.items()},
        "done": bool(done),
        "done_reason": reason,
        "reset": reset,
        "recording": session.recording,
        "track": session.env.config.world.name,
    }


def advance_session(session: TeleopSession) -> dict:
    """Run one tick: apply queued commands, reset or step, return the frame."""
    env = session.env
    if session.record_request is not None:
        session.recording = session.record_request
        session.record_request = None
    if session.reset_requested or session.needs_reset:
        obs = env.reset()
        session.reset_requested = False
        session.needs_reset = False
        session.held_action = Action(0.0, 0.0)
        session.pending_action = None
        session.last_obs = obs
        cfg = env.config
        raw = scan(cfg.world, env.pose, cfg.footprint, cfg.n_scans, cfg.max_range)
        return _frame(session, obs=obs, action=session.held_action, reward=0.0,
                      components=_zero_components(cfg.reward.mode), done=False,
                      reason="running", scans=raw, reset=True)
    if session.pending_action is not None:
        session.held_action = session.pending_action
        session.pending_action = None
    seen = session.last_obs
    out = env.step(session.held_action)
    if session.recording:
        session.demo_records.append({
            "step": env.steps,
            "v_obs": [float(r) for r in seen.v_obs],
            "extras": [float(e) for e in seen.extras],
            "v": session.held_action.v,
            "w": session.held_action.w,
            "timestamp": time.time(),
        })
    session.last_obs = out.observation
    if out.done:
        session.needs_reset = True
    return _frame(session, obs=out.observation, action=session.held_action,
                  reward=out.reward, components=out.info["components"],
                  done=out.done, reason=out.done_reason, scans=out.info["scans"],
                  reset=False)


def handle_message(session: TeleopSession, text: str) -> dict | None:
    """Apply one client message; returns an error frame for bad input."""
    try:
        msg = json.loads(text)
        kind = msg["type"]
        if kind == "action":
            v, w = float(msg["v"]), float(msg["w"])
            if not (math.isfinite(v) and math.isfinite(w)):
                raise ValueError("action components must be finite")
            session.pending_action = Action(v, w)
        elif kind == "reset":
            session.reset_requested = True
        elif kind == "record":
            session.record_request = bool(msg["on"])
        else:
            raise ValueError(f"unknown message type '{kind}'")
    except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        return {"type": "error", "message": str(exc)}
    return None


def demo_lines(session: TeleopSession):
    """Header line then one JSON line per recorded step."""
    yield json.dumps({"type": "header", "kind": "teleop-demos", "session": session.name,
                      "track": session.env.config.world.name,
                      "records": len(session.demo_records)})
    for rec in session.demo_records:
        yield json.dumps(rec)


def export_demos(session: TeleopSession, path) -> Path:
    """Write the session's demo records as line-delimited JSON."""
    if session.recording:
        raise RuntimeError("stop recording before exporting demos")
    path = Path(path)
    with open(path, "w") as fh:
        for line in demo_lines(session):
            fh.write(line + "\n")
    return path


def _offer(outbox: asyncio.Queue, payload: str) -> None:
    # A stalled client loses frames rather than stalling the loop.
    while True:
        try:
            outbox.put_nowait(payload)
            return
        except asyncio.QueueFull:
            try:
                outbox.get_nowait()
            except asyncio.QueueEmpty:
                pass


async def _session_loop(session: TeleopSession, tick_seconds: float) -> None:
    loop = asyncio.get_running_loop()
    deadline = loop.time()
    while session.clients:
        deadline += tick_seconds
        delay = deadline - loop.time()
        if delay > 0:
            await asyncio.sleep(delay)
        else:
            # Fell behind (or unpaced): re-anchor instead of bursting.
            deadline = loop.time()
            await asyncio.sleep(0)
        payload = json.dumps(advance_session(session))
        for outbox in list(session.clients.values()):
            _offer(outbox, payload)


async def _drain(ws: WebSocket, outbox: asyncio.Queue) -> None:
    while True:
        await ws.send_text(await outbox.get())


class ServiceState:
    """Session registry plus the world catalog behind the HTTP routes."""

    def __init__(self, config: EnvConfig, tick_seconds: float = DEFAULT_TICK_SECONDS):
        self.config = config
        self.tick_seconds = tick_seconds
        self.sessions: dict[str, TeleopSession] = {}
        self.worlds: dict[str, TrackWorld] = {config.world.name: config.world}

    def world(self, name: str) -> TrackWorld:
        if name not in self.worlds:
            if name not in bundled_track_names():
                raise KeyError(f"unknown track '{name}'")
            self.worlds[name] = load_bundled_track(name)
        return self.worlds[name]

    def session(self, name: str, track: str | None = None) -> TeleopSession:
        if name not in self.sessions:
            cfg = self.config
            if track is not None and track != cfg.world.name:
                cfg = replace(cfg, world=self.world(track), waypoints=None)
            self.sessions[name] = TeleopSession(name, NarrowSpaceEnv(cfg))
        return self.sessions[name]


def _track_doc(world: TrackWorld) -> dict:
    return {
        "name": world.name,
        "description": world.description,
        "spawn": [world.spawn.x, world.spawn.y, world.spawn.theta],
        "exit_band": [list(map(float, p)) for p in world.exit_band],
        "segments": world.segments.tolist(),
        "waypoints": None if world.waypoints is None else world.waypoints.tolist(),
    }


def create_app(config: EnvConfig | None = None, *,
               tick_seconds: float = DEFAULT_TICK_SECONDS) -> FastAPI:
    """Build the ASGI app; state lives on app.state.service."""
    if config is None:
        config = EnvConfig(world=load_bundled_track("big_track"))
    app = FastAPI(title="narrowsim teleop")
    state = ServiceState(config, tick_seconds)
    app.state.service = state

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/tracks")
    def tracks():
        names = sorted(set(bundled_track_names()) | set(state.worlds))
        out = []
        for name in names:
            world = state.world(name)
            out.append({"name": name, "description": world.description})
        return {"tracks": out}

    @app.get("/tracks/{name}")
    def track_detail(name: str):
        try:
            return _track_doc(state.world(name))
        except KeyError:
            return PlainTextResponse(f"unknown track '{name}'\n", status_code=404)

    @app.get("/sessions/{name}/demos")
    def session_demos(name: str):
        session = state.sessions.get(name)
        if session is None:
            return PlainTextResponse(f"unknown session '{name}'\n", status_code=404)
        if session.recording:
            return PlainTextResponse("recording is active; stop it first\n", status_code=409)
        body = "".join(line + "\n" for line in demo_lines(session))
        return PlainTextResponse(body, media_type="application/jsonl")

    @app.websocket("/teleop/{name}")
    async def teleop(ws: WebSocket, name: str, track: str | None = None):
        await ws.accept()
        try:
            session = state.session(name, track)
        except KeyError as exc:
            await ws.send_text(json.dumps({"type": "error", "message": str(exc)}))
            await ws.close()
            return
        outbox: asyncio.Queue = asyncio.Queue(maxsize=32)
        session.clients[ws] = outbox
        if session.task is None or session.task.done():
            session.task = asyncio.create_task(_session_loop(session, state.tick_seconds))
        sender = asyncio.create_task(_drain(ws, outbox))
        try:
            while True:
                error = handle_message(session, await ws.receive_text())
                if error is not None:
                    _offer(outbox, json.dumps(error))
        except WebSocketDisconnect:
            pass
        finally:
            session.clients.pop(ws, None)
            sender.cancel()

    return app


def serve(config: EnvConfig | None = None, bind: str = "127.0.0.1:8000", *,
          tick_seconds: float = DEFAULT_TICK_SECONDS) -> None:
    """Run the teleop service until interrupted (blocking)."""
    import uvicorn

    host, _, port = bind.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError("bind must look like HOST:PORT")
    app = create_app(config, tick_seconds=tick_seconds)
    uvicorn.run(app, host=host, port=int(port), log_level="warning")
