"""Game-session HTTP/WebSocket service for live human-vs-agent play.

Sessions hold one authoritative game each. Human moves arrive over
``POST /sessions/{id}/moves`` and are validated against the exact legality
mask (illegal attempts are rejected, never penalized); agent and random
seats are auto-played server-side. Every game event is appended to a
versioned log that is streamed over ``WS /sessions/{id}/stream`` and
also available by polling ``GET /sessions/{id}/events``.
"""

from __future__ import annotations

import asyncio
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import agents, nn
from .env import SLSEnv, action_mask, encode
from .game import GameConfig

HUMAN = "human"
AGENT = "agent"
RANDOM_SEAT = "random"


class SeatSpec(BaseModel):
    type: str = Field(pattern="^(human|agent|random)$")
    variant: Optional[str] = None
    checkpoint: Optional[str] = None


class CreateSessionRequest(BaseModel):
    seats: List[SeatSpec]
    seed: Optional[int] = None
    spectate: bool = False
    max_steps: int = 1000
    move_delay: Optional[float] = None


class MoveRequest(BaseModel):
    seat: int
    action: int


@dataclass
class Seat:
    type: str
    variant: Optional[str] = None
    params: Optional[nn.NetworkParams] = None

    def describe(self) -> dict:
        return {"type": self.type, "variant": self.variant}


@dataclass
class Session:
    id: str
    env: SLSEnv
    seats: List[Seat]
    rng: np.random.Generator
    move_delay: float
    lock: threading.Lock = field(default_factory=threading.Lock)
    frames: List[dict] = field(default_factory=list)

    @property
    def version(self) -> int:
        return len(self.frames) - 1

    def push_frame(self, event: dict) -> None:
        self.frames.append(
            {
                "version": len(self.frames),
                "event": event,
                "state": self.env.snapshot(),
            }
        )

    def snapshot(self) -> dict:
        state = self.env.state
        return {
            "session_id": self.id,
            "version": self.version,
            "state": self.env.snapshot(),
            "mask": action_mask(state).tolist(),
            "seats": [seat.describe() for seat in self.seats],
            "current_player": state.current_player,
            "done": self.env.done,
            "winner": state.terminal,
        }

    def seat_is_human(self, player: int) -> bool:
        return self.seats[player].type == HUMAN

    def pick_auto_action(self, player: int) -> int:
        """Action for a non-human seat: greedy over the legality mask for
        agents, uniform over the legality mask for random seats."""
        seat = self.seats[player]
        mask = action_mask(self.env.state)
        if seat.type == AGENT:
            obs = encode(self.env.state, self.env.spec)
            return agents.select_action(
                seat.variant, seat.params, obs, mask, epsilon=0.0, rng=self.rng
            )
        allowed = np.flatnonzero(mask)
        return int(allowed[self.rng.integers(allowed.size)])

    def apply_action(self, action: int) -> List[dict]:
        """Apply one known-legal action; the move itself is framed first so
        every accepted action advances the version, then one frame per
        resulting game event."""
        actor = self.env.state.current_player
        result = self.env.step(action)
        assert result.info.legal, "server applied an illegal action"
        new_frames = []
        self.push_frame({"kind": "move_applied", "player": actor, "action": action})
        new_frames.append(self.frames[-1])
        for event in result.info.events:
            self.push_frame(event.to_json())
            new_frames.append(self.frames[-1])
        if result.done and self.env.state.terminal is None:
            self.push_frame({"kind": "max_steps_reached"})
            new_frames.append(self.frames[-1])
        return new_frames

    def run_auto_turns(self) -> None:
        """Play agent/random seats until a human decision or game over."""
        while not self.env.done and not self.seat_is_human(self.env.state.current_player):
            if self.move_delay > 0:
                time.sleep(self.move_delay)
            action = self.pick_auto_action(self.env.state.current_player)
            self.apply_action(action)


class SessionStore:
    def __init__(self) -> None:
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"no session {session_id!r}")
        return session


def create_app(
    default_checkpoint: Optional[str] = None,
    default_variant: str = agents.DQN,
    static_dir: Optional[str] = None,
    move_delay: float = 0.0,
) -> FastAPI:
    app = FastAPI(title="So Long Sucker play server")
    store = SessionStore()

    def build_seat(spec: SeatSpec) -> Seat:
        if spec.type == HUMAN:
            return Seat(type=HUMAN)
        if spec.type == RANDOM_SEAT:
            return Seat(type=RANDOM_SEAT)
        variant = spec.variant or default_variant
        if variant not in agents.LEARNING_VARIANTS:
            raise HTTPException(status_code=400, detail=f"unknown variant {variant!r}")
        checkpoint = spec.checkpoint or default_checkpoint
        if checkpoint is None:
            raise HTTPException(status_code=400, detail="agent seat needs a checkpoint")
        try:
            params = nn.load_params(checkpoint)
        except (OSError, nn.CheckpointError) as exc:
            raise HTTPException(status_code=400, detail=f"bad checkpoint: {exc}")
        if params.arch != agents.architecture_for(variant):
            raise HTTPException(
                status_code=400,
                detail=f"checkpoint architecture {params.arch!r} does not match {variant!r}",
            )
        return Seat(type=AGENT, variant=variant, params=params)

    @app.post("/sessions")
    def create_session(request: CreateSessionRequest) -> dict:
        if len(request.seats) != 4:
            raise HTTPException(status_code=400, detail="exactly 4 seats required")
        seats = [build_seat(spec) for spec in request.seats]
        if not request.spectate and not any(s.type == HUMAN for s in seats):
            raise HTTPException(
                status_code=400, detail="need a human seat or spectate=true"
            )
        seed = request.seed if request.seed is not None else int(time.time_ns() % 2**31)
        env = SLSEnv(GameConfig(seed=seed), max_steps=request.max_steps)
        env.reset()
        session = Session(
            id=uuid.uuid4().hex[:12],
            env=env,
            seats=seats,
            rng=np.random.default_rng(seed),
            move_delay=request.move_delay if request.move_delay is not None else move_delay,
        )
        with session.lock:
            session.push_frame({"kind": "session_started", "seed": seed})
            session.run_auto_turns()
        store.add(session)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return store.get(session_id).snapshot()

    @app.get("/sessions/{session_id}/events")
    def get_events(session_id: str, since: int = -1) -> dict:
        session = store.get(session_id)
        frames = [f for f in session.frames if f["version"] > since]
        return {"frames": frames, "version": session.version}

    @app.post("/sessions/{session_id}/moves")
    def submit_move(session_id: str, request: MoveRequest) -> dict:
        session = store.get(session_id)
        with session.lock:
            env = session.env
            if env.done:
                raise HTTPException(status_code=409, detail="game is over")
            current = env.state.current_player
            if request.seat != current:
                raise HTTPException(status_code=409, detail="not your turn")
            if not session.seat_is_human(request.seat):
                raise HTTPException(
                    status_code=409, detail=f"seat {request.seat} is not human-controlled"
                )
            mask = action_mask(env.state)
            if not 0 <= request.action < mask.size or not mask[request.action]:
                legal = np.flatnonzero(mask).tolist()
                raise HTTPException(
                    status_code=409,
                    detail={"reason": "illegal move", "legal": legal},
                )
            session.apply_action(request.action)
            session.run_auto_turns()
            return session.snapshot()

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str, since: Optional[int] = None):
        await websocket.accept()
        try:
            session = store.get(session_id)
        except HTTPException:
            await websocket.close(code=4404)
            return
        snapshot = session.snapshot()
        await websocket.send_json({"kind": "snapshot", **snapshot})
        cursor = since if since is not None else snapshot["version"]
        try:
            while True:
                frames = session.frames
                while cursor < len(frames) - 1:
                    cursor += 1
                    await websocket.send_json({"kind": "frame", **frames[cursor]})
                if session.env.done and cursor >= len(session.frames) - 1:
                    await websocket.close()
                    return
                await asyncio.sleep(0.02)
        except WebSocketDisconnect:
            return

    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
