"""HTTP/WebSocket service exposing the engine to the companion UI.

Session lifecycle and queries are request/response; engine events stream
over one WebSocket per session, in order, never interleaved across
sessions.
"""

from __future__ import annotations

import asyncio
import json
import logging
import uuid
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from pydantic import BaseModel

from . import ad_pipeline
from .content_index import ContentIndex, load_index
from .orchestrator import AgentSession, handle_query
from .player import Event, Profile, SessionState, profile_defaults, schedule_descriptions
from .storyboard import DirectoryFrameSource

logger = logging.getLogger(__name__)

TIER_PARAM_TO_FIELD = {
    "minimal": "minimalDescription",
    "balanced": "balancedDescription",
    "expansive": "expansiveDescription",
}


def welcome_text() -> str:
    return resources.files("vidagent.assets").joinpath("welcome.txt").read_text(encoding="utf-8").strip()


class CreateSessionBody(BaseModel):
    video_id: str
    profile: str = "Sighted"


class QueryBody(BaseModel):
    utterance: str
    position_s: int = 0


@dataclass
class ManagedSession:
    session_id: str
    video_id: str
    agent: AgentSession
    queue: asyncio.Queue = field(default_factory=asyncio.Queue)
    lock: asyncio.Lock = field(default_factory=asyncio.Lock)

    def push(self, event: Event) -> None:
        self.queue.put_nowait(event.to_dict())


class VideoStore:
    """Loads index and personalized sidecar files from one directory."""

    def __init__(self, index_dir: str | Path, frames_dir: str | Path | None = None):
        self.index_dir = Path(index_dir)
        self.frames_dir = Path(frames_dir) if frames_dir else None

    def index_path(self, video_id: str) -> Path:
        return self.index_dir / f"{video_id}.index.json"

    def sidecar_path(self, video_id: str) -> Path:
        return self.index_dir / f"{video_id}.described.json"

    def load(self, video_id: str) -> tuple[ContentIndex, list]:
        path = self.index_path(video_id)
        if not path.is_file():
            raise FileNotFoundError(f"no index for video {video_id!r}")
        index = load_index(path)
        sidecar = self.sidecar_path(video_id)
        personalized = ad_pipeline.read_sidecar(sidecar) if sidecar.is_file() else []
        return index, personalized

    def frame_source(self, video_id: str) -> DirectoryFrameSource | None:
        if self.frames_dir is None:
            return None
        return DirectoryFrameSource(self.frames_dir, video_id)


def create_app(store: VideoStore, backend=None) -> FastAPI:
    app = FastAPI(title="vidagent")
    sessions: dict[str, ManagedSession] = {}
    app.state.sessions = sessions

    def get_session(session_id: str) -> ManagedSession:
        managed = sessions.get(session_id)
        if managed is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return managed

    @app.post("/sessions")
    async def create_session(body: CreateSessionBody):
        try:
            profile = Profile(body.profile)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown profile {body.profile!r}")
        try:
            index, personalized = store.load(body.video_id)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

        settings, _ = profile_defaults(profile)
        state = SessionState(settings=settings, profile=profile)
        agent = AgentSession(
            index=index,
            personalized=personalized,
            state=state,
            backend=backend,
            frame_source=store.frame_source(body.video_id),
        )
        managed = ManagedSession(session_id=uuid.uuid4().hex, video_id=body.video_id, agent=agent)
        sessions[managed.session_id] = managed
        managed.push(Event("speak", {
            "text": welcome_text(),
            "rate": settings.audioDescriptionSpeechRate,
            "pitch": settings.audioDescriptionPitch,
            "volume": settings.audioDescriptionVolume,
            "voice": settings.audioDescriptionVoiceSelection,
        }))
        logger.info("session %s created for video %s", managed.session_id, body.video_id)
        return {"session_id": managed.session_id}

    @app.post("/sessions/{session_id}/query")
    async def query(session_id: str, body: QueryBody):
        managed = get_session(session_id)
        if not body.utterance.strip():
            raise HTTPException(status_code=422, detail="utterance is empty")
        async with managed.lock:
            agent = managed.agent
            tick_events = schedule_descriptions(agent.state, agent.personalized, body.position_s)
            response = await asyncio.to_thread(handle_query, agent, body.utterance)
            for event in [*tick_events, *response.events]:
                managed.push(event)
            return {
                "speak": response.speak,
                "caption": response.caption,
                "intent": response.intent.value,
                "rewrite": {
                    "rephrased": response.rewrite.rephrased,
                    "edited": response.rewrite.edited,
                    "relevantTimestamps": response.rewrite.relevantTimestamps,
                },
                "action": response.action.to_dict() if response.action else None,
                "events": [e.to_dict() for e in [*tick_events, *response.events]],
                "state": {
                    "position_s": agent.state.position_s,
                    "playing": agent.state.playing,
                },
            }

    @app.patch("/sessions/{session_id}/settings")
    async def patch_settings(session_id: str, body: dict):
        managed = get_session(session_id)
        async with managed.lock:
            settings = managed.agent.state.settings.merged(body)
            managed.agent.state.settings = settings
            event = Event("settings_changed", {"settings": settings.to_dict(),
                                               "updateReason": "Settings updated."})
            managed.push(event)
            return settings.to_dict()

    @app.get("/sessions/{session_id}/settings")
    async def get_settings(session_id: str):
        return get_session(session_id).agent.state.settings.to_dict()

    @app.get("/videos/{video_id}/descriptions")
    async def descriptions(video_id: str, tier: str = "balanced"):
        field_name = TIER_PARAM_TO_FIELD.get(tier)
        if field_name is None:
            raise HTTPException(status_code=422, detail=f"unknown tier {tier!r}")
        sidecar = store.sidecar_path(video_id)
        if not sidecar.is_file():
            raise HTTPException(status_code=404, detail=f"no descriptions for video {video_id!r}")
        entries = ad_pipeline.read_sidecar(sidecar)
        return [
            {"timestamp": entry.timestamp_s, "text": getattr(entry, field_name)}
            for entry in entries
        ]

    @app.websocket("/sessions/{session_id}/events")
    async def events(websocket: WebSocket, session_id: str):
        managed = sessions.get(session_id)
        if managed is None:
            await websocket.close(code=4404)
            return
        await websocket.accept()
        try:
            while True:
                event = await managed.queue.get()
                await websocket.send_text(json.dumps(event))
        except WebSocketDisconnect:
            pass

    return app
