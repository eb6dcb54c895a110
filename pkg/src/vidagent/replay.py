"""Deterministic session replay from a scripted set of utterances.

A script drives the same engine objects the service uses, with a step-index
clock instead of wall time, so two runs of one script produce byte-identical
transcripts.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .ad_pipeline import PersonalizedDescription
from .content_index import ContentIndex
from .orchestrator import AgentSession, handle_query
from .player import Profile, SessionState, profile_defaults, schedule_descriptions

logger = logging.getLogger(__name__)


class AssertionFailed(AssertionError):
    def __init__(self, step_index: int, message: str):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


@dataclass(frozen=True)
class ScriptStep:
    at_s: int
    utterance: str
    expected_intent: str | None = None
    expected_speak_contains: str | None = None


@dataclass
class SessionScript:
    video_id: str
    profile: str = "Sighted"
    steps: list[ScriptStep] = field(default_factory=list)

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SessionScript":
        steps = []
        for raw in obj.get("steps", []):
            expected = raw.get("expected", {})
            steps.append(ScriptStep(
                at_s=int(raw["at_s"]),
                utterance=str(raw["utterance"]),
                expected_intent=expected.get("intent"),
                expected_speak_contains=expected.get("speak_contains"),
            ))
        for prev, cur in zip(steps, steps[1:]):
            if cur.at_s < prev.at_s:
                raise ValueError("script steps must be ordered by at_s")
        return cls(video_id=str(obj["video_id"]), profile=obj.get("profile", "Sighted"), steps=steps)

    @classmethod
    def load(cls, path: str | Path) -> "SessionScript":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


class _StepClock:
    """Deterministic clock: advances a fixed amount per call."""

    def __init__(self, tick_s: float = 0.001):
        self.now = 0.0
        self.tick_s = tick_s

    def __call__(self) -> float:
        self.now += self.tick_s
        return self.now


def replay_session(script: SessionScript, index: ContentIndex,
                   personalized: list[PersonalizedDescription], backend,
                   frame_source=None) -> str:
    """Run a script and return its transcript; raises AssertionFailed on mismatch."""
    profile = Profile(script.profile)
    settings, _ = profile_defaults(profile)
    session = AgentSession(
        index=index,
        personalized=personalized,
        state=SessionState(settings=settings, profile=profile),
        backend=backend,
        frame_source=frame_source,
        clock=_StepClock(),
    )

    lines: list[str] = [f"# video={script.video_id} profile={script.profile}"]
    for i, step in enumerate(script.steps):
        for event in schedule_descriptions(session.state, personalized, step.at_s):
            lines.append(f"[{step.at_s:>5}s] {event.kind}: {json.dumps(event.payload, sort_keys=True)}")
        response = handle_query(session, step.utterance)
        lines.append(f"[{step.at_s:>5}s] user: {step.utterance}")
        lines.append(f"[{step.at_s:>5}s] intent: {response.intent.value}")
        for event in response.events:
            lines.append(f"[{step.at_s:>5}s] {event.kind}: {json.dumps(event.payload, sort_keys=True)}")

        if step.expected_intent and response.intent.value != step.expected_intent:
            raise AssertionFailed(i, f"expected intent {step.expected_intent}, got {response.intent.value}")
        if step.expected_speak_contains and step.expected_speak_contains not in response.speak:
            raise AssertionFailed(
                i, f"expected speak to contain {step.expected_speak_contains!r}, got {response.speak!r}")
    return "\n".join(lines) + "\n"
