"""Multilayer query pipeline: rewrite, classify, route to one handler.

Each stage renders its prompt from session context and goes through the
gateway; every stage has a deterministic degrade path so a voice-first user
always hears something when the backend is down.
"""

from __future__ import annotations

import json
import logging
import re
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources

from .ad_pipeline import PersonalizedDescription
from .content_index import (
    ContentIndex,
    EmptyQueryAfterStopwordRemoval,
    description_lines,
    lexical_search,
    transcript_lines,
)
from .gateway import (
    BackendUnavailable,
    MissingFixture,
    ModelRequest,
    PromptStage,
    StructuredCallFailed,
    complete_structured,
    fixture_slug,
)
from .player import (
    Event,
    ParsedActionRequest,
    PlayerAction,
    SessionState,
    parse_settings_request,
    apply_settings_delta,
    phrase_time,
    resolve_action,
)
from .prompting import render_prompt

logger = logging.getLogger(__name__)

THINKING_THRESHOLD_S = 0.6
HISTORY_WINDOW = 8

OUTSIDE_VIDEO_PREFIXES = (
    "It looks like the video doesn't provide this information, but I found this on the web:",
    "It looks like you are asking about something that is not mentioned in the video.",
)

DEGRADED_INQUIRY_TEXT = "I can't reach my visual understanding service right now."
APOLOGY_TEXT = "Sorry, something went wrong while answering. Please try again."

build_prompt = render_prompt


class Intent(str, Enum):
    INFORMATIONAL_QUERY = "INFORMATIONAL_QUERY"
    VIDEO_PLAYER_ACTION = "VIDEO_PLAYER_ACTION"
    APP_SETTINGS = "APP_SETTINGS"
    PROTOTYPE_HELP = "PROTOTYPE_HELP"
    VIDEO_SPECS = "VIDEO_SPECS"
    REPEAT_LAST_ANSWER = "REPEAT_LAST_ANSWER"


class UnrecognizedSpecQuestion(ValueError):
    pass


class ValidationFailed(ValueError):
    """Model answer failed post-parse checks (tier limits, template prefixes)."""


@dataclass(frozen=True)
class RewriteResult:
    rephrased: str
    edited: str
    reasonForTimestamp: str | None = None
    relevantTimestamps: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class AnswerTiers:
    answer: str
    minimalAnswer: str
    balancedAnswer: str
    expansiveAnswer: str
    outside_video: bool = False

    def tier(self, level: str) -> str:
        return {
            "Minimal": self.minimalAnswer,
            "Balanced": self.balancedAnswer,
            "Expansive": self.expansiveAnswer,
        }[level]


@dataclass
class ConversationTurn:
    raw_query: str
    rewrite: RewriteResult
    intent: Intent
    response_text: str
    spoken_tier: str
    wall_time: float


@dataclass
class AgentResponse:
    speak: str
    caption: str
    events: list[Event]
    intent: Intent
    rewrite: RewriteResult
    action: PlayerAction | None = None


@dataclass
class AgentSession:
    index: ContentIndex
    personalized: list[PersonalizedDescription]
    state: SessionState
    backend: object | None = None
    frame_source: object | None = None
    history: list[ConversationTurn] = field(default_factory=list)
    clock: object = time.monotonic
    cancel_requested: bool = False
    available_voices: tuple[str, ...] = ("Google default UK female", "Google default UK male")

    def request_cancel(self) -> None:
        self.cancel_requested = True


def _render_history(history: list[ConversationTurn]) -> str:
    recent = history[-HISTORY_WINDOW:]
    if not recent:
        return "(no prior turns)"
    lines = []
    for turn in recent:
        lines.append(f"User: {turn.raw_query}")
        lines.append(f"Blue: {turn.response_text}")
    return "\n".join(lines)


def _speak_events(state: SessionState, text: str) -> list[Event]:
    """Wrap spoken text in pause/resume when the video is playing."""
    settings = state.settings
    speak = Event("speak", {
        "text": text,
        "rate": settings.audioDescriptionSpeechRate,
        "pitch": settings.audioDescriptionPitch,
        "volume": settings.audioDescriptionVolume,
        "voice": settings.audioDescriptionVoiceSelection,
    })
    if state.playing:
        return [
            Event("pause", {"position_s": state.position_s}),
            speak,
            Event("resume", {"position_s": state.position_s}),
        ]
    return [speak]


def rewrite_query(raw: str, session: AgentSession) -> RewriteResult:
    """Model-backed query rewrite; degrades to the raw query plus lexical search."""
    raw = raw.strip()
    if not raw:
        raise ValueError("query is empty")
    index = session.index
    context = render_prompt(PromptStage.REWRITE, {
        "VIDEO_TITLE": index.title,
        "DURATION_S": str(index.duration_s),
        "CURRENT_TIMESTAMP_S": str(session.state.position_s),
        "TRANSCRIPT": transcript_lines(index.transcript) or "(no dialog)",
        "DESCRIPTIONS": description_lines(index.dense) or "(none)",
        "HISTORY": _render_history(session.history),
        "USER_QUERY": raw,
    })
    request = ModelRequest(
        stage=PromptStage.REWRITE,
        system_text=context,
        context_text="",
        fixture_key=fixture_slug(raw),
    )
    try:
        parsed = complete_structured(request, session.backend).parsed
    except BackendUnavailable:
        logger.warning("rewrite degraded: backend unavailable")
        try:
            stamps = lexical_search(raw, index, 5)
        except (EmptyQueryAfterStopwordRemoval, ValueError):
            stamps = []
        return RewriteResult(rephrased=raw, edited=raw, relevantTimestamps=stamps)

    stamps = []
    for t in parsed.get("relevantTimestamps", []):
        if 0 <= int(t) <= index.duration_s:
            stamps.append(int(t))
        else:
            logger.warning("dropping out-of-range relevant timestamp %s", t)
    return RewriteResult(
        rephrased=str(parsed["rephrased"]),
        edited=str(parsed["edited"]),
        reasonForTimestamp=parsed.get("reasonForTimestamp") or None,
        relevantTimestamps=stamps,
    )


_REPEAT_MARKERS = ("repeat", "say that again", "say it again")
_REPEAT_VETO = ("video", "did he", "did she", "did they", "was said", "they said")

_HELP_EXACT = (
    "what is the voice pitch",
    "what is learning mode",
    "what are audio descriptions",
    "what is the difference between dark mode and light mode",
)
_HELP_MARKERS = (
    "what can i ask", "what can i say", "what can you do", "what can i do with",
    "how can you help", "what kind of questions", "which settings", "how do i change",
    "shortcuts", "keyboard", "your name", "what are you", "who are you",
    "your purpose", "prototype", "how can i", "how to enable", "how do i",
)

_SPECS_MARKERS = ("how long is the video", "duration", "current timestamp",
                  "current time", "the title")

_SETTINGS_MARKERS = (
    "font", "volume", "louder", "quieter", "playback speed", "faster", "slower",
    "too slow", "too fast", "pitch", "dark mode", "light mode", "too bright",
    "robotic", "alien", "upbeat", "pirate", "sound different", "sound lighter",
    "speech rate", "female voice", "male voice", "different voice",
    "too small", "can't read", "i prefer", "remember that", "take note",
    "my name is", "refer to me as", "difficulty hearing",
    "enable audio description", "disable audio description",
    "detailed audio description", "descriptive audio description",
)
_SETTINGS_RE = r"\bspeak\b"

_ACTION_RE = (
    r"\brewind\b|\bfast forward\b|\bskip to\b|\bskip ahead\b|\bgo to\b|\bgo back\b|"
    r"\bgo forward\b|\bnavigate\b|\bplay\b|\bpause\b|\bresume\b|\bstop\b|\brestart\b|"
    r"\bstart over\b|\bcontinue\b|\bnext scene\b"
)


def fallback_classify(text: str) -> Intent:
    """Keyword classifier used when no model backend is reachable."""
    lowered = text.lower().strip()
    lowered = re.sub(r"^(hey\s+)?blue[,!\s]+", "", lowered)
    lowered = lowered.rstrip("?.! ")

    if any(m in lowered for m in _REPEAT_MARKERS) and not any(v in lowered for v in _REPEAT_VETO):
        return Intent.REPEAT_LAST_ANSWER
    if any(lowered == m for m in _HELP_EXACT) or any(m in lowered for m in _HELP_MARKERS):
        return Intent.PROTOTYPE_HELP
    if any(m in lowered for m in _SPECS_MARKERS) and not re.search(r"\b(at|in)\s+(timestamp|second)", lowered):
        return Intent.VIDEO_SPECS
    if any(m in lowered for m in _SETTINGS_MARKERS) or re.search(_SETTINGS_RE, lowered):
        return Intent.APP_SETTINGS
    if re.search(_ACTION_RE, lowered):
        return Intent.VIDEO_PLAYER_ACTION
    return Intent.INFORMATIONAL_QUERY


def _last_answer(history: list[ConversationTurn]) -> str | None:
    for turn in reversed(history):
        if turn.intent is not Intent.REPEAT_LAST_ANSWER:
            return turn.response_text
    return None


def classify_intent(rewrite: RewriteResult, session: AgentSession) -> tuple[Intent, str | None]:
    """Classify the query; for REPEAT_LAST_ANSWER also return the replay text.

    The replay text always comes from our own history, never from the model,
    so repeats are verbatim.
    """
    context = render_prompt(PromptStage.CLASSIFY, {
        "HISTORY": _render_history(session.history),
        "USER_QUERY": rewrite.edited,
    })
    request = ModelRequest(
        stage=PromptStage.CLASSIFY,
        system_text=context,
        context_text="",
        fixture_key=fixture_slug(rewrite.edited),
    )
    try:
        parsed = complete_structured(request, session.backend).parsed
        intent = Intent(parsed["responseType"])
    except BackendUnavailable:
        logger.warning("classification degraded: keyword fallback")
        intent = fallback_classify(rewrite.edited)

    replay = _last_answer(session.history) if intent is Intent.REPEAT_LAST_ANSWER else None
    return intent, replay


def _needs_storyboard(rewrite: RewriteResult, state: SessionState) -> bool:
    stamps = rewrite.relevantTimestamps
    if len(stamps) >= 2:
        return True
    if len(stamps) == 1:
        return abs(stamps[0] - state.position_s) >= 5
    return False


def answer_inquiry(rewrite: RewriteResult, storyboard_png: bytes | None,
                   session: AgentSession) -> AnswerTiers:
    """Answer an informational query with tiered responses."""
    index = session.index
    context = render_prompt(PromptStage.INQUIRY, {
        "VIDEO_TITLE": index.title,
        "DURATION_S": str(index.duration_s),
        "CURRENT_TIMESTAMP_S": str(session.state.position_s),
        "TRANSCRIPT": transcript_lines(index.transcript) or "(no dialog)",
        "DESCRIPTIONS": description_lines(index.dense) or "(none)",
        "USER_PREFERENCES": session.state.settings.userDescription or "(none)",
        "HISTORY": _render_history(session.history),
        "USER_QUERY": rewrite.rephrased,
    })
    request = ModelRequest(
        stage=PromptStage.INQUIRY,
        system_text=context,
        context_text="",
        fixture_key=fixture_slug(rewrite.rephrased),
        images=[storyboard_png] if storyboard_png else [],
    )
    try:
        parsed = complete_structured(request, session.backend).parsed
    except BackendUnavailable:
        logger.warning("inquiry degraded: backend unavailable")
        return AnswerTiers(
            answer=DEGRADED_INQUIRY_TEXT,
            minimalAnswer=DEGRADED_INQUIRY_TEXT,
            balancedAnswer=DEGRADED_INQUIRY_TEXT,
            expansiveAnswer=DEGRADED_INQUIRY_TEXT,
        )
    except StructuredCallFailed as exc:
        raise ValidationFailed(str(exc)) from exc

    outside = bool(parsed.get("outsideVideo", False))
    if outside and not any(str(parsed["answer"]).startswith(p) for p in OUTSIDE_VIDEO_PREFIXES):
        raise ValidationFailed(
            "answer: outside-video answers must start with the web-information template"
        )
    return AnswerTiers(
        answer=str(parsed["answer"]),
        minimalAnswer=str(parsed["minimalAnswer"]),
        balancedAnswer=str(parsed["balancedAnswer"]),
        expansiveAnswer=str(parsed["expansiveAnswer"]),
        outside_video=outside,
    )


def answer_video_specs(rewrite: RewriteResult, index: ContentIndex,
                       state: SessionState) -> str:
    """Deterministic answers about duration, title, and current position."""
    text = rewrite.edited.lower()
    if "title" in text:
        return f'The title of this video is "{index.title}".'
    if "current" in text or "where are we" in text or "timestamp" in text:
        return f"The video is at {phrase_time(state.position_s)}."
    if "how long" in text or "duration" in text or "length" in text:
        return f"This video is {phrase_time(index.duration_s)} long."
    raise UnrecognizedSpecQuestion(rewrite.edited)


@lru_cache(maxsize=1)
def _capability_catalog() -> dict:
    raw = resources.files("vidagent.assets").joinpath("capabilities.json").read_text(encoding="utf-8")
    return json.loads(raw)


def answer_prototype_help(rewrite: RewriteResult) -> str:
    """Deterministic help text assembled from the capability catalog."""
    catalog = _capability_catalog()
    text = rewrite.edited.lower()
    for topic in catalog["topics"].values():
        if any(keyword in text for keyword in topic["keywords"]):
            return topic["answer"]
    if text.startswith(("what is", "what are", "what's")):
        return f"That isn't available in this prototype. {catalog['summary']}"
    return catalog["summary"]


_POLITE_CLOSERS = ("thank you", "thanks", "nothing else", "no thanks",
                   "that's all", "that is all")
POLITE_REPLY = "You're welcome. Is there anything else I can help you with?"


def _is_politeness(raw: str) -> bool:
    lowered = raw.lower().strip().rstrip("?.! ")
    lowered = re.sub(r"^(hey\s+)?blue[,!\s]+", "", lowered)
    lowered = re.sub(r"[,!\s]+blue$", "", lowered)
    return lowered in _POLITE_CLOSERS


def parse_action_utterance(text: str, state: SessionState, duration_s: int) -> ParsedActionRequest:
    """Deterministic action parse for the no-model degrade path."""
    lowered = text.lower()
    seconds = None
    match = re.search(r"(\d+)(?:\s*-?\s*second)?", lowered)
    if match:
        seconds = int(match.group(1))
        if re.search(rf"{match.group(1)}\s*minute", lowered):
            seconds *= 60

    if "last minute" in lowered:
        return ParsedActionRequest("GO_TO_TIMESTAMP", target_s=max(0, duration_s - 60))
    if any(m in lowered for m in ("restart", "start over", "from the beginning", "to the beginning")):
        return ParsedActionRequest("RESTART", target_s=0)
    if any(m in lowered for m in ("rewind", "go back", "back up")):
        return ParsedActionRequest("REWIND", offset_s=seconds)
    if any(m in lowered for m in ("fast forward", "go forward", "skip ahead", "ahead")):
        return ParsedActionRequest("FAST_FORWARD", offset_s=seconds)
    if any(m in lowered for m in ("go to", "skip to", "navigate", "play at", "jump to")):
        return ParsedActionRequest("GO_TO_TIMESTAMP", target_s=seconds if seconds is not None else state.position_s)
    if any(m in lowered for m in ("pause", "stop", "hold")):
        return ParsedActionRequest("PAUSE")
    return ParsedActionRequest("PLAY")


def _handle_action(rewrite: RewriteResult, session: AgentSession) -> tuple[PlayerAction, list[Event]]:
    context = render_prompt(PromptStage.PLAYER_ACTION, {
        "VIDEO_TITLE": session.index.title,
        "DURATION_S": str(session.index.duration_s),
        "CURRENT_TIMESTAMP_S": str(session.state.position_s),
        "USER_QUERY": rewrite.edited,
    })
    request = ModelRequest(
        stage=PromptStage.PLAYER_ACTION,
        system_text=context,
        context_text="",
        fixture_key=fixture_slug(rewrite.edited),
    )
    try:
        parsed_json = complete_structured(request, session.backend).parsed
        parsed = ParsedActionRequest.from_model_json(parsed_json)
    except BackendUnavailable:
        logger.warning("player action degraded: local parse")
        parsed = parse_action_utterance(rewrite.edited, session.state, session.index.duration_s)

    action, next_state = resolve_action(parsed, session.state, session.index.duration_s)
    session.state = next_state
    events = [Event("action_resolution", action.to_dict())]
    events.extend(_speak_events(session.state, action.resolution))
    return action, events


def _handle_settings(rewrite: RewriteResult, session: AgentSession) -> tuple[str, list[Event]]:
    settings = session.state.settings
    context = render_prompt(PromptStage.SETTINGS, {
        "CURRENT_SETTINGS": json.dumps(settings.to_dict(), indent=2),
        "AVAILABLE_VOICES": "\n".join(session.available_voices),
        "HISTORY": _render_history(session.history),
        "USER_QUERY": rewrite.edited,
    })
    request = ModelRequest(
        stage=PromptStage.SETTINGS,
        system_text=context,
        context_text="",
        fixture_key=fixture_slug(rewrite.edited),
    )
    try:
        parsed = complete_structured(request, session.backend).parsed
        updated = settings.merged(parsed)
        reason = str(parsed["updateReason"])
    except BackendUnavailable:
        logger.warning("settings degraded: keyword parse")
        delta, hints = parse_settings_request(rewrite.edited)
        updated, reason = apply_settings_delta(settings, delta, hints)

    session.state.settings = updated
    events = [Event("settings_changed", {"settings": updated.to_dict(), "updateReason": reason})]
    events.extend(_speak_events(session.state, reason))
    return reason, events


def handle_query(session: AgentSession, raw_query: str) -> AgentResponse:
    """Full pipeline for one utterance; appends exactly one history turn."""
    raw_query = raw_query.strip()
    if not raw_query:
        raise ValueError("query is empty")
    started = session.clock()
    session.cancel_requested = False
    events: list[Event] = []
    spoken_tier = session.state.settings.userInquiryDetails
    action: PlayerAction | None = None

    if _is_politeness(raw_query):
        rewrite = RewriteResult(rephrased=raw_query, edited=raw_query)
        intent = Intent.INFORMATIONAL_QUERY
        speak = POLITE_REPLY
        events.extend(_speak_events(session.state, speak))
        session.history.append(ConversationTurn(
            raw_query, rewrite, intent, speak, spoken_tier, session.clock()))
        return AgentResponse(speak, speak, events, intent, rewrite)

    rewrite = RewriteResult(rephrased=raw_query, edited=raw_query)
    intent = Intent.INFORMATIONAL_QUERY
    try:
        rewrite = rewrite_query(raw_query, session)
        if session.cancel_requested:
            return _cancelled(session, raw_query, rewrite, started)
        intent, replay = classify_intent(rewrite, session)
        if session.cancel_requested:
            return _cancelled(session, raw_query, rewrite, started)

        if intent is Intent.REPEAT_LAST_ANSWER:
            speak = replay if replay is not None else "I haven't answered anything yet."
        elif intent is Intent.VIDEO_PLAYER_ACTION:
            action, action_events = _handle_action(rewrite, session)
            events.extend(action_events)
            speak = action.resolution
        elif intent is Intent.APP_SETTINGS:
            speak, settings_events = _handle_settings(rewrite, session)
            events.extend(settings_events)
        elif intent is Intent.PROTOTYPE_HELP:
            speak = answer_prototype_help(rewrite)
        elif intent is Intent.VIDEO_SPECS:
            try:
                speak = answer_video_specs(rewrite, session.index, session.state)
            except UnrecognizedSpecQuestion:
                intent = Intent.INFORMATIONAL_QUERY
                speak = _run_inquiry(rewrite, session)
                spoken_tier = session.state.settings.userInquiryDetails
        else:
            speak = _run_inquiry(rewrite, session)

        if intent not in (Intent.VIDEO_PLAYER_ACTION, Intent.APP_SETTINGS):
            events.extend(_speak_events(session.state, speak))
    except MissingFixture:
        raise  # scripted-backend configuration error, not a runtime failure
    except Exception as exc:  # noqa: BLE001 — spoken apology instead of silence
        logger.exception("query handling failed")
        speak = APOLOGY_TEXT
        events = [Event("error", {"message": str(exc)})]
        events.extend(_speak_events(session.state, speak))

    elapsed = session.clock() - started
    if elapsed > THINKING_THRESHOLD_S:
        events.insert(0, Event("earcon", {"name": "thinking"}))

    session.history.append(ConversationTurn(
        raw_query, rewrite, intent, speak, spoken_tier, session.clock()))
    return AgentResponse(speak, speak, events, intent, rewrite, action)


def _run_inquiry(rewrite: RewriteResult, session: AgentSession) -> str:
    storyboard_png = None
    if session.frame_source is not None and _needs_storyboard(rewrite, session.state):
        from .storyboard import FrameUnavailable, build_storyboard

        try:
            board = build_storyboard(rewrite.relevantTimestamps, session.frame_source)
            if board is not None:
                storyboard_png = board.png_bytes()
        except FrameUnavailable as exc:
            logger.warning("storyboard skipped: %s", exc)
    tiers = answer_inquiry(rewrite, storyboard_png, session)
    return tiers.tier(session.state.settings.userInquiryDetails)


def _cancelled(session: AgentSession, raw_query: str, rewrite: RewriteResult,
               started: float) -> AgentResponse:
    logger.info("query cancelled: %r", raw_query)
    events = [Event("earcon", {"name": "cancelled"})]
    return AgentResponse("", "", events, Intent.INFORMATIONAL_QUERY, rewrite)
