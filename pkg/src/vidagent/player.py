"""Per-session playback state: actions, settings, and AD scheduling.

Field names mirror the settings wire contract so the settings JSON, the
model schema, and this module never need a translation table.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from enum import Enum

logger = logging.getLogger(__name__)

DEFAULT_VOICE = "Google default UK female"
DEFAULT_OFFSET_S = 5
DEFAULT_STEP = 0.1

DETAIL_LEVELS = ("Minimal", "Balanced", "Expansive")

# field -> (low, high) for every numeric setting
SETTINGS_RANGES = {
    "audioDescriptionVolume": (0.0, 1.0),
    "audioDescriptionSpeechRate": (0.5, 2.0),
    "audioDescriptionPitch": (0.5, 2.0),
    "playbackRate": (0.5, 2.0),
    "videoPlayerVolume": (0.0, 1.0),
    "fontMagnification": (0.5, 2.0),
}

UI_FIELD_NAMES = {
    "audioDescriptionEnabled": "Audio descriptions",
    "audioDescriptionPlacement": "Audio description placement",
    "audioDescriptionVolume": "Audio description volume",
    "audioDescriptionVoiceSelection": "Audio description voice name",
    "audioDescriptionSpeechRate": "Audio description voice speech rate",
    "audioDescriptionPitch": "Audio description voice pitch",
    "audioDescriptionDetails": "Audio description details",
    "playbackRate": "Video playback speed",
    "videoPlayerVolume": "Video volume",
    "fontMagnification": "Font size",
    "darkMode": "Dark mode",
    "userInquiryDetails": "Answer details",
    "userDescription": "Your profile",
}


class Profile(str, Enum):
    BLIND = "Blind"
    LOW_VISION = "LowVision"
    SIGHTED = "Sighted"


PROFILE_DESCRIPTIONS = {
    Profile.SIGHTED: (
        "I am an adult with no health problems or disabilities. When getting a "
        "response to my question, I would like to get a balanced answer. I like to "
        "listen to audio descriptions at 1.1x speed that offer a balanced amount of "
        "details. Use the default Female UK voice when answering my questions."
    ),
    Profile.LOW_VISION: (
        "I am an adult with low vision. I can read text but I prefer something that "
        "has a larger text size by the default. I prefer audio descriptions that are "
        "detailed and are at a regular speed that I can understand. When answering my "
        "questions, I would like to get a detailed answer that is not too long (but "
        "also not too short). Use the default Female UK voice when answering my "
        "questions."
    ),
    Profile.BLIND: (
        "I am a blind person, I prefer audio descriptions that are detailed and are "
        "at a regular speed that I can understand. I prefer very detailed audio "
        "descriptions and detailed answers to my questions. Use the default Female UK "
        "voice when answering my questions."
    ),
}


@dataclass
class PlayerSettings:
    audioDescriptionEnabled: bool = True
    audioDescriptionPlacement: str = "before"
    audioDescriptionVolume: float = 0.8
    audioDescriptionVoiceSelection: str = DEFAULT_VOICE
    audioDescriptionSpeechRate: float = 1.0
    audioDescriptionPitch: float = 1.0
    audioDescriptionDetails: str = "Balanced"
    playbackRate: float = 1.0
    videoPlayerVolume: float = 0.8
    fontMagnification: float = 1.0
    darkMode: bool = False
    userInquiryDetails: str = "Minimal"
    userDescription: str = ""

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in UI_FIELD_NAMES}

    @classmethod
    def from_dict(cls, obj: dict) -> "PlayerSettings":
        known = {k: v for k, v in obj.items() if k in UI_FIELD_NAMES}
        settings = cls(**known)
        settings.clamp()
        return settings

    def merged(self, obj: dict) -> "PlayerSettings":
        """New settings with fields from obj applied over the current values."""
        updated = replace(self, **{k: v for k, v in obj.items() if k in UI_FIELD_NAMES})
        updated.clamp()
        return updated

    def clamp(self) -> None:
        for name, (lo, hi) in SETTINGS_RANGES.items():
            value = float(getattr(self, name))
            setattr(self, name, min(hi, max(lo, value)))
        if self.audioDescriptionDetails not in DETAIL_LEVELS:
            self.audioDescriptionDetails = "Balanced"
        if self.userInquiryDetails not in DETAIL_LEVELS:
            self.userInquiryDetails = "Minimal"
        self.audioDescriptionPlacement = "before"


def profile_defaults(profile: Profile) -> tuple[PlayerSettings, str]:
    """Session-start settings and the profile paragraph for a vision profile."""
    description = PROFILE_DESCRIPTIONS[profile]
    settings = PlayerSettings(userDescription=description)
    if profile is Profile.SIGHTED:
        settings.audioDescriptionSpeechRate = 1.1
        settings.audioDescriptionDetails = "Balanced"
        settings.userInquiryDetails = "Balanced"
    elif profile is Profile.LOW_VISION:
        settings.fontMagnification = 1.5
        settings.audioDescriptionDetails = "Expansive"
        settings.userInquiryDetails = "Balanced"
    else:
        settings.audioDescriptionDetails = "Expansive"
        settings.userInquiryDetails = "Expansive"
    return settings, description


@dataclass(frozen=True)
class Event:
    kind: str  # pause | resume | speak | earcon | settings_changed | action_resolution
    payload: dict

    def to_dict(self) -> dict:
        return {"kind": self.kind, "payload": self.payload}


@dataclass(frozen=True)
class PlayerAction:
    type: str
    newTimestamp: int
    resolution: str

    def to_dict(self) -> dict:
        return {"type": self.type, "newTimestamp": self.newTimestamp, "resolution": self.resolution}


@dataclass(frozen=True)
class ParsedActionRequest:
    """An action request before clamping: a type plus optional target/offset."""
    type: str
    target_s: int | None = None
    offset_s: int | None = None
    resolution: str | None = None

    @classmethod
    def from_model_json(cls, obj: dict) -> "ParsedActionRequest":
        return cls(
            type=str(obj["type"]),
            target_s=int(obj["newTimestamp"]) if obj.get("newTimestamp") is not None else None,
            resolution=str(obj["resolution"]) if obj.get("resolution") else None,
        )


@dataclass
class SessionState:
    position_s: int = 0
    playing: bool = False
    settings: PlayerSettings = field(default_factory=PlayerSettings)
    spoken_ad_timestamps: set[int] = field(default_factory=set)
    pending_resume: bool = False
    profile: Profile = Profile.SIGHTED
    # Last playhead second already checked for AD crossings; -1 so an AD at 0 fires.
    ad_cursor: int = -1
    # Serious content keeps action resolutions neutral; otherwise playful round-robin.
    serious_content: bool = False
    resolution_counter: int = 0


def phrase_time(seconds: int) -> str:
    """Speech-friendly duration, minutes first, zero seconds omitted."""
    seconds = max(0, int(seconds))
    if seconds < 60:
        return f"{seconds} second" + ("" if seconds == 1 else "s")
    minutes, rest = divmod(seconds, 60)
    phrase = f"{minutes} minute" + ("" if minutes == 1 else "s")
    if rest:
        phrase += f" {rest} second" + ("" if rest == 1 else "s")
    return phrase


_NEUTRAL_TEMPLATES = {
    "PLAY": ["Playing."],
    "PAUSE": ["Pausing."],
    "RESTART": ["Playing from the beginning."],
    "REWIND": ["Going back {delta}."],
    "FAST_FORWARD": ["Skipping ahead {delta}."],
    "GO_TO_TIMESTAMP": ["Moving to the {target} mark."],
}

_PLAYFUL_TEMPLATES = {
    "PLAY": ["Rolling!", "And we're off!"],
    "PAUSE": ["Freeze frame!", "Taking a breather."],
    "RESTART": ["Back to the very beginning!", "Starting over from the top!"],
    "REWIND": ["Going back in time {delta}!", "Rewinding {delta}!"],
    "FAST_FORWARD": ["Zooming {delta} ahead!", "Fast forwarding {delta}!"],
    "GO_TO_TIMESTAMP": ["Jumping to the {target} mark!", "Landing at the {target} mark!"],
}


def _render_resolution(state: SessionState, action_type: str, delta_s: int, target_s: int) -> str:
    table = _NEUTRAL_TEMPLATES if state.serious_content else _PLAYFUL_TEMPLATES
    options = table[action_type]
    template = options[state.resolution_counter % len(options)]
    state.resolution_counter += 1
    return template.format(delta=phrase_time(delta_s), target=phrase_time(target_s))


def resolve_action(request: ParsedActionRequest, state: SessionState,
                   duration_s: int) -> tuple[PlayerAction, SessionState]:
    """Turn a parsed action request into a clamped action and the next state.

    Pure given (request, state, duration); the input state is not mutated.
    """
    state = replace(
        state,
        spoken_ad_timestamps=set(state.spoken_ad_timestamps),
        settings=replace(state.settings),
    )
    current = state.position_s
    action_type = request.type
    offset = request.offset_s if request.offset_s is not None else DEFAULT_OFFSET_S

    if action_type == "PLAY":
        target = current
    elif action_type == "PAUSE":
        target = current
    elif action_type == "RESTART":
        target = 0
    elif action_type == "REWIND":
        target = request.target_s if request.target_s is not None else current - offset
    elif action_type == "FAST_FORWARD":
        target = request.target_s if request.target_s is not None else current + offset
    else:  # GO_TO_TIMESTAMP
        target = request.target_s if request.target_s is not None else current

    if target > duration_s:
        action = PlayerAction("PAUSE", current, f"The video is only {phrase_time(duration_s)} long.")
        state.playing = False
        return action, state

    if target < 0:
        action = PlayerAction("RESTART", 0, "Playing from the beginning.")
        state.position_s = 0
        state.playing = True
        state.spoken_ad_timestamps.clear()
        state.ad_cursor = -1
        return action, state

    resolution = request.resolution
    if not resolution:
        resolution = _render_resolution(state, action_type, abs(target - current), target)

    if action_type == "PLAY":
        state.playing = True
    elif action_type == "PAUSE":
        state.playing = False
    elif action_type == "RESTART":
        state.playing = True
        state.spoken_ad_timestamps.clear()
        state.ad_cursor = -1
        resolution = "Playing from the beginning."
    else:
        # Navigation preserves the playing flag and re-arms ADs from the new spot.
        state.ad_cursor = target - 1

    state.position_s = target
    return PlayerAction(action_type, target, resolution), state


def schedule_descriptions(state: SessionState, personalized, now_s: int) -> list[Event]:
    """Advance the playhead to now_s, emitting pause/speak/resume per crossed AD.

    Crossed means cursor < timestamp <= now_s, unspoken, with AD enabled.
    Mutates state: position, cursor, spoken set.
    """
    events: list[Event] = []
    settings = state.settings
    if settings.audioDescriptionEnabled:
        for entry in personalized:
            t = entry.timestamp_s
            if state.ad_cursor < t <= now_s and t not in state.spoken_ad_timestamps:
                events.append(Event("pause", {"position_s": t}))
                events.append(Event("speak", {
                    "text": entry.tier(settings.audioDescriptionDetails),
                    "timestamp_s": t,
                    "rate": settings.audioDescriptionSpeechRate,
                    "pitch": settings.audioDescriptionPitch,
                    "volume": settings.audioDescriptionVolume,
                    "voice": settings.audioDescriptionVoiceSelection,
                }))
                events.append(Event("resume", {"position_s": t}))
                state.spoken_ad_timestamps.add(t)
    state.ad_cursor = now_s
    state.position_s = now_s
    return events


class Step:
    """Directional magnitude-free change request for a numeric setting."""

    def __init__(self, direction: int):
        self.direction = 1 if direction >= 0 else -1

    def __repr__(self):
        return f"Step({self.direction:+d})"


def apply_settings_delta(settings: PlayerSettings, delta: dict,
                         hints: dict | None = None) -> tuple[PlayerSettings, str]:
    """Apply a parsed settings delta; returns new settings and the updateReason.

    Delta values are concrete values, or Step for an unspecified magnitude
    (default 0.1, overridable per field through hints). Unknown fields are
    skipped with a note. Numeric results are clamped to their ranges.
    """
    hints = hints or {}
    updated = replace(settings)
    changed: list[str] = []
    notes: list[str] = []

    for name, value in delta.items():
        if name not in UI_FIELD_NAMES:
            notes.append(f'I couldn\'t find a setting called "{name}", so I left it alone.')
            logger.info("settings delta ignored unknown field %s", name)
            continue
        if name == "userDescription":
            note = str(value).strip()
            if note:
                existing = updated.userDescription.strip()
                updated.userDescription = f"{existing} {note}".strip()
                changed.append(name)
            continue
        if name in SETTINGS_RANGES:
            lo, hi = SETTINGS_RANGES[name]
            if isinstance(value, Step):
                amount = float(hints.get(name, DEFAULT_STEP))
                target = float(getattr(updated, name)) + value.direction * amount
            else:
                target = float(value)
            target = min(hi, max(lo, round(target, 4)))
            if target != getattr(updated, name):
                setattr(updated, name, target)
                changed.append(name)
            continue
        if name in ("audioDescriptionDetails", "userInquiryDetails"):
            if value in DETAIL_LEVELS and value != getattr(updated, name):
                setattr(updated, name, value)
                changed.append(name)
            continue
        if name in ("audioDescriptionEnabled", "darkMode"):
            flag = bool(value)
            if flag != getattr(updated, name):
                setattr(updated, name, flag)
                changed.append(name)
            continue
        if name == "audioDescriptionVoiceSelection":
            voice = str(value)
            if voice != updated.audioDescriptionVoiceSelection:
                updated.audioDescriptionVoiceSelection = voice
                changed.append(name)
            continue
        if name == "audioDescriptionPlacement":
            if value != "before":
                notes.append("Audio description placement other than before the scene isn't supported yet.")
            continue

    # Asking for more AD detail implies descriptions are wanted at all.
    if "audioDescriptionDetails" in changed and not updated.audioDescriptionEnabled:
        updated.audioDescriptionEnabled = True
        changed.append("audioDescriptionEnabled")

    if changed:
        parts = []
        for name in changed:
            if name == "userDescription":
                parts.append("updated your profile with your preferences")
            else:
                parts.append(f"set {UI_FIELD_NAMES[name]} to {getattr(updated, name)}")
        reason = "I have " + ", and ".join(parts) + "."
    else:
        reason = "No settings were changed."
    if notes:
        reason += " " + " ".join(notes)
    reason += " Please let me know if any further adjustments are needed."
    return updated, reason


def parse_settings_request(utterance: str) -> tuple[dict, dict]:
    """Deterministic keyword parse of a settings utterance into (delta, hints).

    This is the no-model degrade path; coverage is intentionally narrow and
    conservative. The model path produces full settings JSON instead.
    """
    text = utterance.lower()
    delta: dict = {}
    hints: dict = {}

    def mentions(*words: str) -> bool:
        return any(w in text for w in words)

    about_descriptions = mentions("description", "narration", "narrator")
    about_speech = mentions("speak", "speech", "voice", "talk", "sound")
    about_video = mentions("video", "play the", "playback")
    about_font = mentions("font", "text size", "text is too small", "read the text")

    percent = re.search(r"(\d+)\s*(?:percent|%)", text)

    if mentions("difficulty hearing", "hard of hearing", "trouble hearing"):
        delta["audioDescriptionVolume"] = 1.0
        delta["videoPlayerVolume"] = 1.0
    elif mentions("volume", "louder", "quieter", "loud"):
        direction = -1 if mentions("lower", "quieter", "down", "softer") else 1
        if percent:
            value = int(percent.group(1)) / 100.0
            if about_descriptions:
                delta["audioDescriptionVolume"] = value
            else:
                delta["videoPlayerVolume"] = value
        elif about_descriptions:
            delta["audioDescriptionVolume"] = Step(direction)
        elif about_video:
            delta["videoPlayerVolume"] = Step(direction)
        else:
            delta["audioDescriptionVolume"] = Step(direction)
            delta["videoPlayerVolume"] = Step(direction)

    if about_font and mentions("bigger", "larger", "increase", "small", "smaller", "decrease", "magnif"):
        if percent:
            delta["fontMagnification"] = int(percent.group(1)) / 100.0
        else:
            delta["fontMagnification"] = Step(-1 if mentions("smaller", "decrease") else 1)

    if mentions("faster", "speed up", "too slow", "slower", "slow down", "too fast"):
        direction = -1 if mentions("slower", "slow down", "too fast") else 1
        rate_match = re.search(r"(\d+(?:\.\d+)?)x", text)
        if about_speech and not about_video:
            field_name = "audioDescriptionSpeechRate"
        else:
            field_name = "playbackRate"
        if rate_match:
            delta[field_name] = float(rate_match.group(1))
        else:
            delta[field_name] = Step(direction)

    if mentions("pitch", "upbeat", "alien", "higher voice", "deeper voice"):
        direction = -1 if mentions("lower", "deeper") else 1
        delta["audioDescriptionPitch"] = Step(direction)

    if mentions("dark mode", "too bright"):
        delta["darkMode"] = not mentions("disable", "turn off", "light mode")
    elif mentions("light mode"):
        delta["darkMode"] = False

    if mentions("disable audio description", "turn off audio description",
                "don't want to hear the audio descriptions", "disable the narration"):
        delta["audioDescriptionEnabled"] = False
    elif mentions("enable audio description", "turn on audio description"):
        delta["audioDescriptionEnabled"] = True

    wants_more_detail = mentions("more detail", "very detailed", "descriptive", "verbose", "expansive")
    wants_less_detail = mentions("less detail", "short sentences", "shorter answers", "brief", "minimal")
    if wants_more_detail or wants_less_detail:
        level = "Expansive" if wants_more_detail else "Minimal"
        if about_descriptions and not mentions("answer"):
            delta["audioDescriptionDetails"] = level
        elif mentions("answer") and not about_descriptions:
            delta["userInquiryDetails"] = level
        else:
            delta["audioDescriptionDetails"] = level
            delta["userInquiryDetails"] = level

    if mentions("female voice"):
        delta["audioDescriptionVoiceSelection"] = DEFAULT_VOICE

    if re.search(r"\b(i prefer|i am|i have|i'm|my name is|refer to me|remember that|take note)\b", text):
        delta["userDescription"] = utterance.strip()

    return delta, hints
