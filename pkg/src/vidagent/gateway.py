"""Provider-agnostic boundary to the multimodal model.

Requests carry prompt text plus optional encoded images; responses go
through a repair pass and strict per-stage schema validation with a bounded
corrective retry. A directory-backed mock returns scripted fixtures
verbatim so every offline test is deterministic — a missing fixture is an
error, never a fabricated answer.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

import httpx

logger = logging.getLogger(__name__)

MAX_RETRIES = 2
PAYLOAD_CEILING_BYTES = 4 * 1024 * 1024
MAX_IMAGES = 10  # storyboard cap + current frame

INTENT_VALUES = (
    "INFORMATIONAL_QUERY",
    "VIDEO_PLAYER_ACTION",
    "APP_SETTINGS",
    "PROTOTYPE_HELP",
    "VIDEO_SPECS",
    "REPEAT_LAST_ANSWER",
)

ACTION_TYPES = ("PLAY", "PAUSE", "REWIND", "FAST_FORWARD", "GO_TO_TIMESTAMP", "RESTART")

DETAIL_LEVELS = ("Minimal", "Balanced", "Expansive")

# Answer tier word caps (minimal/balanced/expansive).
ANSWER_WORD_LIMITS = {"minimalAnswer": 20, "balancedAnswer": 50, "expansiveAnswer": 80}


class PromptStage(str, Enum):
    REWRITE = "rewrite"
    CLASSIFY = "classify"
    INQUIRY = "inquiry"
    SETTINGS = "settings"
    PLAYER_ACTION = "player_action"
    PERSONALIZE = "personalize"
    DENSIFY = "densify"


class GatewayError(Exception):
    pass


class BackendUnavailable(GatewayError):
    """No backend configured, or the configured backend cannot be used."""


class Timeout(GatewayError):
    pass


class TransportFailure(GatewayError):
    pass


class MissingFixture(GatewayError):
    def __init__(self, stage: PromptStage, key: str, path: Path):
        super().__init__(f"no fixture for stage={stage.value} key={key!r} (looked at {path})")
        self.stage = stage
        self.key = key


class PayloadTooLarge(GatewayError):
    pass


class Unparseable(GatewayError):
    """Response text contains no JSON document even after repair."""


class SchemaViolation(GatewayError):
    """Structured response fails the stage schema. Message is 'path: reason'."""

    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class StructuredCallFailed(GatewayError):
    """Validation still failing after all repair retries."""

    def __init__(self, stage: PromptStage, attempts: int, last_error: GatewayError):
        super().__init__(
            f"stage {stage.value} failed after {attempts} attempt(s): {last_error}"
        )
        self.stage = stage
        self.attempts = attempts
        self.last_error = last_error


@dataclass
class ModelRequest:
    stage: PromptStage
    system_text: str
    context_text: str
    fixture_key: str
    images: list[bytes] = field(default_factory=list)
    response_schema: str = ""

    def __post_init__(self):
        if not self.response_schema:
            self.response_schema = self.stage.value
        if len(self.images) > MAX_IMAGES:
            raise ValueError(f"at most {MAX_IMAGES} images per request")
        total = len(self.system_text) + len(self.context_text) + sum(len(i) for i in self.images)
        if total > PAYLOAD_CEILING_BYTES:
            raise PayloadTooLarge(f"payload {total} bytes exceeds {PAYLOAD_CEILING_BYTES}")


@dataclass
class ModelResponse:
    raw_text: str
    parsed: Any
    attempts: int


class MockBackend:
    """Scripted backend: one fixture file per (stage, key), returned verbatim."""

    def __init__(self, fixtures_dir: str | Path):
        self.fixtures_dir = Path(fixtures_dir)

    def complete(self, request: ModelRequest) -> str:
        path = self.fixtures_dir / request.stage.value / f"{request.fixture_key}.txt"
        if not path.is_file():
            raise MissingFixture(request.stage, request.fixture_key, path)
        return path.read_text(encoding="utf-8")


class RemoteBackend:
    """Thin HTTPS adapter: endpoint URL plus an API key read from the environment."""

    def __init__(self, endpoint: str, api_key_env: str = "VIDAGENT_API_KEY",
                 timeout_s: float = 30.0, extra_config: dict | None = None):
        self.endpoint = endpoint
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self.extra_config = extra_config or {}  # opaque generation knobs, passed through

    def complete(self, request: ModelRequest) -> str:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise BackendUnavailable(
                f"environment variable {self.api_key_env} is not set"
            )
        body = {
            "stage": request.stage.value,
            "system": request.system_text,
            "context": request.context_text,
            "images": [img.hex() for img in request.images],
            **self.extra_config,
        }
        try:
            response = httpx.post(
                self.endpoint,
                json=body,
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.timeout_s,
            )
            response.raise_for_status()
        except httpx.TimeoutException as exc:
            raise Timeout(f"model call timed out after {self.timeout_s}s") from exc
        except httpx.HTTPError as exc:
            raise TransportFailure(str(exc)) from exc
        try:
            return response.json()["text"]
        except (KeyError, ValueError) as exc:
            raise TransportFailure(f"malformed provider response: {exc}") from exc


def complete(request: ModelRequest, backend) -> str:
    """Single completion call against whichever backend is configured."""
    if backend is None:
        raise BackendUnavailable("no model backend configured")
    return backend.complete(request)


_FENCE = re.compile(r"^```[a-zA-Z0-9_-]*\s*$", re.MULTILINE)


def repair_text(raw_text: str) -> str:
    """Strip code fences and any prose before the first and after the last bracket."""
    text = _FENCE.sub("", raw_text)
    starts = [i for i in (text.find("{"), text.find("[")) if i != -1]
    if not starts:
        return text.strip()
    start = min(starts)
    closer = "}" if text[start] == "{" else "]"
    end = text.rfind(closer)
    if end <= start:
        return text.strip()
    return text[start : end + 1]


def count_words(text: str) -> int:
    """Whitespace-delimited tokens containing at least one alphanumeric."""
    return sum(1 for tok in text.split() if any(c.isalnum() for c in tok))


def fixture_slug(text: str, max_length: int = 60) -> str:
    """Stable filesystem-safe key for fixture lookup, derived from the text."""
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug[:max_length].rstrip("-") or "empty"


def parse_structured(stage: PromptStage, raw_text: str) -> Any:
    """Repair, decode, and validate a model response against its stage schema."""
    if not raw_text.strip():
        raise Unparseable("response is empty")
    try:
        value = json.loads(repair_text(raw_text))
    except json.JSONDecodeError as exc:
        raise Unparseable(f"no JSON document found: {exc}") from exc
    validator = _VALIDATORS[stage]
    validator(value)
    return value


def _require(obj: dict, key: str, kind, path: str = "") -> Any:
    label = f"{path}{key}"
    if key not in obj:
        raise SchemaViolation(label, "required")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaViolation(label, "must be a number")
        return float(value)
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaViolation(label, "must be an integer")
        return value
    if not isinstance(value, kind):
        raise SchemaViolation(label, f"must be {kind.__name__}")
    return value


def _require_object(value: Any) -> dict:
    if not isinstance(value, dict):
        raise SchemaViolation("root", "expected a JSON object")
    return value


def _require_array(value: Any) -> list:
    if not isinstance(value, list):
        raise SchemaViolation("root", "expected a JSON array")
    return value


def _validate_rewrite(value: Any) -> None:
    obj = _require_object(value)
    for key in ("rephrased", "edited"):
        if not _require(obj, key, str).strip():
            raise SchemaViolation(key, "must be non-empty")
    if "reasonForTimestamp" in obj and obj["reasonForTimestamp"] is not None:
        if not isinstance(obj["reasonForTimestamp"], str):
            raise SchemaViolation("reasonForTimestamp", "must be string")
    stamps = _require(obj, "relevantTimestamps", list)
    for i, ts in enumerate(stamps):
        if isinstance(ts, bool) or not isinstance(ts, int):
            raise SchemaViolation(f"relevantTimestamps[{i}]", "must be an integer")
        if ts < 0:
            raise SchemaViolation(f"relevantTimestamps[{i}]", "below 0")


def _validate_classify(value: Any) -> None:
    obj = _require_object(value)
    response_type = _require(obj, "responseType", str)
    if response_type not in INTENT_VALUES:
        raise SchemaViolation("responseType", f"unknown intent {response_type!r}")
    if "plainText" in obj and obj["plainText"] is not None:
        if not isinstance(obj["plainText"], str):
            raise SchemaViolation("plainText", "must be string")


def _validate_inquiry(value: Any) -> None:
    obj = _require_object(value)
    _require(obj, "answer", str)
    for key, limit in ANSWER_WORD_LIMITS.items():
        text = _require(obj, key, str)
        words = count_words(text)
        if words > limit:
            raise SchemaViolation(key, f"{words} words exceeds the {limit}-word limit")
    if "outsideVideo" in obj and not isinstance(obj["outsideVideo"], bool):
        raise SchemaViolation("outsideVideo", "must be boolean")


_SETTINGS_NUMERIC = {
    "audioDescriptionVolume": (0.0, 1.0),
    "audioDescriptionSpeechRate": (0.5, 2.0),
    "audioDescriptionPitch": (0.5, 2.0),
    "playbackRate": (0.5, 2.0),
    "videoPlayerVolume": (0.0, 1.0),
    "fontMagnification": (0.5, 2.0),
}


def _validate_settings(value: Any) -> None:
    obj = _require_object(value)
    for key in ("audioDescriptionEnabled", "darkMode"):
        _require(obj, key, bool)
    for key, (lo, hi) in _SETTINGS_NUMERIC.items():
        number = _require(obj, key, float)
        if not lo <= number <= hi:
            raise SchemaViolation(key, f"{number} outside [{lo}, {hi}]")
    for key in ("audioDescriptionDetails", "userInquiryDetails"):
        level = _require(obj, key, str)
        if level not in DETAIL_LEVELS:
            raise SchemaViolation(key, f"unknown level {level!r}")
    placement = _require(obj, "audioDescriptionPlacement", str)
    if placement != "before":
        raise SchemaViolation("audioDescriptionPlacement", "only 'before' is supported")
    _require(obj, "audioDescriptionVoiceSelection", str)
    _require(obj, "userDescription", str)
    if not _require(obj, "updateReason", str).strip():
        raise SchemaViolation("updateReason", "must be non-empty")


def _validate_player_action(value: Any) -> None:
    obj = _require_object(value)
    action_type = _require(obj, "type", str)
    if action_type not in ACTION_TYPES:
        raise SchemaViolation("type", f"unknown action {action_type!r}")
    _require(obj, "newTimestamp", int)
    if not _require(obj, "resolution", str).strip():
        raise SchemaViolation("resolution", "must be non-empty")


_PERSONALIZED_FIELDS = (
    "description", "minimalDescription", "balancedDescription",
    "expansiveDescription", "reasoning",
)


def _validate_personalize(value: Any) -> None:
    entries = _require_array(value)
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaViolation(f"[{i}]", "must be an object")
        ts = _require(entry, "timestamp", int, path=f"[{i}].")
        if ts < 0:
            raise SchemaViolation(f"[{i}].timestamp", "below 0")
        for key in _PERSONALIZED_FIELDS:
            _require(entry, key, str, path=f"[{i}].")


def _validate_densify(value: Any) -> None:
    entries = _require_array(value)
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise SchemaViolation(f"[{i}]", "must be an object")
        ts = _require(entry, "timestamp", int, path=f"[{i}].")
        if ts < 0:
            raise SchemaViolation(f"[{i}].timestamp", "below 0")
        if not _require(entry, "text", str, path=f"[{i}].").strip():
            raise SchemaViolation(f"[{i}].text", "must be non-empty")


_VALIDATORS = {
    PromptStage.REWRITE: _validate_rewrite,
    PromptStage.CLASSIFY: _validate_classify,
    PromptStage.INQUIRY: _validate_inquiry,
    PromptStage.SETTINGS: _validate_settings,
    PromptStage.PLAYER_ACTION: _validate_player_action,
    PromptStage.PERSONALIZE: _validate_personalize,
    PromptStage.DENSIFY: _validate_densify,
}

_CORRECTIVE = (
    "\n\nYour previous reply was rejected ({error}). "
    "RETURN A VALID JSON matching the required output schema, with no extra prose."
)


def complete_structured(request: ModelRequest, backend,
                        max_retries: int = MAX_RETRIES) -> ModelResponse:
    """Call the backend and validate; on schema failure retry with a corrective note."""
    attempts = 0
    current = request
    last_error: GatewayError | None = None
    while attempts <= max_retries:
        attempts += 1
        raw = complete(current, backend)
        try:
            parsed = parse_structured(request.stage, raw)
            return ModelResponse(raw_text=raw, parsed=parsed, attempts=attempts)
        except (SchemaViolation, Unparseable) as exc:
            last_error = exc
            logger.warning(
                "stage %s attempt %d rejected: %s", request.stage.value, attempts, exc
            )
            current = ModelRequest(
                stage=request.stage,
                system_text=request.system_text,
                context_text=request.context_text + _CORRECTIVE.format(error=exc),
                fixture_key=request.fixture_key,
                images=request.images,
                response_schema=request.response_schema,
            )
    assert last_error is not None
    raise StructuredCallFailed(request.stage, attempts, last_error)
