"""Dense audio-description generation and tiered personalization.

The offline step produces a dense description list per video through the
model gateway; the personalization step turns that list into tiered
descriptions (minimal/balanced/expansive) under hard merging and word-limit
rules. A deterministic validator enforces the rules, and a no-model
fallback produces compliant output offline.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .content_index import ContentIndex, DenseDescription, transcript_lines
from .gateway import (
    ModelRequest,
    PromptStage,
    StructuredCallFailed,
    complete_structured,
    count_words,
)
from .prompting import render_prompt

MERGE_GAP_S = 3
TIER_WORD_LIMITS = {
    "minimalDescription": 60,
    "balancedDescription": 90,
    "expansiveDescription": 120,
}
BEGIN_SENTINEL = "The video begins with"
END_SENTINEL = "The video ends with"

DENSE_WINDOW_S = 60
DENSE_OVERLAP_S = 5

_SCREEN_TEXT = re.compile(r"^\s*[\"'“‘]?(text reads|text on screen)", re.IGNORECASE)


class UnsortedInput(ValueError):
    """Dense descriptions must be strictly ascending by timestamp."""


class InvalidModelOutput(ValueError):
    """Model produced descriptions that fail structural validation."""


class ValidationFailed(ValueError):
    def __init__(self, report: "ValidationReport"):
        super().__init__("; ".join(str(v) for v in report.violations))
        self.report = report


@dataclass(frozen=True)
class PersonalizedDescription:
    timestamp_s: int
    description: str
    minimalDescription: str
    balancedDescription: str
    expansiveDescription: str
    reasoning: str

    def tier(self, level: str) -> str:
        return {
            "Minimal": self.minimalDescription,
            "Balanced": self.balancedDescription,
            "Expansive": self.expansiveDescription,
        }[level]

    def to_json_dict(self) -> dict:
        # Sidecar field names are the wire contract; timestamp is in seconds.
        return {
            "timestamp": self.timestamp_s,
            "description": self.description,
            "minimalDescription": self.minimalDescription,
            "balancedDescription": self.balancedDescription,
            "expansiveDescription": self.expansiveDescription,
            "reasoning": self.reasoning,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "PersonalizedDescription":
        return cls(
            timestamp_s=int(obj["timestamp"]),
            description=str(obj["description"]),
            minimalDescription=str(obj["minimalDescription"]),
            balancedDescription=str(obj["balancedDescription"]),
            expansiveDescription=str(obj["expansiveDescription"]),
            reasoning=str(obj["reasoning"]),
        )


@dataclass
class MergePlan:
    groups: list[list[int]] = field(default_factory=list)
    kept_singletons: list[int] = field(default_factory=list)
    screen_text_exempt: list[int] = field(default_factory=list)

    def output_timestamps(self) -> list[int]:
        """Timestamps of the personalized list this plan implies (group -> earliest)."""
        stamps = [group[0] for group in self.groups] + list(self.kept_singletons)
        return sorted(stamps)


@dataclass(frozen=True)
class Violation:
    index: int | None
    field: str
    message: str

    def __str__(self) -> str:
        where = f"entry {self.index} " if self.index is not None else ""
        return f"{where}{self.field}: {self.message}"


@dataclass
class ValidationReport:
    ok: bool
    violations: list[Violation] = field(default_factory=list)


def is_screen_text(text: str) -> bool:
    """Entries describing on-screen text keep their timestamps and never merge."""
    return bool(_SCREEN_TEXT.match(text))


def plan_merges(dense: list[DenseDescription]) -> MergePlan:
    """Greedy left-to-right merge planning over a sorted dense list.

    A chain extends while the entry sits within 3 seconds of the chain's
    first member; the merged description plays at that first timestamp, so
    anything further out would be narrated too early. Screen text entries
    break chains and are kept as exempt singletons.
    """
    for prev, cur in zip(dense, dense[1:]):
        if cur.timestamp_s <= prev.timestamp_s:
            raise UnsortedInput(
                f"timestamps {prev.timestamp_s} -> {cur.timestamp_s} are not strictly ascending"
            )

    plan = MergePlan()
    chain: list[int] = []

    def close_chain():
        if len(chain) >= 2:
            plan.groups.append(list(chain))
        elif chain:
            plan.kept_singletons.append(chain[0])
        chain.clear()

    for entry in dense:
        if is_screen_text(entry.text):
            close_chain()
            plan.kept_singletons.append(entry.timestamp_s)
            plan.screen_text_exempt.append(entry.timestamp_s)
            continue
        if chain and entry.timestamp_s - chain[0] <= MERGE_GAP_S:
            chain.append(entry.timestamp_s)
        else:
            close_chain()
            chain.append(entry.timestamp_s)
    close_chain()
    return plan


def truncate_words(text: str, limit: int) -> str:
    """Keep leading whitespace tokens until `limit` counted words have passed."""
    kept: list[str] = []
    count = 0
    for token in text.split():
        if any(c.isalnum() for c in token):
            if count == limit:
                break
            count += 1
        kept.append(token)
    return " ".join(kept)


def validate_personalized(entries: list[PersonalizedDescription]) -> ValidationReport:
    """Check every hard rule: word limits, ordering, sentinels, merge spacing, reasoning."""
    violations: list[Violation] = []

    for i, entry in enumerate(entries):
        for field_name, limit in TIER_WORD_LIMITS.items():
            words = count_words(getattr(entry, field_name))
            if words > limit:
                violations.append(
                    Violation(i, field_name, f"{words} words exceeds the {limit}-word limit")
                )
        if not entry.reasoning.strip():
            violations.append(Violation(i, "reasoning", "must be non-empty"))

    for i in range(1, len(entries)):
        if entries[i].timestamp_s <= entries[i - 1].timestamp_s:
            violations.append(
                Violation(i, "timestamp", "timestamps not ascending")
            )

    if entries:
        first = entries[0]
        for field_name in TIER_WORD_LIMITS:
            if not getattr(first, field_name).startswith(BEGIN_SENTINEL):
                violations.append(
                    Violation(0, field_name, f'must begin with "{BEGIN_SENTINEL}"')
                )
        last = entries[-1]
        for field_name in TIER_WORD_LIMITS:
            if END_SENTINEL not in getattr(last, field_name):
                violations.append(
                    Violation(len(entries) - 1, field_name, f'must contain "{END_SENTINEL}"')
                )

    for i in range(1, len(entries)):
        prev, cur = entries[i - 1], entries[i]
        gap = cur.timestamp_s - prev.timestamp_s
        if 0 < gap <= MERGE_GAP_S:
            if not (is_screen_text(prev.description) or is_screen_text(cur.description)):
                violations.append(
                    Violation(
                        i,
                        "timestamp",
                        f"merge rule: entries {prev.timestamp_s}s and {cur.timestamp_s}s "
                        f"are {gap}s apart and neither describes on-screen text",
                    )
                )

    return ValidationReport(ok=not violations, violations=violations)


def _compose_tier(body: str, limit: int, is_first: bool, is_last: bool) -> str:
    budget = limit
    if is_first:
        budget -= count_words(BEGIN_SENTINEL)
    if is_last:
        budget -= count_words(END_SENTINEL) + 2  # trailing "this scene."
    text = truncate_words(body, budget)
    if is_first:
        text = f"{BEGIN_SENTINEL} {text}" if text else BEGIN_SENTINEL
    if is_last:
        text = f"{text} {END_SENTINEL} this scene." if text else f"{END_SENTINEL} this scene."
    return text


def fallback_personalize(dense: list[DenseDescription]) -> list[PersonalizedDescription]:
    """Deterministic no-model personalization: merge, truncate, add sentinels.

    Output always satisfies validate_personalized.
    """
    plan = plan_merges(dense)
    by_timestamp = {d.timestamp_s: d for d in dense}

    units: list[tuple[int, str, str]] = []  # (timestamp, body text, reasoning)
    for group in plan.groups:
        body = " then, ".join(by_timestamp[t].text for t in group)
        joined = ", ".join(str(t) for t in group)
        units.append((group[0], body, f"Merged descriptions at {joined}s; every gap is 3 seconds or less."))
    for t in plan.kept_singletons:
        reason = (
            "Kept at its original timestamp; it describes text shown on screen."
            if t in plan.screen_text_exempt
            else "Kept as a standalone description; no neighbor within 3 seconds."
        )
        units.append((t, by_timestamp[t].text, reason))
    units.sort(key=lambda u: u[0])

    personalized: list[PersonalizedDescription] = []
    for i, (timestamp, body, reasoning) in enumerate(units):
        is_first = i == 0
        is_last = i == len(units) - 1
        personalized.append(
            PersonalizedDescription(
                timestamp_s=timestamp,
                description=body,
                minimalDescription=_compose_tier(body, TIER_WORD_LIMITS["minimalDescription"], is_first, is_last),
                balancedDescription=_compose_tier(body, TIER_WORD_LIMITS["balancedDescription"], is_first, is_last),
                expansiveDescription=_compose_tier(body, TIER_WORD_LIMITS["expansiveDescription"], is_first, is_last),
                reasoning=reasoning,
            )
        )
    return personalized


def generate_dense(index: ContentIndex, backend, frame_source=None,
                   window_s: int = DENSE_WINDOW_S, overlap_s: int = DENSE_OVERLAP_S) -> list[DenseDescription]:
    """Run the offline dense-description pipeline over fixed time windows.

    Each window is one model request; overlapping duplicates are dropped by
    timestamp and the concatenation is returned sorted.
    """
    step = window_s - overlap_s
    if step <= 0:
        raise ValueError("window must be longer than the overlap")

    seen: dict[int, DenseDescription] = {}
    start = 0
    window_index = 0
    while start < index.duration_s:
        end = min(start + window_s, index.duration_s)
        segments = [s for s in index.transcript if start <= s.timestamp_s < end]
        context = render_prompt(
            PromptStage.DENSIFY,
            {
                "VIDEO_TITLE": index.title,
                "DURATION_S": str(index.duration_s),
                "WINDOW_START_S": str(start),
                "WINDOW_END_S": str(end),
                "TRANSCRIPT_WINDOW": transcript_lines(segments) or "(no dialog in this window)",
            },
        )
        images: list[bytes] = []
        if frame_source is not None:
            for second in _window_sample_seconds(start, end):
                try:
                    images.append(frame_source.frame_bytes(second))
                except Exception:  # missing frames never block dense generation
                    continue
        request = ModelRequest(
            stage=PromptStage.DENSIFY,
            system_text=context,
            context_text="",
            fixture_key=f"{index.video_id}-w{window_index}",
            images=images,
        )
        try:
            response = complete_structured(request, backend)
        except StructuredCallFailed as exc:
            raise InvalidModelOutput(str(exc)) from exc
        for obj in response.parsed:
            timestamp = int(obj["timestamp"])
            if timestamp > index.duration_s:
                raise InvalidModelOutput(
                    f"description timestamp {timestamp} exceeds duration {index.duration_s}"
                )
            if timestamp not in seen:
                seen[timestamp] = DenseDescription(timestamp, str(obj["text"]).strip(), "generated")
        start += step
        window_index += 1

    return [seen[t] for t in sorted(seen)]


def _window_sample_seconds(start: int, end: int) -> list[int]:
    if end - start <= 1:
        return [start]
    return sorted({start, (start + end) // 2, end - 1})


def personalize(dense: list[DenseDescription], index: ContentIndex,
                user_description: str, backend,
                fixture_key: str | None = None) -> list[PersonalizedDescription]:
    """Model-backed personalization, validated, cross-checked against the merge plan."""
    plan = plan_merges(dense)
    context = render_prompt(
        PromptStage.PERSONALIZE,
        {
            "VIDEO_TITLE": index.title,
            "TRANSCRIPT": transcript_lines(index.transcript) or "(no dialog)",
            "DESCRIPTIONS": "\n".join(f"[{d.timestamp_s}s] {d.text}" for d in dense) or "(none)",
            "PLAIN_TRANSCRIPT": " ".join(s.text for s in index.transcript) or "(no dialog)",
            "USER_DESCRIPTION": user_description or "(no profile provided)",
        },
    )
    request = ModelRequest(
        stage=PromptStage.PERSONALIZE,
        system_text=context,
        context_text="",
        fixture_key=fixture_key or index.video_id,
    )
    try:
        response = complete_structured(request, backend)
    except StructuredCallFailed as exc:
        raise InvalidModelOutput(str(exc)) from exc

    entries = [PersonalizedDescription.from_json_dict(obj) for obj in response.parsed]

    report = validate_personalized(entries)
    expected = plan.output_timestamps()
    actual = [e.timestamp_s for e in entries]
    if actual != expected:
        report.ok = False
        report.violations.append(
            Violation(
                None,
                "timestamps",
                f"do not match the merge plan (expected {expected}, got {actual})",
            )
        )
    if not report.ok:
        raise ValidationFailed(report)
    return entries


def write_sidecar(entries: list[PersonalizedDescription], location: str | Path) -> None:
    payload = [entry.to_json_dict() for entry in entries]
    Path(location).write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")


def read_sidecar(location: str | Path) -> list[PersonalizedDescription]:
    payload = json.loads(Path(location).read_text(encoding="utf-8"))
    return [PersonalizedDescription.from_json_dict(obj) for obj in payload]
