"""Timed-transcript ingestion, the per-video content index, and lexical retrieval.

The index is the grounding substrate for question answering: timestamped
transcript segments plus dense audio descriptions, persisted as one JSON
document per video. ``lexical_search`` is the deterministic retrieval path
used for fallback and grounding when no model backend is configured.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

SCHEMA_VERSION = 1

# Fixed 30-entry stopword list; part of the scoring contract.
STOPWORDS = frozenset(
    [
        "a", "an", "the", "is", "are", "was", "were", "be", "been", "being",
        "to", "of", "in", "on", "at", "for", "with", "and", "or", "but",
        "it", "he", "she", "they", "we", "you", "i", "this", "that", "what",
    ]
)

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")
_TIMING = re.compile(
    r"^(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})\s+-->\s+(\d{2,}):([0-5]\d):([0-5]\d)\.(\d{3})\s*$"
)


class MalformedDocument(ValueError):
    """Timed-text input violates the supported subset."""

    def __init__(self, message: str, line: int, offset: int):
        super().__init__(f"line {line}, offset {offset}: {message}")
        self.line = line
        self.offset = offset


class EmptyDocument(ValueError):
    """Timed-text input contains no content at all."""


class SchemaVersionMismatch(ValueError):
    """Persisted index was written with an unsupported schema version."""


class CorruptIndex(ValueError):
    """Persisted index cannot be decoded or fails structural validation."""


class EmptyQueryAfterStopwordRemoval(ValueError):
    """Query reduced to nothing; callers fall back to the playback position."""


@dataclass(frozen=True)
class TranscriptSegment:
    timestamp_s: int
    text: str
    end_s: int | None = None

    def __post_init__(self):
        if self.timestamp_s < 0:
            raise ValueError("timestamp_s must be >= 0")
        if not self.text:
            raise ValueError("segment text must be non-empty")
        if self.end_s is not None and self.end_s < self.timestamp_s:
            raise ValueError("end_s must be >= timestamp_s")


@dataclass(frozen=True)
class DenseDescription:
    timestamp_s: int
    text: str
    source: str = "generated"  # generated | imported

    def __post_init__(self):
        if self.timestamp_s < 0:
            raise ValueError("timestamp_s must be >= 0")
        if not self.text:
            raise ValueError("description text must be non-empty")
        if self.source not in ("generated", "imported"):
            raise ValueError(f"unknown source {self.source!r}")


@dataclass
class ContentIndex:
    """All indexed content for one video. Immutable after construction."""

    video_id: str
    title: str
    duration_s: int
    transcript: list[TranscriptSegment] = field(default_factory=list)
    dense: list[DenseDescription] = field(default_factory=list)
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        for name, entries in (("transcript", self.transcript), ("dense", self.dense)):
            last = -1
            for entry in entries:
                if entry.timestamp_s <= last:
                    raise ValueError(f"{name} timestamps must be strictly ascending")
                if entry.timestamp_s > self.duration_s:
                    raise ValueError(
                        f"{name} timestamp {entry.timestamp_s} exceeds duration {self.duration_s}"
                    )
                last = entry.timestamp_s

    def is_empty(self) -> bool:
        return not self.transcript and not self.dense

    def entries(self) -> list[tuple[int, str]]:
        """Every searchable (timestamp, text) pair, transcript first."""
        pairs = [(seg.timestamp_s, seg.text) for seg in self.transcript]
        pairs.extend((d.timestamp_s, d.text) for d in self.dense)
        return pairs


def parse_transcript(document: str) -> list[TranscriptSegment]:
    """Parse a WebVTT-subset document into integer-second transcript segments.

    Supported subset: a WEBVTT header line (plus optional header metadata up
    to the first blank line), then cue blocks of an optional identifier line,
    one ``HH:MM:SS.mmm --> HH:MM:SS.mmm`` timing line, and plain-text payload
    lines. Cue start times are truncated to whole seconds; cues landing on
    the same second are concatenated with a single space. Cues with an empty
    payload are skipped.
    """
    if not document.strip():
        raise EmptyDocument("document is empty")

    lines = document.replace("﻿", "", 1).split("\n")
    offsets = _line_offsets(lines)

    if not lines[0].startswith("WEBVTT"):
        raise MalformedDocument("missing WEBVTT header", line=1, offset=0)

    # Skip the header block (header line plus any metadata until a blank line).
    i = 0
    while i < len(lines) and lines[i].strip():
        i += 1

    cues: list[tuple[float, int, int, str]] = []  # (exact start, start_s, end_s, text)
    n = len(lines)
    while i < n:
        if not lines[i].strip():
            i += 1
            continue
        block_start = i
        while i < n and lines[i].strip():
            i += 1
        block = lines[block_start:i]

        timing_idx = 0
        if "-->" not in block[0]:
            # Optional cue identifier line.
            if len(block) < 2 or "-->" not in block[1]:
                raise MalformedDocument(
                    f"expected cue timing line, got {block[0]!r}",
                    line=block_start + 1,
                    offset=offsets[block_start],
                )
            timing_idx = 1
        timing_line_no = block_start + timing_idx
        match = _TIMING.match(block[timing_idx].strip())
        if not match:
            raise MalformedDocument(
                f"bad cue timing {block[timing_idx]!r}",
                line=timing_line_no + 1,
                offset=offsets[timing_line_no],
            )
        h1, m1, s1, ms1, h2, m2, s2, ms2 = (int(g) for g in match.groups())
        start = h1 * 3600 + m1 * 60 + s1 + ms1 / 1000.0
        end = h2 * 3600 + m2 * 60 + s2 + ms2 / 1000.0
        if end < start:
            raise MalformedDocument(
                "cue end precedes cue start",
                line=timing_line_no + 1,
                offset=offsets[timing_line_no],
            )
        text = " ".join(part.strip() for part in block[timing_idx + 1 :] if part.strip())
        if text:
            cues.append((start, int(start), int(end), text))

    cues.sort(key=lambda c: c[0])  # stable: same-second cues keep document order

    segments: list[TranscriptSegment] = []
    for _, start_s, end_s, text in cues:
        if segments and segments[-1].timestamp_s == start_s:
            prev = segments[-1]
            merged_end = max(prev.end_s if prev.end_s is not None else end_s, end_s)
            segments[-1] = TranscriptSegment(start_s, prev.text + " " + text, merged_end)
        else:
            segments.append(TranscriptSegment(start_s, text, end_s))
    return segments


def _line_offsets(lines: list[str]) -> list[int]:
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1
    return offsets


def persist_index(index: ContentIndex, location: str | Path) -> None:
    """Write the index as one UTF-8 JSON document."""
    payload = {
        "video_id": index.video_id,
        "title": index.title,
        "duration_s": index.duration_s,
        "schema_version": index.schema_version,
        "transcript": [
            {"timestamp_s": s.timestamp_s, "end_s": s.end_s, "text": s.text}
            for s in index.transcript
        ],
        "dense": [
            {"timestamp_s": d.timestamp_s, "text": d.text, "source": d.source}
            for d in index.dense
        ],
    }
    Path(location).write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")


def load_index(location: str | Path) -> ContentIndex:
    """Load a persisted index; structurally validates everything it reads."""
    try:
        raw = Path(location).read_text(encoding="utf-8")
        payload = json.loads(raw)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptIndex(f"cannot read index at {location}: {exc}") from exc
    if not isinstance(payload, dict):
        raise CorruptIndex("index root must be a JSON object")
    if "schema_version" not in payload:
        raise CorruptIndex("index is missing schema_version")
    if payload["schema_version"] != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"schema_version {payload['schema_version']!r} is not supported (expected {SCHEMA_VERSION})"
        )
    try:
        transcript = [
            TranscriptSegment(int(s["timestamp_s"]), str(s["text"]),
                              None if s.get("end_s") is None else int(s["end_s"]))
            for s in payload["transcript"]
        ]
        dense = [
            DenseDescription(int(d["timestamp_s"]), str(d["text"]), str(d.get("source", "generated")))
            for d in payload["dense"]
        ]
        return ContentIndex(
            video_id=str(payload["video_id"]),
            title=str(payload["title"]),
            duration_s=int(payload["duration_s"]),
            transcript=transcript,
            dense=dense,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptIndex(f"index failed validation: {exc}") from exc


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumerics, stem light suffixes.

    The stemmer strips -ing/-ed/-s so surface variants match ("boiling" ->
    "boil"); it is part of the token definition shared by the query and the
    index side.
    """
    tokens = [t for t in _TOKEN_SPLIT.split(text.lower()) if t]
    return [_stem(t) for t in tokens]


def _stem(token: str) -> str:
    if token.endswith("ing") and len(token) > 5:
        return token[:-3]
    if token.endswith("ed") and len(token) > 4:
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


def query_tokens(query: str) -> set[str]:
    """Query-side token set: stopwords removed before stemming and scoring."""
    raw = [t for t in _TOKEN_SPLIT.split(query.lower()) if t]
    kept = [t for t in raw if t not in STOPWORDS]
    return {_stem(t) for t in kept}


def lexical_search(query: str, index: ContentIndex, k: int) -> list[int]:
    """Rank index timestamps by token overlap with the query.

    Score per entry is |query tokens ∩ entry tokens| / |query tokens|;
    zero-score entries are excluded, ties break toward the earlier
    timestamp, and duplicate timestamps keep their best-scoring entry.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if index.is_empty():
        raise ValueError("index has no searchable entries")
    q = query_tokens(query)
    if not q:
        raise EmptyQueryAfterStopwordRemoval(query)

    scored: list[tuple[float, int]] = []
    for timestamp, text in index.entries():
        overlap = len(q & set(tokenize(text)))
        if overlap:
            scored.append((overlap / len(q), timestamp))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))

    ranked: list[int] = []
    for _, timestamp in scored:
        if timestamp not in ranked:
            ranked.append(timestamp)
        if len(ranked) == k:
            break
    return ranked


def transcript_lines(segments: Iterable[TranscriptSegment]) -> str:
    """Render segments as '[<s>s] text' lines for prompt context."""
    return "\n".join(f"[{s.timestamp_s}s] {s.text}" for s in segments)


def description_lines(descriptions: Iterable[DenseDescription]) -> str:
    return "\n".join(f"[{d.timestamp_s}s] {d.text}" for d in descriptions)
