"""Frame selection and storyboard grid composition.

Frames at relevant timestamps are normalized, arranged row-major in a
near-square grid, and labeled with their timestamp in a band under each
cell, so the whole storyboard travels as one image.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

from PIL import Image, ImageDraw, ImageFont

FRAME_CAP = 9
CELL_W = 320
CELL_H = 180
BAND_H = 20


class FrameUnavailable(LookupError):
    def __init__(self, timestamp_s: int):
        super().__init__(f"no frame available at {timestamp_s}s")
        self.timestamp_s = timestamp_s


class MixedDimensions(ValueError):
    """All frames in one storyboard must share the same size."""


class EmptyInput(ValueError):
    """compose_grid needs at least one frame."""


@dataclass
class FrameSpec:
    timestamp_s: int
    image: Image.Image


@dataclass
class Storyboard:
    composite: Image.Image
    manifest: list[tuple[int, int, int]]  # (row, col, timestamp_s)

    def png_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.composite.save(buf, format="PNG")
        return buf.getvalue()


class DirectoryFrameSource:
    """Serves pre-extracted stills laid out as <root>/<video_id>/<seconds>.png."""

    def __init__(self, root: str | Path, video_id: str):
        self.root = Path(root)
        self.video_id = video_id

    def frame(self, timestamp_s: int) -> Image.Image:
        path = self.root / self.video_id / f"{timestamp_s}.png"
        if not path.is_file():
            raise FrameUnavailable(timestamp_s)
        with Image.open(path) as img:
            normalized = img.convert("RGB")
            if normalized.size != (CELL_W, CELL_H):
                normalized = normalized.resize((CELL_W, CELL_H))
            return normalized.copy() if normalized is img else normalized

    def frame_bytes(self, timestamp_s: int) -> bytes:
        buf = io.BytesIO()
        self.frame(timestamp_s).save(buf, format="PNG")
        return buf.getvalue()


def strided_subset(items: list, cap: int) -> list:
    """Evenly strided subset of at most cap items, always keeping first and last."""
    n = len(items)
    if n <= cap:
        return list(items)
    return [items[math.floor(i * (n - 1) / (cap - 1) + 0.5)] for i in range(cap)]


def select_frames(relevant_timestamps, frame_source, cap: int = FRAME_CAP) -> list[FrameSpec]:
    """One frame per distinct timestamp, ascending, thinned to cap by stride."""
    if cap < 1:
        raise ValueError("cap must be positive")
    stamps = sorted(set(int(t) for t in relevant_timestamps))
    stamps = strided_subset(stamps, cap)
    return [FrameSpec(t, frame_source.frame(t)) for t in stamps]


def compose_grid(frames: list[FrameSpec]) -> Storyboard:
    """Row-major near-square grid with a "t=<seconds>s" band under each cell."""
    if not frames:
        raise EmptyInput("at least one frame is required")
    sizes = {spec.image.size for spec in frames}
    if len(sizes) > 1:
        raise MixedDimensions(f"frame sizes differ: {sorted(sizes)}")
    cell_w, cell_h = sizes.pop()

    ordered = sorted(frames, key=lambda spec: spec.timestamp_s)
    n = len(ordered)
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)

    composite = Image.new("RGB", (cols * cell_w, rows * (cell_h + BAND_H)), "black")
    draw = ImageDraw.Draw(composite)
    font = ImageFont.load_default()

    manifest: list[tuple[int, int, int]] = []
    for i, spec in enumerate(ordered):
        row, col = divmod(i, cols)
        x = col * cell_w
        y = row * (cell_h + BAND_H)
        composite.paste(spec.image, (x, y))
        draw.text((x + 4, y + cell_h + 4), f"t={spec.timestamp_s}s", fill="white", font=font)
        manifest.append((row, col, spec.timestamp_s))

    return Storyboard(composite=composite, manifest=manifest)


def build_storyboard(relevant_timestamps, frame_source, cap: int = FRAME_CAP) -> Storyboard | None:
    """Select and compose in one step; None when there is nothing to show."""
    frames = select_frames(relevant_timestamps, frame_source, cap)
    if not frames:
        return None
    return compose_grid(frames)
