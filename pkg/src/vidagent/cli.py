"""Command-line entry points for the offline pipelines and the service.

Exit codes: 0 success, 1 validation failure, 2 configuration or IO failure.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from . import ad_pipeline
from .content_index import (
    ContentIndex,
    MalformedDocument,
    SchemaVersionMismatch,
    CorruptIndex,
    load_index,
    parse_transcript,
    persist_index,
)
from .gateway import MissingFixture, MockBackend, RemoteBackend
from .replay import AssertionFailed, SessionScript, replay_session
from .service import VideoStore, create_app
from .storyboard import DirectoryFrameSource

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _build_backend(backend_name: str, fixtures: str | None, endpoint: str | None,
                   api_key_env: str):
    if backend_name == "mock":
        if not fixtures:
            _fail(EXIT_CONFIG, "--backend mock requires --fixtures")
        fixtures_path = Path(fixtures)
        if not fixtures_path.is_dir():
            _fail(EXIT_CONFIG, f"fixtures directory not found: {fixtures}")
        return MockBackend(fixtures_path)
    if not endpoint:
        _fail(EXIT_CONFIG, "--backend remote requires --endpoint")
    if not os.environ.get(api_key_env):
        _fail(EXIT_CONFIG, f"environment variable {api_key_env} is not set")
    return RemoteBackend(endpoint=endpoint, api_key_env=api_key_env)


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def main(verbose: bool):
    """Accessible video player engine."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING)


@main.command()
@click.argument("transcript", type=click.Path(exists=True, dir_okay=False))
@click.option("--video-id", required=True)
@click.option("--title", required=True)
@click.option("--duration", "duration_s", type=int, required=True, help="Video duration in seconds.")
@click.option("--index-dir", type=click.Path(file_okay=False), default=".", show_default=True)
def index(transcript: str, video_id: str, title: str, duration_s: int, index_dir: str):
    """Build a content index from a timed-text transcript file."""
    try:
        document = Path(transcript).read_text(encoding="utf-8")
        segments = parse_transcript(document)
        content = ContentIndex(video_id=video_id, title=title, duration_s=duration_s,
                               transcript=segments, dense=[])
        content.validate()
    except MalformedDocument as exc:
        _fail(EXIT_VALIDATION, f"transcript is malformed: {exc}")
    except (OSError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    out = Path(index_dir) / f"{video_id}.index.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    persist_index(content, out)
    click.echo(f"wrote {out} ({len(segments)} segments)")


def _load_index_or_fail(index_dir: str, video_id: str) -> ContentIndex:
    path = Path(index_dir) / f"{video_id}.index.json"
    if not path.is_file():
        _fail(EXIT_CONFIG, f"index not found: {path}")
    try:
        return load_index(path)
    except (CorruptIndex, SchemaVersionMismatch) as exc:
        _fail(EXIT_CONFIG, f"cannot load {path}: {exc}")


@main.command()
@click.option("--video-id", required=True)
@click.option("--index-dir", type=click.Path(exists=True, file_okay=False), default=".", show_default=True)
@click.option("--fixtures", type=click.Path(), help="Fixture directory for the mock backend.")
@click.option("--backend", "backend_name", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--endpoint", help="Remote backend URL.")
@click.option("--api-key-env", default="VIDAGENT_API_KEY", show_default=True)
@click.option("--frames-dir", type=click.Path(file_okay=False), help="Directory of per-second still frames.")
def densify(video_id: str, index_dir: str, fixtures: str | None, backend_name: str,
            endpoint: str | None, api_key_env: str, frames_dir: str | None):
    """Generate dense descriptions for a video and store them in its index."""
    backend = _build_backend(backend_name, fixtures, endpoint, api_key_env)
    content = _load_index_or_fail(index_dir, video_id)
    frame_source = DirectoryFrameSource(frames_dir, video_id) if frames_dir else None
    try:
        dense = ad_pipeline.generate_dense(content, backend, frame_source)
    except MissingFixture as exc:
        _fail(EXIT_CONFIG, str(exc))
    except ad_pipeline.InvalidModelOutput as exc:
        _fail(EXIT_VALIDATION, f"model output rejected: {exc}")
    content.dense = dense
    persist_index(content, Path(index_dir) / f"{video_id}.index.json")
    click.echo(f"wrote {len(dense)} dense descriptions")


@main.command()
@click.option("--video-id", required=True)
@click.option("--index-dir", type=click.Path(exists=True, file_okay=False), default=".", show_default=True)
@click.option("--profile", type=click.Choice(["Blind", "LowVision", "Sighted"]), default="Blind", show_default=True)
@click.option("--fixtures", type=click.Path(), help="Fixture directory for the mock backend.")
@click.option("--backend", "backend_name", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--endpoint", help="Remote backend URL.")
@click.option("--api-key-env", default="VIDAGENT_API_KEY", show_default=True)
@click.option("--fallback", is_flag=True, help="Use the deterministic no-model personalization.")
def personalize(video_id: str, index_dir: str, profile: str, fixtures: str | None,
                backend_name: str, endpoint: str | None, api_key_env: str, fallback: bool):
    """Produce the tiered personalized description sidecar for a video."""
    from .player import Profile, profile_defaults

    content = _load_index_or_fail(index_dir, video_id)
    if not content.dense:
        _fail(EXIT_CONFIG, f"index for {video_id!r} has no dense descriptions; run densify first")
    if fallback:
        entries = ad_pipeline.fallback_personalize(content.dense)
    else:
        backend = _build_backend(backend_name, fixtures, endpoint, api_key_env)
        _, user_description = profile_defaults(Profile(profile))
        try:
            entries = ad_pipeline.personalize(content.dense, content, user_description, backend)
        except MissingFixture as exc:
            _fail(EXIT_CONFIG, str(exc))
        except ad_pipeline.ValidationFailed as exc:
            _fail(EXIT_VALIDATION, f"personalized output rejected: {exc}")
        except ad_pipeline.InvalidModelOutput as exc:
            _fail(EXIT_VALIDATION, f"model output rejected: {exc}")
    out = Path(index_dir) / f"{video_id}.described.json"
    ad_pipeline.write_sidecar(entries, out)
    click.echo(f"wrote {out} ({len(entries)} descriptions)")


@main.command()
@click.argument("sidecar", type=click.Path(exists=True, dir_okay=False))
def validate(sidecar: str):
    """Check a personalized description sidecar against every hard rule."""
    try:
        entries = ad_pipeline.read_sidecar(sidecar)
    except (json.JSONDecodeError, KeyError, OSError) as exc:
        _fail(EXIT_CONFIG, f"cannot read sidecar: {exc}")
    report = ad_pipeline.validate_personalized(entries)
    if report.ok:
        click.echo(f"ok: {len(entries)} descriptions pass")
        return
    for violation in report.violations:
        click.echo(f"violation: {violation}", err=True)
    sys.exit(EXIT_VALIDATION)


@main.command()
@click.option("--index-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--frames-dir", type=click.Path(file_okay=False), help="Directory of per-second still frames.")
@click.option("--fixtures", type=click.Path(), help="Fixture directory for the mock backend.")
@click.option("--backend", "backend_name", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--endpoint", help="Remote backend URL.")
@click.option("--api-key-env", default="VIDAGENT_API_KEY", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8710, show_default=True)
def serve(index_dir: str, frames_dir: str | None, fixtures: str | None, backend_name: str,
          endpoint: str | None, api_key_env: str, host: str, port: int):
    """Run the HTTP/WebSocket service."""
    import uvicorn

    backend = _build_backend(backend_name, fixtures, endpoint, api_key_env)
    store = VideoStore(index_dir, frames_dir)
    app = create_app(store, backend)
    try:
        uvicorn.run(app, host=host, port=port, log_level="info")
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot bind {host}:{port}: {exc}")


@main.command()
@click.argument("script", type=click.Path(exists=True, dir_okay=False))
@click.option("--index-dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--fixtures", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--frames-dir", type=click.Path(file_okay=False), help="Directory of per-second still frames.")
@click.option("--out", type=click.Path(dir_okay=False), help="Write the transcript to a file.")
def replay(script: str, index_dir: str, fixtures: str, frames_dir: str | None, out: str | None):
    """Replay a session script against the mock backend deterministically."""
    try:
        parsed = SessionScript.load(script)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        _fail(EXIT_CONFIG, f"cannot load script: {exc}")
    content = _load_index_or_fail(index_dir, parsed.video_id)
    sidecar = Path(index_dir) / f"{parsed.video_id}.described.json"
    personalized = ad_pipeline.read_sidecar(sidecar) if sidecar.is_file() else []
    backend = MockBackend(Path(fixtures))
    frame_source = DirectoryFrameSource(frames_dir, parsed.video_id) if frames_dir else None
    try:
        transcript = replay_session(parsed, content, personalized, backend, frame_source)
    except AssertionFailed as exc:
        _fail(EXIT_VALIDATION, str(exc))
    except MissingFixture as exc:
        _fail(EXIT_CONFIG, str(exc))
    if out:
        Path(out).write_text(transcript, encoding="utf-8")
    else:
        click.echo(transcript, nl=False)


if __name__ == "__main__":
    main()
