import json
import socket
from pathlib import Path

import pytest
from PIL import Image

from vidagent.ad_pipeline import fallback_personalize
from vidagent.content_index import ContentIndex, DenseDescription, TranscriptSegment
from vidagent.gateway import MockBackend, fixture_slug
from vidagent.orchestrator import AgentSession
from vidagent.player import Profile, SessionState, profile_defaults

_LOOPBACK = ("127.0.0.1", "::1", "localhost")


@pytest.fixture(autouse=True)
def _no_external_network(monkeypatch):
    """The suite must run fully offline; only loopback sockets are allowed."""
    real_connect = socket.socket.connect

    def guarded(self, address, *args, **kwargs):
        host = address[0] if isinstance(address, tuple) else address
        if isinstance(host, (bytes, str)) and str(host) not in _LOOPBACK:
            raise AssertionError(f"test attempted external network connection to {host!r}")
        return real_connect(self, address, *args, **kwargs)

    monkeypatch.setattr(socket.socket, "connect", guarded)


SAMPLE_VTT = """WEBVTT

00:00:01.000 --> 00:00:04.000
Hello and welcome to the garden.

00:00:12.000 --> 00:00:16.000
Today we plant tomatoes and peppers.

00:02:03.400 --> 00:02:05.000
boil them for 10 minutes

00:03:30.000 --> 00:03:40.000
Thanks for watching our soup come together.
"""


def make_index(video_id="veggie_soup", duration_s=240):
    transcript = [
        TranscriptSegment(1, "Hello and welcome to the garden.", 4),
        TranscriptSegment(12, "Today we plant tomatoes and peppers.", 16),
        TranscriptSegment(123, "boil them for 10 minutes", 125),
        TranscriptSegment(210, "Thanks for watching our soup come together.", 220),
    ]
    dense = [
        DenseDescription(0, "A sunlit garden with raised wooden beds."),
        DenseDescription(15, "A man kneels beside a bed holding a trowel."),
        DenseDescription(17, "He pats soil around a tomato seedling."),
        DenseDescription(45, "A red car passes on the road behind the fence."),
        DenseDescription(120, "A pot begins to bubble on an outdoor stove."),
        DenseDescription(230, "The finished soup is ladled into a white bowl."),
    ]
    transcript = [s for s in transcript if s.end_s <= duration_s]
    dense = [d for d in dense if d.timestamp_s <= duration_s]
    return ContentIndex(video_id=video_id, title="Garden Veggie Soup",
                        duration_s=duration_s, transcript=transcript, dense=dense)


@pytest.fixture
def sample_index():
    return make_index()


@pytest.fixture
def personalized(sample_index):
    return fallback_personalize(sample_index.dense)


def put_fixture(root: Path, stage: str, key: str, payload) -> Path:
    directory = root / stage
    directory.mkdir(parents=True, exist_ok=True)
    text = payload if isinstance(payload, str) else json.dumps(payload)
    path = directory / f"{key}.txt"
    path.write_text(text, encoding="utf-8")
    return path


def put_query_fixtures(root: Path, raw: str, intent: str, *, edited=None, rephrased=None,
                       timestamps=None, inquiry=None, action=None, settings=None):
    """Author the full rewrite/classify/handler fixture chain for one utterance."""
    edited = edited or raw
    rephrased = rephrased or edited
    put_fixture(root, "rewrite", fixture_slug(raw), {
        "rephrased": rephrased,
        "edited": edited,
        "reasonForTimestamp": None,
        "relevantTimestamps": timestamps or [],
    })
    put_fixture(root, "classify", fixture_slug(edited), {"responseType": intent})
    if inquiry is not None:
        put_fixture(root, "inquiry", fixture_slug(rephrased), inquiry)
    if action is not None:
        put_fixture(root, "player_action", fixture_slug(edited), action)
    if settings is not None:
        put_fixture(root, "settings", fixture_slug(edited), settings)


def make_session(index, personalized_entries, backend, profile=Profile.SIGHTED, **kwargs):
    settings, _ = profile_defaults(profile)
    return AgentSession(
        index=index,
        personalized=personalized_entries,
        state=SessionState(settings=settings, profile=profile),
        backend=backend,
        **kwargs,
    )


@pytest.fixture
def fixtures_root(tmp_path):
    root = tmp_path / "llm"
    root.mkdir()
    return root


@pytest.fixture
def mock_backend(fixtures_root):
    return MockBackend(fixtures_root)


def write_frames(root: Path, video_id: str, seconds, size=(320, 180)):
    directory = root / video_id
    directory.mkdir(parents=True, exist_ok=True)
    for t in seconds:
        color = ((t * 37) % 256, (t * 91) % 256, (t * 53) % 256)
        Image.new("RGB", size, color).save(directory / f"{t}.png")
    return root
