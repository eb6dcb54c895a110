import json

import pytest

from vidagent.gateway import MissingFixture, MockBackend, PromptStage
from vidagent.orchestrator import (
    APOLOGY_TEXT,
    DEGRADED_INQUIRY_TEXT,
    Intent,
    POLITE_REPLY,
    RewriteResult,
    UnrecognizedSpecQuestion,
    ValidationFailed,
    _render_history,
    answer_inquiry,
    answer_prototype_help,
    answer_video_specs,
    classify_intent,
    fallback_classify,
    handle_query,
    parse_action_utterance,
    rewrite_query,
)
from vidagent.player import PlayerSettings, Profile, SessionState

from conftest import make_session, put_fixture, put_query_fixtures, write_frames
from intent_corpus import CORPUS

INQUIRY_FIXTURE = {
    "answer": "The video shows a garden soup being made.",
    "minimalAnswer": "A garden soup video.",
    "balancedAnswer": "It walks through growing vegetables and cooking them into a soup.",
    "expansiveAnswer": ("It follows a gardener from planting tomatoes and peppers "
                        "through harvesting and boiling them into a finished soup."),
}


class RecordingBackend:
    """MockBackend wrapper that keeps every request for inspection."""

    def __init__(self, fixtures_dir):
        self.inner = MockBackend(fixtures_dir)
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        return self.inner.complete(request)


class TestRewriteQuery:
    def test_model_path_worked_example(self, sample_index, fixtures_root, mock_backend):
        put_fixture(fixtures_root, "rewrite", "can-you-describe-it", {
            "rephrased": "Can you describe the car?",
            "edited": "Can you describe it?",
            "reasonForTimestamp": "The car appears at 45 seconds.",
            "relevantTimestamps": [45],
        })
        session = make_session(sample_index, [], mock_backend)
        result = rewrite_query("Can you describe it?", session)
        assert result.rephrased == "Can you describe the car?"
        assert result.edited == "Can you describe it?"
        assert result.relevantTimestamps == [45]
        assert result.reasonForTimestamp == "The car appears at 45 seconds."

    def test_out_of_range_timestamps_dropped(self, sample_index, fixtures_root, mock_backend):
        put_fixture(fixtures_root, "rewrite", "what-happens", {
            "rephrased": "r", "edited": "e", "relevantTimestamps": [10, 9999],
        })
        session = make_session(sample_index, [], mock_backend)
        assert rewrite_query("What happens?", session).relevantTimestamps == [10]

    def test_degrade_uses_lexical_search(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        result = rewrite_query("For how long is he boiling the water?", session)
        assert result.rephrased == "For how long is he boiling the water?"
        assert result.edited == result.rephrased
        assert 123 in result.relevantTimestamps

    def test_degrade_stopword_only_query_keeps_empty_stamps(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        assert rewrite_query("is it the", session).relevantTimestamps == []

    def test_empty_query_rejected(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        with pytest.raises(ValueError):
            rewrite_query("   ", session)


class TestFallbackClassify:
    @pytest.mark.parametrize("utterance,expected", CORPUS,
                             ids=[u[:40] for u, _ in CORPUS])
    def test_corpus(self, utterance, expected):
        assert fallback_classify(utterance).value == expected

    def test_vocative_stripped(self):
        assert fallback_classify("Hey Blue, pause") is Intent.VIDEO_PLAYER_ACTION


class TestClassifyIntent:
    def test_mock_path_and_replay_from_history(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "What is this video about?", "INFORMATIONAL_QUERY",
                           inquiry=INQUIRY_FIXTURE)
        put_query_fixtures(fixtures_root, "Can you repeat that?", "REPEAT_LAST_ANSWER")
        session = make_session(sample_index, [], mock_backend)
        handle_query(session, "What is this video about?")
        rewrite = rewrite_query("Can you repeat that?", session)
        intent, replay = classify_intent(rewrite, session)
        assert intent is Intent.REPEAT_LAST_ANSWER
        assert replay == session.history[-1].response_text

    def test_replay_skips_prior_repeats(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "What is this video about?", "INFORMATIONAL_QUERY",
                           inquiry=INQUIRY_FIXTURE)
        put_query_fixtures(fixtures_root, "Repeat that", "REPEAT_LAST_ANSWER")
        session = make_session(sample_index, [], mock_backend)
        first = handle_query(session, "What is this video about?")
        second = handle_query(session, "Repeat that")
        third = handle_query(session, "Repeat that")
        assert second.speak == first.speak
        assert third.speak == first.speak

    def test_replay_with_no_history(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "Repeat that", "REPEAT_LAST_ANSWER")
        session = make_session(sample_index, [], mock_backend)
        response = handle_query(session, "Repeat that")
        assert response.speak == "I haven't answered anything yet."


class TestVideoSpecs:
    def rewrite(self, text):
        return RewriteResult(rephrased=text, edited=text)

    def test_duration(self, sample_index):
        state = SessionState()
        answer = answer_video_specs(self.rewrite("How long is the video?"), sample_index, state)
        assert answer == "This video is 4 minutes long."

    def test_title(self, sample_index):
        answer = answer_video_specs(self.rewrite("What is the title?"), sample_index, SessionState())
        assert answer == 'The title of this video is "Garden Veggie Soup".'

    def test_current_timestamp(self, sample_index):
        state = SessionState(position_s=90)
        answer = answer_video_specs(self.rewrite("What is the current timestamp?"),
                                    sample_index, state)
        assert answer == "The video is at 1 minute 30 seconds."

    def test_unrecognized_raises(self, sample_index):
        with pytest.raises(UnrecognizedSpecQuestion):
            answer_video_specs(self.rewrite("What codec is this?"), sample_index, SessionState())


class TestPrototypeHelp:
    def answer(self, text):
        return answer_prototype_help(RewriteResult(rephrased=text, edited=text))

    def test_font_topic(self):
        assert 'Say "increase the font size"' in self.answer("How can I increase the font size?")

    def test_unknown_capability(self):
        answer = self.answer("What is the teleport feature?")
        assert answer.startswith("That isn't available in this prototype.")

    def test_learning_mode_has_dedicated_answer(self):
        assert "Learning mode isn't available" in self.answer("What is learning mode?")

    def test_generic_help_names_question_asking(self):
        answer = self.answer("How can you help me?")
        assert "ask" in answer.lower()

    def test_identity_question(self):
        assert "Blue" in self.answer("What is your name?")


class TestParseActionUtterance:
    def parse(self, text, position=50, duration=240):
        return parse_action_utterance(text, SessionState(position_s=position), duration)

    def test_last_minute(self):
        request = self.parse("Skip to the last minute")
        assert request.type == "GO_TO_TIMESTAMP"
        assert request.target_s == 180

    def test_navigate_with_seconds(self):
        assert self.parse("Navigate to second 23").target_s == 23

    def test_minutes_multiplied(self):
        assert self.parse("go to 2 minutes").target_s == 120

    def test_rewind_with_offset(self):
        request = self.parse("Rewind 10 seconds")
        assert request.type == "REWIND"
        assert request.offset_s == 10

    def test_bare_rewind_defaults(self):
        assert self.parse("Rewind").offset_s is None

    def test_restart_phrases(self):
        assert self.parse("Play the video from the beginning").type == "RESTART"
        assert self.parse("Start over").type == "RESTART"

    def test_pause_and_stop(self):
        assert self.parse("Pause").type == "PAUSE"
        assert self.parse("Stop").type == "PAUSE"

    def test_play_fallback(self):
        assert self.parse("Resume").type == "PLAY"


class TestHandleQueryMockPath:
    def test_informational_tier_follows_profile(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "What is this video about?", "INFORMATIONAL_QUERY",
                           inquiry=INQUIRY_FIXTURE)
        blind = make_session(sample_index, [], mock_backend, profile=Profile.BLIND)
        response = handle_query(blind, "What is this video about?")
        assert response.speak == INQUIRY_FIXTURE["expansiveAnswer"]
        assert response.intent is Intent.INFORMATIONAL_QUERY

        sighted = make_session(sample_index, [], mock_backend, profile=Profile.SIGHTED)
        response = handle_query(sighted, "What is this video about?")
        assert response.speak == INQUIRY_FIXTURE["balancedAnswer"]

    def test_action_resolution_preserved_verbatim(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(
            fixtures_root, "Navigate to second 23", "VIDEO_PLAYER_ACTION",
            action={"type": "GO_TO_TIMESTAMP", "newTimestamp": 23,
                    "resolution": "Navigating to second 23."})
        session = make_session(sample_index, [], mock_backend)
        response = handle_query(session, "Navigate to second 23")
        assert response.action.type == "GO_TO_TIMESTAMP"
        assert response.action.newTimestamp == 23
        assert response.speak == "Navigating to second 23."
        assert session.state.position_s == 23
        assert session.state.ad_cursor == 22
        kinds = [e.kind for e in response.events]
        assert kinds[0] == "action_resolution"
        assert "speak" in kinds

    def test_settings_merge_and_reason(self, sample_index, fixtures_root, mock_backend):
        target = PlayerSettings(darkMode=True).to_dict()
        target["updateReason"] = "I have set Dark mode to True."
        put_query_fixtures(fixtures_root, "I prefer dark mode", "APP_SETTINGS",
                           settings=target)
        session = make_session(sample_index, [], mock_backend)
        response = handle_query(session, "I prefer dark mode")
        assert session.state.settings.darkMode is True
        assert response.speak == "I have set Dark mode to True."
        changed = [e for e in response.events if e.kind == "settings_changed"]
        assert len(changed) == 1
        assert changed[0].payload["settings"]["darkMode"] is True

    def test_specs_answer_without_handler_fixture(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend)
        response = handle_query(session, "How long is the video?")
        assert response.speak == "This video is 4 minutes long."
        assert response.intent is Intent.VIDEO_SPECS

    def test_unrecognized_spec_reroutes_to_inquiry(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "What codec does the video use?", "VIDEO_SPECS",
                           inquiry=INQUIRY_FIXTURE)
        session = make_session(sample_index, [], mock_backend)
        response = handle_query(session, "What codec does the video use?")
        assert response.intent is Intent.INFORMATIONAL_QUERY
        assert response.speak == INQUIRY_FIXTURE["balancedAnswer"]

    def test_missing_fixture_propagates(self, sample_index, mock_backend):
        session = make_session(sample_index, [], mock_backend)
        with pytest.raises(MissingFixture):
            handle_query(session, "What is this video about?")

    def test_history_grows_by_one_per_query(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend)
        for expected in (1, 2, 3):
            handle_query(session, "How long is the video?")
            assert len(session.history) == expected

    def test_speak_wrapped_in_pause_resume_while_playing(self, sample_index, fixtures_root,
                                                         mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend)
        session.state.playing = True
        response = handle_query(session, "How long is the video?")
        kinds = [e.kind for e in response.events]
        assert kinds == ["pause", "speak", "resume"]

    def test_speak_carries_session_speech_settings(self, sample_index, fixtures_root,
                                                   mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend, profile=Profile.SIGHTED)
        response = handle_query(session, "How long is the video?")
        (speak,) = [e for e in response.events if e.kind == "speak"]
        assert speak.payload["rate"] == 1.1
        assert speak.payload["voice"] == "Google default UK female"


class TestStoryboardTrigger:
    def _session(self, sample_index, fixtures_root, tmp_path, timestamps):
        put_query_fixtures(fixtures_root, "Compare the garden scenes", "INFORMATIONAL_QUERY",
                           timestamps=timestamps, inquiry=INQUIRY_FIXTURE)
        backend = RecordingBackend(fixtures_root)
        frames_root = tmp_path / "frames"
        write_frames(frames_root, "veggie_soup", [0, 15, 17, 45, 120, 230])
        from vidagent.storyboard import DirectoryFrameSource
        session = make_session(sample_index, [], backend,
                               frame_source=DirectoryFrameSource(frames_root, "veggie_soup"))
        return session, backend

    def test_two_timestamps_attach_storyboard(self, sample_index, fixtures_root, tmp_path):
        session, backend = self._session(sample_index, fixtures_root, tmp_path, [15, 120])
        handle_query(session, "Compare the garden scenes")
        inquiry_requests = [r for r in backend.requests if r.stage is PromptStage.INQUIRY]
        assert len(inquiry_requests) == 1
        assert len(inquiry_requests[0].images) == 1
        assert inquiry_requests[0].images[0][:8] == b"\x89PNG\r\n\x1a\n"

    def test_single_nearby_timestamp_skips_storyboard(self, sample_index, fixtures_root, tmp_path):
        session, backend = self._session(sample_index, fixtures_root, tmp_path, [3])
        session.state.position_s = 0
        handle_query(session, "Compare the garden scenes")
        (request,) = [r for r in backend.requests if r.stage is PromptStage.INQUIRY]
        assert request.images == []

    def test_single_distant_timestamp_attaches(self, sample_index, fixtures_root, tmp_path):
        session, backend = self._session(sample_index, fixtures_root, tmp_path, [120])
        session.state.position_s = 0
        handle_query(session, "Compare the garden scenes")
        (request,) = [r for r in backend.requests if r.stage is PromptStage.INQUIRY]
        assert len(request.images) == 1

    def test_missing_frames_degrade_to_no_image(self, sample_index, fixtures_root, tmp_path):
        put_query_fixtures(fixtures_root, "Compare the garden scenes", "INFORMATIONAL_QUERY",
                           timestamps=[500, 600], inquiry=INQUIRY_FIXTURE)
        backend = RecordingBackend(fixtures_root)
        from vidagent.storyboard import DirectoryFrameSource
        session = make_session(sample_index, [], backend,
                               frame_source=DirectoryFrameSource(tmp_path / "none", "veggie_soup"))
        response = handle_query(session, "Compare the garden scenes")
        (request,) = [r for r in backend.requests if r.stage is PromptStage.INQUIRY]
        assert request.images == []
        assert response.speak == INQUIRY_FIXTURE["balancedAnswer"]


class TestHandleQueryDegraded:
    def test_action_without_backend(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        session.state.position_s = 42
        response = handle_query(session, "Rewind")
        assert response.intent is Intent.VIDEO_PLAYER_ACTION
        assert session.state.position_s == 37

    def test_settings_without_backend(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        response = handle_query(session, "Make it louder")
        assert response.intent is Intent.APP_SETTINGS
        assert session.state.settings.videoPlayerVolume == 0.9

    def test_inquiry_without_backend(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        response = handle_query(session, "Is there a lion in the video?")
        assert response.speak == DEGRADED_INQUIRY_TEXT

    def test_specs_without_backend(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        response = handle_query(session, "How long is the video?")
        assert response.speak == "This video is 4 minutes long."


class TestPoliteness:
    @pytest.mark.parametrize("utterance", [
        "Thank you", "thanks!", "Nothing else", "No thanks",
        "That's all", "Thank you, Blue", "Blue, thanks",
    ])
    def test_short_circuit(self, sample_index, utterance):
        # no backend and no fixtures: politeness must not touch the model path
        session = make_session(sample_index, [], MockBackend("/nonexistent"))
        response = handle_query(session, utterance)
        assert response.speak == POLITE_REPLY
        assert len(session.history) == 1

    def test_thankful_question_not_short_circuited(self, sample_index):
        session = make_session(sample_index, [], backend=None)
        response = handle_query(session, "Thanks, and how long is the video?")
        assert response.speak != POLITE_REPLY


class FakeClock:
    def __init__(self, step=0.0):
        self.now = 0.0
        self.step = step

    def __call__(self):
        self.now += self.step
        return self.now


class TestTimingAndErrors:
    def test_thinking_earcon_on_slow_response(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend, clock=FakeClock(step=0.7))
        response = handle_query(session, "How long is the video?")
        assert response.events[0].kind == "earcon"
        assert response.events[0].payload == {"name": "thinking"}

    def test_no_earcon_on_fast_response(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend, clock=FakeClock(step=0.01))
        response = handle_query(session, "How long is the video?")
        assert all(e.kind != "earcon" for e in response.events)

    def test_backend_crash_becomes_spoken_apology(self, sample_index):
        class ExplodingBackend:
            def complete(self, request):
                raise RuntimeError("provider meltdown")

        session = make_session(sample_index, [], ExplodingBackend())
        response = handle_query(session, "What is this video about?")
        assert response.speak == APOLOGY_TEXT
        error_events = [e for e in response.events if e.kind == "error"]
        assert len(error_events) == 1
        assert "meltdown" in error_events[0].payload["message"]
        assert len(session.history) == 1

    def test_cancellation_mid_pipeline(self, sample_index, fixtures_root):
        put_query_fixtures(fixtures_root, "What is this video about?", "INFORMATIONAL_QUERY",
                           inquiry=INQUIRY_FIXTURE)

        class CancellingBackend(RecordingBackend):
            def __init__(self, fixtures_dir, session_ref):
                super().__init__(fixtures_dir)
                self.session_ref = session_ref

            def complete(self, request):
                text = super().complete(request)
                if request.stage is PromptStage.REWRITE:
                    self.session_ref[0].request_cancel()
                return text

        session_ref = []
        backend = CancellingBackend(fixtures_root, session_ref)
        session = make_session(sample_index, [], backend)
        session_ref.append(session)
        response = handle_query(session, "What is this video about?")
        assert response.speak == ""
        assert [e.kind for e in response.events] == ["earcon"]
        assert response.events[0].payload == {"name": "cancelled"}
        assert session.history == []  # cancelled turns leave no trace
        stages = [r.stage for r in backend.requests]
        assert PromptStage.INQUIRY not in stages


class TestOutsideVideoContract:
    def _fixture(self, answer, outside=True):
        return {
            "answer": answer,
            "minimalAnswer": "m", "balancedAnswer": "b", "expansiveAnswer": "e",
            "outsideVideo": outside,
        }

    def test_valid_prefix_accepted(self, sample_index, fixtures_root, mock_backend):
        answer = ("It looks like the video doesn't provide this information, but I "
                  "found this on the web: Washington, D.C.")
        put_fixture(fixtures_root, "inquiry", "what-is-the-capital-of-the-us",
                    self._fixture(answer))
        session = make_session(sample_index, [], mock_backend)
        rewrite = RewriteResult(rephrased="What is the capital of the US?",
                                edited="What is the capital of the US?")
        tiers = answer_inquiry(rewrite, None, session)
        assert tiers.outside_video is True

    def test_missing_prefix_rejected(self, sample_index, fixtures_root, mock_backend):
        put_fixture(fixtures_root, "inquiry", "what-is-the-capital-of-the-us",
                    self._fixture("Washington, D.C."))
        session = make_session(sample_index, [], mock_backend)
        rewrite = RewriteResult(rephrased="What is the capital of the US?",
                                edited="What is the capital of the US?")
        with pytest.raises(ValidationFailed):
            answer_inquiry(rewrite, None, session)


class TestHistoryRendering:
    def test_empty_history_placeholder(self):
        assert _render_history([]) == "(no prior turns)"

    def test_window_limits_to_eight_turns(self, sample_index, fixtures_root, mock_backend):
        put_query_fixtures(fixtures_root, "How long is the video?", "VIDEO_SPECS")
        session = make_session(sample_index, [], mock_backend)
        for _ in range(10):
            handle_query(session, "How long is the video?")
        rendered = _render_history(session.history)
        assert rendered.count("User: ") == 8
        assert rendered.count("Blue: ") == 8
