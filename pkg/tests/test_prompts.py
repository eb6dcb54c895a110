from pathlib import Path

import pytest

from vidagent.gateway import PromptStage
from vidagent.prompting import MissingContextField, load_template, placeholders, render_prompt

GOLDEN = Path(__file__).parent / "golden"

EXPECTED_PLACEHOLDERS = {
    PromptStage.REWRITE: {"VIDEO_TITLE", "DURATION_S", "CURRENT_TIMESTAMP_S",
                          "TRANSCRIPT", "DESCRIPTIONS", "HISTORY", "USER_QUERY"},
    PromptStage.CLASSIFY: {"HISTORY", "USER_QUERY"},
    PromptStage.INQUIRY: {"VIDEO_TITLE", "DURATION_S", "CURRENT_TIMESTAMP_S", "TRANSCRIPT",
                          "DESCRIPTIONS", "HISTORY", "USER_QUERY", "USER_PREFERENCES"},
    PromptStage.SETTINGS: {"CURRENT_SETTINGS", "AVAILABLE_VOICES", "HISTORY", "USER_QUERY"},
    PromptStage.PLAYER_ACTION: {"VIDEO_TITLE", "DURATION_S", "CURRENT_TIMESTAMP_S", "USER_QUERY"},
    PromptStage.PERSONALIZE: {"VIDEO_TITLE", "TRANSCRIPT", "DESCRIPTIONS",
                              "PLAIN_TRANSCRIPT", "USER_DESCRIPTION"},
    PromptStage.DENSIFY: {"VIDEO_TITLE", "DURATION_S", "WINDOW_START_S",
                          "WINDOW_END_S", "TRANSCRIPT_WINDOW"},
}


@pytest.mark.parametrize("stage", list(PromptStage))
def test_placeholder_sets(stage):
    assert set(placeholders(stage)) == EXPECTED_PLACEHOLDERS[stage]


@pytest.mark.parametrize("stage", list(PromptStage))
def test_render_fills_every_placeholder(stage):
    context = {name: f"<{name.lower()}>" for name in placeholders(stage)}
    text = render_prompt(stage, context)
    assert "{{" not in text
    for value in context.values():
        assert value in text


def test_missing_field_names_stage_and_placeholder():
    with pytest.raises(MissingContextField) as err:
        render_prompt(PromptStage.CLASSIFY, {"HISTORY": "x"})
    assert "USER_QUERY" in str(err.value)
    assert err.value.name == "USER_QUERY"


def test_extra_context_keys_ignored():
    text = render_prompt(PromptStage.CLASSIFY,
                         {"HISTORY": "h", "USER_QUERY": "q", "UNUSED": "nope"})
    assert "nope" not in text


def test_classify_golden_snapshot():
    text = render_prompt(PromptStage.CLASSIFY, {
        "HISTORY": "User: What is this video about?\nBlue: A garden soup recipe.",
        "USER_QUERY": "Can you repeat that?",
    })
    assert text == (GOLDEN / "classify_prompt.txt").read_text()


class TestTemplateContent:
    """Key instruction wording each downstream validator depends on."""

    def test_rewrite_mentions_reformulation_and_markers(self):
        text = load_template(PromptStage.REWRITE)
        assert "reformulate the user question" in text
        assert "Outside the video content, ..." in text
        assert "Within the video, ..." in text
        assert "relevantTimestamps" in text
        assert "Navigate to timestamp 23 seconds" in text

    def test_classify_lists_all_six_categories(self):
        text = load_template(PromptStage.CLASSIFY)
        for name in ("INFORMATIONAL_QUERY", "VIDEO_PLAYER_ACTION", "APP_SETTINGS",
                     "PROTOTYPE_HELP", "VIDEO_SPECS", "REPEAT_LAST_ANSWER"):
            assert name in text
        assert "Repeat what they said in the video" in text

    def test_inquiry_defines_answer_tiers(self):
        text = load_template(PromptStage.INQUIRY)
        for field_name in ("minimalAnswer", "balancedAnswer", "expansiveAnswer"):
            assert field_name in text
        assert "outsideVideo" in text

    def test_player_action_lists_types_and_fields(self):
        text = load_template(PromptStage.PLAYER_ACTION)
        for action in ("PLAY", "PAUSE", "REWIND", "FAST_FORWARD", "GO_TO_TIMESTAMP", "RESTART"):
            assert action in text
        assert "newTimestamp" in text
        assert "resolution" in text

    def test_settings_names_update_reason(self):
        text = load_template(PromptStage.SETTINGS)
        assert "updateReason" in text

    def test_personalization_rules(self):
        text = load_template(PromptStage.PERSONALIZE)
        assert "The video begins with" in text
        assert "The video ends with" in text
        assert "adverbs of time" in text
        for limit in ("60 words", "90 words", "120 words"):
            assert limit in text

    def test_no_template_contains_emdash(self):
        for stage in PromptStage:
            assert "—" not in load_template(stage)
