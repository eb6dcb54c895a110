"""Prompt template loading and placeholder substitution.

Templates live under vidagent/prompts as plain text with {{NAME}} markers.
Rendering is purely mechanical so prompt text can be snapshot-tested.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

from .gateway import PromptStage

_TEMPLATE_FILES = {
    PromptStage.REWRITE: "query_rewrite.txt",
    PromptStage.CLASSIFY: "query_classification.txt",
    PromptStage.INQUIRY: "user_inquiry.txt",
    PromptStage.SETTINGS: "settings_update.txt",
    PromptStage.PLAYER_ACTION: "player_action.txt",
    PromptStage.PERSONALIZE: "ad_personalization.txt",
    PromptStage.DENSIFY: "dense_generation.txt",
}

_PLACEHOLDER = re.compile(r"\{\{([A-Z0-9_]+)\}\}")


class MissingContextField(KeyError):
    def __init__(self, stage: PromptStage, name: str):
        super().__init__(f"{stage.value}: no value for placeholder {{{{{name}}}}}")
        self.stage = stage
        self.name = name


@lru_cache(maxsize=None)
def load_template(stage: PromptStage) -> str:
    filename = _TEMPLATE_FILES[stage]
    return resources.files("vidagent.prompts").joinpath(filename).read_text(encoding="utf-8")


def placeholders(stage: PromptStage) -> list[str]:
    """Distinct placeholder names in template order."""
    seen: list[str] = []
    for match in _PLACEHOLDER.finditer(load_template(stage)):
        if match.group(1) not in seen:
            seen.append(match.group(1))
    return seen


def render_prompt(stage: PromptStage, context: dict[str, str]) -> str:
    """Substitute every {{NAME}} marker; unknown context keys are ignored."""
    template = load_template(stage)

    def replace(match: re.Match) -> str:
        name = match.group(1)
        if name not in context:
            raise MissingContextField(stage, name)
        return str(context[name])

    return _PLACEHOLDER.sub(replace, template)
