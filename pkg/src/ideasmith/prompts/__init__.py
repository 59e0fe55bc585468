"""Prompt templates for the three agent roles.

Templates live as plain-text assets next to this module and are rendered by
substituting ``{placeholder}`` tokens. Rendering fails closed: every
placeholder in the body must be bound, and unknown bindings are rejected.
The citation-format rules are a template of their own and are inlined
wherever a body carries ``{CITATION_PROMPT}``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from types import MappingProxyType
from typing import Mapping

__all__ = ["PromptRenderError", "RenderedPrompt", "TemplateId", "placeholders", "render", "template_body"]

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")
_COMPONENT_MARK = "[COMPONENT]"
_CITATION_SLOT = "CITATION_PROMPT"


class TemplateId(str, Enum):
    IDEATION = "ideation"
    IDEA_REVISION = "idea_revision"
    LITERATURE = "literature"
    GOALS = "goals"
    PLAN = "plan"
    REVISING = "revising"
    CITATION_RULES = "citation_rules"
    CRITIQUES = "critiques"
    ADDITIONAL_CRITIQUES = "additional_critiques"
    SUGGESTIONS = "suggestions"
    NEW_CRITERION = "new_criterion"
    HYPOTHETICAL_ABSTRACT = "hypothetical_abstract"
    QUERY_REWRITE = "query_rewrite"
    FACT_CHECK = "fact_check"


class PromptRenderError(Exception):
    """A template was rendered with missing or unknown placeholders."""


@lru_cache(maxsize=None)
def template_body(template_id: TemplateId) -> str:
    return resources.files(__name__).joinpath(f"{template_id.value}.txt").read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def placeholders(template_id: TemplateId) -> frozenset[str]:
    """Placeholder names in a template body, after citation-rule inlining."""
    body = template_body(template_id)
    names = set(_PLACEHOLDER_RE.findall(body))
    if _CITATION_SLOT in names:
        names.discard(_CITATION_SLOT)
        names |= set(_PLACEHOLDER_RE.findall(template_body(TemplateId.CITATION_RULES)))
    return frozenset(names)


@dataclass(frozen=True)
class RenderedPrompt:
    """A fully-bound prompt, keeping its template identity for replay keying."""

    template_id: str
    text: str
    variables: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "variables", MappingProxyType(dict(self.variables)))


def render(
    template_id: TemplateId,
    *,
    component: str | None = None,
    **bindings: object,
) -> RenderedPrompt:
    """Render a template with the given bindings.

    ``component`` fills the literal ``[COMPONENT]`` marker used by the
    revision template. Raises :class:`PromptRenderError` when a placeholder
    is unbound or a binding does not correspond to any placeholder.
    """
    body = template_body(template_id)
    if _CITATION_SLOT in body:
        body = body.replace("{%s}" % _CITATION_SLOT, template_body(TemplateId.CITATION_RULES))

    if _COMPONENT_MARK in body:
        if component is None:
            raise PromptRenderError(f"{template_id.value}: [COMPONENT] marker requires component=")
        body = body.replace(_COMPONENT_MARK, component)
    elif component is not None:
        raise PromptRenderError(f"{template_id.value}: template has no [COMPONENT] marker")

    required = set(_PLACEHOLDER_RE.findall(body))
    provided = {k: str(v) for k, v in bindings.items()}
    missing = required - provided.keys()
    if missing:
        raise PromptRenderError(f"{template_id.value}: unbound placeholders {sorted(missing)}")
    unknown = provided.keys() - required
    if unknown:
        raise PromptRenderError(f"{template_id.value}: unknown bindings {sorted(unknown)}")

    def substitute(match: re.Match[str]) -> str:
        return provided[match.group(1)]

    text = _PLACEHOLDER_RE.sub(substitute, body)
    variables = dict(provided)
    if component is not None:
        variables["__component__"] = component
    return RenderedPrompt(template_id=template_id.value, text=text, variables=variables)
