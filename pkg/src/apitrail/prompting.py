"""Prompt template loading and rendering.

Templates are plain text files with ``{name}`` placeholders. They ship as
package data under ``apitrail/prompts/`` and can be overridden per role by
pointing ``templates_dir`` at a directory containing files of the same
names. Rendering replaces only known placeholder names, so braces inside
substituted code or documentation never break formatting.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")

ROLES = (
    "summarize",
    "extract_exemplar",
    "plan",
    "rerank_intra",
    "rerank_inter",
    "explore",
    "repair",
    "solve",
)


def load_template(role: str, templates_dir: str | Path | None = None) -> str:
    """Return the template text for a role, preferring an override dir."""
    if role not in ROLES:
        raise ValueError(f"unknown template role {role!r}")
    filename = f"{role}.txt"
    if templates_dir is not None:
        override = Path(templates_dir) / filename
        if override.exists():
            return override.read_text(encoding="utf-8")
    return (resources.files("apitrail") / "prompts" / filename).read_text(encoding="utf-8")


def render(template: str, **values: str) -> str:
    """Substitute ``{name}`` placeholders with the given values.

    Placeholders without a provided value are left untouched, and braces in
    the values themselves are never re-interpreted.
    """

    def _sub(match: re.Match) -> str:
        name = match.group(1)
        return values[name] if name in values else match.group(0)

    return _PLACEHOLDER.sub(_sub, template)
