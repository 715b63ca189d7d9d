"""Prompt templates: files named ``<name>.txt`` with ``{placeholder}`` slots.

Rendering is single-pass: every placeholder must be bound, and braces inside
a bound value are inserted verbatim, never re-expanded.
"""

from __future__ import annotations

import re
from importlib import resources
from pathlib import Path

from .errors import TemplateError

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


class TemplateStore:
    """Loads templates from a directory (default: the packaged set)."""

    def __init__(self, directory: str | Path | None = None):
        if directory is None:
            directory = Path(str(resources.files("layoutqa") / "templates"))
        self.directory = Path(directory)
        self._cache: dict[str, str] = {}

    def names(self) -> list[str]:
        return sorted(p.stem for p in self.directory.glob("*.txt"))

    def text(self, name: str) -> str:
        if name not in self._cache:
            path = self.directory / f"{name}.txt"
            if not path.is_file():
                raise TemplateError(f"unknown template {name!r} (looked in {self.directory})")
            self._cache[name] = path.read_text(encoding="utf-8")
        return self._cache[name]

    def render(self, name: str, bindings: dict[str, str]) -> str:
        template = self.text(name)

        def substitute(match: re.Match) -> str:
            key = match.group(1)
            if key not in bindings:
                raise TemplateError(f"unbound placeholder {{{key}}} in template {name!r}")
            return str(bindings[key])

        return _PLACEHOLDER.sub(substitute, template)


def render_template(name: str, bindings: dict[str, str], directory: str | Path | None = None) -> str:
    """One-shot rendering helper around :class:`TemplateStore`."""
    return TemplateStore(directory).render(name, bindings)
