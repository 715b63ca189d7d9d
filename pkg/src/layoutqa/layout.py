"""Typed layout elements and their segmentation into sections and footnotes.

Input documents arrive as streams of pre-classified layout elements (the
output of an upstream layout detector). This module parses the JSON-lines
interchange format and folds the stream into sections (header + body
paragraphs) and page footnotes. Page headers and footers are dropped here
and never reach any chunk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .errors import IntegrityError, LayoutParseError

ELEMENT_KINDS = frozenset(
    {"page_header", "page_footer", "section_header", "footnote", "paragraph"}
)


def word_count(text: str) -> int:
    """Number of whitespace-delimited tokens; the size unit used everywhere."""
    return len(text.split())


@dataclass(frozen=True)
class LayoutElement:
    """One classified element of a parsed document page stream."""

    element_id: str
    doc_id: str
    page: int
    order: int
    kind: str
    text: str

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.kind!r}")
        if self.page < 1:
            raise ValueError(f"page must be >= 1, got {self.page}")
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        if not self.text.strip():
            raise ValueError("element text is empty")


@dataclass
class Section:
    """A section header (optional) plus its body paragraphs.

    ``element_ids`` lists only the constituent paragraph elements; the
    governing header element contributes ``header_text`` but is not a body
    member. ``pages`` is the inclusive page range covered by the header and
    body elements.
    """

    section_id: str
    doc_id: str
    header_text: str | None
    element_ids: list[str]
    body_text: str
    pages: tuple[int, int]
    word_count: int

    @property
    def text(self) -> str:
        """Header and body joined for chunk assembly."""
        if self.header_text and self.body_text:
            return f"{self.header_text}\n{self.body_text}"
        return self.header_text or self.body_text


@dataclass
class Footnote:
    """A single footnote element, kept out of section bodies."""

    footnote_id: str
    doc_id: str
    page: int
    text: str
    source_element_id: str


_REQUIRED_KEYS = ("element_id", "doc_id", "page", "order", "kind", "text")


def parse_layout(path: str | Path) -> list[LayoutElement]:
    """Read a JSON-lines layout file into elements sorted by (doc_id, order).

    Raises:
        LayoutParseError: malformed JSON, missing keys, bad field types, or
            an unknown element kind; the message names the offending line.
        IntegrityError: two elements share the same (doc_id, order).
    """
    path = Path(path)
    elements: list[LayoutElement] = []
    seen: set[tuple[str, int]] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LayoutParseError(f"malformed JSON at line {lineno}: {exc.msg}") from exc
            if not isinstance(raw, dict):
                raise LayoutParseError(f"expected an object at line {lineno}")
            missing = [k for k in _REQUIRED_KEYS if k not in raw]
            if missing:
                raise LayoutParseError(
                    f"missing key(s) {', '.join(missing)} at line {lineno}"
                )
            if raw["kind"] not in ELEMENT_KINDS:
                raise LayoutParseError(f"unknown element kind at line {lineno}")
            try:
                element = LayoutElement(
                    element_id=str(raw["element_id"]),
                    doc_id=str(raw["doc_id"]),
                    page=int(raw["page"]),
                    order=int(raw["order"]),
                    kind=raw["kind"],
                    text=str(raw["text"]),
                )
            except (TypeError, ValueError) as exc:
                raise LayoutParseError(f"invalid element at line {lineno}: {exc}") from exc
            key = (element.doc_id, element.order)
            if key in seen:
                raise IntegrityError(
                    f"duplicate (doc_id, order) = ({element.doc_id!r}, {element.order})"
                )
            seen.add(key)
            elements.append(element)
    elements.sort(key=lambda e: (e.doc_id, e.order))
    return elements


class _SectionBuilder:
    """Accumulates one section while walking the element stream."""

    def __init__(self, doc_id: str, header: LayoutElement | None):
        self.doc_id = doc_id
        self.header = header
        self.paragraphs: list[LayoutElement] = []

    def add(self, element: LayoutElement) -> None:
        self.paragraphs.append(element)

    def empty(self) -> bool:
        return self.header is None and not self.paragraphs

    def build(self, section_id: str) -> Section:
        header_text = self.header.text if self.header is not None else None
        body_text = "\n".join(p.text for p in self.paragraphs)
        pages = [p.page for p in self.paragraphs]
        if self.header is not None:
            pages.append(self.header.page)
        combined = f"{header_text or ''} {body_text}".strip()
        return Section(
            section_id=section_id,
            doc_id=self.doc_id,
            header_text=header_text,
            element_ids=[p.element_id for p in self.paragraphs],
            body_text=body_text,
            pages=(min(pages), max(pages)),
            word_count=word_count(combined),
        )


def segment_sections(
    elements: list[LayoutElement],
) -> tuple[list[Section], list[Footnote]]:
    """Fold an ordered element stream into sections and footnotes.

    Page headers and footers are discarded. Every ``section_header`` opens a
    new section; paragraphs before the first header of a document form an
    anonymous (headerless) section. Footnote elements are collected separately
    in reading order. Sections never span documents.
    """
    sections: list[Section] = []
    footnotes: list[Footnote] = []
    current: _SectionBuilder | None = None
    current_doc: str | None = None

    def flush():
        nonlocal current
        if current is not None and not current.empty():
            sections.append(current.build(f"{current.doc_id}:s{len(sections):04d}"))
        current = None

    for element in elements:
        if element.doc_id != current_doc:
            flush()
            current_doc = element.doc_id
        if element.kind in ("page_header", "page_footer"):
            continue
        if element.kind == "footnote":
            footnotes.append(
                Footnote(
                    footnote_id=f"{element.doc_id}:f{len(footnotes):04d}",
                    doc_id=element.doc_id,
                    page=element.page,
                    text=element.text,
                    source_element_id=element.element_id,
                )
            )
            continue
        if element.kind == "section_header":
            flush()
            current = _SectionBuilder(element.doc_id, element)
        else:  # paragraph
            if current is None:
                current = _SectionBuilder(element.doc_id, None)
            current.add(element)
    flush()
    return sections, footnotes
