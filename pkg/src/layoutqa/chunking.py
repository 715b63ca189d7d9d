"""Section-based parent chunks and header/footnote-enriched child chunks.

Parent chunks are runs of consecutive sections merged until the word total
reaches the parent limit; a run's last section is re-used as the next run's
first when it is itself below the limit, so adjacent parents overlap by one
section and keep topical continuity. Child chunks come in two kinds:

* ``section_based`` — sentence-aligned slices of one parent's text, each
  prefixed with ``<section-header>`` tags for every section the slice
  overlaps;
* ``footnote_based`` — one chunk per page holding that page's footnotes,
  linked to every parent whose page range contains the page.

A deliberately layout-blind fallback (``chunk_naive``) is provided for
ablation runs: fixed-size word windows over the body text, no tags, no
footnote chunks.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .errors import IntegrityError
from .layout import Footnote, LayoutElement, Section, segment_sections, word_count

logger = logging.getLogger(__name__)

DEFAULT_PARENT_LIMIT = 1024
DEFAULT_CHILD_LIMIT = 200

SECTION_TAG_RE = re.compile(r"<section-header>.*?</section-header>", re.S)

_BLANK_LINE = re.compile(r"\n[ \t]*\n+")
_SENTENCE_END = re.compile(r"[.?!]+(?=\s|$)")


@dataclass
class ParentChunk:
    """A merged run of sections; the unit of long-context extraction."""

    parent_id: str
    doc_id: str
    section_ids: list[str]
    text: str
    word_count: int
    pages: tuple[int, int]
    footnote_ids: list[str] = field(default_factory=list)


@dataclass
class ChildChunk:
    """A small retrieval unit subsumed by one or more parents."""

    child_id: str
    doc_id: str
    kind: str  # "section_based" | "footnote_based"
    parent_ids: list[str]
    text: str
    word_count: int
    page: int | None = None  # footnote_based only
    char_start: int | None = None  # span of the body within the parent text
    char_end: int | None = None

    def body_text(self) -> str:
        """Text with all section-header tags stripped."""
        return SECTION_TAG_RE.sub("", self.text)


@dataclass
class ChunkSet:
    """Everything one ingest pass produces for a corpus."""

    sections: list[Section]
    footnotes: list[Footnote]
    parents: list[ParentChunk]
    children: list[ChildChunk]
    warnings: list[str] = field(default_factory=list)


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Offsets of sentences in ``text``, trimmed of surrounding whitespace.

    A sentence ends after '.', '?' or '!' followed by whitespace, or at a
    blank line. Abbreviations are not special-cased. Spans are ordered,
    non-overlapping, and jointly cover all non-whitespace characters.
    """
    spans: list[tuple[int, int]] = []
    blocks: list[tuple[int, int]] = []
    pos = 0
    for m in _BLANK_LINE.finditer(text):
        blocks.append((pos, m.start()))
        pos = m.end()
    blocks.append((pos, len(text)))

    for block_start, block_end in blocks:
        cursor = block_start
        while cursor < block_end:
            while cursor < block_end and text[cursor].isspace():
                cursor += 1
            if cursor >= block_end:
                break
            m = _SENTENCE_END.search(text, cursor, block_end)
            end = m.end() if m else block_end
            trimmed = end
            while trimmed > cursor and text[trimmed - 1].isspace():
                trimmed -= 1
            if trimmed > cursor:
                spans.append((cursor, trimmed))
            cursor = end
    return spans


def build_parent_chunks(sections: list[Section], limit: int = DEFAULT_PARENT_LIMIT) -> list[ParentChunk]:
    """Merge consecutive sections into overlapping parent chunks.

    Each parent is the shortest prefix of remaining sections whose total word
    count reaches ``limit`` (the final parent may fall short). The next parent
    starts at the previous parent's last section when that section alone is
    below ``limit``, otherwise at the following section. A trailing parent
    whose sections are all contained in an already-emitted parent is dropped.
    """
    if limit < 1:
        raise ValueError(f"parent limit must be >= 1, got {limit}")
    parents: list[ParentChunk] = []
    for doc_id, doc_sections in _by_document(sections):
        parents.extend(_parents_for_doc(doc_id, doc_sections, limit))
    return parents


def _by_document(sections: list[Section]):
    runs: list[tuple[str, list[Section]]] = []
    for section in sections:
        if runs and runs[-1][0] == section.doc_id:
            runs[-1][1].append(section)
        else:
            runs.append((section.doc_id, [section]))
    return runs


def _parents_for_doc(doc_id: str, sections: list[Section], limit: int) -> list[ParentChunk]:
    parents: list[ParentChunk] = []
    emitted: list[set[str]] = []
    start = 0
    n = len(sections)
    while start < n:
        total = 0
        end = start
        while end < n:
            total += sections[end].word_count
            if total >= limit:
                break
            end += 1
        if end == n:  # ran out of sections; final parent may be under the limit
            end = n - 1
        run = sections[start : end + 1]
        ids = {s.section_id for s in run}
        if not any(ids <= prior for prior in emitted):
            parents.append(_make_parent(doc_id, run, len(parents)))
            emitted.append(ids)
        if end == n - 1:
            break
        # overlap: re-seed with the last section when it is itself under the limit
        start = end if sections[end].word_count < limit else end + 1
    return parents


def _make_parent(doc_id: str, run: list[Section], index: int) -> ParentChunk:
    text = "\n".join(s.text for s in run)
    return ParentChunk(
        parent_id=f"{doc_id}:p{index:04d}",
        doc_id=doc_id,
        section_ids=[s.section_id for s in run],
        text=text,
        word_count=word_count(text),
        pages=(min(s.pages[0] for s in run), max(s.pages[1] for s in run)),
    )


def build_child_chunks(
    parent: ParentChunk,
    sections_by_id: dict[str, Section],
    max_child: int = DEFAULT_CHILD_LIMIT,
) -> list[ChildChunk]:
    """Split one parent into section-based children at sentence boundaries.

    Sentences are packed greedily up to ``max_child`` words; a single
    sentence longer than the limit becomes its own child. Every child is
    prefixed with a ``<section-header>`` tag for each overlapping section
    that has a header, in document order.
    """
    if max_child < 1:
        raise ValueError(f"child limit must be >= 1, got {max_child}")
    if not parent.text.strip():
        return []

    # offsets of each section's text inside the parent text ("\n"-joined)
    section_spans: list[tuple[int, int, Section]] = []
    offset = 0
    for sid in parent.section_ids:
        section = sections_by_id[sid]
        section_spans.append((offset, offset + len(section.text), section))
        offset += len(section.text) + 1  # the joining newline

    groups: list[list[tuple[int, int]]] = []
    current: list[tuple[int, int]] = []
    current_words = 0
    for span in sentence_spans(parent.text):
        words = word_count(parent.text[span[0] : span[1]])
        if current and current_words + words > max_child:
            groups.append(current)
            current, current_words = [], 0
        current.append(span)
        current_words += words
    if current:
        groups.append(current)

    children: list[ChildChunk] = []
    for i, group in enumerate(groups):
        start, end = group[0][0], group[-1][1]
        body = parent.text[start:end]
        headers = [
            section.header_text
            for s0, s1, section in section_spans
            if section.header_text and start < s1 and end > s0
        ]
        tags = "".join(f"<section-header>{h}</section-header>" for h in headers)
        text = tags + body
        children.append(
            ChildChunk(
                child_id=f"{parent.parent_id}:c{i:03d}",
                doc_id=parent.doc_id,
                kind="section_based",
                parent_ids=[parent.parent_id],
                text=text,
                word_count=word_count(text),
                char_start=start,
                char_end=end,
            )
        )
    return children


def build_footnote_chunks(
    footnotes: list[Footnote],
    parents: list[ParentChunk],
    warnings: list[str] | None = None,
) -> list[ChildChunk]:
    """Group footnotes per page into children linked to same-page parents.

    Updates ``footnote_ids`` on the linked parents in place so the linkage
    is symmetric. A page covered by no parent still yields a chunk, with
    empty ``parent_ids`` and a recorded warning.
    """
    by_page: dict[tuple[str, int], list[Footnote]] = {}
    for footnote in footnotes:
        by_page.setdefault((footnote.doc_id, footnote.page), []).append(footnote)

    for parent in parents:
        parent.footnote_ids.clear()
    children: list[ChildChunk] = []
    for (doc_id, page), notes in sorted(by_page.items()):
        linked = [
            p for p in parents if p.doc_id == doc_id and p.pages[0] <= page <= p.pages[1]
        ]
        if not linked:
            message = f"footnote page {page} of {doc_id} is covered by no parent chunk"
            logger.warning(message)
            if warnings is not None:
                warnings.append(message)
        text = "\n".join(n.text for n in notes)
        children.append(
            ChildChunk(
                child_id=f"{doc_id}:fn{page:04d}",
                doc_id=doc_id,
                kind="footnote_based",
                parent_ids=[p.parent_id for p in linked],
                text=text,
                word_count=word_count(text),
                page=page,
            )
        )
        note_ids = [n.footnote_id for n in notes]
        for parent in linked:
            parent.footnote_ids.extend(note_ids)
    return children


def chunk_layout(
    elements: list[LayoutElement],
    parent_limit: int = DEFAULT_PARENT_LIMIT,
    child_limit: int = DEFAULT_CHILD_LIMIT,
) -> ChunkSet:
    """Full layout-aware ingest: elements -> sections -> parents -> children."""
    sections, footnotes = segment_sections(elements)
    parents = build_parent_chunks(sections, parent_limit)
    sections_by_id = {s.section_id: s for s in sections}
    warnings: list[str] = []
    children: list[ChildChunk] = []
    for parent in parents:
        children.extend(build_child_chunks(parent, sections_by_id, child_limit))
    children.extend(build_footnote_chunks(footnotes, parents, warnings))
    return ChunkSet(sections, footnotes, parents, children, warnings)


def chunk_naive(
    elements: list[LayoutElement],
    parent_limit: int = DEFAULT_PARENT_LIMIT,
    child_limit: int = DEFAULT_CHILD_LIMIT,
) -> ChunkSet:
    """Layout-blind fallback: fixed-size word windows over the body text.

    Models a plain text chunker with no structural awareness: section
    headers flow into the text untagged, footnotes and page furniture are
    not part of the body stream, and no parent/footnote links are built.
    """
    if parent_limit < 1 or child_limit < 1:
        raise ValueError("window sizes must be >= 1")
    parents: list[ParentChunk] = []
    children: list[ChildChunk] = []
    docs: list[tuple[str, list[str]]] = []
    for element in elements:
        if element.kind not in ("paragraph", "section_header"):
            continue
        if docs and docs[-1][0] == element.doc_id:
            docs[-1][1].extend(element.text.split())
        else:
            docs.append((element.doc_id, element.text.split()))

    for doc_id, words in docs:
        pages = _page_range(elements, doc_id)
        for pi in range(0, len(words), parent_limit):
            window = words[pi : pi + parent_limit]
            parent = ParentChunk(
                parent_id=f"{doc_id}:p{len(parents):04d}",
                doc_id=doc_id,
                section_ids=[],
                text=" ".join(window),
                word_count=len(window),
                pages=pages,
            )
            parents.append(parent)
            for j, ci in enumerate(range(0, len(window), child_limit)):
                sub = window[ci : ci + child_limit]
                offset = len(" ".join(window[:ci])) + (1 if ci else 0)
                text = " ".join(sub)
                children.append(
                    ChildChunk(
                        child_id=f"{parent.parent_id}:c{j:03d}",
                        doc_id=doc_id,
                        kind="section_based",
                        parent_ids=[parent.parent_id],
                        text=text,
                        word_count=len(sub),
                        char_start=offset,
                        char_end=offset + len(text),
                    )
                )
    return ChunkSet([], [], parents, children, [])


def _page_range(elements: list[LayoutElement], doc_id: str) -> tuple[int, int]:
    pages = [e.page for e in elements if e.doc_id == doc_id]
    return (min(pages), max(pages))


def verify_chunk_set(chunks: ChunkSet) -> None:
    """Cross-check the structural invariants of one ingest pass.

    Meant for tests and debugging; raises IntegrityError on the first
    violated link between parents, children, and footnotes.
    """
    parent_ids = {p.parent_id for p in chunks.parents}
    for child in chunks.children:
        for pid in child.parent_ids:
            if pid not in parent_ids:
                raise IntegrityError(f"child {child.child_id} links unknown parent {pid}")
        if child.kind == "section_based" and len(child.parent_ids) != 1:
            raise IntegrityError(f"section child {child.child_id} must have one parent")
