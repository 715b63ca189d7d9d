"""Walk the chunking hierarchy the ingest stage builds.

Parses the bundled layout stream (a two-document legal fixture), segments it
into sections and footnotes, merges sections into overlapping parent chunks,
and splits those into tagged child chunks plus per-page footnote chunks.

Run from the repository root:

    python3 demos/01_layout_chunking.py
"""

from pathlib import Path

from layoutqa import chunk_layout, parse_layout, segment_sections

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

elements = parse_layout(FIXTURES / "layout.jsonl")
print(f"parsed {len(elements)} layout elements")
kinds = {}
for element in elements:
    kinds[element.kind] = kinds.get(element.kind, 0) + 1
print(f"element kinds: {kinds}")

# page headers/footers are dropped; headers open sections; footnotes split off
sections, footnotes = segment_sections(elements)
print(f"\n{len(sections)} sections:")
for section in sections:
    print(f"  {section.section_id}  header={section.header_text!r:35} "
          f"words={section.word_count:3d}  pages={section.pages}")
print(f"{len(footnotes)} footnotes:")
for footnote in footnotes:
    print(f"  {footnote.footnote_id}  page={footnote.page}  {footnote.text[:60]!r}")

# small limits so the fixture yields several parents
chunks = chunk_layout(elements, parent_limit=120, child_limit=48)
print(f"\n{len(chunks.parents)} parent chunks (limit 120 words, overlapping):")
for parent in chunks.parents:
    print(f"  {parent.parent_id}  sections={parent.section_ids} "
          f"words={parent.word_count}  pages={parent.pages}  footnotes={parent.footnote_ids}")

print(f"\n{len(chunks.children)} child chunks (limit 48 words):")
for child in chunks.children:
    flag = f"page {child.page}" if child.kind == "footnote_based" else "section"
    print(f"  {child.child_id:20} [{flag}] {child.text[:72]!r}")

# every section-based child is a contiguous slice of its parent, tags aside
sample = next(c for c in chunks.children if c.kind == "section_based")
parent = next(p for p in chunks.parents if p.parent_id == sample.parent_ids[0])
assert sample.body_text() == parent.text[sample.char_start : sample.char_end]
print("\nchild/parent slice identity holds for the sampled child")
