"""Shared fixtures: the bundled corpus, mock providers, and tiny builders."""

from __future__ import annotations

from pathlib import Path

import pytest

from layoutqa import (
    ChildChunk,
    MockEmbedder,
    ProviderSet,
    Section,
    build_indexes,
    chunk_layout,
    parse_layout,
    word_count,
)
from layoutqa.cli import build_providers, load_config

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def make_section(index, words, doc="d1", header=None, page=1, text=None):
    """A Section with an exact word count (header words included)."""
    if text is None:
        header_words = len(header.split()) if header else 0
        text = " ".join(f"w{index}x{j}" for j in range(words - header_words))
    return Section(
        section_id=f"{doc}:s{index:04d}",
        doc_id=doc,
        header_text=header,
        element_ids=[f"{doc}e{index}"],
        body_text=text,
        pages=(page, page),
        word_count=words,
    )


def make_child(child_id, text, parent_ids=(), doc="d1", kind="section_based", page=None):
    return ChildChunk(
        child_id=child_id,
        doc_id=doc,
        kind=kind,
        parent_ids=list(parent_ids),
        text=text,
        word_count=word_count(text),
        page=page,
    )


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_elements():
    return parse_layout(FIXTURES / "layout.jsonl")


@pytest.fixture(scope="session")
def fixture_chunks(fixture_elements):
    return chunk_layout(fixture_elements, 120, 48)


@pytest.fixture()
def mock_providers() -> ProviderSet:
    return build_providers(load_config(str(FIXTURES / "mock_config.json")))


@pytest.fixture()
def embedder() -> MockEmbedder:
    return MockEmbedder(dim=8)


@pytest.fixture()
def toy_bundle(embedder):
    """The three-document corpus behind the BM25 hand example."""
    children = [
        make_child("d1", "tax withholding treatment"),
        make_child("d2", "withholding tax tax"),
        make_child("d3", "corporate law"),
    ]
    return build_indexes(children, embedder)
