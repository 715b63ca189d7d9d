"""Hybrid sparse/dense retrieval over child chunks with rank fusion.

The sparse side is Okapi BM25 over an inverted index of lowercased,
punctuation-stripped word tokens:

    idf(t)    = ln(1 + (N - df + 0.5) / (df + 0.5))
    score(d)  = sum over query terms of
                idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl))

The dense side is exact cosine similarity against unit-normalized embedding
vectors (no approximate structures). Per-query rankings from both retrievers
are merged with reciprocal rank fusion,

    rrf(c) = sum over rankings containing c of 1 / (lambda + rank(c)),

with 1-based ranks and the customary smoothing constant lambda = 60. Ties
break everywhere by ascending child id so runs are deterministic.
"""

from __future__ import annotations

import math
import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from .chunking import ChildChunk, ParentChunk
from .errors import ConfigurationError, IndexBuildError, IntegrityError

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_RRF_LAMBDA = 60.0
DEFAULT_DEPTH_FACTOR = 4

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens split on non-alphanumerics; no stemming."""
    return _TOKEN.findall(text.lower())


@dataclass
class SparseIndex:
    """Inverted index: term -> {child_id: term frequency}."""

    postings: dict[str, dict[str, int]]
    doc_lengths: dict[str, int]
    avg_length: float


@dataclass
class StoreManifest:
    version: int
    corpus_id: str
    n_parents: int
    n_children: int
    dim: int
    parameters: dict = field(default_factory=dict)


@dataclass
class RetrievalBundle:
    """Immutable chunk store plus sparse and dense indexes over one corpus."""

    parents: dict[str, ParentChunk]
    children: dict[str, ChildChunk]
    sparse: SparseIndex
    vectors: np.ndarray  # float32 (n_children, dim), unit rows, row i = child_order[i]
    child_order: list[str]
    manifest: StoreManifest

    def __eq__(self, other) -> bool:
        if not isinstance(other, RetrievalBundle):
            return NotImplemented
        return (
            self.parents == other.parents
            and self.children == other.children
            and self.sparse == other.sparse
            and self.child_order == other.child_order
            and self.manifest == other.manifest
            and np.array_equal(self.vectors, other.vectors)
        )


@dataclass
class Ranking:
    """An ordered retrieval list; rank positions are 1-based."""

    entries: list[tuple[str, float]]
    source: str = ""

    def __post_init__(self):
        ids = [cid for cid, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError(f"ranking {self.source!r} repeats a child id")
        scores = [s for _, s in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"ranking {self.source!r} scores increase")

    def positions(self) -> dict[str, int]:
        return {cid: i + 1 for i, (cid, _) in enumerate(self.entries)}

    def ids(self) -> list[str]:
        return [cid for cid, _ in self.entries]


@dataclass
class RetrievalResult:
    """Top-k children, their enriched parents, and the fused scores."""

    children: list[ChildChunk]
    parents: list[ParentChunk]
    fused_scores: dict[str, float]
    rankings: list[Ranking] = field(default_factory=list)


def build_indexes(
    children: list[ChildChunk],
    embed: Callable[[list[str]], np.ndarray],
    parents: Iterable[ParentChunk] = (),
    corpus_id: str = "corpus",
    parameters: dict | None = None,
) -> RetrievalBundle:
    """Index child chunks for sparse and dense retrieval.

    Both indexes cover exactly the same child ids; vectors are re-normalized
    to unit length. ``parents`` populate the chunk store so retrieval can
    resolve and enrich parent chunks later.
    """
    if not children:
        raise IndexBuildError("cannot build indexes over zero children")
    child_map: dict[str, ChildChunk] = {}
    for child in children:
        if child.child_id in child_map:
            raise IndexBuildError(f"duplicate child_id {child.child_id!r}")
        child_map[child.child_id] = child

    postings: dict[str, dict[str, int]] = defaultdict(dict)
    doc_lengths: dict[str, int] = {}
    for child in children:
        tokens = tokenize(child.text)
        doc_lengths[child.child_id] = len(tokens)
        counts: dict[str, int] = {}
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
        for token, tf in counts.items():
            postings[token][child.child_id] = tf
    avg_length = sum(doc_lengths.values()) / len(children)

    try:
        vectors = np.asarray(embed([c.text for c in children]), dtype=np.float32)
    except Exception as exc:
        raise IndexBuildError(f"embedding failed while indexing: {exc}") from exc
    if vectors.ndim != 2 or vectors.shape[0] != len(children):
        raise IndexBuildError(
            f"embedder returned shape {getattr(vectors, 'shape', None)} for {len(children)} chunks"
        )
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    vectors = vectors / norms

    parent_map = {p.parent_id: p for p in parents}
    manifest = StoreManifest(
        version=1,
        corpus_id=corpus_id,
        n_parents=len(parent_map),
        n_children=len(children),
        dim=int(vectors.shape[1]),
        parameters=dict(parameters or {}),
    )
    return RetrievalBundle(
        parents=parent_map,
        children=child_map,
        sparse=SparseIndex(dict(postings), doc_lengths, avg_length),
        vectors=vectors.astype(np.float32),
        child_order=[c.child_id for c in children],
        manifest=manifest,
    )


def score_bm25(
    query: str,
    bundle: RetrievalBundle,
    limit: int | None = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    source: str = "bm25",
) -> Ranking:
    """Okapi BM25 ranking; zero-score chunks are omitted entirely."""
    index = bundle.sparse
    n_docs = len(bundle.child_order)
    scores: dict[str, float] = defaultdict(float)
    for term in tokenize(query):
        posting = index.postings.get(term)
        if not posting:
            continue
        df = len(posting)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        for child_id, tf in posting.items():
            dl = index.doc_lengths[child_id]
            norm = tf + k1 * (1.0 - b + b * dl / index.avg_length)
            scores[child_id] += idf * tf * (k1 + 1.0) / norm
    ordered = sorted(
        ((cid, s) for cid, s in scores.items() if s > 0.0),
        key=lambda item: (-item[1], item[0]),
    )
    if limit is not None:
        ordered = ordered[:limit]
    return Ranking(ordered, source=source)


def search_dense(
    query: str,
    bundle: RetrievalBundle,
    embed: Callable[[list[str]], np.ndarray],
    limit: int | None = None,
    source: str = "dense",
) -> Ranking:
    """Exact cosine similarity of the query vector against all stored rows."""
    vector = np.asarray(embed([query]), dtype=np.float64)
    if vector.ndim != 2 or vector.shape[0] != 1:
        raise ConfigurationError(f"query embedding has shape {vector.shape}")
    if vector.shape[1] != bundle.manifest.dim:
        raise ConfigurationError(
            f"query embedding dim {vector.shape[1]} != index dim {bundle.manifest.dim}"
        )
    norm = np.linalg.norm(vector[0])
    unit = vector[0] / norm if norm else vector[0]
    sims = bundle.vectors.astype(np.float64) @ unit
    order = sorted(range(len(sims)), key=lambda i: (-sims[i], bundle.child_order[i]))
    if limit is not None:
        order = order[:limit]
    return Ranking([(bundle.child_order[i], float(sims[i])) for i in order], source=source)


def fuse_rrf(
    rankings: list[Ranking],
    rrf_lambda: float = DEFAULT_RRF_LAMBDA,
    k: int | None = None,
) -> Ranking:
    """Reciprocal rank fusion across any number of retrieval lists."""
    if rrf_lambda <= 0:
        raise ValueError("rrf lambda must be > 0")
    scores: dict[str, float] = defaultdict(float)
    for ranking in rankings:
        for position, (child_id, _) in enumerate(ranking.entries, start=1):
            scores[child_id] += 1.0 / (rrf_lambda + position)
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    if k is not None:
        ordered = ordered[:k]
    return Ranking(ordered, source="rrf")


def retrieve(
    queries: list[str],
    bundle: RetrievalBundle,
    embed: Callable[[list[str]], np.ndarray],
    k: int,
    rrf_lambda: float = DEFAULT_RRF_LAMBDA,
    depth_factor: int = DEFAULT_DEPTH_FACTOR,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> RetrievalResult:
    """Multi-query hybrid retrieval fused in one RRF pass.

    For every query (the original first, then its rewrites) one BM25 and one
    dense ranking of depth ``depth_factor * k`` are produced; all lists are
    fused together and the top-k children returned with their enriched
    parents.
    """
    if not queries:
        raise ValueError("queries must be non-empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    depth = depth_factor * k
    rankings: list[Ranking] = []
    for i, query in enumerate(queries):
        rankings.append(
            score_bm25(query, bundle, depth, k1=k1, b=b, source=f"bm25[q{i}]")
        )
        rankings.append(
            search_dense(query, bundle, embed, depth, source=f"dense[q{i}]")
        )
    fused = fuse_rrf(rankings, rrf_lambda, k)
    children = [bundle.children[cid] for cid in fused.ids()]
    parents = expand_and_enrich(children, bundle)
    return RetrievalResult(
        children=children,
        parents=parents,
        fused_scores=dict(fused.entries),
        rankings=rankings,
    )


def expand_and_enrich(
    children: list[ChildChunk], bundle: RetrievalBundle
) -> list[ParentChunk]:
    """Resolve retrieved children to de-duplicated, enriched parent chunks.

    Section-based children contribute their single parent; a footnote-based
    child expands the set to every parent on its page, and its footnote text
    is appended to each of those parents inside ``<footnote>`` tags. The
    bundle itself is never modified, so repeated calls never double-inject.
    """
    wanted: set[str] = set()
    injections: dict[str, list[str]] = defaultdict(list)
    for child in children:
        for parent_id in child.parent_ids:
            if parent_id not in bundle.parents:
                raise IntegrityError(
                    f"child {child.child_id} references unknown parent {parent_id}"
                )
            wanted.add(parent_id)
            if child.kind == "footnote_based":
                injections[parent_id].extend(child.text.splitlines())

    enriched: list[ParentChunk] = []
    for parent_id in bundle.parents:  # store order == document order
        if parent_id not in wanted:
            continue
        parent = bundle.parents[parent_id]
        notes = injections.get(parent_id)
        if notes:
            block = "\n".join(f"<footnote>{line}</footnote>" for line in notes)
            parent = replace(parent, text=f"{parent.text}\n{block}")
        enriched.append(parent)
    return enriched
