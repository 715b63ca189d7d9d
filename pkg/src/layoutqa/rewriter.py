"""Domain-aware query rewriting and rank-improvement filtering.

Rewriting is a two-step prompt chain: the model first drafts a passage that
answers the query (pulling in domain knowledge), then rewrites the query in
several more explicit ways conditioned on that passage.

The filter curates ``(query, rewrite)`` training pairs by measuring, on a
built retrieval bundle, the best rank any chunk of the pair's source document
reaches under the original query and under the rewrite. A pair survives only
when the rewrite strictly improves that rank position in BOTH the sparse and
the dense retriever; a document missing from a ranking counts as rank
infinity, so becoming ranked at all is an improvement.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import RewriteError
from .providers import ProviderSet
from .retrieval import Ranking, RetrievalBundle, score_bm25, search_dense

logger = logging.getLogger(__name__)

SUPPORTED_REWRITE_COUNTS = (1, 3)

DEFAULT_PASSAGE_EXAMPLES = """\
  EXAMPLE 1:
  Query: At what level-of-comfort may the issuer rely on the debt characterization of the notes?
  Passage: Counsel has opined that the notes should be treated as debt for U.S. federal income tax purposes. A "should" opinion reflects a strong, though not certain, level of comfort, resting on the terms of the notes, the issuer's creditworthiness, and the parties' intent to create a debtor-creditor relationship.

  EXAMPLE 2:
  Query: Is any withholding required on coupon payments to non-U.S. holders?
  Passage: Coupon payments to non-U.S. holders generally qualify for the portfolio interest exemption, so no U.S. withholding tax applies provided the holder delivers a valid certification and is not a 10-percent shareholder, a controlled foreign corporation, or a bank receiving interest on an extension of credit.\
"""


@dataclass
class QuerySet:
    """The original query plus its rewrites; the original always comes first."""

    original: str
    rewrites: list[str] = field(default_factory=list)

    def __post_init__(self):
        deduped: list[str] = []
        for rewrite in self.rewrites:
            if rewrite != self.original and rewrite not in deduped:
                deduped.append(rewrite)
        self.rewrites = deduped

    def all(self) -> list[str]:
        return [self.original, *self.rewrites]


@dataclass
class RewritePair:
    """A candidate fine-tuning example tied to its source document."""

    query: str
    rewrite: str
    source_doc_id: str
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.query == self.rewrite:
            raise ValueError("rewrite must differ from the query")


def rewrite(
    query: str,
    n: int,
    chat: Callable[[str], str],
    providers: ProviderSet | None = None,
    passage_examples: str = DEFAULT_PASSAGE_EXAMPLES,
) -> QuerySet:
    """Two-step rewrite: draft an answering passage, then expanded queries.

    Keeps the first ``n`` parsed rewrites, dropping blanks and any line that
    repeats the original query. Returns fewer than ``n`` (with a warning)
    when the model under-delivers.
    """
    if n not in SUPPORTED_REWRITE_COUNTS:
        raise ValueError(f"n must be one of {SUPPORTED_REWRITE_COUNTS}, got {n}")
    if providers is None:
        providers = ProviderSet(chat=chat, embed=None)
    templates = providers.templates
    try:
        passage = chat(
            templates.render(
                "rewrite_passage", {"query": query, "examples": passage_examples}
            )
        )
        response = chat(
            templates.render("rewrite_queries", {"query": query, "passage": passage})
        )
    except Exception as exc:
        raise RewriteError(f"rewrite provider failed: {exc}") from exc

    rewrites: list[str] = []
    for line in response.splitlines():
        candidate = line.strip().lstrip("-").strip()
        if not candidate:
            continue
        if candidate == query:
            logger.warning("rewriter echoed the original query; dropping it")
            continue
        if candidate not in rewrites:
            rewrites.append(candidate)
        if len(rewrites) == n:
            break
    if len(rewrites) < n:
        logger.warning("requested %d rewrites, parsed only %d", n, len(rewrites))
    return QuerySet(original=query, rewrites=rewrites)


def _children_by_doc(bundle: RetrievalBundle) -> dict[str, set[str]]:
    by_doc: dict[str, set[str]] = {}
    for child in bundle.children.values():
        by_doc.setdefault(child.doc_id, set()).add(child.child_id)
    return by_doc


def _best_rank(ranking: Ranking, doc_children: set[str]) -> int | None:
    """Best (smallest) 1-based position of any of the document's chunks."""
    best = None
    for position, (child_id, _) in enumerate(ranking.entries, start=1):
        if child_id in doc_children:
            best = position
            break
    return best


def improves_rank(new: int | None, old: int | None) -> bool:
    """Strict rank-position improvement; None encodes rank infinity."""
    if new is None:
        return False
    if old is None:
        return True
    return new < old


def filter_rewrite_pairs(
    pairs: list[RewritePair],
    bundle: RetrievalBundle,
    embed: Callable[[list[str]], np.ndarray],
) -> list[RewritePair]:
    """Keep pairs whose rewrite strictly improves the source document's rank
    in both the sparse and the dense retriever; full-corpus scan, no cutoff.
    """
    by_doc = _children_by_doc(bundle)
    sparse_cache: dict[str, Ranking] = {}
    dense_cache: dict[str, Ranking] = {}

    def sparse(query: str) -> Ranking:
        if query not in sparse_cache:
            sparse_cache[query] = score_bm25(query, bundle, limit=None)
        return sparse_cache[query]

    def dense(query: str) -> Ranking:
        if query not in dense_cache:
            dense_cache[query] = search_dense(query, bundle, embed, limit=None)
        return dense_cache[query]

    retained: list[RewritePair] = []
    for pair in pairs:
        doc_children = by_doc.get(pair.source_doc_id)
        if not doc_children:
            logger.error(
                "skipping pair: unknown source_doc_id %r", pair.source_doc_id
            )
            continue
        sparse_ok = improves_rank(
            _best_rank(sparse(pair.rewrite), doc_children),
            _best_rank(sparse(pair.query), doc_children),
        )
        dense_ok = improves_rank(
            _best_rank(dense(pair.rewrite), doc_children),
            _best_rank(dense(pair.query), doc_children),
        )
        if sparse_ok and dense_ok:
            retained.append(pair)
    return retained


def export_training_pairs(pairs: list[RewritePair], path: str | Path) -> int:
    """Write retained pairs as JSON-lines; returns the number written."""
    if not pairs:
        raise ValueError("no pairs to export")
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "query": pair.query,
                        "rewrite": pair.rewrite,
                        "source_doc_id": pair.source_doc_id,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    return len(pairs)


def read_pairs(path: str | Path) -> list[RewritePair]:
    """Read a JSON-lines pairs file written by :func:`export_training_pairs`."""
    pairs: list[RewritePair] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            raw = json.loads(line)
            pairs.append(
                RewritePair(
                    query=raw["query"],
                    rewrite=raw["rewrite"],
                    source_doc_id=raw["source_doc_id"],
                    provenance=raw.get("provenance", {}),
                )
            )
    return pairs
