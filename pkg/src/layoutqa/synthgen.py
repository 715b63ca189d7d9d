"""Synthetic query/QA generation from page summaries.

The generator summarizes each page, embeds and k-means-clusters the
summaries, then repeatedly samples a cluster (falling back to another when a
cluster is too small), draws ``n`` member pages, and prompts one of six
question-style generators over those pages until the pair budget is met.

k-means is Lloyd's algorithm with k-means++ seeding from an explicit RNG
seed; the per-iteration inertia trace is kept on the result so monotonicity
is checkable.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import SamplingError, SynthesisError
from .providers import ProviderSet

logger = logging.getLogger(__name__)

QUESTION_STYLES = ("instruction", "reason", "evidence", "comparison", "list", "domain")

DEFAULT_CLUSTERS = 8
DEFAULT_PAGES_PER_SAMPLE = 2
KMEANS_MAX_ITER = 100


@dataclass
class PageSummary:
    """A page's model-written summary and its embedding."""

    doc_id: str
    page: int
    summary: str
    embedding: np.ndarray


@dataclass
class ClusterAssignment:
    """Labels, centroids, and the inertia trace of one k-means run."""

    k: int
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list[float] = field(default_factory=list)


@dataclass
class QAPair:
    """One generated question/answer with its style and source pages."""

    id: str
    question: str
    answer: str
    style: str
    doc_id: str
    pages: list[int] = field(default_factory=list)

    def __post_init__(self):
        if self.style not in QUESTION_STYLES:
            raise ValueError(f"unknown question style {self.style!r}")
        if not self.question.strip() or not self.answer.strip():
            raise ValueError("question and answer must be non-empty")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "question": self.question,
            "gold_answer": self.answer,
            "style": self.style,
            "doc_id": self.doc_id,
            "pages": self.pages,
        }


def summarize_pages(
    pages: list[str], providers: ProviderSet, doc_id: str = "doc"
) -> list[PageSummary]:
    """One summary per non-empty page; failed pages are skipped with a warning."""
    if not pages:
        raise ValueError("pages must be non-empty")
    summaries: list[PageSummary] = []
    texts: list[str] = []
    for number, text in enumerate(pages, start=1):
        if not text.strip():
            logger.warning("page %d of %s is blank; skipping", number, doc_id)
            continue
        try:
            summary = providers.chat(
                providers.templates.render("summarizer", {"text": text})
            )
        except Exception as exc:
            logger.warning("summarizer failed on page %d of %s: %s", number, doc_id, exc)
            continue
        summaries.append(
            PageSummary(doc_id=doc_id, page=number, summary=summary, embedding=None)
        )
        texts.append(summary)
    if summaries:
        vectors = np.asarray(providers.embed(texts), dtype=np.float64)
        norms = np.linalg.norm(vectors, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        vectors = vectors / norms
        for summary, vector in zip(summaries, vectors):
            summary.embedding = vector
    return summaries


def kmeans(points: np.ndarray, k: int, seed: int) -> ClusterAssignment:
    """Lloyd's iteration with k-means++ initialization; deterministic per seed."""
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            choice = int(rng.integers(n))
        else:
            choice = int(rng.choice(n, p=closest / total))
        centroids[i] = points[choice]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2, axis=1))

    labels = None
    history: list[float] = []
    for _ in range(KMEANS_MAX_ITER):
        distances = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = distances.argmin(axis=1)
        history.append(float(distances[np.arange(n), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if len(members):
                centroids[j] = members.mean(axis=0)
    return ClusterAssignment(k=k, labels=labels, centroids=centroids, inertia_history=history)


def cluster_summaries(
    summaries: list[PageSummary], k: int, seed: int = 0
) -> ClusterAssignment:
    """Cluster the summary embeddings into k groups."""
    if not 1 <= k <= len(summaries):
        raise ValueError(f"k must be in [1, {len(summaries)}], got {k}")
    points = np.stack([s.embedding for s in summaries]).astype(np.float64)
    return kmeans(points, k, seed)


def sample_cluster_chunks(
    assignment: ClusterAssignment,
    summaries: list[PageSummary],
    pages: list[str],
    n: int,
    rng: random.Random,
) -> list[tuple[int, str]]:
    """Draw ``n`` member pages from a random cluster with at least ``n`` members.

    Clusters are tried in a random order without replacement until one is
    large enough. Returns (page number, page text) in page order.
    """
    members_by_cluster: dict[int, list[PageSummary]] = {}
    for summary, label in zip(summaries, assignment.labels):
        members_by_cluster.setdefault(int(label), []).append(summary)
    cluster_ids = sorted(members_by_cluster)
    for cluster_id in rng.sample(cluster_ids, len(cluster_ids)):
        members = members_by_cluster[cluster_id]
        if len(members) < n:
            continue
        chosen = rng.sample(members, n)
        chosen.sort(key=lambda s: s.page)
        return [(s.page, pages[s.page - 1]) for s in chosen]
    raise SamplingError(f"no cluster holds {n} pages")


_QA_BULLET = re.compile(
    r"Question\s*\d+\s*:\s*(?P<question>.+?)\s*\n\s*-?\s*Answer\s*\d+\s*:\s*(?P<answer>.+?)(?=\s*\n\s*-?\s*Question\s*\d+\s*:|\s*\Z)",
    re.S,
)


def parse_qa_response(text: str) -> list[tuple[str, str]]:
    """Question/Answer bullet pairs from a generator response."""
    pairs = []
    for match in _QA_BULLET.finditer(text):
        question = " ".join(match.group("question").split())
        answer = " ".join(match.group("answer").split())
        if question and answer:
            pairs.append((question, answer))
    return pairs


def generate_qa(
    chunks: list[str],
    style: str,
    providers: ProviderSet,
    doc_id: str = "doc",
    pages: list[int] | None = None,
    id_prefix: str = "qa",
    start_index: int = 0,
) -> list[QAPair]:
    """Prompt one style's generator over the chunk texts; two pairs expected."""
    if not chunks:
        raise ValueError("chunks must be non-empty")
    if style not in QUESTION_STYLES:
        raise ValueError(f"unknown question style {style!r}")
    text = "\n".join(f"<chunk>{chunk}</chunk>" for chunk in chunks)
    response = providers.chat(
        providers.templates.render(f"qgen_{style}", {"text": text})
    )
    parsed = parse_qa_response(response)
    if not parsed:
        raise SynthesisError(f"no QA pairs parseable from {style} generator output")
    if len(parsed) < 2:
        logger.warning("%s generator produced %d pair(s) instead of 2", style, len(parsed))
    return [
        QAPair(
            id=f"{id_prefix}-{start_index + i:04d}",
            question=question,
            answer=answer,
            style=style,
            doc_id=doc_id,
            pages=list(pages or []),
        )
        for i, (question, answer) in enumerate(parsed[:2])
    ]


def synthesize(
    pages: list[str],
    budget: int,
    providers: ProviderSet,
    doc_id: str = "doc",
    styles: tuple[str, ...] = QUESTION_STYLES,
    k: int = DEFAULT_CLUSTERS,
    n: int = DEFAULT_PAGES_PER_SAMPLE,
    seed: int = 0,
) -> list[QAPair]:
    """Generate QA pairs round-robin over styles until the budget is met.

    Aborts (raising SynthesisError with the partial results attached) when
    more than half of the generation attempts have failed.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    summaries = summarize_pages(pages, providers, doc_id)
    if not summaries:
        raise SynthesisError("no page could be summarized", partial=[])
    k = min(k, len(summaries))
    assignment = cluster_summaries(summaries, k, seed)
    rng = random.Random(seed)

    collected: list[QAPair] = []
    attempts = 0
    failures = 0
    style_index = 0
    while len(collected) < budget:
        style = styles[style_index % len(styles)]
        style_index += 1
        attempts += 1
        try:
            sampled = sample_cluster_chunks(assignment, summaries, pages, n, rng)
            page_numbers = [p for p, _ in sampled]
            chunk_texts = [t for _, t in sampled]
            new_pairs = generate_qa(
                chunk_texts,
                style,
                providers,
                doc_id=doc_id,
                pages=page_numbers,
                id_prefix=doc_id,
                start_index=len(collected),
            )
        except SamplingError:
            raise
        except Exception as exc:
            failures += 1
            logger.warning("generation attempt %d (%s) failed: %s", attempts, style, exc)
            if failures * 2 > attempts and attempts >= 4:
                raise SynthesisError(
                    f"aborting: {failures}/{attempts} generation attempts failed",
                    partial=collected,
                ) from exc
            continue
        collected.extend(new_pairs)
    return collected[:budget]
