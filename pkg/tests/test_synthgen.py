"""Page summaries, k-means, cluster sampling, and QA generation."""

from __future__ import annotations

import itertools
import random

import numpy as np
import pytest

from layoutqa import (
    MockChat,
    MockEmbedder,
    MockRule,
    ProviderSet,
    cluster_summaries,
    generate_qa,
    kmeans,
    sample_cluster_chunks,
    summarize_pages,
    synthesize,
)
from layoutqa.errors import SamplingError, SynthesisError
from layoutqa.synthgen import QUESTION_STYLES, PageSummary, parse_qa_response


def echo_summarizer():
    return MockRule(
        r"(?s)professional summarizer.*## Text\s*(?P<tail>.+)\Z",
        lambda m: "Summary: " + " ".join(m.group("tail").split()[:12]),
    )


def providers_with(rules, dim=8):
    return ProviderSet(chat=MockChat(rules), embed=MockEmbedder(dim=dim))


# ------------------------------------------------------------------
# summaries
# ------------------------------------------------------------------
class TestSummarizePages:
    def test_one_summary_per_nonempty_page(self):
        providers = providers_with([echo_summarizer()])
        summaries = summarize_pages(["page one text", "page two text", "page three"], providers)
        assert [s.page for s in summaries] == [1, 2, 3]
        assert all(s.summary.startswith("Summary:") for s in summaries)
        assert all(abs(np.linalg.norm(s.embedding) - 1) < 1e-6 for s in summaries)

    def test_blank_page_skipped(self):
        providers = providers_with([echo_summarizer()])
        summaries = summarize_pages(["real content", "   \n  "], providers)
        assert [s.page for s in summaries] == [1]

    def test_failed_page_skipped_with_warning(self, caplog):
        providers = providers_with([])  # unscripted -> per-page failure
        summaries = summarize_pages(["content"], providers)
        assert summaries == []
        assert any("summarizer failed" in r.message for r in caplog.records)

    def test_deterministic(self):
        pages = ["alpha page", "beta page"]
        first = summarize_pages(pages, providers_with([echo_summarizer()]))
        second = summarize_pages(pages, providers_with([echo_summarizer()]))
        assert [s.summary for s in first] == [s.summary for s in second]
        assert all(np.array_equal(a.embedding, b.embedding) for a, b in zip(first, second))


# ------------------------------------------------------------------
# k-means
# ------------------------------------------------------------------
def two_blobs(rng, per_side=6, spread=0.05):
    left = rng.normal(loc=(-1.0, 0.0), scale=spread, size=(per_side, 2))
    right = rng.normal(loc=(1.0, 0.0), scale=spread, size=(per_side, 2))
    return np.vstack([left, right])


class TestKmeans:
    def test_k_one_centroid_is_global_mean(self):
        points = np.arange(12, dtype=np.float64).reshape(6, 2)
        result = kmeans(points, 1, seed=0)
        assert np.allclose(result.centroids[0], points.mean(axis=0))
        assert set(result.labels.tolist()) == {0}

    def test_k_equals_n_zero_inertia(self):
        points = np.asarray([[0.0, 0], [1, 0], [0, 1], [5, 5]])
        result = kmeans(points, 4, seed=1)
        assert len(set(result.labels.tolist())) == 4
        assert result.inertia_history[-1] == pytest.approx(0.0, abs=1e-12)

    def test_recovers_two_separated_blobs_vs_bipartition_oracle(self):
        points = two_blobs(np.random.default_rng(0))
        result = kmeans(points, 2, seed=3)
        got = frozenset(np.flatnonzero(result.labels == result.labels[0]).tolist())

        def cost(group_a):
            total = 0.0
            for group in (group_a, frozenset(range(len(points))) - group_a):
                members = points[sorted(group)]
                total += ((members - members.mean(axis=0)) ** 2).sum()
            return total

        best = min(
            (
                frozenset(combo)
                for size in range(1, len(points))
                for combo in itertools.combinations(range(len(points)), size)
            ),
            key=cost,
        )
        assert got == best or (frozenset(range(len(points))) - got) == best

    def test_seed_determinism(self):
        points = two_blobs(np.random.default_rng(7))
        a = kmeans(points, 3, seed=42)
        b = kmeans(points, 3, seed=42)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.inertia_history == b.inertia_history

    def test_inertia_never_increases(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            points = rng.normal(size=(rng.integers(5, 40), 3))
            result = kmeans(points, int(rng.integers(1, 5)), seed=int(rng.integers(0, 99)))
            history = result.inertia_history
            for earlier, later in zip(history, history[1:]):
                assert later <= earlier + 1e-9

    def test_k_out_of_range(self):
        points = np.zeros((3, 2))
        with pytest.raises(ValueError):
            kmeans(points, 4, seed=0)
        with pytest.raises(ValueError):
            kmeans(points, 0, seed=0)

    def test_nonempty_centroids_are_member_means(self):
        points = two_blobs(np.random.default_rng(5))
        result = kmeans(points, 2, seed=9)
        for j in range(2):
            members = points[result.labels == j]
            if len(members):
                assert np.allclose(result.centroids[j], members.mean(axis=0), atol=1e-9)


class TestClusterSummaries:
    def summaries(self, vectors):
        return [
            PageSummary("d", i + 1, f"s{i}", np.asarray(v, dtype=np.float64))
            for i, v in enumerate(vectors)
        ]

    def test_clusters_by_embedding(self):
        summaries = self.summaries([[1, 0], [1, 0.01], [0, 1], [0.01, 1]])
        result = cluster_summaries(summaries, 2, seed=0)
        assert result.labels[0] == result.labels[1]
        assert result.labels[2] == result.labels[3]
        assert result.labels[0] != result.labels[2]

    def test_k_above_count_rejected(self):
        with pytest.raises(ValueError):
            cluster_summaries(self.summaries([[1, 0]]), 2, seed=0)


# ------------------------------------------------------------------
# cluster sampling
# ------------------------------------------------------------------
def assignment_with_sizes(sizes):
    labels = []
    for cluster, size in enumerate(sizes):
        labels.extend([cluster] * size)
    summaries = [
        PageSummary("d", i + 1, f"s{i}", np.zeros(2)) for i in range(len(labels))
    ]
    pages = [f"page text {i + 1}" for i in range(len(labels))]
    from layoutqa.synthgen import ClusterAssignment

    return (
        ClusterAssignment(k=len(sizes), labels=np.asarray(labels), centroids=np.zeros((len(sizes), 2))),
        summaries,
        pages,
    )


class TestSampleClusterChunks:
    def test_falls_back_past_small_cluster(self):
        assignment, summaries, pages = assignment_with_sizes([5, 1])
        # find a seed whose first cluster draw is the singleton (cluster 1)
        seed = next(
            s for s in range(100) if random.Random(s).sample([0, 1], 2)[0] == 1
        )
        rng = random.Random(seed)
        sampled = sample_cluster_chunks(assignment, summaries, pages, 2, rng)
        assert len(sampled) == 2
        assert all(page <= 5 for page, _ in sampled)  # drawn from the size-5 cluster

    def test_n_one_accepts_any_cluster(self):
        assignment, summaries, pages = assignment_with_sizes([1, 1, 1])
        sampled = sample_cluster_chunks(assignment, summaries, pages, 1, random.Random(0))
        assert len(sampled) == 1

    def test_no_cluster_large_enough(self):
        assignment, summaries, pages = assignment_with_sizes([1, 1])
        with pytest.raises(SamplingError):
            sample_cluster_chunks(assignment, summaries, pages, 2, random.Random(0))

    def test_seeded_draws_reproduce(self):
        assignment, summaries, pages = assignment_with_sizes([4, 3])
        a = sample_cluster_chunks(assignment, summaries, pages, 2, random.Random(5))
        b = sample_cluster_chunks(assignment, summaries, pages, 2, random.Random(5))
        assert a == b


# ------------------------------------------------------------------
# QA generation
# ------------------------------------------------------------------
TWO_PAIRS = (
    "- Question 1: How can relief be claimed?\n"
    "- Answer 1: By delivering a certification.\n"
    "- Question 2: What does counsel opine?\n"
    "- Answer 2: The notes should be debt."
)


class TestParseQaResponse:
    def test_two_bullets(self):
        pairs = parse_qa_response(TWO_PAIRS)
        assert pairs == [
            ("How can relief be claimed?", "By delivering a certification."),
            ("What does counsel opine?", "The notes should be debt."),
        ]

    def test_single_pair(self):
        pairs = parse_qa_response("- Question 1: Only one?\n- Answer 1: Yes.")
        assert pairs == [("Only one?", "Yes.")]

    def test_multiline_answer(self):
        text = "- Question 1: Q?\n- Answer 1: line one\nline two\n- Question 2: R?\n- Answer 2: A2"
        pairs = parse_qa_response(text)
        assert pairs[0] == ("Q?", "line one line two")

    def test_no_pairs(self):
        assert parse_qa_response("nothing structured") == []


class TestGenerateQa:
    def test_two_pairs_with_style(self):
        providers = providers_with([("instruction-based questions", TWO_PAIRS)])
        pairs = generate_qa(["chunk a", "chunk b"], "instruction", providers, doc_id="d9", pages=[2, 5])
        assert len(pairs) == 2
        assert all(p.style == "instruction" for p in pairs)
        assert all(p.doc_id == "d9" and p.pages == [2, 5] for p in pairs)
        assert "<chunk>chunk a</chunk>" in providers.chat.calls[0]

    def test_partial_parse_warns(self, caplog):
        providers = providers_with([("reason-based", "- Question 1: Q?\n- Answer 1: A.")])
        pairs = generate_qa(["chunk"], "reason", providers)
        assert len(pairs) == 1
        assert any("instead of 2" in r.message for r in caplog.records)

    def test_zero_pairs_is_error(self):
        providers = providers_with([("evidence-based", "unstructured text")])
        with pytest.raises(SynthesisError):
            generate_qa(["chunk"], "evidence", providers)

    def test_invalid_style(self):
        with pytest.raises(ValueError, match="opinion"):
            generate_qa(["chunk"], "opinion", providers_with([]))


# ------------------------------------------------------------------
# the full budget loop
# ------------------------------------------------------------------
def single_pair_rules():
    """Each style yields exactly one pair, so budget=6 walks all six styles."""
    rules = [echo_summarizer()]
    for style in QUESTION_STYLES:
        anchor = "domain specific questions" if style == "domain" else f"{style}-based questions"
        rules.append(
            (anchor, f"- Question 1: {style} question?\n- Answer 1: {style} answer.")
        )
    return rules


PAGES = [f"page {i} about topic {i % 3} with several words" for i in range(1, 7)]


class TestSynthesize:
    def test_budget_six_covers_all_styles_round_robin(self):
        providers = providers_with(single_pair_rules())
        pairs = synthesize(PAGES, 6, providers, doc_id="d1", k=2, n=2, seed=0)
        assert [p.style for p in pairs] == list(QUESTION_STYLES)
        assert [p.id for p in pairs] == [f"d1-{i:04d}" for i in range(6)]

    def test_budget_one_uses_first_style(self):
        providers = providers_with(single_pair_rules())
        pairs = synthesize(PAGES, 1, providers, doc_id="d1", k=2, n=2, seed=0)
        assert len(pairs) == 1
        assert pairs[0].style == QUESTION_STYLES[0]

    def test_same_seed_reproduces(self):
        first = synthesize(PAGES, 6, providers_with(single_pair_rules()), k=2, n=2, seed=5)
        second = synthesize(PAGES, 6, providers_with(single_pair_rules()), k=2, n=2, seed=5)
        assert [(p.question, p.pages) for p in first] == [(p.question, p.pages) for p in second]

    def test_source_pages_share_a_cluster(self):
        providers = providers_with(single_pair_rules())
        pairs = synthesize(PAGES, 6, providers, k=2, n=2, seed=1)
        summaries = summarize_pages(PAGES, providers_with([echo_summarizer()]))
        assignment = cluster_summaries(summaries, 2, seed=1)
        label_of = {s.page: label for s, label in zip(summaries, assignment.labels)}
        for pair in pairs:
            labels = {label_of[page] for page in pair.pages}
            assert len(labels) == 1

    def test_majority_failures_abort_with_partial(self):
        rules = [echo_summarizer()]
        # only the first style is scripted; every other generator call fails
        rules.append(("instruction-based questions", "- Question 1: Q?\n- Answer 1: A."))
        providers = providers_with(rules)
        with pytest.raises(SynthesisError) as info:
            synthesize(PAGES, 12, providers, k=2, n=2, seed=0)
        assert len(info.value.partial) >= 1

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            synthesize(PAGES, 0, providers_with(single_pair_rules()))
