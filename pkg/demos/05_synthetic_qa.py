"""Synthetic QA generation: summarize pages, cluster, sample, generate.

Page summaries are embedded and clustered with seeded k-means; each
generation round samples pages from one cluster (falling back past clusters
that are too small) and prompts one of the six question-style generators,
cycling styles round-robin until the budget is met.

    python3 demos/05_synthetic_qa.py
"""

from pathlib import Path

from layoutqa import cluster_summaries, summarize_pages, synthesize
from layoutqa.cli import _pages_by_doc, build_providers, load_config
from layoutqa import parse_layout

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

config = load_config(str(FIXTURES / "mock_config.json"))
providers = build_providers(config)
elements = parse_layout(FIXTURES / "layout.jsonl")
pages = _pages_by_doc(elements)["d1"]
print(f"document d1 has {len(pages)} pages")

summaries = summarize_pages(pages, providers, doc_id="d1")
print("\npage summaries (scripted mock summarizer):")
for summary in summaries:
    print(f"  page {summary.page}: {summary.summary[:70]!r}")

assignment = cluster_summaries(summaries, k=2, seed=0)
print(f"\nk-means (k=2, seed=0): labels={assignment.labels.tolist()}, "
      f"inertia trace={[round(x, 4) for x in assignment.inertia_history]}")

pairs = synthesize(pages, budget=6, providers=providers, doc_id="d1", k=2, n=2, seed=0)
print(f"\n{len(pairs)} generated QA pairs (styles cycle round-robin):")
for pair in pairs:
    print(f"  [{pair.style:10}] {pair.question}")
    print(f"               -> {pair.answer[:76]}")
    print(f"               source pages: {pair.pages}")
