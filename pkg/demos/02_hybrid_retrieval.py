"""Compare sparse, dense, and fused retrieval over the fixture corpus.

Builds both indexes with the deterministic mock embedder, runs BM25 and
exact-cosine search separately for one query, then fuses them with
reciprocal rank fusion and expands footnote hits into enriched parents.

    python3 demos/02_hybrid_retrieval.py
"""

from pathlib import Path

from layoutqa import (
    MockEmbedder,
    build_indexes,
    chunk_layout,
    expand_and_enrich,
    fuse_rrf,
    parse_layout,
    retrieve,
    score_bm25,
    search_dense,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

elements = parse_layout(FIXTURES / "layout.jsonl")
chunks = chunk_layout(elements, 120, 48)
embed = MockEmbedder(dim=8)
bundle = build_indexes(chunks.children, embed, parents=chunks.parents, corpus_id="fixture")
print(f"indexed {bundle.manifest.n_children} children "
      f"(dim {bundle.manifest.dim}, {len(bundle.sparse.postings)} terms)")

query = "What reduced withholding rate applies to qualifying noteholders?"
print(f"\nquery: {query}")

sparse = score_bm25(query, bundle, limit=5)
print("\nBM25 (term overlap; zero scores omitted):")
for rank, (cid, score) in enumerate(sparse.entries, 1):
    print(f"  {rank}. {cid:20} {score:.4f}")

dense = search_dense(query, bundle, embed, limit=5)
print("\ndense cosine (exact scan; mock embeddings):")
for rank, (cid, score) in enumerate(dense.entries, 1):
    print(f"  {rank}. {cid:20} {score:+.4f}")

fused = fuse_rrf([sparse, dense], rrf_lambda=60.0, k=5)
print("\nRRF fusion, score = sum 1/(60 + rank):")
for rank, (cid, score) in enumerate(fused.entries, 1):
    print(f"  {rank}. {cid:20} {score:.6f}")

# the one-call version: multi-query hybrid search + parent expansion
result = retrieve([query], bundle, embed, k=3)
print("\ntop-3 children via retrieve():")
for child in result.children:
    print(f"  {child.child_id:20} [{child.kind}]")
parents = expand_and_enrich(result.children, bundle)
print("\nenriched parents (footnote hits inject <footnote> blocks):")
for parent in parents:
    injected = parent.text.count("<footnote>")
    print(f"  {parent.parent_id}: {injected} footnote line(s) injected")
