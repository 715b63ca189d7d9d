"""On-disk layout of a retrieval bundle.

A store directory holds:

* ``manifest.json`` — version, corpus id, counts, embedding dim, parameters
* ``parents.jsonl`` / ``children.jsonl`` — one chunk per line
* ``postings.json`` — inverted index, document lengths, average length
* ``vectors.f32`` — row-major little-endian float32, row i = child i in
  ``children.jsonl`` order

Serialization is canonical (sorted keys, fixed separators) so identical
inputs produce byte-identical stores.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .chunking import ChildChunk, ParentChunk
from .errors import StoreError
from .retrieval import RetrievalBundle, SparseIndex, StoreManifest

STORE_VERSION = 1
STORE_FILES = ("manifest.json", "parents.jsonl", "children.jsonl", "postings.json", "vectors.f32")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def persist_store(bundle: RetrievalBundle, directory: str | Path) -> StoreManifest:
    """Write the bundle under ``directory`` (created if needed)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    (directory / "manifest.json").write_text(
        _dumps(asdict(bundle.manifest)) + "\n", encoding="utf-8"
    )
    with open(directory / "parents.jsonl", "w", encoding="utf-8") as fh:
        for parent in bundle.parents.values():
            fh.write(_dumps(asdict(parent)) + "\n")
    with open(directory / "children.jsonl", "w", encoding="utf-8") as fh:
        for child_id in bundle.child_order:
            fh.write(_dumps(asdict(bundle.children[child_id])) + "\n")
    (directory / "postings.json").write_text(
        _dumps(
            {
                "postings": bundle.sparse.postings,
                "doc_lengths": bundle.sparse.doc_lengths,
                "avg_length": bundle.sparse.avg_length,
            }
        )
        + "\n",
        encoding="utf-8",
    )
    vectors = np.ascontiguousarray(bundle.vectors, dtype="<f4")
    (directory / "vectors.f32").write_bytes(vectors.tobytes())
    return bundle.manifest


def load_store(directory: str | Path) -> RetrievalBundle:
    """Rebuild a bundle persisted by :func:`persist_store`.

    Raises StoreError on a missing file, an unsupported manifest version, or
    a vector file whose size disagrees with ``count * dim * 4`` bytes.
    """
    directory = Path(directory)
    for name in STORE_FILES:
        if not (directory / name).is_file():
            raise StoreError(f"store file missing: {directory / name}")

    manifest_raw = _read_json(directory / "manifest.json")
    version = manifest_raw.get("version")
    if version != STORE_VERSION:
        raise StoreError(f"unsupported store version {version!r}")
    manifest = StoreManifest(
        version=version,
        corpus_id=manifest_raw["corpus_id"],
        n_parents=manifest_raw["n_parents"],
        n_children=manifest_raw["n_children"],
        dim=manifest_raw["dim"],
        parameters=manifest_raw.get("parameters", {}),
    )

    parents: dict[str, ParentChunk] = {}
    for record in _read_jsonl(directory / "parents.jsonl"):
        record["pages"] = tuple(record["pages"])
        parent = ParentChunk(**record)
        parents[parent.parent_id] = parent

    children: dict[str, ChildChunk] = {}
    child_order: list[str] = []
    for record in _read_jsonl(directory / "children.jsonl"):
        child = ChildChunk(**record)
        children[child.child_id] = child
        child_order.append(child.child_id)

    postings_raw = _read_json(directory / "postings.json")
    sparse = SparseIndex(
        postings=postings_raw["postings"],
        doc_lengths=postings_raw["doc_lengths"],
        avg_length=postings_raw["avg_length"],
    )

    blob = (directory / "vectors.f32").read_bytes()
    expected = manifest.n_children * manifest.dim * 4
    if len(blob) != expected:
        raise StoreError(
            f"vectors.f32 is {len(blob)} bytes, expected {expected} "
            f"({manifest.n_children} x {manifest.dim} x 4)"
        )
    vectors = np.frombuffer(blob, dtype="<f4").reshape(manifest.n_children, manifest.dim)

    if manifest.n_parents != len(parents) or manifest.n_children != len(children):
        raise StoreError("manifest counts disagree with chunk files")

    return RetrievalBundle(
        parents=parents,
        children=children,
        sparse=sparse,
        vectors=vectors.copy(),
        child_order=child_order,
        manifest=manifest,
    )


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreError(f"corrupt JSON in {path}: {exc.msg}") from exc


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)
