"""Command-line entry point: ingest, query, eval, synth, filter-rewrites.

Configuration is a JSON file; flags override it. The provider block selects
either a live HTTP backend or the deterministic mocks (scripted chat rules
plus hash-seeded embeddings), so every command can run offline.

Exit codes: 0 success, 1 operational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .chunking import chunk_layout, chunk_naive
from .errors import LayoutQAError, SamplingError, SynthesisError
from .evaluation import evaluate_dataset
from .layout import parse_layout
from .pipeline import PipelineConfig, answer
from .providers import HttpChat, HttpEmbedder, MockChat, MockEmbedder, ProviderConfig, ProviderSet
from .rewriter import export_training_pairs, filter_rewrite_pairs, read_pairs
from .retrieval import build_indexes
from .store import load_store, persist_store
from .synthgen import synthesize
from .templates import TemplateStore

logger = logging.getLogger(__name__)

LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


@dataclass
class AppConfig:
    """Wiring for one command invocation."""

    store_dir: str | None = None
    templates_dir: str | None = None
    provider: dict = field(default_factory=dict)
    pipeline: dict = field(default_factory=dict)
    log_level: str = "warn"


def load_config(path: str | None) -> AppConfig:
    if path is None:
        return AppConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return AppConfig(
        store_dir=raw.get("store_dir"),
        templates_dir=raw.get("templates_dir"),
        provider=raw.get("provider", {}),
        pipeline=raw.get("pipeline", {}),
        log_level=raw.get("log_level", "warn"),
    )


def build_providers(config: AppConfig) -> ProviderSet:
    templates = TemplateStore(config.templates_dir)
    provider = config.provider
    kind = provider.get("type", "mock")
    if kind == "mock":
        chat = MockChat(provider.get("chat_rules", []))
        embed = MockEmbedder(dim=provider.get("embedding_dim", 8))
    elif kind == "http":
        settings = {
            key: provider[key]
            for key in (
                "base_url",
                "model",
                "embedding_model",
                "api_key_env",
                "timeout",
                "max_retries",
                "max_parallel",
                "temperature",
            )
            if key in provider
        }
        provider_config = ProviderConfig(**settings)
        chat = HttpChat(provider_config)
        embed = HttpEmbedder(provider_config)
    else:
        raise LayoutQAError(f"unknown provider type {kind!r}")
    return ProviderSet(chat=chat, embed=embed, templates=templates)


def pipeline_config(config: AppConfig, args: argparse.Namespace) -> PipelineConfig:
    settings = dict(config.pipeline)
    if getattr(args, "rewrites", None) is not None:
        settings["n_rewrites"] = args.rewrites
        settings["use_rewriter"] = args.rewrites > 0
    if getattr(args, "no_extractor", False):
        settings["use_extractor"] = False
    if getattr(args, "no_filter", False):
        settings["use_filter"] = False
    if getattr(args, "basic_reader", False):
        settings["use_domain_reader"] = False
    return PipelineConfig(**settings)


def cmd_ingest(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    providers = build_providers(config)
    elements = parse_layout(args.layout)
    chunker = chunk_layout if args.chunking == "layout" else chunk_naive
    chunks = chunker(elements, args.parent_size, args.child_size)
    bundle = build_indexes(
        chunks.children,
        providers.embed,
        parents=chunks.parents,
        corpus_id=Path(args.layout).stem,
        parameters={
            "chunking": args.chunking,
            "parent_size": args.parent_size,
            "child_size": args.child_size,
        },
    )
    persist_store(bundle, args.store)
    print(
        f"ingested {len(chunks.parents)} parents / {len(chunks.children)} children "
        f"({args.chunking} chunking) into {args.store}"
    )
    for warning in chunks.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


def cmd_query(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    providers = build_providers(config)
    bundle = load_store(args.store)
    cfg = pipeline_config(config, args)
    record = answer(args.question, cfg, bundle, providers)
    if record.error:
        print(f"error: {record.error}", file=sys.stderr)
        return 1
    if args.json:
        print(json.dumps(record.to_dict(), ensure_ascii=False, sort_keys=True))
    elif record.refusal:
        print(record.refusal)
    else:
        print(record.answer)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    providers = build_providers(config)
    bundle = load_store(args.store)
    cfg = PipelineConfig(**config.pipeline)

    def system(question: str):
        return answer(question, cfg, bundle, providers)

    report = evaluate_dataset(args.qa, system, providers, runs=args.runs)
    payload = json.dumps(report.to_dict(), ensure_ascii=False, sort_keys=True, indent=2)
    Path(args.out).write_text(payload + "\n", encoding="utf-8")
    coverage = report.coverage
    print(
        f"evaluated {coverage.n_total} records: score={coverage.rounded_score()} "
        f"(complete={coverage.n_complete}, partial={coverage.n_partial}, "
        f"incorrect={coverage.n_incorrect}, failures={len(report.failures)})"
    )
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    providers = build_providers(config)
    elements = parse_layout(args.layout)
    pairs = []
    exit_code = 0
    for doc_id, pages in _pages_by_doc(elements).items():
        remaining = args.budget - len(pairs)
        if remaining < 1:
            break
        try:
            pairs.extend(
                synthesize(
                    pages,
                    remaining,
                    providers,
                    doc_id=doc_id,
                    k=args.k,
                    n=args.n,
                    seed=args.seed,
                )
            )
        except SamplingError as exc:
            logger.warning("skipping %s: %s", doc_id, exc)
        except SynthesisError as exc:
            logger.error("synthesis aborted for %s: %s", doc_id, exc)
            pairs.extend(exc.partial)
            exit_code = 1
    with open(args.out, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(json.dumps(pair.to_dict(), ensure_ascii=False) + "\n")
    print(f"wrote {len(pairs)} QA pairs to {args.out}")
    return exit_code


def _pages_by_doc(elements) -> dict[str, list[str]]:
    """Full page texts per document (body and footnotes, no furniture)."""
    texts: dict[str, dict[int, list[str]]] = {}
    for element in elements:
        if element.kind in ("page_header", "page_footer"):
            continue
        texts.setdefault(element.doc_id, {}).setdefault(element.page, []).append(element.text)
    pages: dict[str, list[str]] = {}
    for doc_id, by_page in texts.items():
        last = max(by_page)
        pages[doc_id] = ["\n".join(by_page.get(i, [])) for i in range(1, last + 1)]
    return pages


def cmd_filter_rewrites(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    providers = build_providers(config)
    bundle = load_store(args.store)
    pairs = read_pairs(args.pairs)
    retained = filter_rewrite_pairs(pairs, bundle, providers.embed)
    if retained:
        export_training_pairs(retained, args.out)
    else:
        Path(args.out).write_text("", encoding="utf-8")
    print(f"retained {len(retained)} of {len(pairs)} pairs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutqa",
        description="Layout-aware long-context QA over structured documents",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--log-level", choices=sorted(LOG_LEVELS), default=None)

    p = sub.add_parser("ingest", parents=[common], help="build and persist a retrieval store")
    p.add_argument("--layout", required=True, help="JSON-lines layout element file")
    p.add_argument("--store", required=True, help="output store directory")
    p.add_argument("--parent-size", type=int, default=1024, help="parent chunk word limit")
    p.add_argument("--child-size", type=int, default=200, help="child chunk word limit")
    p.add_argument("--chunking", choices=("layout", "naive"), default="layout")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", parents=[common], help="answer one question")
    p.add_argument("question")
    p.add_argument("--store", required=True)
    p.add_argument("--rewrites", type=int, choices=(0, 1, 3), default=None)
    p.add_argument("--no-extractor", action="store_true")
    p.add_argument("--no-filter", action="store_true")
    p.add_argument("--basic-reader", action="store_true")
    p.add_argument("--json", action="store_true", help="print the full answer record")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("eval", parents=[common], help="evaluate a QA dataset")
    p.add_argument("--store", required=True)
    p.add_argument("--qa", required=True, help="JSON-lines {id, question, gold_answer, doc_id}")
    p.add_argument("--out", required=True, help="report JSON path")
    p.add_argument("--runs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", parents=[common], help="generate synthetic QA pairs")
    p.add_argument("--layout", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=8, help="number of page clusters")
    p.add_argument("--n", type=int, default=2, help="pages sampled per generation")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser(
        "filter-rewrites", parents=[common], help="keep rewrites that improve retrieval rank"
    )
    p.add_argument("--pairs", required=True, help="JSON-lines {query, rewrite, source_doc_id}")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_filter_rewrites)
    return parser


def run(argv: list[str]) -> int:
    """Parse and execute; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    level = args.log_level
    if level is None and args.config:
        try:
            level = load_config(args.config).log_level
        except (OSError, json.JSONDecodeError):
            level = "warn"
    logging.basicConfig(level=LOG_LEVELS.get(level or "warn", logging.WARNING))
    try:
        return args.func(args)
    except (LayoutQAError, OSError, json.JSONDecodeError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
