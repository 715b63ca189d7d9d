"""The answer pipeline: rewrite, retrieve, extract, filter, read.

One ``answer()`` call composes the stages over a built retrieval bundle:

1. the query is rewritten (optional) and all variants retrieve together;
2. the long-context extractor pulls citable information out of the enriched
   parent chunks;
3. the chain-of-thought filter keeps only child chunks whose relevance the
   model affirms (one reasoning call, one True/False validation call);
4. the reader (basic or domain-parameterized) writes the final answer from
   the extracted information plus the kept children.

Every stage is individually toggleable for ablation runs, and all model
output parsing shares the same tag-extraction fallback rules.
"""

from __future__ import annotations

import logging
import re
import time
from dataclasses import asdict, dataclass, field

from .chunking import ChildChunk, ParentChunk
from .providers import ProviderSet
from .retrieval import (
    DEFAULT_DEPTH_FACTOR,
    DEFAULT_RRF_LAMBDA,
    RetrievalBundle,
    RetrievalResult,
    retrieve,
)
from .rewriter import QuerySet, rewrite

logger = logging.getLogger(__name__)

_TRUE_FALSE = re.compile(r"\b(true|false)\b", re.IGNORECASE)

DEFAULT_DOMAIN_PHRASES = """\
- Level-of-comfort grades for tax opinions, strongest to weakest: "will", "should", "more likely than not", "substantial authority", "reasonable basis".
- "Withholding tax": tax retained at source on payments to holders.
- "Tax characterization": the treatment of an instrument as debt, equity, or a hybrid.
- "Portfolio interest exemption": exemption from U.S. withholding for qualifying non-U.S. holders.\
"""


@dataclass
class PipelineConfig:
    """Tunables and ablation toggles for one answer pipeline."""

    k: int = 5
    n_rewrites: int = 1
    rrf_lambda: float = DEFAULT_RRF_LAMBDA
    use_rewriter: bool = True
    use_smart_chunking: bool = True  # ingest-time; recorded here for run manifests
    use_domain_reader: bool = True
    use_extractor: bool = True
    use_filter: bool = True
    reader_examples: list[dict] = field(default_factory=list)
    domain_phrases: str = DEFAULT_DOMAIN_PHRASES
    depth_factor: int = DEFAULT_DEPTH_FACTOR

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_rewrites not in (0, 1, 3):
            raise ValueError("n_rewrites must be 0, 1, or 3")


@dataclass
class ExtractorOutput:
    """Citable original information pulled from the parent chunks."""

    text: str


@dataclass
class FilterOutput:
    """Filter verdicts over the retrieved children, in their original order."""

    kept: list[ChildChunk]
    thought: str
    verdicts: list[bool]


@dataclass
class AnswerRecord:
    """Everything one pipeline run produced, including intermediates."""

    question: str
    rewrites: list[str] = field(default_factory=list)
    answer: str = ""
    refusal: str | None = None
    error: str | None = None
    child_ids: list[str] = field(default_factory=list)
    parent_ids: list[str] = field(default_factory=list)
    extracted: str = ""
    thought: str = ""
    verdicts: list[bool] = field(default_factory=list)
    rankings: list[dict] = field(default_factory=list)
    fused_scores: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def comparable(self) -> dict:
        """The record without timing, for determinism checks."""
        data = self.to_dict()
        data.pop("timing")
        return data


def extract_tag(text: str, tag: str) -> str:
    """Content of the first ``<tag>...</tag>`` span, with fallbacks.

    Missing closing tag: everything after the opening tag. No tags at all:
    the whole text. Both fallbacks log a warning.
    """
    opening, closing = f"<{tag}>", f"</{tag}>"
    start = text.find(opening)
    if start == -1:
        logger.warning("response carries no <%s> tag; using full text", tag)
        return text.strip()
    start += len(opening)
    end = text.find(closing, start)
    if end == -1:
        logger.warning("response misses </%s>; taking text after the opening tag", tag)
        return text[start:].strip()
    return text[start:end].strip()


def parse_verdicts(text: str, expected: int) -> list[bool]:
    """True/False tokens in order; missing verdicts default to True."""
    tokens = [t.lower() == "true" for t in _TRUE_FALSE.findall(text)]
    if len(tokens) < expected:
        logger.warning(
            "expected %d verdicts, parsed %d; treating the rest as True",
            expected,
            len(tokens),
        )
        tokens.extend([True] * (expected - len(tokens)))
    elif len(tokens) > expected:
        logger.warning("expected %d verdicts, parsed %d; ignoring extras", expected, len(tokens))
    return tokens[:expected]


def extract_global(
    queries: QuerySet, parents: list[ParentChunk], providers: ProviderSet
) -> ExtractorOutput:
    """Run the long-context extractor over the parent chunks (document order)."""
    if not parents:
        return ExtractorOutput(text="")
    context = "\n\n".join(p.text for p in parents)
    translated = queries.rewrites[0] if queries.rewrites else ""
    prompt = providers.templates.render(
        "extractor",
        {"context": context, "question": queries.original, "translated_question": translated},
    )
    return ExtractorOutput(text=extract_tag(providers.chat(prompt), "information"))


def cot_filter(
    queries: QuerySet, children: list[ChildChunk], providers: ProviderSet
) -> FilterOutput:
    """Two-call relevance filter: reasoning trace, then per-chunk verdicts."""
    if not children:
        return FilterOutput(kept=[], thought="", verdicts=[])
    refs = "\n".join(f"<reference> {c.text} </reference>" for c in children)
    translated = queries.rewrites[0] if queries.rewrites else ""
    base = {
        "context": refs,
        "question": queries.original,
        "translated_question": translated,
    }
    thought = extract_tag(
        providers.chat(providers.templates.render("filter_cot", base)), "thought_process"
    )
    validation = providers.chat(
        providers.templates.render("filter_validate", {**base, "cot_info": thought})
    )
    verdicts = parse_verdicts(extract_tag(validation, "validation"), len(children))
    kept = [child for child, keep in zip(children, verdicts) if keep]
    return FilterOutput(kept=kept, thought=thought, verdicts=verdicts)


def render_examples(examples: list[dict]) -> str:
    return "\n".join(
        f"Question: {e['question']}\nAnswer: {e['answer']}" for e in examples
    )


def generate_answer(
    question: str,
    queries: QuerySet,
    extracted: ExtractorOutput,
    filtered: FilterOutput,
    cfg: PipelineConfig,
    providers: ProviderSet,
) -> AnswerRecord:
    """Compose the reader prompt and produce the final answer record."""
    if not extracted.text and not filtered.kept:
        return AnswerRecord(
            question=question,
            rewrites=list(queries.rewrites),
            refusal="insufficient context",
            thought=filtered.thought,
            verdicts=list(filtered.verdicts),
        )
    parts = []
    if extracted.text:
        parts.append(extracted.text)
    parts.extend(child.text for child in filtered.kept)
    bindings = {
        "context": "\n".join(parts),
        "chat_history": "",
        "examples": render_examples(cfg.reader_examples),
        "question": question,
        "translated_questions": "\n".join(queries.rewrites),
    }
    if cfg.use_domain_reader:
        template = "reader_domain"
        bindings["domain_phrases"] = cfg.domain_phrases
    else:
        template = "reader_basic"
    response = providers.chat(providers.templates.render(template, bindings))
    return AnswerRecord(
        question=question,
        rewrites=list(queries.rewrites),
        answer=extract_tag(response, "answer"),
        extracted=extracted.text,
        thought=filtered.thought,
        verdicts=list(filtered.verdicts),
    )


def answer(
    question: str,
    cfg: PipelineConfig,
    bundle: RetrievalBundle,
    providers: ProviderSet,
) -> AnswerRecord:
    """Run the full pipeline for one question.

    Never raises on stage failure: the returned record carries the failing
    stage's name in ``error`` and no partial answer text.
    """
    started = time.perf_counter()
    record = AnswerRecord(question=question)
    stage = "rewrite"
    try:
        if cfg.use_rewriter and cfg.n_rewrites > 0:
            queries = rewrite(question, cfg.n_rewrites, providers.chat, providers)
        else:
            queries = QuerySet(original=question)
        record.rewrites = list(queries.rewrites)

        stage = "retrieve"
        result: RetrievalResult = retrieve(
            queries.all(),
            bundle,
            providers.embed,
            cfg.k,
            rrf_lambda=cfg.rrf_lambda,
            depth_factor=cfg.depth_factor,
        )
        record.child_ids = [c.child_id for c in result.children]
        record.parent_ids = [p.parent_id for p in result.parents]
        record.rankings = [
            {"source": r.source, "ids": r.ids()} for r in result.rankings
        ]
        record.fused_scores = {cid: score for cid, score in result.fused_scores.items()}

        stage = "extract"
        if cfg.use_extractor:
            extracted = extract_global(queries, result.parents, providers)
        else:
            extracted = ExtractorOutput(text="")
        record.extracted = extracted.text

        stage = "filter"
        if cfg.use_filter:
            filtered = cot_filter(queries, result.children, providers)
        else:
            filtered = FilterOutput(
                kept=list(result.children),
                thought="",
                verdicts=[True] * len(result.children),
            )
        record.thought = filtered.thought
        record.verdicts = list(filtered.verdicts)

        stage = "read"
        final = generate_answer(question, queries, extracted, filtered, cfg, providers)
        final.child_ids = record.child_ids
        final.parent_ids = record.parent_ids
        final.rankings = record.rankings
        final.fused_scores = record.fused_scores
        final.timing = {"seconds": time.perf_counter() - started}
        return final
    except Exception as exc:
        logger.error("pipeline stage %r failed: %s", stage, exc)
        record.error = f"{stage}: {exc}"
        record.answer = ""
        record.timing = {"seconds": time.perf_counter() - started}
        return record
