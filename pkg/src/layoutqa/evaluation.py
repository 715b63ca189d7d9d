"""Answer-quality metrics: nested-claim recall and categorical coverage.

Recall: nested (subject, predicate, object) triples are extracted from the
gold answer, a judge marks each claim entailed or not by the generated
answer, and recall is the entailed fraction.

Coverage: a judge assigns each answer Complete / Partial / Incorrect; the
categories map to 2 / 1 / 0 points and the aggregate score is normalized by
the all-Complete maximum:

    score = (2 * N_complete + N_partial) / (2 * N_total)

computed in exact rational arithmetic before any rounding.
"""

from __future__ import annotations

import ast
import json
import logging
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

from .errors import ClaimExtractionError, JudgeError, MetricError
from .providers import ProviderSet

logger = logging.getLogger(__name__)

COMPLETE = "Complete"
PARTIAL = "Partial"
INCORRECT = "Incorrect"
CATEGORIES = (COMPLETE, PARTIAL, INCORRECT)


@dataclass(frozen=True)
class Claim:
    """A (subject, predicate, object) triple; subject/object may nest."""

    subject: "str | Claim"
    predicate: str
    object: "str | Claim"

    def render(self) -> str:
        def term(value) -> str:
            if isinstance(value, Claim):
                return value.render()
            return json.dumps(value, ensure_ascii=False)

        return f"({term(self.subject)}, {json.dumps(self.predicate, ensure_ascii=False)}, {term(self.object)})"


def _to_claim(value) -> Claim:
    if not (isinstance(value, tuple) and len(value) == 3):
        raise ValueError(f"not a 3-tuple: {value!r}")
    subject, predicate, obj = value
    if not isinstance(predicate, str) or not predicate.strip():
        raise ValueError("predicate must be a non-empty string")

    def term(x):
        if isinstance(x, str):
            return x
        if isinstance(x, tuple):
            return _to_claim(x)
        raise ValueError(f"claim term must be a string or triple, got {type(x).__name__}")

    return Claim(subject=term(subject), predicate=predicate, object=term(obj))


def parse_claim_line(line: str) -> Claim | None:
    """Parse one ``("s", "p", "o")`` line, tolerating bullets and prose."""
    start = line.find("(")
    end = line.rfind(")")
    if start == -1 or end == -1 or end <= start:
        return None
    try:
        value = ast.literal_eval(line[start : end + 1])
        return _to_claim(value)
    except (ValueError, SyntaxError):
        return None


def extract_claims(
    question: str, answer_text: str, providers: ProviderSet
) -> list[Claim]:
    """Ask the judge model for the answer's knowledge-graph triples."""
    if not answer_text.strip():
        raise MetricError("cannot extract claims from an empty answer")
    response = providers.chat(
        providers.templates.render(
            "claim_extraction", {"question": question, "answer": answer_text}
        )
    )
    claims: list[Claim] = []
    for line in response.splitlines():
        if "(" not in line:
            continue
        claim = parse_claim_line(line)
        if claim is None:
            logger.warning("skipping malformed claim line: %r", line.strip())
            continue
        claims.append(claim)
    if not claims:
        raise ClaimExtractionError("no parseable claims in judge response")
    return claims


def entail_claims(
    claims: list[Claim], generated_answer: str, providers: ProviderSet
) -> list[bool]:
    """One batched judge call: a True/False verdict per claim, in order.

    Missing verdicts count as not entailed (the conservative reading for a
    recall metric) and are logged.
    """
    numbered = "\n".join(f"    {i}. {c.render()}" for i, c in enumerate(claims, 1))
    response = providers.chat(
        providers.templates.render(
            "claim_entailment", {"answer": generated_answer, "claims": numbered}
        )
    )
    tokens = [t.lower() == "true" for t in re.findall(r"\b(true|false)\b", response, re.I)]
    if len(tokens) < len(claims):
        logger.warning(
            "entailment judge returned %d verdicts for %d claims; missing count as False",
            len(tokens),
            len(claims),
        )
        tokens.extend([False] * (len(claims) - len(tokens)))
    return tokens[: len(claims)]


def compute_recall(
    gold_answer: str,
    generated_answer: str,
    providers: ProviderSet,
    question: str = "",
) -> float:
    """Fraction of gold-answer claims entailed by the generated answer."""
    if not gold_answer.strip() or not generated_answer.strip():
        raise MetricError("recall needs non-empty gold and generated answers")
    try:
        claims = extract_claims(question, gold_answer, providers)
    except ClaimExtractionError as exc:
        raise MetricError(f"gold claim extraction failed: {exc}") from exc
    verdicts = entail_claims(claims, generated_answer, providers)
    return sum(verdicts) / len(claims)


def judge_coverage(
    question: str, gold_source: str, generated_answer: str, providers: ProviderSet
) -> tuple[str, str]:
    """Categorize one answer as Complete / Partial / Incorrect."""
    if not question.strip() or not gold_source.strip() or not generated_answer.strip():
        raise MetricError("judge inputs must be non-empty")
    from .pipeline import extract_tag

    response = providers.chat(
        providers.templates.render(
            "coverage_judge",
            {"question": question, "source": gold_source, "answer": generated_answer},
        )
    )
    decision = extract_tag(response, "decision").strip().upper()
    thought = extract_tag(response, "thought_process")
    mapping = {"COMPLETE": COMPLETE, "PARTIAL": PARTIAL, "INCORRECT": INCORRECT}
    if decision not in mapping:
        raise JudgeError(f"out-of-set decision {decision!r}")
    return mapping[decision], thought


@dataclass
class EvalRecord:
    """Per-question, per-run evaluation detail."""

    question_id: str
    run: int
    question: str
    gold_answer: str
    generated_answer: str
    recall: float | None = None
    category: str | None = None
    thought: str = ""

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "run": self.run,
            "question": self.question,
            "gold_answer": self.gold_answer,
            "generated_answer": self.generated_answer,
            "recall": self.recall,
            "category": self.category,
            "thought": self.thought,
        }


@dataclass
class CoverageReport:
    """Aggregate category counts and the normalized coverage score."""

    n_complete: int
    n_partial: int
    n_incorrect: int
    n_total: int
    score: float
    mean_recall: float | None = None

    def rounded_score(self, digits: int = 4) -> float:
        return round(self.score, digits)


def coverage_score(records: list[EvalRecord]) -> CoverageReport:
    """Exact-rational coverage score over fully categorized records."""
    if not records:
        raise MetricError("coverage score needs at least one record")
    counts = {COMPLETE: 0, PARTIAL: 0, INCORRECT: 0}
    for record in records:
        if record.category not in counts:
            raise MetricError(
                f"record {record.question_id!r} run {record.run} is not categorized"
            )
        counts[record.category] += 1
    total = len(records)
    exact = Fraction(2 * counts[COMPLETE] + counts[PARTIAL], 2 * total)
    recalls = [r.recall for r in records if r.recall is not None]
    mean_recall = sum(recalls) / len(recalls) if recalls else None
    return CoverageReport(
        n_complete=counts[COMPLETE],
        n_partial=counts[PARTIAL],
        n_incorrect=counts[INCORRECT],
        n_total=total,
        score=float(exact),
        mean_recall=mean_recall,
    )


def coverage_score_from_counts(
    n_complete: int, n_partial: int, n_incorrect: int
) -> CoverageReport:
    """Coverage score straight from category counts."""
    total = n_complete + n_partial + n_incorrect
    if total < 1:
        raise MetricError("coverage score needs at least one categorized answer")
    exact = Fraction(2 * n_complete + n_partial, 2 * total)
    return CoverageReport(n_complete, n_partial, n_incorrect, total, float(exact))


@dataclass
class DatasetReport:
    """Coverage report plus per-record detail and isolated failures."""

    coverage: CoverageReport
    records: list[EvalRecord] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    per_question_recall: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "counts": {
                "complete": self.coverage.n_complete,
                "partial": self.coverage.n_partial,
                "incorrect": self.coverage.n_incorrect,
                "total": self.coverage.n_total,
            },
            "score": self.coverage.rounded_score(),
            "mean_recall": self.coverage.mean_recall,
            "per_question_recall": self.per_question_recall,
            "records": [r.to_dict() for r in self.records],
            "failures": self.failures,
        }


def read_qa_dataset(path: str | Path) -> list[dict]:
    """JSON-lines rows of {id, question, gold_answer, doc_id}."""
    rows: list[dict] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            raw = json.loads(line)
            for key in ("id", "question", "gold_answer"):
                if key not in raw:
                    raise MetricError(f"qa record at line {lineno} misses {key!r}")
            rows.append(raw)
    return rows


def evaluate_dataset(
    qa_file: str | Path,
    system: Callable[[str], object],
    providers: ProviderSet,
    runs: int = 1,
    judge_source: str = "gold_answer",
) -> DatasetReport:
    """Answer and grade every QA pair ``runs`` times.

    Each run contributes one categorized record to the coverage score;
    per-question recall is averaged over runs. Failures (system errors,
    judge errors) are isolated, flagged, and excluded from the score.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    rows = read_qa_dataset(qa_file)
    records: list[EvalRecord] = []
    failures: list[dict] = []
    recall_sums: dict[str, list[float]] = {}

    for row in rows:
        for run in range(1, runs + 1):
            qid = str(row["id"])
            try:
                result = system(row["question"])
                generated = getattr(result, "answer", result)
                error = getattr(result, "error", None)
                if error:
                    raise MetricError(f"system error: {error}")
                if not str(generated).strip():
                    refusal = getattr(result, "refusal", None)
                    raise MetricError(f"empty answer (refusal: {refusal})")
                generated = str(generated)
                source = row["gold_answer"] if judge_source == "gold_answer" else row[judge_source]
                recall = compute_recall(
                    row["gold_answer"], generated, providers, question=row["question"]
                )
                category, thought = judge_coverage(
                    row["question"], source, generated, providers
                )
            except Exception as exc:
                logger.error("evaluation failed for %s run %d: %s", qid, run, exc)
                failures.append({"question_id": qid, "run": run, "error": str(exc)})
                continue
            records.append(
                EvalRecord(
                    question_id=qid,
                    run=run,
                    question=row["question"],
                    gold_answer=row["gold_answer"],
                    generated_answer=generated,
                    recall=recall,
                    category=category,
                    thought=thought,
                )
            )
            recall_sums.setdefault(qid, []).append(recall)

    if not records:
        raise MetricError(f"no QA pair could be evaluated ({len(failures)} failures)")
    report = DatasetReport(
        coverage=coverage_score(records),
        records=records,
        failures=failures,
        per_question_recall={
            qid: sum(values) / len(values) for qid, values in recall_sums.items()
        },
    )
    return report
