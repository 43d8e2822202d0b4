"""Condition runner with append-only JSONL checkpoints, scoring, and reports.

Checkpoints are one JSON object per line with a fixed field order; answers
are stored untruncated (an explicit regression guard). Resume reads the
completed qids back and appends only what is missing, so an interrupted run
converges to the same bytes as an uninterrupted one under a deterministic
backend.
"""
from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Sequence

from .. import stats
from ..errors import DataError
from ..evaluator import EvalResult, KeywordConfig, evaluate
from .backends import LlmBackend
from .conditions import BenchEnvironment, Condition, build_context, deterministic_answer_c7, extract_concepts
from .questions import Question

log = logging.getLogger(__name__)

EPOCH_TS = "1970-01-01T00:00:00Z"


@dataclass(frozen=True)
class Prediction:
    qid: str
    condition: str
    model: str
    predicted_answer: str
    evidence: str
    elapsed_ms: int
    ts: str
    error: str = ""


@dataclass
class RunSummary:
    condition: str
    model: str
    predictions: list[Prediction]
    answered: int
    skipped: int
    errors: list[str] = field(default_factory=list)


def _checkpoint_record(pred: Prediction) -> dict:
    record = {
        "qid": pred.qid,
        "condition": pred.condition,
        "model": pred.model,
        "predicted_answer": pred.predicted_answer,
        "evidence": pred.evidence,
        "elapsed_ms": pred.elapsed_ms,
        "ts": pred.ts,
    }
    if pred.error:
        record["error"] = pred.error
    return record


def read_checkpoint(path) -> list[Prediction]:
    """Read a checkpoint, tolerating a trailing partial line from a crash."""
    predictions: list[Prediction] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                log.warning("%s:%d: ignoring partial checkpoint line", path, lineno)
                continue
            try:
                predictions.append(
                    Prediction(
                        qid=obj["qid"],
                        condition=obj["condition"],
                        model=obj["model"],
                        predicted_answer=obj["predicted_answer"],
                        evidence=obj.get("evidence", ""),
                        elapsed_ms=obj.get("elapsed_ms", 0),
                        ts=obj.get("ts", ""),
                        error=obj.get("error", ""),
                    )
                )
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: checkpoint record missing {exc}") from exc
    return predictions


def run_condition(
    condition: Condition,
    questions: Sequence[Question],
    env: BenchEnvironment,
    backend: Optional[LlmBackend],
    checkpoint_path,
    resume: bool = False,
    jobs: int = 1,
) -> RunSummary:
    """Answer every question once, appending each prediction to the checkpoint.

    ``resume`` skips qids already present. Backend failures are recorded as
    errored items (empty answer) and the run continues. The deterministic
    graph-lookup condition needs no backend.
    """
    if condition.retrieval != "deterministic" and backend is None:
        raise DataError(f"condition {condition.id} requires a backend")

    done: dict[str, Prediction] = {}
    if resume:
        try:
            for pred in read_checkpoint(checkpoint_path):
                done[pred.qid] = pred
        except FileNotFoundError:
            pass
        if done:
            # Rewrite the surviving records canonically so a crash that left a
            # partial trailing line cannot corrupt the first appended record.
            with open(checkpoint_path, "w", encoding="utf-8") as fh:
                for pred in done.values():
                    fh.write(json.dumps(_checkpoint_record(pred)) + "\n")

    model_name = backend.name if backend is not None else "deterministic"
    fixed_clock = backend is None or getattr(backend, "deterministic", False)
    todo = [q for q in questions if q.qid not in done]

    def answer(question: Question) -> Prediction:
        start = time.monotonic()
        error = ""
        try:
            if condition.retrieval == "deterministic":
                graph = env.graph(question.patient_id)
                concepts = extract_concepts(env.vocabulary, question.question)
                predicted = deterministic_answer_c7(graph, concepts)
                evidence = ""
            else:
                prompt, evidence = build_context(condition, env, question)
                assert backend is not None
                predicted = backend.generate(prompt)
        except Exception as exc:  # noqa: BLE001 - recorded, run continues
            predicted, evidence, error = "", "", f"{type(exc).__name__}: {exc}"
        elapsed = 0 if fixed_clock else int((time.monotonic() - start) * 1000)
        ts = EPOCH_TS if fixed_clock else datetime.now(timezone.utc).isoformat()
        return Prediction(
            qid=question.qid,
            condition=condition.id,
            model=model_name,
            predicted_answer=predicted,
            evidence=evidence,
            elapsed_ms=elapsed,
            ts=ts,
            error=error,
        )

    mode = "a" if (resume and done) else "w"
    new: list[Prediction] = []
    with open(checkpoint_path, mode, encoding="utf-8") as fh:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(answer, todo)
                for pred in results:
                    fh.write(json.dumps(_checkpoint_record(pred)) + "\n")
                    fh.flush()
                    new.append(pred)
        else:
            for question in todo:
                pred = answer(question)
                fh.write(json.dumps(_checkpoint_record(pred)) + "\n")
                fh.flush()
                new.append(pred)

    predictions = [done[q.qid] if q.qid in done else None for q in questions]
    by_qid = {p.qid: p for p in new}
    predictions = [p if p is not None else by_qid[q.qid] for p, q in zip(predictions, questions)]
    errors = [p.qid for p in predictions if p.error]
    if errors:
        log.warning("condition %s: %d errored items: %s", condition.id, len(errors), errors)
    return RunSummary(
        condition=condition.id,
        model=model_name,
        predictions=predictions,
        answered=len(new),
        skipped=len(done),
        errors=errors,
    )


# -- scoring -------------------------------------------------------------


@dataclass(frozen=True)
class ScoredItem:
    qid: str
    category: str
    patient_id: str
    condition: str
    result: EvalResult

    @property
    def correct(self) -> bool:
        return self.result.correct


@dataclass
class ScoredRun:
    condition: str
    model: str
    version: str
    items: list[ScoredItem]

    @property
    def n(self) -> int:
        return len(self.items)

    @property
    def accuracy(self) -> float:
        return sum(1 for it in self.items if it.correct) / self.n

    def per_category(self) -> dict[str, float]:
        totals: dict[str, list[int]] = {}
        for it in self.items:
            bucket = totals.setdefault(it.category, [0, 0])
            bucket[0] += 1 if it.correct else 0
            bucket[1] += 1
        return {cat: k / n for cat, (k, n) in sorted(totals.items())}

    def per_patient(self) -> dict[str, float]:
        totals: dict[str, list[int]] = {}
        for it in self.items:
            bucket = totals.setdefault(it.patient_id, [0, 0])
            bucket[0] += 1 if it.correct else 0
            bucket[1] += 1
        return {pid: k / n for pid, (k, n) in sorted(totals.items())}

    def outcomes(self) -> dict[str, bool]:
        return {it.qid: it.correct for it in self.items}


def score_run(
    predictions: Sequence[Prediction],
    questions: Sequence[Question],
    version: str = "v2",
    keywords: Optional[KeywordConfig] = None,
) -> ScoredRun:
    """Join predictions to gold questions and score each one exactly once."""
    if not predictions:
        raise DataError("no predictions to score")
    gold = {q.qid: q for q in questions}
    missing = sorted({p.qid for p in predictions} - set(gold))
    if missing:
        raise DataError(f"predictions reference qids absent from gold: {missing}")
    seen: set[str] = set()
    items: list[ScoredItem] = []
    for pred in predictions:
        if pred.qid in seen:
            raise DataError(f"duplicate prediction for qid {pred.qid}")
        seen.add(pred.qid)
        q = gold[pred.qid]
        result = evaluate(q.category, q.expected_answer, pred.predicted_answer, version, keywords)
        items.append(ScoredItem(pred.qid, q.category, q.patient_id, pred.condition, result))
    return ScoredRun(
        condition=predictions[0].condition,
        model=predictions[0].model,
        version=version,
        items=items,
    )


def write_scores_jsonl(scored: ScoredRun, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for it in scored.items:
            fh.write(
                json.dumps(
                    {
                        "qid": it.qid,
                        "condition": it.condition,
                        "correct": it.correct,
                        "abstention": it.result.abstention,
                        "matched": list(it.result.matched),
                    }
                )
                + "\n"
            )


def paired_table(run_a: ScoredRun, run_b: ScoredRun) -> stats.PairedTable:
    """Paired 2x2 outcome table over the shared qid set; the qid sets must
    match exactly."""
    a_out = run_a.outcomes()
    b_out = run_b.outcomes()
    only_a = sorted(set(a_out) - set(b_out))
    only_b = sorted(set(b_out) - set(a_out))
    if only_a or only_b:
        raise DataError(
            f"qid sets differ: only in first={only_a}, only in second={only_b}"
        )
    qids = sorted(a_out)
    return stats.paired_table_from_outcomes(
        [a_out[q] for q in qids], [b_out[q] for q in qids]
    )


# -- reporting -------------------------------------------------------------


def _comparison_block(table: stats.PairedTable) -> dict:
    delta, ci = stats.newcombe_paired_ci(table)
    block = {
        "table": {"a": table.a, "b": table.b, "c": table.c, "d": table.d},
        "delta": delta,
        "newcombe_ci": [ci.lower, ci.upper],
        "mcnemar_exact_p": stats.mcnemar_exact(table.b, table.c),
    }
    if table.b + table.c > 0:
        chi2, chi2_p = stats.mcnemar_chi2(table.b, table.c)
        block["mcnemar_chi2"] = chi2
        block["mcnemar_chi2_p"] = chi2_p
    return block


def report(
    runs: dict[str, ScoredRun],
    comparisons: Sequence[tuple[str, str]] = (),
    checkpoint_files: Optional[dict[str, str]] = None,
    cross_model: Optional[dict] = None,
) -> dict:
    """Assemble the full report document.

    Accuracy per condition and category, paired statistics per requested
    comparison, and a provenance block listing each run's checkpoint file in
    model/condition order.
    """
    doc: dict = {"schema_version": 1, "runs": {}, "comparisons": {}}
    for name in sorted(runs):
        run = runs[name]
        doc["runs"][name] = {
            "condition": run.condition,
            "model": run.model,
            "evaluator_version": run.version,
            "n": run.n,
            "accuracy": run.accuracy,
            "per_category": run.per_category(),
        }
    for first, second in comparisons:
        if first not in runs or second not in runs:
            raise DataError(f"comparison ({first}, {second}) references unknown runs")
        table = paired_table(runs[first], runs[second])
        doc["comparisons"][f"{first}_vs_{second}"] = _comparison_block(table)
    if cross_model:
        doc["cross_model"] = cross_model
    provenance = checkpoint_files or {
        name: f"{runs[name].model}/{runs[name].condition}.jsonl" for name in runs
    }
    doc["provenance"] = {"checkpoints": [provenance[k] for k in sorted(provenance)]}
    return doc


def cross_model_section(per_model: dict[str, tuple[ScoredRun, ScoredRun]]) -> dict:
    """Baseline-vs-delta regression across models.

    ``per_model`` maps model name to its (baseline run, routed run) pair;
    accuracies enter the regression in percentage points.
    """
    rows = []
    for model in sorted(per_model):
        base, routed = per_model[model]
        rows.append(
            {
                "model": model,
                "baseline": base.accuracy * 100,
                "routed": routed.accuracy * 100,
                "delta": (routed.accuracy - base.accuracy) * 100,
            }
        )
    section: dict = {"models": rows}
    if len(rows) >= 3:
        xs = [r["baseline"] for r in rows]
        ys = [r["delta"] for r in rows]
        try:
            slope, intercept, r, p = stats.linear_regression(xs, ys)
        except ValueError:
            return section
        section["regression"] = {"slope": slope, "intercept": intercept, "r": r, "p": p}
    return section


def leave_rater_out_table(
    rows: Sequence[dict],
    raters: tuple[str, str],
    conditions: tuple[str, str],
    strict_label: str = "correct",
    dimension: str = "model_correctness",
) -> stats.PairedTable:
    """Paired table from deblinded adjudication rows, restricted to the two
    retained raters' unanimous strict ratings.

    An answer counts correct only when both retained raters rated it
    ``strict_label``; items missing a rating from either rater are dropped.
    """
    by_item: dict[str, dict[str, dict[str, str]]] = {}
    for row in rows:
        if row["rater_id"] not in raters:
            continue
        item = by_item.setdefault(row["item_id"], {})
        item.setdefault(row["condition"], {})[row["rater_id"]] = row[dimension]

    first_outcomes: list[bool] = []
    second_outcomes: list[bool] = []
    for item_id in sorted(by_item):
        conditions_seen = by_item[item_id]
        if any(
            cond not in conditions_seen or set(conditions_seen[cond]) != set(raters)
            for cond in conditions
        ):
            continue
        first_outcomes.append(
            all(conditions_seen[conditions[0]][r] == strict_label for r in raters)
        )
        second_outcomes.append(
            all(conditions_seen[conditions[1]][r] == strict_label for r in raters)
        )
    if not first_outcomes:
        raise DataError("no items with complete ratings from both raters")
    return stats.paired_table_from_outcomes(first_outcomes, second_outcomes)
