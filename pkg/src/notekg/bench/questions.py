"""Benchmark question data model, gold versioning, and exclusions."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

from ..errors import DataError
from ..evaluator import CATEGORIES

log = logging.getLogger(__name__)

TASKS = ("A", "B")


@dataclass(frozen=True)
class Question:
    qid: str
    task: str
    category: str
    patient_id: str
    admission_ids: tuple[int, ...]
    question: str
    expected_answer: str
    section: Optional[str] = None
    gold_version: str = "v2"

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"{self.qid}: unknown task {self.task!r}")
        if self.category not in CATEGORIES:
            raise ValueError(f"{self.qid}: unknown category {self.category!r}")


def load_questions(path, gold_version: str = "v2") -> list[Question]:
    """Load a question JSONL file, enforcing unique qids and known categories."""
    questions: list[Question] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                q = Question(
                    qid=obj["qid"],
                    task=obj["task"],
                    category=obj["category"],
                    patient_id=obj["patient_id"],
                    admission_ids=tuple(obj.get("admission_ids", [])),
                    question=obj["question"],
                    expected_answer=obj["expected_answer"],
                    section=obj.get("section"),
                    gold_version=obj.get("gold_version", gold_version),
                )
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: missing field {exc}") from exc
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            if q.qid in seen:
                raise DataError(f"{path}:{lineno}: duplicate qid {q.qid!r}")
            seen.add(q.qid)
            questions.append(q)
    log.info("loaded %d questions from %s: %s", len(questions), path, category_histogram(questions))
    return questions


def category_histogram(questions: Sequence[Question]) -> dict[str, int]:
    hist: dict[str, int] = {}
    for q in questions:
        hist[q.category] = hist.get(q.category, 0) + 1
    return dict(sorted(hist.items()))


def load_corrections(path) -> dict[str, str]:
    """Corrections file: qid -> corrected expected_answer."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict) or not all(isinstance(v, str) for v in raw.values()):
        raise DataError(f"{path}: corrections must map qid to corrected answer text")
    return raw


def apply_corrections(
    questions: Sequence[Question], corrections: dict[str, str], gold_version: str = "v2"
) -> list[Question]:
    """Produce a corrected gold: listed qids get the corrected expected answer."""
    known = {q.qid for q in questions}
    for qid in corrections:
        if qid not in known:
            log.warning("correction for unknown qid %s ignored", qid)
    return [
        replace(q, expected_answer=corrections[q.qid], gold_version=gold_version)
        if q.qid in corrections
        else replace(q, gold_version=gold_version)
        for q in questions
    ]


def apply_exclusions(
    questions: Sequence[Question],
    exclusion_qids: Iterable[str] = (),
    exclude_change: bool = False,
) -> list[Question]:
    """Drop listed qids and, when flagged, the whole change category.

    Unknown qids in the exclusion list are warned about, not errors.
    """
    exclusions = set(exclusion_qids)
    known = {q.qid for q in questions}
    for qid in sorted(exclusions - known):
        log.warning("exclusion qid %s not in question set", qid)
    return [
        q
        for q in questions
        if q.qid not in exclusions and not (exclude_change and q.category == "change")
    ]
