"""Deterministic keyword evaluator with abstention gating.

Three scoring generations are kept behind a version flag: v0 (substring
matching), v1 (word-boundary matching plus evidence-preamble stripping), and
v2 (v1 plus an abstention gate and per-category keyword requirements for
sequence and change answers). v2 is the default and the only version used
for reported numbers; v0/v1 exist to reproduce regression behavior.

The matching is deliberately shallow and polarity-blind for the categories
whose category keyword lists define correctness (uncertainty,
family-history, conditional, current-state, historical): a prediction
containing a category keyword scores correct without consulting the gold
answer. That limitation is part of the contract and is reproduced, not
fixed.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as importlib_resources
from typing import Iterable, Optional, Sequence

from .errors import ConfigError
from .formats import EVIDENCE_END, EVIDENCE_START, is_evidence_line

log = logging.getLogger(__name__)

CATEGORIES = (
    "negation",
    "conditional",
    "uncertainty",
    "family_history",
    "sequence",
    "current_state",
    "duration",
    "historical",
    "change",
)

VERSIONS = ("v0", "v1", "v2")


@dataclass(frozen=True)
class KeywordConfig:
    """Per-category keyword sets plus the shared pattern groups."""

    categories: dict[str, list[str]]
    temporal: list[str] = field(default_factory=list)
    sequence_ordering: list[str] = field(default_factory=list)
    change_markers: list[str] = field(default_factory=list)
    abstention: list[str] = field(default_factory=list)
    claim_overrides: list[str] = field(default_factory=list)
    stopwords: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        missing = [c for c in CATEGORIES if c not in self.categories]
        if missing:
            raise ConfigError(f"keyword config missing categories: {missing}")


def load_keyword_config(path) -> KeywordConfig:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        return KeywordConfig(
            categories={k: list(v) for k, v in raw["categories"].items()},
            temporal=list(raw.get("temporal", [])),
            sequence_ordering=list(raw.get("sequence_ordering", [])),
            change_markers=list(raw.get("change_markers", [])),
            abstention=list(raw.get("abstention", [])),
            claim_overrides=list(raw.get("claim_overrides", [])),
            stopwords=frozenset(w.casefold() for w in raw.get("stopwords", [])),
        )
    except KeyError as exc:
        raise ConfigError(f"keyword config missing section {exc}") from exc


@lru_cache(maxsize=1)
def default_keyword_config() -> KeywordConfig:
    ref = importlib_resources.files("notekg.resources").joinpath("keywords.json")
    with importlib_resources.as_file(ref) as path:
        return load_keyword_config(path)


@dataclass(frozen=True)
class EvalResult:
    correct: bool
    matched: tuple[str, ...]
    abstention: bool
    version: str
    stripped_length: int


@dataclass(frozen=True)
class SafetyWeights:
    false_positive_weight: float = 2.0
    default_weight: float = 1.0

    def __post_init__(self) -> None:
        if self.false_positive_weight <= 0 or self.default_weight <= 0:
            raise ValueError("safety weights must be positive")


def word_boundary_match(text: str, keyword: str) -> bool:
    """Case-insensitive whole-word (or whole-phrase) match."""
    if not keyword:
        raise ValueError("empty keyword")
    pattern = r"\b" + re.escape(keyword.casefold()) + r"\b"
    return re.search(pattern, text.casefold()) is not None


def _substring_match(text: str, keyword: str) -> bool:
    if not keyword:
        raise ValueError("empty keyword")
    return keyword.casefold() in text.casefold()


def strip_preamble(answer: str) -> str:
    """Remove echoed graph evidence from an answer.

    Drops everything between the evidence sentinels (inclusive) and any stray
    typed evidence line. Answers without evidence content are returned
    unchanged.
    """
    lines = answer.splitlines()
    kept: list[str] = []
    removed = False
    inside = False
    for line in lines:
        stripped = line.strip()
        if stripped == EVIDENCE_START:
            inside = True
            removed = True
            continue
        if stripped == EVIDENCE_END:
            inside = False
            removed = True
            continue
        if inside or is_evidence_line(line):
            removed = True
            continue
        kept.append(line)
    if not removed:
        return answer
    return "\n".join(kept).strip()


def detect_abstention(answer: str, config: Optional[KeywordConfig] = None) -> bool:
    """True when an abstention pattern matches and no clinical-claim pattern
    overrides it."""
    cfg = config or default_keyword_config()
    if not any(word_boundary_match(answer, p) for p in cfg.abstention):
        return False
    return not any(word_boundary_match(answer, p) for p in cfg.claim_overrides)


def gold_content_words(expected: str, stopwords: frozenset[str]) -> list[str]:
    """Content words of a gold answer: whitespace-tokenized, case-folded,
    length >= 3, minus stopwords. Order preserved, first occurrence wins."""
    seen: list[str] = []
    for token in re.findall(r"[a-z0-9']+", expected.casefold()):
        if len(token) < 3 or token in stopwords:
            continue
        if token not in seen:
            seen.append(token)
    return seen


def evaluate(
    category: str,
    expected_answer: str,
    predicted_answer: str,
    version: str = "v2",
    keywords: Optional[KeywordConfig] = None,
) -> EvalResult:
    """Score one prediction against its category's rules."""
    cfg = keywords or default_keyword_config()
    if category not in cfg.categories:
        raise ConfigError(f"unknown category {category!r}")
    if version not in VERSIONS:
        raise ConfigError(f"unknown evaluator version {version!r}")

    if version == "v0":
        text = predicted_answer
        matcher = _substring_match
    else:
        text = strip_preamble(predicted_answer)
        matcher = word_boundary_match

    abstained = detect_abstention(predicted_answer, cfg)
    if version == "v2" and abstained:
        return EvalResult(False, (), True, version, len(text))

    category_keywords = cfg.categories[category]
    if category_keywords:
        matched = [kw for kw in category_keywords if matcher(text, kw)]
    else:
        # No keyword list configured: fall back to gold-derived content words.
        matched = [w for w in gold_content_words(expected_answer, cfg.stopwords) if matcher(text, w)]
    correct = bool(matched)

    if version == "v2" and category == "sequence":
        ordering = [kw for kw in cfg.sequence_ordering if matcher(text, kw)]
        correct = correct and bool(ordering)
        matched.extend(k for k in ordering if k not in matched)
    if version == "v2" and category == "change":
        markers = [kw for kw in cfg.change_markers if matcher(text, kw)]
        correct = correct and bool(markers)
        matched.extend(k for k in markers if k not in matched)

    return EvalResult(correct, tuple(matched), abstained, version, len(text))


def safety_score(
    items: Sequence[tuple[bool, bool]] | Iterable[tuple[bool, bool]],
    weights: SafetyWeights = SafetyWeights(),
) -> float:
    """Asymmetric error score: 1 - (1/N) * sum of per-error weights.

    Each item is (error, is_false_positive_assertion); false-positive
    assertion errors carry the heavier weight. The score can go negative and
    is reported unclamped.
    """
    items = list(items)
    if not items:
        raise ValueError("empty item list")
    total = 0.0
    for error, is_fp in items:
        if error:
            total += weights.false_positive_weight if is_fp else weights.default_weight
    score = 1.0 - total / len(items)
    if score < 0:
        log.warning("safety score %.3f is negative (unclamped)", score)
    return score
