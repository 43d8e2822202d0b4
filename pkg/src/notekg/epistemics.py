"""Rule-based epistemic classification of clinical mentions.

Assigns each concept mention a seven-value assertion label, an experiencer,
and a temporality, using scope-aware trigger patterns (ConText-style: each
trigger scopes a token window before or after itself). Also provides the
information measures used to quantify what an assertion-blind pipeline
destroys: assertion entropy and the faithfulness bound.
"""
from __future__ import annotations

import enum
import json
import logging
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import DataError

log = logging.getLogger(__name__)


class AssertionLabel(enum.Enum):
    PRESENT = "present"
    ABSENT = "absent"
    POSSIBLE = "possible"
    CONDITIONAL = "conditional"
    HYPOTHETICAL = "hypothetical"
    FAMILY_HISTORY = "family_history"
    HISTORICAL = "historical"


class Temporality(enum.Enum):
    PAST = "past"
    CURRENT = "current"
    FUTURE = "future"


class Experiencer(enum.Enum):
    PATIENT = "patient"
    FAMILY = "family"


# Calibrated per-category confidence ranges for assertion triggers. A
# user-supplied inventory entry whose label has a calibrated range must fall
# inside it.
CONFIDENCE_RANGES: dict[AssertionLabel, tuple[float, float]] = {
    AssertionLabel.ABSENT: (0.85, 0.98),
    AssertionLabel.POSSIBLE: (0.35, 0.75),
    AssertionLabel.PRESENT: (0.85, 0.98),
    AssertionLabel.HYPOTHETICAL: (0.25, 0.35),
    AssertionLabel.FAMILY_HISTORY: (0.85, 0.95),
    AssertionLabel.CONDITIONAL: (0.20, 0.40),
    AssertionLabel.HISTORICAL: (0.75, 0.90),
}

DEFAULT_ASSERTION = AssertionLabel.PRESENT
DEFAULT_CONFIDENCE = 0.9
DEFAULT_SCOPE_WINDOW = 6

_KINDS = ("assertion", "temporality", "experiencer")
_SCOPES = ("pre", "post", "bi")


@dataclass(frozen=True)
class TriggerPattern:
    """A case-insensitive token-sequence trigger.

    ``scope`` gives the trigger's position relative to the concept it can
    qualify: ``pre`` means the trigger precedes the concept, ``post`` that it
    follows, ``bi`` either. ``window`` is the scope width in tokens.
    """

    pattern: str
    kind: str
    label: str
    confidence: float
    scope: str = "pre"
    window: int = DEFAULT_SCOPE_WINDOW

    def __post_init__(self) -> None:
        if not self.pattern.strip():
            raise ValueError("empty trigger pattern")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown trigger kind {self.kind!r}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.scope not in _SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.window < 1:
            raise ValueError("scope window must be >= 1")
        if self.kind == "assertion":
            lo, hi = CONFIDENCE_RANGES[AssertionLabel(self.label)]
            if not lo <= self.confidence <= hi:
                raise ValueError(
                    f"confidence {self.confidence} outside calibrated range "
                    f"[{lo}, {hi}] for {self.label}"
                )
        elif self.kind == "temporality":
            Temporality(self.label)
        else:
            Experiencer(self.label)


@dataclass(frozen=True)
class Mention:
    """One concept mention with its epistemic state."""

    concept_id: int
    surface: str
    start: int
    end: int
    section: str
    assertion: AssertionLabel
    experiencer: Experiencer
    temporality: Temporality
    confidence: float

    def state(self) -> "EpistemicState":
        return EpistemicState(
            self.concept_id, self.assertion, self.experiencer, self.temporality
        )


@dataclass(frozen=True)
class EpistemicState:
    """The (concept, assertion, experiencer, temporality) tuple that every
    downstream stage must carry unchanged."""

    concept_id: int
    assertion: AssertionLabel
    experiencer: Experiencer
    temporality: Temporality


@dataclass
class Inventory:
    """A validated, frozen set of trigger patterns grouped by kind."""

    assertion: list[TriggerPattern] = field(default_factory=list)
    temporality: list[TriggerPattern] = field(default_factory=list)
    experiencer: list[TriggerPattern] = field(default_factory=list)

    @classmethod
    def from_patterns(cls, patterns: Iterable[TriggerPattern]) -> "Inventory":
        inv = cls()
        for p in patterns:
            getattr(inv, p.kind).append(p)
        return inv

    def all_patterns(self) -> list[TriggerPattern]:
        return [*self.assertion, *self.temporality, *self.experiencer]

    def category_counts(self) -> dict[str, int]:
        """Trigger counts per assertion category (plus one entry per other kind)."""
        counts: dict[str, int] = {}
        for p in self.assertion:
            counts[p.label] = counts.get(p.label, 0) + 1
        if self.temporality:
            counts["temporality"] = len(self.temporality)
        if self.experiencer:
            counts["experiencer"] = len(self.experiencer)
        return counts


_TOKEN_RE = re.compile(r"[a-z0-9']+")


def _tokenize(text: str) -> list[tuple[str, int, int]]:
    """Lowercased word tokens with character offsets."""
    return [
        (m.group(), m.start(), m.end())
        for m in _TOKEN_RE.finditer(text.casefold())
    ]


def _check_span(sentence: str, start: int, end: int) -> None:
    if not (0 <= start < end <= len(sentence)):
        raise ValueError(
            f"span ({start}, {end}) out of bounds for sentence of length {len(sentence)}"
        )


def _trigger_hits(
    tokens: list[tuple[str, int, int]],
    patterns: Sequence[TriggerPattern],
    span_start: int,
    span_end: int,
) -> list[TriggerPattern]:
    """All patterns whose scope window covers the concept span."""
    # Token index range covered by the concept span.
    covered = [i for i, (_, s, e) in enumerate(tokens) if e > span_start and s < span_end]
    if not covered:
        return []
    c_first, c_last = covered[0], covered[-1]

    words = [t[0] for t in tokens]
    hits = []
    for p in patterns:
        p_tokens = [t[0] for t in _tokenize(p.pattern)]
        n = len(p_tokens)
        for i in range(0, len(words) - n + 1):
            if words[i : i + n] != p_tokens:
                continue
            j = i + n  # trigger occupies tokens [i, j)
            pre_ok = c_first >= j and (c_first - j) < p.window
            post_ok = i > c_last and (i - c_last - 1) < p.window
            if (
                (p.scope == "pre" and pre_ok)
                or (p.scope == "post" and post_ok)
                or (p.scope == "bi" and (pre_ok or post_ok))
            ):
                hits.append(p)
                break
    return hits


def _best(hits: list[TriggerPattern]) -> TriggerPattern:
    # Highest confidence wins; ties broken by longest pattern, then
    # lexicographically smallest.
    return sorted(
        hits,
        key=lambda p: (-p.confidence, -len(_tokenize(p.pattern)), -len(p.pattern), p.pattern),
    )[0]


def classify_assertion(
    sentence: str, span: tuple[int, int], inventory: Inventory
) -> tuple[AssertionLabel, float]:
    """Assertion label and confidence for the concept at ``span``.

    Returns the label of the highest-confidence assertion trigger whose scope
    window covers the span, or (PRESENT, 0.9) when no trigger fires.
    """
    _check_span(sentence, *span)
    tokens = _tokenize(sentence)
    hits = _trigger_hits(tokens, inventory.assertion, *span)
    if not hits:
        return DEFAULT_ASSERTION, DEFAULT_CONFIDENCE
    best = _best(hits)
    return AssertionLabel(best.label), best.confidence


def classify_experiencer(
    sentence: str, span: tuple[int, int], section: str, inventory: Inventory
) -> Experiencer:
    """Family when a family trigger scopes the span or the section is a
    family-history section; Patient otherwise."""
    _check_span(sentence, *span)
    if "family history" in section.casefold():
        return Experiencer.FAMILY
    tokens = _tokenize(sentence)
    hits = [
        p
        for p in _trigger_hits(tokens, inventory.experiencer, *span)
        if p.label == Experiencer.FAMILY.value
    ]
    return Experiencer.FAMILY if hits else Experiencer.PATIENT


def classify_temporality(
    sentence: str, span: tuple[int, int], inventory: Inventory
) -> Temporality:
    """Past for historical triggers, Future for prospective triggers, Current
    otherwise."""
    _check_span(sentence, *span)
    tokens = _tokenize(sentence)
    hits = _trigger_hits(tokens, inventory.temporality, *span)
    if not hits:
        return Temporality.CURRENT
    return Temporality(_best(hits).label)


def classify_mention(
    concept_id: int,
    sentence: str,
    span: tuple[int, int],
    section: str,
    inventory: Inventory,
    offset: int = 0,
) -> Mention:
    """Run all three classifiers over one concept occurrence."""
    assertion, conf = classify_assertion(sentence, span, inventory)
    experiencer = classify_experiencer(sentence, span, section, inventory)
    temporality = classify_temporality(sentence, span, inventory)
    # Family-history sections imply the family-history assertion unless an
    # explicit trigger already fired.
    if experiencer is Experiencer.FAMILY and assertion is DEFAULT_ASSERTION:
        assertion = AssertionLabel.FAMILY_HISTORY
        conf = min(conf, CONFIDENCE_RANGES[AssertionLabel.FAMILY_HISTORY][1])
    return Mention(
        concept_id=concept_id,
        surface=sentence[span[0] : span[1]],
        start=offset + span[0],
        end=offset + span[1],
        section=section,
        assertion=assertion,
        experiencer=experiencer,
        temporality=temporality,
        confidence=conf,
    )


def assertion_entropy(counts: Mapping[AssertionLabel | str, int]) -> float:
    """Shannon entropy (bits) of the empirical assertion distribution.

    Zero iff the distribution is degenerate; maximal at log2(7) when uniform
    over all seven labels.
    """
    values = []
    for label, count in counts.items():
        AssertionLabel(label.value if isinstance(label, AssertionLabel) else label)
        if count < 0:
            raise ValueError(f"negative count for {label}")
        values.append(count)
    total = sum(values)
    if total == 0:
        raise ValueError("all counts are zero")
    return -sum((c / total) * math.log2(c / total) for c in values if c > 0)


def faithfulness_bound(f_np: float) -> float:
    """Maximum assertion-faithful accuracy of an assertion-blind pipeline:
    1 - f_np, where f_np is the non-present fraction."""
    if not 0.0 <= f_np <= 1.0:
        raise ValueError(f"f_np {f_np} outside [0, 1]")
    return 1.0 - f_np


def non_present_fraction(items: Sequence) -> float:
    """Fraction of mentions/edges whose assertion is anything but PRESENT."""
    if not items:
        raise ValueError("empty collection")
    non_present = sum(1 for it in items if it.assertion is not AssertionLabel.PRESENT)
    return non_present / len(items)


def load_pattern_inventory(path) -> Inventory:
    """Load and validate a JSONL trigger inventory.

    One JSON object per line: {pattern, label, confidence, kind?, scope_direction?,
    scope_window?}. Parse errors report the offending line number.
    """
    patterns: list[TriggerPattern] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            try:
                patterns.append(
                    TriggerPattern(
                        pattern=obj["pattern"],
                        kind=obj.get("kind", "assertion"),
                        label=obj["label"],
                        confidence=obj["confidence"],
                        scope=obj.get("scope_direction", "pre"),
                        window=obj.get("scope_window", DEFAULT_SCOPE_WINDOW),
                    )
                )
            except KeyError as exc:
                raise DataError(f"{path}:{lineno}: missing field {exc}") from exc
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    inv = Inventory.from_patterns(patterns)
    if not patterns:
        log.warning("pattern inventory %s is empty", path)
    else:
        log.info("loaded %d triggers from %s: %s", len(patterns), path, inv.category_counts())
    return inv
