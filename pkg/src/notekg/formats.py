"""Wire format for graph evidence inside prompts.

The router serializes retrieved edges as typed evidence lines between two
sentinel lines. The evaluator strips both the sentinel block and any stray
typed lines from model answers before keyword matching, so the two modules
must agree on these constants bit-exactly.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

EVIDENCE_START = "=== GRAPH EVIDENCE START ==="
EVIDENCE_END = "=== GRAPH EVIDENCE END ==="
DOCUMENT_START = "=== DOCUMENT EVIDENCE START ==="
DOCUMENT_END = "=== DOCUMENT EVIDENCE END ==="
NO_GRAPH_EVIDENCE = "(no graph evidence)"
NO_DOCUMENT_EVIDENCE = "(no document evidence)"
QUESTION_PREFIX = "QUESTION: "

# Exact template answer returned by the deterministic-lookup condition when
# no edge matches the question concepts.
NO_EDGES_TEMPLATE = "No relevant knowledge graph edges found"

_ASSERTION_TAGS = (
    "PRESENT",
    "ABSENT",
    "POSSIBLE",
    "CONDITIONAL",
    "HYPOTHETICAL",
    "FAMILY_HISTORY",
    "HISTORICAL",
)
_MARKER_TAGS = ("NOT FOUND", "RESOLVED", "ADDED", "REMOVED", "CONTINUED")

# A typed evidence line starts with an assertion tag or a routing marker,
# followed by ": ".
EVIDENCE_LINE_RE = re.compile(
    r"^\s*(?:%s): " % "|".join(_ASSERTION_TAGS + _MARKER_TAGS)
)


def format_edge_line(
    assertion: str,
    label: str,
    predicate: str,
    temporality: str,
    experiencer: str,
    admission,
    confidence: float,
    include_assertion: bool = True,
) -> str:
    """Render one edge as an evidence line.

    With ``include_assertion=False`` the epistemic fields are suppressed
    entirely (the assertion-blind retrieval conditions).
    """
    adm = "-" if admission is None else str(admission)
    if not include_assertion:
        return f"{label} [{predicate}; admission={adm}; confidence={confidence:.2f}]"
    return (
        f"{assertion.upper()}: {label} "
        f"[{predicate}; temporality={temporality}; experiencer={experiencer}; "
        f"admission={adm}; confidence={confidence:.2f}]"
    )


_EDGE_LINE_RE = re.compile(
    r"^(?P<tag>[A-Z_ ]+): (?P<label>[^\[]+) "
    r"\[(?P<predicate>[^;\]]+); temporality=(?P<temporality>[^;]+); "
    r"experiencer=(?P<experiencer>[^;]+); admission=(?P<admission>[^;]+); "
    r"confidence=(?P<confidence>[^\]]+)\]$"
)


@dataclass(frozen=True)
class ParsedEvidenceLine:
    tag: str
    label: str
    predicate: str
    temporality: str
    experiencer: str
    admission: str
    confidence: float


def parse_edge_line(line: str) -> ParsedEvidenceLine:
    """Parse a full typed evidence line back into its fields.

    Raises ValueError when the line is not in the edge-line format.
    """
    m = _EDGE_LINE_RE.match(line.strip())
    if m is None:
        raise ValueError(f"not a typed evidence line: {line!r}")
    return ParsedEvidenceLine(
        tag=m.group("tag"),
        label=m.group("label").strip(),
        predicate=m.group("predicate"),
        temporality=m.group("temporality"),
        experiencer=m.group("experiencer"),
        admission=m.group("admission"),
        confidence=float(m.group("confidence")),
    )


def is_evidence_line(line: str) -> bool:
    return EVIDENCE_LINE_RE.match(line) is not None
