"""Question-intent classification and intent-specific retrieval strategies.

Four routes: change (admission set differencing), current-state (current or
open-validity edges), historical (past edges plus resolved inference), and
default (scored bidirectional BFS). Retrieved evidence is serialized into a
prompt with the assertion label of every edge preserved verbatim.
"""
from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources as importlib_resources
from typing import Optional, Sequence

from . import formats
from .epistemics import AssertionLabel, Experiencer, Temporality
from .errors import ConfigError
from .evaluator import word_boundary_match
from .kgraph import PatientGraph, TemporalEdge, bfs_traverse, score_edge

log = logging.getLogger(__name__)


class Intent(enum.Enum):
    CHANGE = "change"
    CURRENT_STATE = "current_state"
    HISTORICAL = "historical"
    DEFAULT = "default"


@dataclass(frozen=True)
class KeywordRule:
    intent: Intent
    patterns: tuple[str, ...]


@dataclass(frozen=True)
class OracleTarget:
    intent: Intent
    experiencer: Optional[Experiencer] = None


@dataclass(frozen=True)
class IntentRuleSet:
    """Priority-ordered keyword rules plus the oracle category mapping."""

    keyword_rules: tuple[KeywordRule, ...]
    oracle_map: dict[str, OracleTarget]


def load_intent_rules(path) -> IntentRuleSet:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    rules = []
    for entry in raw.get("keyword_rules", []):
        try:
            rules.append(
                KeywordRule(Intent(entry["intent"]), tuple(entry["patterns"]))
            )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad keyword rule {entry!r}: {exc}") from exc
    oracle: dict[str, OracleTarget] = {}
    for category, target in raw.get("oracle_map", {}).items():
        try:
            if isinstance(target, str):
                oracle[category] = OracleTarget(Intent(target))
            else:
                oracle[category] = OracleTarget(
                    Intent(target["intent"]),
                    Experiencer(target["experiencer"]) if "experiencer" in target else None,
                )
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad oracle mapping for {category!r}: {exc}") from exc
    return IntentRuleSet(tuple(rules), oracle)


@lru_cache(maxsize=1)
def default_intent_rules() -> IntentRuleSet:
    ref = importlib_resources.files("notekg.resources").joinpath("intent_rules.json")
    with importlib_resources.as_file(ref) as path:
        return load_intent_rules(path)


def classify_intent(
    question: str,
    mode: str = "keyword",
    category: Optional[str] = None,
    rules: Optional[IntentRuleSet] = None,
) -> Intent:
    """Map a question to an intent.

    Keyword mode scans the priority-ordered rules and returns the first whose
    pattern matches; oracle mode looks the question's category up in the
    mapping table.
    """
    rules = rules or default_intent_rules()
    if mode == "keyword":
        for rule in rules.keyword_rules:
            if any(word_boundary_match(question, p) for p in rule.patterns):
                return rule.intent
        return Intent.DEFAULT
    if mode == "oracle":
        if category is None:
            raise ConfigError("oracle intent classification requires a category")
        if category not in rules.oracle_map:
            raise ConfigError(f"no oracle intent mapping for category {category!r}")
        return rules.oracle_map[category].intent
    raise ConfigError(f"unknown intent mode {mode!r}")


def oracle_experiencer_filter(
    category: str, rules: Optional[IntentRuleSet] = None
) -> Optional[Experiencer]:
    rules = rules or default_intent_rules()
    target = rules.oracle_map.get(category)
    return target.experiencer if target else None


# -- evidence model ---------------------------------------------------------


@dataclass(frozen=True)
class EvidenceLine:
    """One typed line of graph evidence; rendering keeps the assertion label
    of the source edge verbatim."""

    kind: str  # edge | not_found | resolved | added | removed | continued
    label: str
    concept_id: Optional[int] = None
    assertion: Optional[AssertionLabel] = None
    temporality: Optional[Temporality] = None
    experiencer: Optional[Experiencer] = None
    predicate: Optional[str] = None
    admission: Optional[object] = None
    confidence: Optional[float] = None
    edge_id: Optional[str] = None
    detail: str = ""

    def render(self, include_assertions: bool = True) -> str:
        if self.kind == "edge":
            return formats.format_edge_line(
                assertion=self.assertion.value if self.assertion else "",
                label=self.label,
                predicate=self.predicate or "",
                temporality=self.temporality.value if self.temporality else "",
                experiencer=self.experiencer.value if self.experiencer else "",
                admission=self.admission,
                confidence=self.confidence or 0.0,
                include_assertion=include_assertions,
            )
        if self.kind == "not_found":
            return f"NOT FOUND: {self.label} [{self.detail}]"
        if self.kind == "resolved":
            return f"RESOLVED: {self.label} [{self.detail}]"
        tag = self.kind.upper()
        if include_assertions and self.assertion is not None:
            return f"{tag}: {self.label} [{self.assertion.value.upper()}; {self.detail}]"
        return f"{tag}: {self.label} [{self.detail}]"


@dataclass
class EvidenceBundle:
    intent: Intent
    lines: list[EvidenceLine] = field(default_factory=list)
    documents: list[str] = field(default_factory=list)
    not_found: list[int] = field(default_factory=list)
    template_id: str = "default"
    single_admission: bool = False

    def rendered_lines(self, include_assertions: bool = True) -> list[str]:
        return [line.render(include_assertions) for line in self.lines]


# -- change route ------------------------------------------------------------


@dataclass(frozen=True)
class AdmissionDiff:
    first: int
    second: int
    added: frozenset[int]
    removed: frozenset[int]
    shared: frozenset[int]


@dataclass(frozen=True)
class ChangeReport:
    pairs: tuple[AdmissionDiff, ...]
    single_admission: bool = False


def route_change(graph: PatientGraph) -> ChangeReport:
    """Set differences of admission concept sets, for every ordered admission
    pair. A single-admission graph yields a flagged empty report."""
    admissions = graph.admission_ids()
    if len(admissions) < 2:
        return ChangeReport(pairs=(), single_admission=True)
    pairs = []
    for i, first in enumerate(admissions):
        for second in admissions[i + 1 :]:
            c_first = graph.concepts_in_admission(first)
            c_second = graph.concepts_in_admission(second)
            pairs.append(
                AdmissionDiff(
                    first=first,
                    second=second,
                    added=frozenset(c_second - c_first),
                    removed=frozenset(c_first - c_second),
                    shared=frozenset(c_first & c_second),
                )
            )
    return ChangeReport(pairs=tuple(pairs))


def _concept_label(graph: PatientGraph, concept_id: int) -> str:
    nodes = graph.nodes_for_concept(concept_id)
    return nodes[0].label if nodes else f"concept:{concept_id}"


def _best_edge(edges: Sequence[TemporalEdge]) -> TemporalEdge:
    return sorted(edges, key=lambda e: (-e.confidence, e.edge_id or ""))[0]


def edge_line(edge: TemporalEdge, graph: PatientGraph) -> EvidenceLine:
    return EvidenceLine(
        kind="edge",
        label=_concept_label(graph, edge.concept_id or -1),
        concept_id=edge.concept_id,
        assertion=edge.assertion,
        temporality=edge.temporality,
        experiencer=edge.experiencer,
        predicate=edge.predicate,
        admission=edge.hadm_id,
        confidence=edge.confidence,
        edge_id=edge.edge_id,
    )


def change_bundle(graph: PatientGraph) -> EvidenceBundle:
    """EvidenceBundle for the change route, one Added/Removed/Continued block
    per admission pair."""
    report = route_change(graph)
    bundle = EvidenceBundle(
        intent=Intent.CHANGE,
        template_id=Intent.CHANGE.value,
        single_admission=report.single_admission,
    )
    for diff in report.pairs:
        for kind, concepts, admission in (
            ("added", diff.added, diff.second),
            ("removed", diff.removed, diff.first),
            ("continued", diff.shared, diff.second),
        ):
            for cid in sorted(concepts):
                edges = [
                    e for e in graph.edges_for_concept(cid) if e.hadm_id == admission
                ]
                best = _best_edge(edges) if edges else None
                detail = (
                    f"admissions {diff.first}, {diff.second}"
                    if kind == "continued"
                    else f"admission {admission}"
                )
                bundle.lines.append(
                    EvidenceLine(
                        kind=kind,
                        label=_concept_label(graph, cid),
                        concept_id=cid,
                        assertion=best.assertion if best else None,
                        admission=admission,
                        confidence=best.confidence if best else None,
                        edge_id=best.edge_id if best else None,
                        detail=detail,
                    )
                )
    return bundle


def route_current_state(graph: PatientGraph, concepts: Sequence[int]) -> EvidenceBundle:
    """Edges that are current or still open, deduplicated by concept.

    Conditional edges are filtered out; queried concepts with no qualifying
    edge get an explicit NOT FOUND marker.
    """
    if not concepts:
        raise ValueError("current-state route requires question concepts")
    bundle = EvidenceBundle(intent=Intent.CURRENT_STATE, template_id=Intent.CURRENT_STATE.value)
    for cid in sorted(set(concepts)):
        qualifying = [
            e
            for e in graph.edges_for_concept(cid)
            if (e.temporality is Temporality.CURRENT or e.valid_time.open_validity)
            and e.assertion is not AssertionLabel.CONDITIONAL
        ]
        if qualifying:
            bundle.lines.append(edge_line(_best_edge(qualifying), graph))
        else:
            bundle.not_found.append(cid)
            bundle.lines.append(
                EvidenceLine(
                    kind="not_found",
                    label=_concept_label(graph, cid),
                    concept_id=cid,
                    detail="no current or open record",
                )
            )
    return bundle


def route_historical(graph: PatientGraph, concepts: Sequence[int]) -> EvidenceBundle:
    """Past-scoped edges plus resolved inference.

    A queried concept seen in an earlier admission but absent from the latest
    one is emitted as a RESOLVED marker carrying the source edge's assertion.
    """
    if not concepts:
        raise ValueError("historical route requires question concepts")
    bundle = EvidenceBundle(intent=Intent.HISTORICAL, template_id=Intent.HISTORICAL.value)
    admissions = graph.admission_ids()
    latest = admissions[-1] if admissions else None
    latest_concepts = graph.concepts_in_admission(latest) if latest is not None else set()
    for cid in sorted(set(concepts)):
        past = [
            e for e in graph.edges_for_concept(cid) if e.temporality is Temporality.PAST
        ]
        for e in sorted(past, key=lambda e: e.edge_id or ""):
            bundle.lines.append(edge_line(e, graph))
        if latest is None or cid in latest_concepts:
            continue
        earlier = [
            e
            for e in graph.edges_for_concept(cid)
            if e.hadm_id is not None and e.hadm_id != latest
        ]
        if earlier:
            src = _best_edge(earlier)
            bundle.lines.append(
                EvidenceLine(
                    kind="resolved",
                    label=_concept_label(graph, cid),
                    concept_id=cid,
                    assertion=src.assertion,
                    admission=src.hadm_id,
                    edge_id=src.edge_id,
                    detail=(
                        f"was {src.assertion.value.upper()} in admission {src.hadm_id}; "
                        f"absent from latest admission {latest}"
                    ),
                )
            )
    return bundle


def route_default(
    graph: PatientGraph,
    concepts: Sequence[int],
    relevant_types: Sequence[str] = (),
    max_hops: int = 2,
    min_confidence: float = 0.3,
    experiencer: Optional[Experiencer] = None,
) -> EvidenceBundle:
    """Scored, confidence-pruned BFS evidence, best first.

    ``experiencer`` restricts the subgraph (used for family-history routing).
    """
    if not concepts:
        raise ValueError("default route requires question concepts")
    bundle = EvidenceBundle(intent=Intent.DEFAULT, template_id=Intent.DEFAULT.value)
    edges = bfs_traverse(graph, concepts, max_hops=max_hops, min_confidence=min_confidence)
    if experiencer is not None:
        edges = [e for e in edges if e.experiencer is experiencer]
    scored = sorted(
        edges,
        key=lambda e: (-score_edge(e, relevant_types), e.edge_id or ""),
    )
    bundle.lines = [edge_line(e, graph) for e in scored]
    return bundle


def route(
    graph: PatientGraph,
    intent: Intent,
    concepts: Sequence[int],
    relevant_types: Sequence[str] = (),
    experiencer: Optional[Experiencer] = None,
) -> EvidenceBundle:
    """Dispatch to the intent-specific strategy."""
    if intent is Intent.CHANGE:
        return change_bundle(graph)
    if intent is Intent.CURRENT_STATE:
        return route_current_state(graph, concepts)
    if intent is Intent.HISTORICAL:
        return route_historical(graph, concepts)
    return route_default(graph, concepts, relevant_types, experiencer=experiencer)


# -- prompt composition -------------------------------------------------------


class TemplateRegistry(dict):
    """Intent -> prompt template text with {graph_evidence}, {documents},
    {question} placeholders."""


def load_templates(directory) -> TemplateRegistry:
    registry = TemplateRegistry()
    for intent in Intent:
        path = f"{directory}/{intent.value}.txt"
        try:
            with open(path, encoding="utf-8") as fh:
                registry[intent] = fh.read()
        except FileNotFoundError:
            continue
    return registry


@lru_cache(maxsize=1)
def default_templates() -> TemplateRegistry:
    registry = TemplateRegistry()
    base = importlib_resources.files("notekg.resources").joinpath("templates")
    for intent in Intent:
        ref = base.joinpath(f"{intent.value}.txt")
        if ref.is_file():
            registry[intent] = ref.read_text(encoding="utf-8")
    return registry


_CHANGE_SECTIONS = (("added", "Added:"), ("removed", "Removed:"), ("continued", "Continued:"))


def graph_section(bundle: EvidenceBundle, include_assertions: bool) -> str:
    body: list[str] = []
    if bundle.intent is Intent.CHANGE and bundle.lines:
        for kind, header in _CHANGE_SECTIONS:
            body.append(header)
            lines = [l for l in bundle.lines if l.kind == kind]
            body.extend(l.render(include_assertions) for l in lines)
            if not lines:
                body.append("(none)")
    elif bundle.lines:
        body.extend(bundle.rendered_lines(include_assertions))
    else:
        body.append(formats.NO_GRAPH_EVIDENCE)
    if bundle.single_admission:
        body.append("(single admission: no cross-admission comparison possible)")
    return "\n".join([formats.EVIDENCE_START, *body, formats.EVIDENCE_END])


def _document_section(documents: Sequence[str]) -> str:
    body = list(documents) if documents else [formats.NO_DOCUMENT_EVIDENCE]
    return "\n".join([formats.DOCUMENT_START, *body, formats.DOCUMENT_END])


def compose_evidence(
    intent: Intent,
    bundle: EvidenceBundle,
    documents: Sequence[str],
    templates: Optional[TemplateRegistry] = None,
    question: str = "",
    include_assertions: bool = True,
) -> str:
    """Deterministic prompt: template header, sentinel-delimited graph
    evidence, document section, question."""
    registry = templates if templates is not None else default_templates()
    if intent not in registry:
        raise ConfigError(f"no prompt template registered for intent {intent.value!r}")
    return registry[intent].format(
        graph_evidence=graph_section(bundle, include_assertions),
        documents=_document_section(documents),
        question=formats.QUESTION_PREFIX + question,
    )
