"""Patient-level knowledge graph with bi-temporal, assertion-labeled edges.

Each edge stores a valid-time interval (when the fact held), transaction
times (when it was recorded), an NLP-asserted temporality label, and the full
epistemic state of the mention it came from. Storage is in-memory with JSON
file persistence; traversal is a direct bidirectional BFS.
"""
from __future__ import annotations

import enum
import json
import threading
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Iterable, Optional

from .epistemics import AssertionLabel, Experiencer, Temporality
from .errors import SchemaError

SCHEMA_VERSION = 1
DEFAULT_MIN_CONFIDENCE = 0.3


class AllenRelation(enum.Enum):
    BEFORE = "before"
    AFTER = "after"
    DURING = "during"
    CONTAINS = "contains"
    OVERLAPS = "overlaps"
    STARTS = "starts"
    FINISHES = "finishes"
    CONCURRENT = "concurrent"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class Node:
    node_id: str
    concept_id: int
    label: str
    node_type: str


@dataclass(frozen=True)
class ValidTime:
    """When the fact held in the world."""

    event_date: Optional[date] = None
    valid_from: Optional[date] = None
    valid_to: Optional[date] = None

    def __post_init__(self) -> None:
        if (
            self.valid_from is not None
            and self.valid_to is not None
            and self.valid_from > self.valid_to
        ):
            raise ValueError("valid_from after valid_to")

    @property
    def open_validity(self) -> bool:
        """Open validity: no recorded end of validity."""
        return self.valid_to is None


@dataclass(frozen=True)
class TransactionTime:
    """When the fact entered the record."""

    created_at: datetime
    recorded_at: Optional[datetime] = None
    doc_date: Optional[date] = None


@dataclass
class TemporalEdge:
    source: str
    predicate: str
    target: str
    assertion: AssertionLabel
    valid_time: ValidTime
    transaction_time: TransactionTime
    temporality: Temporality
    relation: AllenRelation
    confidence: float
    experiencer: Experiencer
    hadm_id: Optional[int] = None
    doc_id: Optional[str] = None
    edge_id: Optional[str] = None
    # concept id of the target node, filled in by the graph on insert
    concept_id: Optional[int] = None

    def validate(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"edge confidence {self.confidence} outside [0, 1]")
        if not isinstance(self.assertion, AssertionLabel):
            raise ValueError("assertion must be an AssertionLabel")
        if not isinstance(self.temporality, Temporality):
            raise ValueError("temporality must be a Temporality")
        if not isinstance(self.relation, AllenRelation):
            raise ValueError("relation must be an AllenRelation")
        if not isinstance(self.experiencer, Experiencer):
            raise ValueError("experiencer must be an Experiencer")


class PatientGraph:
    """Node/edge store with concept, admission, and temporality indexes.

    Single-writer, multi-reader: mutations are serialized under a lock and
    update all indexes before the edge becomes visible to traversal.
    """

    def __init__(self, patient_id: str):
        self.patient_id = patient_id
        self._lock = threading.RLock()
        self._nodes: dict[str, Node] = {}
        self._edges: dict[str, TemporalEdge] = {}
        self._order: list[str] = []
        self._by_concept: dict[int, list[str]] = {}
        self._by_admission: dict[Optional[int], list[str]] = {}
        self._by_temporality: dict[Temporality, list[str]] = {}
        self._next_edge = 1

    # -- nodes ------------------------------------------------------------

    def add_node(self, node: Node) -> None:
        with self._lock:
            if node.node_id in self._nodes:
                raise ValueError(f"duplicate node id {node.node_id}")
            self._nodes[node.node_id] = node

    def node(self, node_id: str) -> Node:
        return self._nodes[node_id]

    def nodes(self) -> list[Node]:
        return list(self._nodes.values())

    def nodes_for_concept(self, concept_id: int) -> list[Node]:
        return [n for n in self._nodes.values() if n.concept_id == concept_id]

    # -- edges ------------------------------------------------------------

    def add_edge(self, edge: TemporalEdge) -> str:
        edge.validate()
        with self._lock:
            if edge.source not in self._nodes:
                raise ValueError(f"dangling source node {edge.source!r}")
            if edge.target not in self._nodes:
                raise ValueError(f"dangling target node {edge.target!r}")
            edge_id = edge.edge_id or f"e{self._next_edge:05d}"
            if edge_id in self._edges:
                raise ValueError(f"duplicate edge id {edge_id}")
            if edge.edge_id is None:
                self._next_edge += 1
            elif edge_id.startswith("e") and edge_id[1:].isdigit():
                self._next_edge = max(self._next_edge, int(edge_id[1:]) + 1)
            edge.edge_id = edge_id
            edge.concept_id = self._nodes[edge.target].concept_id
            self._by_concept.setdefault(edge.concept_id, []).append(edge_id)
            self._by_admission.setdefault(edge.hadm_id, []).append(edge_id)
            self._by_temporality.setdefault(edge.temporality, []).append(edge_id)
            self._edges[edge_id] = edge
            self._order.append(edge_id)
            return edge_id

    def edge(self, edge_id: str) -> TemporalEdge:
        return self._edges[edge_id]

    def edges(self) -> list[TemporalEdge]:
        return [self._edges[eid] for eid in self._order]

    def edges_for_concept(self, concept_id: int) -> list[TemporalEdge]:
        return [self._edges[eid] for eid in self._by_concept.get(concept_id, [])]

    def edges_for_admission(self, hadm_id: Optional[int]) -> list[TemporalEdge]:
        return [self._edges[eid] for eid in self._by_admission.get(hadm_id, [])]

    def edges_for_temporality(self, temporality: Temporality) -> list[TemporalEdge]:
        return [self._edges[eid] for eid in self._by_temporality.get(temporality, [])]

    def admission_ids(self) -> list[int]:
        """Admissions ordered by earliest transaction time, ties by id."""
        firsts: dict[int, datetime] = {}
        for e in self.edges():
            if e.hadm_id is None:
                continue
            t = e.transaction_time.created_at
            if e.hadm_id not in firsts or t < firsts[e.hadm_id]:
                firsts[e.hadm_id] = t
        return sorted(firsts, key=lambda h: (firsts[h], h))

    def concepts_in_admission(self, hadm_id: int) -> set[int]:
        return {
            self._edges[eid].concept_id  # type: ignore[misc]
            for eid in self._by_admission.get(hadm_id, [])
        }


def allen_relation(
    a: tuple[Optional[date | int], Optional[date | int]],
    b: tuple[Optional[date | int], Optional[date | int]],
) -> AllenRelation:
    """Allen relation between two intervals, merged onto the nine-value set.

    The thirteen canonical relations collapse as: Meets -> Before,
    Met-by -> After, Overlapped-by -> Overlaps, Started-by -> Starts,
    Finished-by -> Finishes, Equals -> Concurrent. Any absent endpoint makes
    the relation UNKNOWN.
    """
    s1, e1 = a
    s2, e2 = b
    if s1 is None or e1 is None or s2 is None or e2 is None:
        return AllenRelation.UNKNOWN
    if s1 > e1 or s2 > e2:
        raise ValueError("interval start after end")
    if s1 == s2 and e1 == e2:
        return AllenRelation.CONCURRENT
    if e1 <= s2:
        return AllenRelation.BEFORE  # covers Before and Meets
    if s1 >= e2:
        return AllenRelation.AFTER  # covers After and Met-by
    if s1 == s2:
        return AllenRelation.STARTS  # covers Starts and Started-by
    if e1 == e2:
        return AllenRelation.FINISHES  # covers Finishes and Finished-by
    if s2 < s1 and e1 < e2:
        return AllenRelation.DURING
    if s1 < s2 and e2 < e1:
        return AllenRelation.CONTAINS
    return AllenRelation.OVERLAPS  # covers Overlaps and Overlapped-by


def score_edge(edge: TemporalEdge, relevant_types: Iterable[str]) -> float:
    """Confidence plus bonuses: +0.2 for a question-relevant edge type, +0.1
    for current temporality. Bounded by 1.3."""
    score = edge.confidence
    if edge.predicate in set(relevant_types):
        score += 0.2
    if edge.temporality is Temporality.CURRENT:
        score += 0.1
    return score


def bfs_traverse(
    graph: PatientGraph,
    seed_concepts: Iterable[int],
    max_hops: int = 2,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> list[TemporalEdge]:
    """Bidirectional BFS from seed concepts, pruning low-confidence edges.

    Returns every edge on a path of at most ``max_hops`` undirected steps
    from any seed node, in deterministic edge-id order. Edges below
    ``min_confidence`` are pruned and never traversed.
    """
    if max_hops < 1:
        raise ValueError("max_hops must be >= 1")
    seeds = set(seed_concepts)
    if not seeds:
        return []

    incident: dict[str, list[TemporalEdge]] = {}
    for e in graph.edges():
        if e.confidence < min_confidence:
            continue
        incident.setdefault(e.source, []).append(e)
        incident.setdefault(e.target, []).append(e)

    frontier = {n.node_id for n in graph.nodes() if n.concept_id in seeds}
    visited = set(frontier)
    collected: dict[str, TemporalEdge] = {}
    for _ in range(max_hops):
        next_frontier: set[str] = set()
        for node_id in frontier:
            for e in incident.get(node_id, []):
                assert e.edge_id is not None
                collected[e.edge_id] = e
                other = e.target if e.source == node_id else e.source
                if other not in visited:
                    next_frontier.add(other)
        visited |= next_frontier
        frontier = next_frontier
        if not frontier:
            break
    return [collected[eid] for eid in sorted(collected)]


# -- persistence ----------------------------------------------------------


def _iso(value) -> Optional[str]:
    return None if value is None else value.isoformat()


def _parse_date(value, path: str) -> Optional[date]:
    if value is None:
        return None
    try:
        return date.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: invalid date {value!r}") from exc


def _parse_datetime(value, path: str, required: bool = False) -> Optional[datetime]:
    if value is None:
        if required:
            raise SchemaError(f"{path}: missing required timestamp")
        return None
    try:
        return datetime.fromisoformat(value)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: invalid timestamp {value!r}") from exc


def save_graph(graph: PatientGraph, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "patient_id": graph.patient_id,
        "nodes": [
            {
                "node_id": n.node_id,
                "concept_id": n.concept_id,
                "label": n.label,
                "node_type": n.node_type,
            }
            for n in graph.nodes()
        ],
        "edges": [
            {
                "edge_id": e.edge_id,
                "source": e.source,
                "predicate": e.predicate,
                "target": e.target,
                "assertion": e.assertion.value,
                "valid_time": {
                    "event_date": _iso(e.valid_time.event_date),
                    "valid_from": _iso(e.valid_time.valid_from),
                    "valid_to": _iso(e.valid_time.valid_to),
                },
                "transaction_time": {
                    "recorded_at": _iso(e.transaction_time.recorded_at),
                    "doc_date": _iso(e.transaction_time.doc_date),
                    "created_at": _iso(e.transaction_time.created_at),
                },
                "temporality": e.temporality.value,
                "relation": e.relation.value,
                "confidence": e.confidence,
                "experiencer": e.experiencer.value,
                "hadm_id": e.hadm_id,
                "doc_id": e.doc_id,
            }
            for e in graph.edges()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(path) -> PatientGraph:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"schema_version: expected {SCHEMA_VERSION}, got {doc.get('schema_version')!r}")
    if "patient_id" not in doc:
        raise SchemaError("patient_id: missing")
    graph = PatientGraph(doc["patient_id"])
    for i, n in enumerate(doc.get("nodes", [])):
        try:
            graph.add_node(
                Node(
                    node_id=n["node_id"],
                    concept_id=int(n["concept_id"]),
                    label=n["label"],
                    node_type=n["node_type"],
                )
            )
        except KeyError as exc:
            raise SchemaError(f"nodes[{i}].{exc.args[0]}: missing") from exc
    for i, e in enumerate(doc.get("edges", [])):
        path_i = f"edges[{i}]"
        try:
            vt = e["valid_time"]
            tt = e["transaction_time"]
            created = _parse_datetime(
                tt.get("created_at"), f"{path_i}.transaction_time.created_at", required=True
            )
            assert created is not None
            edge = TemporalEdge(
                source=e["source"],
                predicate=e["predicate"],
                target=e["target"],
                assertion=AssertionLabel(e["assertion"]),
                valid_time=ValidTime(
                    event_date=_parse_date(vt.get("event_date"), f"{path_i}.valid_time.event_date"),
                    valid_from=_parse_date(vt.get("valid_from"), f"{path_i}.valid_time.valid_from"),
                    valid_to=_parse_date(vt.get("valid_to"), f"{path_i}.valid_time.valid_to"),
                ),
                transaction_time=TransactionTime(
                    created_at=created,
                    recorded_at=_parse_datetime(tt.get("recorded_at"), f"{path_i}.transaction_time.recorded_at"),
                    doc_date=_parse_date(tt.get("doc_date"), f"{path_i}.transaction_time.doc_date"),
                ),
                temporality=Temporality(e["temporality"]),
                relation=AllenRelation(e["relation"]),
                confidence=float(e["confidence"]),
                experiencer=Experiencer(e["experiencer"]),
                hadm_id=e.get("hadm_id"),
                doc_id=e.get("doc_id"),
                edge_id=e.get("edge_id"),
            )
        except KeyError as exc:
            raise SchemaError(f"{path_i}.{exc.args[0]}: missing") from exc
        except ValueError as exc:
            raise SchemaError(f"{path_i}: {exc}") from exc
        graph.add_edge(edge)
    return graph
