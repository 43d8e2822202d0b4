"""Shared fixtures: inventory, small graph builders, fixture paths."""
from __future__ import annotations

from datetime import date, datetime
from pathlib import Path

import pytest

from notekg.epistemics import (
    AssertionLabel,
    Experiencer,
    Temporality,
    load_pattern_inventory,
)
from notekg.kgraph import (
    AllenRelation,
    Node,
    PatientGraph,
    TemporalEdge,
    TransactionTime,
    ValidTime,
)

REPO = Path(__file__).resolve().parent.parent
RESOURCES = REPO / "src" / "notekg" / "resources"
FIXTURES = REPO / "fixtures"


@pytest.fixture(scope="session")
def inventory():
    return load_pattern_inventory(RESOURCES / "patterns.jsonl")


@pytest.fixture(scope="session")
def bench_env():
    from notekg.bench import BenchEnvironment, build_graph, load_corpus, load_registries, load_vocabulary
    from notekg.router import default_intent_rules, default_templates

    vocabulary = load_vocabulary(FIXTURES / "vocabulary.json")
    registries = load_registries(RESOURCES / "registries.json")
    inv = load_pattern_inventory(RESOURCES / "patterns.jsonl")
    graphs, documents = {}, {}
    for record in load_corpus(FIXTURES / "corpus"):
        graph, _, preservation = build_graph(record, vocabulary, inv, registries)
        assert preservation.ok
        graphs[record.patient_id] = graph
        documents[record.patient_id] = record.documents()
    return BenchEnvironment(
        graphs=graphs,
        documents=documents,
        vocabulary=vocabulary,
        intent_rules=default_intent_rules(),
        templates=default_templates(),
        predicate_by_node_type=registries["predicate_by_node_type"],
    )


@pytest.fixture(scope="session")
def fixture_questions():
    from notekg.bench import load_questions

    return load_questions(FIXTURES / "questions_v2.jsonl")


def make_edge(
    target_concept: int,
    assertion: AssertionLabel = AssertionLabel.PRESENT,
    temporality: Temporality = Temporality.CURRENT,
    experiencer: Experiencer = Experiencer.PATIENT,
    confidence: float = 0.9,
    hadm_id: int | None = 1,
    predicate: str = "has_condition",
    valid_to: date | None = None,
    valid_from: date | None = date(2019, 3, 1),
    event_date: date | None = date(2019, 3, 1),
    created_at: datetime | None = None,
    source: str = "patient",
) -> TemporalEdge:
    if created_at is None:
        created_at = datetime(2019, 3, 1, 12, 0, 0) if hadm_id == 1 else datetime(2019, 6, 1, 12, 0, 0)
    return TemporalEdge(
        source=source,
        predicate=predicate,
        target=f"c{target_concept}",
        assertion=assertion,
        valid_time=ValidTime(event_date=event_date, valid_from=valid_from, valid_to=valid_to),
        transaction_time=TransactionTime(created_at=created_at, doc_date=event_date),
        temporality=temporality,
        relation=AllenRelation.UNKNOWN,
        confidence=confidence,
        experiencer=experiencer,
        hadm_id=hadm_id,
    )


def make_graph(patient_id: str, concepts: dict[int, str], node_type: str = "condition") -> PatientGraph:
    graph = PatientGraph(patient_id)
    graph.add_node(Node("patient", 0, patient_id, "patient"))
    for cid, label in concepts.items():
        graph.add_node(Node(f"c{cid}", cid, label, node_type))
    return graph
