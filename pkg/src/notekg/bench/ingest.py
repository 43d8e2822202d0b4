"""Note ingestion: mention extraction, epistemic classification, and graph
materialization for the synthetic fixture corpus format."""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path
from typing import Optional

from ..epistemics import (
    Inventory,
    Mention,
    Temporality,
    classify_mention,
)
from ..errors import DataError
from ..kgraph import (
    AllenRelation,
    Node,
    PatientGraph,
    TemporalEdge,
    TransactionTime,
    ValidTime,
    allen_relation,
)
from .conditions import Document, Vocabulary

log = logging.getLogger(__name__)

PATIENT_NODE_ID = "patient"


@dataclass(frozen=True)
class Admission:
    hadm_id: int
    admit_date: date
    discharge_date: date
    documents: tuple[Document, ...]


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    admissions: tuple[Admission, ...]

    def documents(self) -> list[Document]:
        return [d for adm in self.admissions for d in adm.documents]


def load_registries(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    for key in ("node_types", "edge_types", "predicate_by_node_type"):
        if key not in raw:
            raise DataError(f"{path}: registries file missing {key!r}")
    return raw


def load_patient_record(path) -> PatientRecord:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        admissions = []
        for adm in raw["admissions"]:
            documents = []
            for doc in adm["documents"]:
                sections = tuple((s["name"], s["text"]) for s in doc["sections"])
                text = "\n".join(f"{name}: {txt}" for name, txt in sections)
                documents.append(
                    Document(
                        doc_id=doc["doc_id"],
                        patient_id=raw["patient_id"],
                        hadm_id=int(adm["hadm_id"]),
                        note_type=doc["note_type"],
                        doc_date=date.fromisoformat(doc["doc_date"]),
                        created_at=datetime.fromisoformat(doc["created_at"]),
                        text=text,
                        sections=sections,
                    )
                )
            admissions.append(
                Admission(
                    hadm_id=int(adm["hadm_id"]),
                    admit_date=date.fromisoformat(adm["admit_date"]),
                    discharge_date=date.fromisoformat(adm["discharge_date"]),
                    documents=tuple(documents),
                )
            )
        return PatientRecord(patient_id=raw["patient_id"], admissions=tuple(admissions))
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"{path}: malformed patient record ({exc})") from exc


def load_corpus(directory) -> list[PatientRecord]:
    records = []
    for path in sorted(Path(directory).glob("*.json")):
        records.append(load_patient_record(path))
    return records


_SENTENCE_RE = re.compile(r"[^.;\n]+[.;]?")


def _sentences(text: str) -> list[tuple[str, int]]:
    """Sentences with their start offsets."""
    return [(m.group(), m.start()) for m in _SENTENCE_RE.finditer(text) if m.group().strip()]


def _find_mentions(
    section_name: str,
    section_text: str,
    vocabulary: Vocabulary,
    inventory: Inventory,
) -> list[Mention]:
    mentions: list[Mention] = []
    seen: set[tuple[int, int, int]] = set()
    for sentence, offset in _sentences(section_text):
        folded = sentence.casefold()
        for entry in vocabulary.entries:
            for syn in (entry.label, *entry.synonyms):
                pattern = r"\b" + re.escape(syn.casefold()) + r"\b"
                for m in re.finditer(pattern, folded):
                    key = (entry.concept_id, offset + m.start(), offset + m.end())
                    if key in seen:
                        continue
                    seen.add(key)
                    mentions.append(
                        classify_mention(
                            entry.concept_id,
                            sentence,
                            (m.start(), m.end()),
                            section_name,
                            inventory,
                            offset=offset,
                        )
                    )
    return mentions


def _valid_time(temporality: Temporality, doc_date: date) -> ValidTime:
    # Current facts stay open; past facts closed at documentation time;
    # future facts have no validity evidence yet.
    if temporality is Temporality.CURRENT:
        return ValidTime(event_date=doc_date, valid_from=doc_date, valid_to=None)
    if temporality is Temporality.PAST:
        return ValidTime(event_date=doc_date, valid_from=None, valid_to=doc_date)
    return ValidTime(event_date=doc_date, valid_from=None, valid_to=None)


@dataclass(frozen=True)
class PreservationReport:
    total: int
    preserved: int

    @property
    def ok(self) -> bool:
        return self.total == self.preserved


def build_graph(
    record: PatientRecord,
    vocabulary: Vocabulary,
    inventory: Inventory,
    registries: dict,
) -> tuple[PatientGraph, list[Mention], PreservationReport]:
    """Materialize one patient's graph from their notes.

    Every mention becomes one edge from the patient root node to the concept
    node, carrying the mention's full epistemic state; the preservation
    report compares each stored edge back against its source mention.
    """
    predicate_by_type = registries["predicate_by_node_type"]
    graph = PatientGraph(record.patient_id)
    graph.add_node(Node(PATIENT_NODE_ID, 0, record.patient_id, "patient"))
    added_concepts: set[int] = set()

    mentions: list[Mention] = []
    edge_ids: list[str] = []
    for admission in record.admissions:
        for doc in admission.documents:
            for section_name, section_text in doc.sections:
                for mention in _find_mentions(section_name, section_text, vocabulary, inventory):
                    entry = vocabulary.by_id(mention.concept_id)
                    if entry.concept_id not in added_concepts:
                        graph.add_node(
                            Node(
                                node_id=f"c{entry.concept_id}",
                                concept_id=entry.concept_id,
                                label=entry.label,
                                node_type=entry.node_type,
                            )
                        )
                        added_concepts.add(entry.concept_id)
                    predicate = predicate_by_type.get(entry.node_type)
                    if predicate is None:
                        raise DataError(
                            f"no predicate registered for node type {entry.node_type!r}"
                        )
                    valid = _valid_time(mention.temporality, doc.doc_date)
                    relation = (
                        allen_relation(
                            (valid.valid_from, valid.valid_to),
                            (admission.admit_date, admission.discharge_date),
                        )
                        if valid.valid_from is not None and valid.valid_to is not None
                        else AllenRelation.UNKNOWN
                    )
                    edge = TemporalEdge(
                        source=PATIENT_NODE_ID,
                        predicate=predicate,
                        target=f"c{entry.concept_id}",
                        assertion=mention.assertion,
                        valid_time=valid,
                        transaction_time=TransactionTime(
                            created_at=doc.created_at,
                            recorded_at=doc.created_at,
                            doc_date=doc.doc_date,
                        ),
                        temporality=mention.temporality,
                        relation=relation,
                        confidence=mention.confidence,
                        experiencer=mention.experiencer,
                        hadm_id=admission.hadm_id,
                        doc_id=doc.doc_id,
                    )
                    edge_ids.append(graph.add_edge(edge))
                    mentions.append(mention)

    preserved = sum(
        1
        for mention, eid in zip(mentions, edge_ids)
        if (
            graph.edge(eid).assertion is mention.assertion
            and graph.edge(eid).experiencer is mention.experiencer
            and graph.edge(eid).temporality is mention.temporality
        )
    )
    report = PreservationReport(total=len(mentions), preserved=preserved)
    if not report.ok:
        log.warning(
            "%s: epistemic preservation violated on %d/%d mentions",
            record.patient_id,
            report.total - report.preserved,
            report.total,
        )
    return graph, mentions, report
