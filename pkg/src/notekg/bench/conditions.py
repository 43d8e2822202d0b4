"""Condition ladder, retrieval primitives, and per-condition prompt assembly.

The ladder runs from a bare-question baseline through document retrieval
(TF-IDF and a dense-embedding stub), graph retrieval with and without
assertion labels, intent-routed graph retrieval, a long-context bookend, and
a deterministic graph-lookup bookend that bypasses the model entirely.
"""
from __future__ import annotations

import json
import logging
import math
import re
import zlib
from dataclasses import dataclass, field
from datetime import date, datetime
from typing import Optional, Sequence

import numpy as np

from .. import formats, router
from ..errors import ConfigError, DataError
from ..kgraph import PatientGraph
from ..router import Intent, IntentRuleSet, TemplateRegistry

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Condition:
    """Capability flags for one ladder rung."""

    id: str
    retrieval: str  # none | discharge | tfidf | dense | graph | graph_routed | graph_routed_notes | all_notes | deterministic
    assertions: bool
    routing: str  # none | keyword | oracle


CONDITIONS: dict[str, Condition] = {
    c.id: c
    for c in (
        Condition("C1", "none", False, "none"),
        Condition("C1b", "discharge", False, "none"),
        Condition("C2", "tfidf", False, "none"),
        Condition("C2b", "dense", False, "none"),
        Condition("C3", "graph", False, "none"),
        Condition("C4", "graph", True, "none"),
        Condition("C4g_kw", "graph_routed", True, "keyword"),
        Condition("C4g_oracle", "graph_routed", True, "oracle"),
        Condition("C4gPlus", "graph_routed_notes", True, "keyword"),
        Condition("C6", "all_notes", False, "none"),
        Condition("C7", "deterministic", True, "none"),
    )
}


@dataclass(frozen=True)
class Document:
    doc_id: str
    patient_id: str
    hadm_id: int
    note_type: str
    doc_date: date
    created_at: datetime
    text: str
    sections: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class VocabEntry:
    concept_id: int
    label: str
    synonyms: tuple[str, ...]
    node_type: str


@dataclass(frozen=True)
class Vocabulary:
    entries: tuple[VocabEntry, ...]

    def by_id(self, concept_id: int) -> VocabEntry:
        for e in self.entries:
            if e.concept_id == concept_id:
                return e
        raise KeyError(concept_id)


def load_vocabulary(path) -> Vocabulary:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    entries = []
    for i, obj in enumerate(raw):
        try:
            entries.append(
                VocabEntry(
                    concept_id=int(obj["concept_id"]),
                    label=obj["label"],
                    synonyms=tuple(obj.get("synonyms", [obj["label"]])),
                    node_type=obj["node_type"],
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise DataError(f"{path}: entry {i}: {exc}") from exc
    return Vocabulary(tuple(entries))


def extract_concepts(vocabulary: Vocabulary, text: str) -> list[int]:
    """Concept ids whose label or synonym occurs in the text (word-boundary,
    case-insensitive), sorted for determinism."""
    folded = text.casefold()
    found: set[int] = set()
    for entry in vocabulary.entries:
        for syn in (entry.label, *entry.synonyms):
            if re.search(r"\b" + re.escape(syn.casefold()) + r"\b", folded):
                found.add(entry.concept_id)
                break
    return sorted(found)


# -- document retrieval -------------------------------------------------------


@dataclass(frozen=True)
class Chunk:
    doc_id: str
    index: int
    text: str


_WORD_RE = re.compile(r"[a-z0-9']+")


def _tokens(text: str) -> list[str]:
    return _WORD_RE.findall(text.casefold())


def chunk_documents(
    documents: Sequence[Document], chunk_tokens: int = 512, overlap: int = 64
) -> list[Chunk]:
    """Whitespace-token chunks with overlap, in chronological document order."""
    if overlap >= chunk_tokens:
        raise ValueError("overlap must be smaller than the chunk size")
    chunks: list[Chunk] = []
    index = 0
    for doc in sorted(documents, key=lambda d: (d.doc_date, d.doc_id)):
        words = doc.text.split()
        if not words:
            continue
        start = 0
        while start < len(words):
            piece = words[start : start + chunk_tokens]
            chunks.append(Chunk(doc.doc_id, index, " ".join(piece)))
            index += 1
            if start + chunk_tokens >= len(words):
                break
            start += chunk_tokens - overlap
    return chunks


def tfidf_retrieve(chunks: Sequence[Chunk], query: str, k: int) -> list[Chunk]:
    """Top-k chunks by cosine similarity of TF-IDF vectors.

    Ties (including an all-zero query) break by chunk index.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not chunks:
        return []
    docs_tokens = [_tokens(c.text) for c in chunks]
    n = len(chunks)
    df: dict[str, int] = {}
    for toks in docs_tokens:
        for term in set(toks):
            df[term] = df.get(term, 0) + 1

    def idf(term: str) -> float:
        return math.log((1 + n) / (1 + df.get(term, 0))) + 1.0

    def vector(toks: list[str]) -> dict[str, float]:
        counts: dict[str, int] = {}
        for t in toks:
            counts[t] = counts.get(t, 0) + 1
        return {t: c * idf(t) for t, c in counts.items()}

    qv = vector(_tokens(query))
    qnorm = math.sqrt(sum(v * v for v in qv.values()))
    scores = []
    for i, toks in enumerate(docs_tokens):
        dv = vector(toks)
        dot = sum(dv.get(t, 0.0) * w for t, w in qv.items())
        dnorm = math.sqrt(sum(v * v for v in dv.values()))
        score = 0.0 if qnorm == 0 or dnorm == 0 else dot / (qnorm * dnorm)
        scores.append((-score, i))
    ranked = sorted(scores)
    return [chunks[i] for _, i in ranked[:k]]


_EMBED_DIM = 64


def _hash_embed(text: str) -> np.ndarray:
    # Stub embedding: stable token-hash counts. A real dense encoder plugs in
    # behind the same retrieve signature.
    vec = np.zeros(_EMBED_DIM)
    for token in _tokens(text):
        vec[zlib.crc32(token.encode()) % _EMBED_DIM] += 1.0
    return vec


def dense_retrieve(chunks: Sequence[Chunk], query: str, k: int) -> list[Chunk]:
    """Dense-retrieval interface with a hash-embedding stub implementation."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not chunks:
        return []
    qv = _hash_embed(query)
    qn = np.linalg.norm(qv)
    scores = []
    for i, c in enumerate(chunks):
        dv = _hash_embed(c.text)
        dn = np.linalg.norm(dv)
        score = 0.0 if qn == 0 or dn == 0 else float(qv @ dv / (qn * dn))
        scores.append((-score, i))
    return [chunks[i] for _, i in sorted(scores)[:k]]


# -- environment and prompt assembly ------------------------------------------


PLAIN_TEMPLATE = """You are answering a clinical question about one patient using the evidence below.

{graph_evidence}

{documents}

{question}
ANSWER:
"""

DOC_TEMPLATE = """You are answering a clinical question about one patient using the notes below.

{documents}

{question}
ANSWER:
"""


@dataclass
class BenchEnvironment:
    """Everything a condition needs to build a prompt for one patient."""

    graphs: dict[str, PatientGraph]
    documents: dict[str, list[Document]]
    vocabulary: Vocabulary
    intent_rules: Optional[IntentRuleSet] = None
    templates: Optional[TemplateRegistry] = None
    predicate_by_node_type: dict[str, str] = field(default_factory=dict)
    doc_chunk_k: int = 5
    graph_doc_k: int = 3

    def graph(self, patient_id: str) -> PatientGraph:
        try:
            return self.graphs[patient_id]
        except KeyError as exc:
            raise DataError(f"no graph for patient {patient_id!r}") from exc

    def docs(self, patient_id: str) -> list[Document]:
        docs = self.documents.get(patient_id, [])
        return sorted(docs, key=lambda d: (d.doc_date, d.doc_id))

    def relevant_types(self, concepts: Sequence[int]) -> set[str]:
        types = set()
        for cid in concepts:
            try:
                entry = self.vocabulary.by_id(cid)
            except KeyError:
                continue
            predicate = self.predicate_by_node_type.get(entry.node_type)
            if predicate:
                types.add(predicate)
        return types


def deterministic_answer_c7(graph: PatientGraph, concepts: Sequence[int]) -> str:
    """Direct graph lookup with no model: matching edges rendered as typed
    lines, or the exact no-edges template."""
    lines = []
    for cid in sorted(set(concepts)):
        for e in graph.edges_for_concept(cid):
            lines.append(router.edge_line(e, graph).render())
    if not lines:
        return formats.NO_EDGES_TEMPLATE
    return "\n".join(lines)


def _doc_section(texts: Sequence[str]) -> str:
    body = list(texts) if texts else [formats.NO_DOCUMENT_EVIDENCE]
    return "\n".join([formats.DOCUMENT_START, *body, formats.DOCUMENT_END])


def _all_notes(env: BenchEnvironment, patient_id: str) -> list[str]:
    return [
        f"[{d.doc_date.isoformat()}] {d.note_type}:\n{d.text}" for d in env.docs(patient_id)
    ]


def build_context(condition: Condition, env: BenchEnvironment, question) -> tuple[str, str]:
    """Build the prompt for one question under one condition.

    Returns (prompt, evidence) where evidence is the retrieval payload that
    gets stored alongside the prediction. The deterministic condition returns
    an empty prompt: it never reaches a model.
    """
    patient_id = question.patient_id
    q_text = question.question

    if condition.retrieval == "none":
        return f"{formats.QUESTION_PREFIX}{q_text}\nANSWER:", ""

    if condition.retrieval == "deterministic":
        return "", ""

    if condition.retrieval == "discharge":
        summaries = [d for d in env.docs(patient_id) if d.note_type == "discharge_summary"]
        if not summaries:
            raise DataError(f"no discharge summary for patient {patient_id!r}")
        latest = summaries[-1]
        docs = [f"[{latest.doc_date.isoformat()}] {latest.note_type}:\n{latest.text}"]
        evidence = _doc_section(docs)
        prompt = DOC_TEMPLATE.format(
            documents=evidence, question=formats.QUESTION_PREFIX + q_text
        )
        return prompt, evidence

    if condition.retrieval in ("tfidf", "dense"):
        documents = env.docs(patient_id)
        if not documents:
            raise DataError(f"no documents for patient {patient_id!r}")
        chunks = chunk_documents(documents)
        retrieve = tfidf_retrieve if condition.retrieval == "tfidf" else dense_retrieve
        top = retrieve(chunks, q_text, env.doc_chunk_k)
        evidence = _doc_section([c.text for c in top])
        prompt = DOC_TEMPLATE.format(
            documents=evidence, question=formats.QUESTION_PREFIX + q_text
        )
        return prompt, evidence

    if condition.retrieval == "all_notes":
        documents = env.docs(patient_id)
        if not documents:
            raise DataError(f"no documents for patient {patient_id!r}")
        evidence = _doc_section(_all_notes(env, patient_id))
        prompt = DOC_TEMPLATE.format(
            documents=evidence, question=formats.QUESTION_PREFIX + q_text
        )
        return prompt, evidence

    if condition.retrieval in ("graph", "graph_routed", "graph_routed_notes"):
        graph = env.graph(patient_id)
        concepts = extract_concepts(env.vocabulary, q_text)
        relevant = env.relevant_types(concepts)
        experiencer = None
        if condition.routing == "none":
            intent = Intent.DEFAULT
        elif condition.routing == "keyword":
            intent = router.classify_intent(q_text, "keyword", rules=env.intent_rules)
        elif condition.routing == "oracle":
            intent = router.classify_intent(
                q_text, "oracle", category=question.category, rules=env.intent_rules
            )
            experiencer = router.oracle_experiencer_filter(
                question.category, env.intent_rules
            )
        else:
            raise ConfigError(f"unknown routing {condition.routing!r}")

        if intent is Intent.CHANGE or concepts:
            bundle = router.route(
                graph, intent, concepts, sorted(relevant), experiencer=experiencer
            )
        else:
            bundle = router.EvidenceBundle(intent=intent)

        if condition.retrieval == "graph_routed_notes":
            doc_texts = _all_notes(env, patient_id)
        else:
            chunks = chunk_documents(env.docs(patient_id))
            doc_texts = [c.text for c in tfidf_retrieve(chunks, q_text, env.graph_doc_k)] if chunks else []

        include_assertions = condition.assertions
        if condition.routing == "none":
            # Unrouted graph retrieval composes with the plain header.
            graph_section = router.graph_section(bundle, include_assertions)
            evidence = graph_section + "\n\n" + _doc_section(doc_texts)
            prompt = PLAIN_TEMPLATE.format(
                graph_evidence=graph_section,
                documents=_doc_section(doc_texts),
                question=formats.QUESTION_PREFIX + q_text,
            )
            return prompt, evidence

        prompt = router.compose_evidence(
            intent,
            bundle,
            doc_texts,
            templates=env.templates,
            question=q_text,
            include_assertions=include_assertions,
        )
        evidence = router.graph_section(bundle, include_assertions) + "\n\n" + _doc_section(doc_texts)
        return prompt, evidence

    raise ConfigError(f"unknown retrieval mode {condition.retrieval!r}")
