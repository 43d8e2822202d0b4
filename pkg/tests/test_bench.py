"""Benchmark harness: questions, retrieval, context building, ingestion."""
from __future__ import annotations

import json
from datetime import date, datetime

import pytest

from conftest import FIXTURES, RESOURCES
from notekg import formats
from notekg.bench import (
    CONDITIONS,
    Chunk,
    Document,
    ReplayBackend,
    ScriptedBackend,
    apply_corrections,
    apply_exclusions,
    build_context,
    build_graph,
    category_histogram,
    chunk_documents,
    dense_retrieve,
    deterministic_answer_c7,
    extract_concepts,
    load_corpus,
    load_corrections,
    load_questions,
    load_registries,
    load_vocabulary,
    tfidf_retrieve,
)
from notekg.bench.backends import prompt_key
from notekg.epistemics import AssertionLabel, Experiencer, Temporality, load_pattern_inventory
from notekg.errors import DataError
from notekg.evaluator import CATEGORIES, evaluate


class TestQuestions:
    def test_fixture_loads_with_all_categories(self, fixture_questions):
        assert len(fixture_questions) == 40
        assert set(category_histogram(fixture_questions)) == set(CATEGORIES)

    def test_duplicate_qid_named(self, tmp_path):
        row = {
            "qid": "dup", "task": "A", "category": "negation", "patient_id": "p",
            "admission_ids": [1], "question": "q", "expected_answer": "a",
        }
        path = tmp_path / "q.jsonl"
        path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
        with pytest.raises(DataError, match="dup"):
            load_questions(path)

    def test_unknown_category(self, tmp_path):
        row = {
            "qid": "x", "task": "A", "category": "telemetry", "patient_id": "p",
            "admission_ids": [1], "question": "q", "expected_answer": "a",
        }
        path = tmp_path / "q.jsonl"
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(DataError, match="telemetry"):
            load_questions(path)

    def test_corrections_recover_v2(self, fixture_questions):
        v1 = load_questions(FIXTURES / "questions_v1.jsonl")
        corrections = load_corrections(FIXTURES / "corrections.json")
        assert len(corrections) == 3
        corrected = apply_corrections(v1, corrections)
        v2_by_qid = {q.qid: q.expected_answer for q in fixture_questions}
        assert {q.qid: q.expected_answer for q in corrected} == v2_by_qid

    def test_exclusions_identity_and_change(self, fixture_questions):
        assert apply_exclusions(fixture_questions) == list(fixture_questions)
        no_change = apply_exclusions(fixture_questions, exclude_change=True)
        assert len(no_change) == 36
        assert all(q.category != "change" for q in no_change)

    def test_exclusion_arithmetic_invariant(self, fixture_questions):
        listed = [q.qid for q in fixture_questions if q.category == "family_history"][:2]
        out = apply_exclusions(fixture_questions, listed, exclude_change=True)
        n_change = sum(1 for q in fixture_questions if q.category == "change")
        assert len(out) == len(fixture_questions) - n_change - len(listed)

    def test_unknown_exclusion_warned_not_fatal(self, fixture_questions, caplog):
        out = apply_exclusions(fixture_questions, ["bench_x_missing_00000000"])
        assert len(out) == 40


def _chunks(texts):
    return [Chunk(doc_id="d", index=i, text=t) for i, t in enumerate(texts)]


class TestRetrieval:
    def test_unique_term_ranked_first(self):
        chunks = _chunks(["alpha beta", "gamma delta", "warfarin dosing notes"])
        top = tfidf_retrieve(chunks, "warfarin", 2)
        assert top[0].index == 2

    def test_empty_query_chunk_order(self):
        chunks = _chunks(["a", "b", "c"])
        assert [c.index for c in tfidf_retrieve(chunks, "", 2)] == [0, 1]

    def test_k_larger_than_corpus(self):
        chunks = _chunks(["a", "b"])
        assert len(tfidf_retrieve(chunks, "a", 10)) == 2

    def test_empty_corpus(self):
        assert tfidf_retrieve([], "q", 3) == []

    def test_dense_stub_deterministic(self):
        chunks = _chunks(["alpha beta", "warfarin dosing", "gamma"])
        first = dense_retrieve(chunks, "warfarin dosing", 3)
        second = dense_retrieve(chunks, "warfarin dosing", 3)
        assert [c.index for c in first] == [c.index for c in second]
        assert first[0].index == 1

    def test_chunking_overlap(self):
        doc = Document(
            doc_id="d1", patient_id="p", hadm_id=1, note_type="note",
            doc_date=date(2019, 1, 1), created_at=datetime(2019, 1, 1, 8),
            text=" ".join(f"w{i}" for i in range(1000)),
        )
        chunks = chunk_documents([doc], chunk_tokens=512, overlap=64)
        assert len(chunks) == 3
        first_words = chunks[0].text.split()
        second_words = chunks[1].text.split()
        assert first_words[-64:] == second_words[:64]

    def test_extract_concepts_synonyms(self, bench_env):
        ids = extract_concepts(bench_env.vocabulary, "Does the patient have CHF or diabetes?")
        assert 1002 in ids and 1003 in ids


def _question(fixture_questions, category, patient=None):
    for q in fixture_questions:
        if q.category == category and (patient is None or q.patient_id == patient):
            return q
    raise AssertionError(f"no fixture question for {category}")


class TestBuildContext:
    def test_c1_prompt_contains_only_question(self, bench_env, fixture_questions):
        q = fixture_questions[0]
        prompt, evidence = build_context(CONDITIONS["C1"], bench_env, q)
        assert q.question in prompt
        assert formats.EVIDENCE_START not in prompt
        assert formats.DOCUMENT_START not in prompt
        assert evidence == ""

    def test_c2_unique_chunk_first(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "duration", "p003")
        prompt, _ = build_context(CONDITIONS["C2"], bench_env, q)
        assert "Hypertension" in prompt

    def test_c6_documents_chronological(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "change", "p001")
        prompt, _ = build_context(CONDITIONS["C6"], bench_env, q)
        assert prompt.index("2019-03-05") < prompt.index("2019-06-14")

    def test_c1b_uses_latest_discharge_summary(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "change", "p001")
        prompt, _ = build_context(CONDITIONS["C1b"], bench_env, q)
        assert "2019-06-14" in prompt and "2019-03-05" not in prompt

    def test_c1b_missing_documents_error(self, bench_env, fixture_questions):
        import dataclasses

        env = dataclasses.replace(bench_env, documents={"p001": []})
        q = _question(fixture_questions, "change", "p001")
        with pytest.raises(DataError):
            build_context(CONDITIONS["C1b"], env, q)

    def test_c3_suppresses_assertions_c4_keeps_them(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "negation", "p001")
        c3_prompt, _ = build_context(CONDITIONS["C3"], bench_env, q)
        c4_prompt, _ = build_context(CONDITIONS["C4"], bench_env, q)
        assert "ABSENT:" not in c3_prompt
        assert "ABSENT: pneumonia" in c4_prompt

    def test_c4g_oracle_routes_current_state(self, bench_env, fixture_questions):
        q = next(
            x for x in fixture_questions
            if x.category == "current_state" and "urinary" in x.question
        )
        prompt, _ = build_context(CONDITIONS["C4g_oracle"], bench_env, q)
        assert "NOT FOUND: urinary tract infection" in prompt

    def test_c4g_change_prompt_sections(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "change", "p001")
        prompt, _ = build_context(CONDITIONS["C4g_oracle"], bench_env, q)
        assert "Added:" in prompt and "Removed:" in prompt and "Continued:" in prompt
        assert "atorvastatin" in prompt and "lisinopril" in prompt

    def test_c4gplus_appends_all_notes(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "negation", "p001")
        plus_prompt, _ = build_context(CONDITIONS["C4gPlus"], bench_env, q)
        assert formats.EVIDENCE_START in plus_prompt
        assert "2019-03-05" in plus_prompt  # full notes present

    def test_c7_builds_no_prompt(self, bench_env, fixture_questions):
        prompt, evidence = build_context(CONDITIONS["C7"], bench_env, fixture_questions[0])
        assert prompt == "" and evidence == ""


class TestDeterministicAnswer:
    def test_no_match_template(self, bench_env):
        graph = bench_env.graph("p001")
        assert deterministic_answer_c7(graph, [999999]) == formats.NO_EDGES_TEMPLATE

    def test_matching_edge_line(self, bench_env):
        graph = bench_env.graph("p001")
        answer = deterministic_answer_c7(graph, [1001])
        assert "ABSENT" in answer and "pneumonia" in answer

    def test_template_scores_correct_on_negation_v2(self):
        result = evaluate("negation", "gold", formats.NO_EDGES_TEMPLATE, "v2")
        assert result.correct


class TestBackends:
    def test_replay_round_trip(self, tmp_path):
        path = tmp_path / "replay.jsonl"
        path.write_text(
            json.dumps({"prompt_sha256": prompt_key("hello"), "answer": "world"}) + "\n"
        )
        backend = ReplayBackend(path)
        assert backend.generate("hello") == "world"

    def test_replay_missing_prompt(self, tmp_path):
        path = tmp_path / "replay.jsonl"
        path.write_text("")
        with pytest.raises(DataError):
            ReplayBackend(path).generate("unknown")

    def test_scripted_abstains_without_evidence(self):
        backend = ScriptedBackend()
        assert backend.generate("QUESTION: Anything?\nANSWER:").startswith("Cannot determine")

    def test_scripted_change_sentence(self, bench_env, fixture_questions):
        q = _question(fixture_questions, "change", "p001")
        prompt, _ = build_context(CONDITIONS["C4g_oracle"], bench_env, q)
        answer = ScriptedBackend().generate(prompt)
        assert "changed" in answer and "added" in answer and "atorvastatin" in answer

    def test_scripted_not_found_sentence(self, bench_env, fixture_questions):
        q = next(
            x for x in fixture_questions
            if x.category == "current_state" and "urinary" in x.question
        )
        prompt, _ = build_context(CONDITIONS["C4g_oracle"], bench_env, q)
        answer = ScriptedBackend().generate(prompt)
        assert "NOT FOUND IN CURRENT RECORDS" in answer


class TestIngestion:
    def test_fixture_corpus_builds_four_graphs(self):
        records = load_corpus(FIXTURES / "corpus")
        assert [r.patient_id for r in records] == ["p001", "p002", "p003", "p004"]

    def test_epistemic_states_materialized(self, bench_env):
        graph = bench_env.graph("p001")
        pneumonia = graph.edges_for_concept(1001)
        assert pneumonia and all(e.assertion is AssertionLabel.ABSENT for e in pneumonia)
        chf = graph.edges_for_concept(1002)
        assert chf and all(e.assertion is AssertionLabel.POSSIBLE for e in chf)

    def test_family_history_experiencer(self, bench_env):
        graph = bench_env.graph("p002")
        breast = graph.edges_for_concept(1006)
        assert breast and all(e.experiencer is Experiencer.FAMILY for e in breast)
        assert all(e.assertion is AssertionLabel.FAMILY_HISTORY for e in breast)

    def test_past_fact_not_open(self, bench_env):
        graph = bench_env.graph("p004")
        uti = graph.edges_for_concept(1009)
        assert uti and all(e.temporality is Temporality.PAST for e in uti)
        assert all(not e.valid_time.open_validity for e in uti)

    def test_preservation_end_to_end(self):
        vocabulary = load_vocabulary(FIXTURES / "vocabulary.json")
        registries = load_registries(RESOURCES / "registries.json")
        inventory = load_pattern_inventory(RESOURCES / "patterns.jsonl")
        for record in load_corpus(FIXTURES / "corpus"):
            graph, mentions, preservation = build_graph(record, vocabulary, inventory, registries)
            assert preservation.ok
            assert preservation.total == len(mentions) == len(graph.edges())

    def test_admission_partition(self, bench_env):
        graph = bench_env.graph("p001")
        assert 2001 in graph.concepts_in_admission(1)  # lisinopril first admission
        assert 2001 not in graph.concepts_in_admission(2)
        assert 2003 in graph.concepts_in_admission(2)  # atorvastatin second


class TestEndToEndInvariants:
    def test_oracle_never_routes_change_to_default(self, fixture_questions):
        from notekg.router import Intent, classify_intent

        for q in fixture_questions:
            intent = classify_intent(q.question, "oracle", category=q.category)
            if q.category == "change":
                assert intent is Intent.CHANGE

    def test_epistemic_state_preserved_to_rendered_evidence(self):
        # mention -> edge -> routed bundle -> rendered line -> parsed triple
        from notekg import formats
        from notekg.router import route_default

        vocabulary = load_vocabulary(FIXTURES / "vocabulary.json")
        registries = load_registries(RESOURCES / "registries.json")
        inventory = load_pattern_inventory(RESOURCES / "patterns.jsonl")
        for record in load_corpus(FIXTURES / "corpus"):
            graph, mentions, _ = build_graph(record, vocabulary, inventory, registries)
            for mention, edge in zip(mentions, graph.edges()):
                bundle = route_default(graph, [mention.concept_id], min_confidence=0.0)
                line = next(
                    l for l in bundle.lines if l.kind == "edge" and l.edge_id == edge.edge_id
                )
                parsed = formats.parse_edge_line(line.render())
                assert parsed.tag == mention.assertion.value.upper()
                assert parsed.temporality == mention.temporality.value
                assert parsed.experiencer == mention.experiencer.value
