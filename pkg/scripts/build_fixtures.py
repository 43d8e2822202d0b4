#!/usr/bin/env python3
"""Regenerate the derived fixture files: question sets (v1/v2 + corrections),
the replay answer corpus, and the golden report.

The patient corpus JSON files are source data and are edited by hand; this
script derives everything downstream of them so the whole fixture set stays
mutually consistent. Run from the repo root:

    python scripts/build_fixtures.py
"""
from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from notekg.bench import (  # noqa: E402
    CONDITIONS,
    BenchEnvironment,
    ScriptedBackend,
    build_context,
    load_corpus,
    load_registries,
    load_vocabulary,
    build_graph,
)
from notekg.bench.backends import prompt_key  # noqa: E402
from notekg.epistemics import load_pattern_inventory  # noqa: E402
from notekg.router import default_intent_rules, default_templates  # noqa: E402

FIXTURES = REPO / "fixtures"
RESOURCES = REPO / "src" / "notekg" / "resources"

# (task, category, patient, admissions, question, expected v2 answer)
QUESTION_DEFS = [
    ("a", "negation", "p001", [1], "Does the patient have pneumonia?",
     "No. Pneumonia was ruled out; there was no evidence of pneumonia on the chest film."),
    ("a", "negation", "p002", [1], "Does the patient report chest pain?",
     "No, the patient denies chest pain."),
    ("a", "negation", "p002", [1], "Does the patient have retinopathy?",
     "No evidence of retinopathy was found on exam."),
    ("a", "negation", "p003", [1], "Was deep vein thrombosis found?",
     "No. There was no evidence of deep vein thrombosis."),
    ("a", "negation", "p004", [2], "Does the patient have edema?",
     "No, the patient denies edema."),
    ("a", "negation", "p004", [1], "Did the patient have a fever during the first stay?",
     "No evidence of fever was documented during the stay."),
    ("a", "uncertainty", "p001", [1], "Is bronchitis confirmed or just likely?",
     "Bronchitis is only likely, a possible viral process, not confirmed."),
    ("a", "uncertainty", "p001", [1], "Is heart failure confirmed or just suspected?",
     "Heart failure is possible but not confirmed; the echocardiogram was pending."),
    ("a", "uncertainty", "p002", [1], "Is neuropathy a confirmed diagnosis?",
     "Neuropathy is possible, suspected from early diabetic changes, not confirmed."),
    ("a", "uncertainty", "p003", [1], "Is osteoarthritis definite on imaging?",
     "Osteoarthritis is suspected, consistent with imaging, but not definite."),
    ("a", "conditional", "p001", [2], "Under what condition would nitroglycerin be started?",
     "Nitroglycerin would be started only if chest pain recurs; it is pending that condition."),
    ("a", "conditional", "p003", [1], "Under what circumstances would a statin be started?",
     "A statin would be started only if lipids remain elevated; it is conditional."),
    ("a", "conditional", "p003", [2], "Is the warfarin dose adjustment conditional on anything?",
     "Yes, the warfarin dose adjustment is contingent on INR results, pending those labs."),
    ("a", "conditional", "p004", [2], "When would prednisone be used?",
     "Prednisone would be used only if the asthma worsens; it is pending that condition."),
    ("a", "family_history", "p002", [1], "Is there a family history of breast cancer?",
     "Yes. Family history of breast cancer: the patient's mother had breast cancer."),
    ("a", "family_history", "p002", [1], "Does the family history include colon cancer?",
     "Yes, there is a family history of colon cancer."),
    ("a", "family_history", "p002", [2], "Is there a maternal history of osteoporosis?",
     "Yes, there is a maternal family history of osteoporosis."),
    ("a", "family_history", "p004", [1], "Did the patient's father have colon cancer?",
     "Yes. Family history of colon cancer in the patient's father."),
    ("b", "sequence", "p002", [1, 2], "Which came first, metformin or insulin?",
     "Metformin came first, then insulin was added in the second admission."),
    ("b", "sequence", "p003", [1, 2], "Which came first, the appendectomy or the atrial fibrillation diagnosis?",
     "The appendectomy came first, then atrial fibrillation was diagnosed later."),
    ("b", "sequence", "p004", [1, 2], "What came first, the asthma exacerbation or warfarin initiation?",
     "First the asthma exacerbation, then warfarin was initiated in the later admission."),
    ("b", "sequence", "p001", [1, 2], "Which was addressed first, cholelithiasis or hypertension?",
     "Cholelithiasis was addressed first, then hypertension in the second admission."),
    ("b", "current_state", "p001", [1, 2], "Is the patient currently taking metoprolol?",
     "Yes, metoprolol is a current, active medication."),
    ("b", "current_state", "p001", [2], "Is atorvastatin currently prescribed?",
     "Yes, atorvastatin is current and active."),
    ("b", "current_state", "p002", [1, 2], "Is diabetes an active problem currently?",
     "Yes, diabetes is a current, active problem."),
    ("b", "current_state", "p003", [2], "Is atrial fibrillation an active problem currently?",
     "Yes, atrial fibrillation is current and active."),
    ("b", "current_state", "p004", [1, 2], "Is asthma an active problem currently?",
     "Yes, asthma is a current, active problem."),
    ("b", "current_state", "p004", [1], "Is a urinary tract infection currently active?",
     "No, the urinary tract infection is not in current records; it was treated last year."),
    ("b", "duration", "p001", [1], "How long ago was hyperlipidemia noted?",
     "Hyperlipidemia was noted five years ago."),
    ("b", "duration", "p002", [1], "How long has the patient had diabetes?",
     "Diabetes for twelve years."),
    ("b", "duration", "p003", [2], "How long has the patient had hypertension?",
     "Hypertension for 10 years."),
    ("b", "duration", "p004", [2], "Since when has the patient had asthma?",
     "Asthma since childhood."),
    ("b", "historical", "p001", [1, 2], "Does the patient still have cholelithiasis or is it resolved?",
     "Cholelithiasis was resolved after the first admission; it is historical now."),
    ("b", "historical", "p002", [1], "Did the patient ever smoke in the past?",
     "Yes, the patient is a former smoker; smoking is historical and resolved."),
    ("b", "historical", "p002", [2], "Has the patient ever had hepatitis?",
     "Yes, there is a history of hepatitis in childhood; it was resolved."),
    ("b", "historical", "p003", [1, 2], "Does the patient have a history of appendicitis?",
     "Yes, appendicitis in the past; it was treated and resolved."),
    ("b", "change", "p001", [1, 2], "What medications changed between the first and second admissions?",
     "Atorvastatin was added and lisinopril was removed; metoprolol was continued."),
    ("b", "change", "p002", [1, 2], "What medications were new since the first admission?",
     "Insulin was added since the first admission; metformin was continued."),
    ("b", "change", "p003", [1, 2], "What changed between the two admissions?",
     "Atrial fibrillation and warfarin were added after the first admission."),
    ("b", "change", "p004", [1, 2], "What medications were added or removed between admissions?",
     "Warfarin was added; albuterol was continued."),
]

# v1 gold defects (corrected in v2 via corrections.json): one wrong-polarity
# current-state answer, one stale historical answer, one experiencer mixup.
V1_DEFECTS = {
    ("current_state", "Is a urinary tract infection currently active?"):
        "Yes, the urinary tract infection is currently active.",
    ("historical", "Does the patient still have cholelithiasis or is it resolved?"):
        "Cholelithiasis is an active current problem.",
    ("family_history", "Is there a family history of breast cancer?"):
        "The patient has breast cancer.",
}


def make_qid(task: str, category: str, question: str) -> str:
    digest = hashlib.sha1(f"fixture|{task}|{category}|{question}".encode()).hexdigest()[:8]
    return f"bench_{task}_{category}_{digest}"


def build_questions() -> tuple[list[dict], list[dict], dict[str, str]]:
    v2, v1, corrections = [], [], {}
    for task, category, patient, admissions, question, answer in QUESTION_DEFS:
        qid = make_qid(task, category, question)
        base = {
            "qid": qid,
            "task": task.upper(),
            "category": category,
            "patient_id": patient,
            "admission_ids": admissions,
            "question": question,
        }
        v2.append({**base, "expected_answer": answer, "gold_version": "v2"})
        defect = V1_DEFECTS.get((category, question))
        if defect is not None:
            v1.append({**base, "expected_answer": defect, "gold_version": "v1"})
            corrections[qid] = answer
        else:
            v1.append({**base, "expected_answer": answer, "gold_version": "v1"})
    return v2, v1, corrections


def write_jsonl(path: Path, rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def build_environment() -> BenchEnvironment:
    vocabulary = load_vocabulary(FIXTURES / "vocabulary.json")
    inventory = load_pattern_inventory(RESOURCES / "patterns.jsonl")
    registries = load_registries(RESOURCES / "registries.json")
    graphs, documents = {}, {}
    for record in load_corpus(FIXTURES / "corpus"):
        graph, _, preservation = build_graph(record, vocabulary, inventory, registries)
        if not preservation.ok:
            raise RuntimeError(f"preservation violated for {record.patient_id}")
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


def build_replay_corpus(env: BenchEnvironment, questions: list[dict]) -> list[dict]:
    from notekg.bench.questions import Question

    backend = ScriptedBackend()
    rows, seen = [], set()
    for q in questions:
        question = Question(
            qid=q["qid"], task=q["task"], category=q["category"],
            patient_id=q["patient_id"], admission_ids=tuple(q["admission_ids"]),
            question=q["question"], expected_answer=q["expected_answer"],
        )
        for condition in CONDITIONS.values():
            if condition.retrieval == "deterministic":
                continue
            prompt, _ = build_context(condition, env, question)
            key = prompt_key(prompt)
            if key in seen:
                continue
            seen.add(key)
            rows.append({"prompt_sha256": key, "answer": backend.generate(prompt)})
    return rows


def write_adjudication_items(env: BenchEnvironment, questions: list[dict]) -> None:
    """Paired blinded-review items: the baseline and routed answers for the
    first twelve fixture questions."""
    from notekg.bench.questions import Question
    from notekg.bench import ReplayBackend

    backend = ReplayBackend(FIXTURES / "replay_corpus.jsonl")
    items = []
    for q in questions[:12]:
        question = Question(
            qid=q["qid"], task=q["task"], category=q["category"],
            patient_id=q["patient_id"], admission_ids=tuple(q["admission_ids"]),
            question=q["question"], expected_answer=q["expected_answer"],
        )
        answers = {}
        for name, condition_id in (("C1", "C1"), ("C4g", "C4g_oracle")):
            prompt, _ = build_context(CONDITIONS[condition_id], env, question)
            answers[name] = backend.generate(prompt)
        docs = env.docs(q["patient_id"])
        items.append(
            {
                "item_id": q["qid"],
                "question": q["question"],
                "expected_answer": q["expected_answer"],
                "source_note": docs[0].text if docs else "",
                "answers": answers,
            }
        )
    with open(FIXTURES / "adjudication_items.json", "w", encoding="utf-8") as fh:
        json.dump(items, fh, indent=2, sort_keys=True)
        fh.write("\n")


def main() -> None:
    v2, v1, corrections = build_questions()
    write_jsonl(FIXTURES / "questions_v2.jsonl", v2)
    write_jsonl(FIXTURES / "questions_v1.jsonl", v1)
    with open(FIXTURES / "corrections.json", "w", encoding="utf-8") as fh:
        json.dump(corrections, fh, indent=2, sort_keys=True)
        fh.write("\n")

    family_qids = [q["qid"] for q in v2 if q["category"] == "family_history"][:2]
    with open(FIXTURES / "exclusions.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"qids": family_qids, "note": "experiencer-attribution review pending"},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")

    env = build_environment()
    write_jsonl(FIXTURES / "replay_corpus.jsonl", build_replay_corpus(env, v2))
    write_adjudication_items(env, v2)
    print(f"wrote {len(v2)} questions, {len(corrections)} corrections")

    # The golden report is produced by the reproduce command itself; run it in
    # a scratch directory and freeze only the report.
    import shutil
    import tempfile

    from notekg.cli import main as cli_main

    with tempfile.TemporaryDirectory() as scratch:
        rc = cli_main(
            ["reproduce", "--fixtures", str(FIXTURES), "--out", scratch, "--write-golden"]
        )
        if rc != 0:
            raise SystemExit(rc)
        (FIXTURES / "golden").mkdir(exist_ok=True)
        shutil.copyfile(f"{scratch}/report.json", FIXTURES / "golden" / "report.json")
    print("golden report written")


if __name__ == "__main__":
    main()
