"""Acceptance suite.

One test per acceptance criterion, each at its stated tolerance, each
printing a PASS line on success (run with -s or -rA to see them). These are
the exit criteria for the build; tolerances are pinned here, not calibrated
elsewhere.
"""
from __future__ import annotations

import json
import random
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from conftest import FIXTURES, make_edge, make_graph
from notekg import formats, stats
from notekg.adjudication import create_app, fleiss_table, slot_assignment
from notekg.bench import (
    CONDITIONS,
    apply_exclusions,
    load_questions,
    read_checkpoint,
    run_condition,
)
from notekg.cli import build_reproduce_report, render_report
from notekg.epistemics import AssertionLabel, faithfulness_bound, non_present_fraction
from notekg.evaluator import evaluate
from notekg.kgraph import AllenRelation, allen_relation
from notekg.router import route_change


def ok(message: str) -> None:
    print(f"ACCEPTANCE PASS: {message}")


def test_exact_mcnemar_value_and_runtime():
    p = stats.mcnemar_exact(4, 15)
    assert p == pytest.approx(0.0192, abs=0.0001)
    stats.mcnemar_exact(4, 15)  # warm
    start = time.perf_counter()
    stats.mcnemar_exact(4, 15)
    elapsed = time.perf_counter() - start
    assert elapsed < 1e-3
    ok(f"exact McNemar(4,15) = {p:.4f} (+-0.0001) in {elapsed * 1e6:.0f} us")


def test_chi2_mcnemar_reference_statistics():
    for b, c, expected in ((18, 204, 155.8), (30, 143, 73.8), (20, 93, 47.2)):
        stat, _ = stats.mcnemar_chi2(b, c, continuity=False)
        assert stat == pytest.approx(expected, abs=0.1)
    ok("chi-square McNemar without continuity reproduces 155.8 / 73.8 / 47.2 (+-0.1)")


def test_newcombe_paired_ci_reference_table():
    delta, ci = stats.newcombe_paired_ci(stats.PairedTable(a=8, b=4, c=15, d=23))
    assert delta == pytest.approx(0.220, abs=0.003)
    assert ci.lower == pytest.approx(0.051, abs=0.003)
    assert ci.upper == pytest.approx(0.315, abs=0.003)
    ok(
        f"paired score CI on (8,4,15,23): delta {delta * 100:+.1f} pp, "
        f"CI [{ci.lower * 100:+.1f}, {ci.upper * 100:+.1f}] pp (+-0.3 pp)"
    )


def test_wilson_ci_reference_value():
    ci = stats.wilson_ci(169, 189)
    assert ci.lower == pytest.approx(0.842, abs=0.001)
    assert ci.upper == pytest.approx(0.930, abs=0.001)
    ok(f"Wilson CI(169,189) = [{ci.lower:.1%}, {ci.upper:.1%}] (+-0.1 pp)")


def test_by_factor_and_bh_monotonicity():
    factor = stats.by_adjustment_factor(6)
    assert factor == pytest.approx(2.45, abs=0.005)
    ps = [0.001, 0.04, 0.03, 0.9, 0.2, 0.0005]
    qs = stats.bh_fdr(ps)
    order = sorted(range(len(ps)), key=lambda i: ps[i])
    sorted_qs = [qs[i] for i in order]
    assert all(x <= y + 1e-15 for x, y in zip(sorted_qs, sorted_qs[1:]))
    ok(f"BY adjustment factor m=6 is {factor:.3f} (+-0.005); BH q-values monotone")


def test_cross_model_regression_reference_row():
    xs = [22.93, 21.82, 27.90, 36.74, 35.91, 39.50]
    ys = [43.1, 37.6, 27.9, 24.3, 20.4, 21.3]
    slope, _, r, p = stats.linear_regression(xs, ys)
    assert slope == pytest.approx(-1.123, abs=0.01)
    assert r == pytest.approx(-0.921, abs=0.005)
    assert p == pytest.approx(0.009, abs=0.002)
    ok(f"baseline-vs-delta regression: slope {slope:.3f}, r {r:.3f}, p {p:.4f}")


def test_sign_test_reference_direction():
    p = stats.sign_test(64, 10)
    assert p < 1e-4
    ok(f"sign test (64,10): p = {p:.2e} < 1e-4")


def test_faithfulness_bound_and_corpus_fraction():
    assert faithfulness_bound(0.157) == pytest.approx(0.843, abs=0.0)
    # Corpus-shaped fixture: 618 non-present of 3943 edge-like records.
    from types import SimpleNamespace

    items = [SimpleNamespace(assertion=AssertionLabel.ABSENT)] * 618
    items += [SimpleNamespace(assertion=AssertionLabel.PRESENT)] * (3943 - 618)
    fraction = non_present_fraction(items)
    assert fraction == pytest.approx(618 / 3943, abs=1e-12)
    ok(
        f"faithfulness bound 1-0.157 = 0.843 exactly; corpus fixture non-present "
        f"fraction {fraction:.4f} matches hand count 618/3943"
    )


CANONICAL_13 = [
    ((1, 2), (4, 5), AllenRelation.BEFORE),
    ((1, 2), (2, 5), AllenRelation.BEFORE),       # meets
    ((4, 5), (1, 2), AllenRelation.AFTER),
    ((2, 5), (1, 2), AllenRelation.AFTER),        # met-by
    ((1, 4), (2, 6), AllenRelation.OVERLAPS),
    ((2, 6), (1, 4), AllenRelation.OVERLAPS),     # overlapped-by
    ((1, 3), (1, 6), AllenRelation.STARTS),
    ((1, 6), (1, 3), AllenRelation.STARTS),       # started-by
    ((2, 3), (1, 6), AllenRelation.DURING),
    ((1, 6), (2, 3), AllenRelation.CONTAINS),
    ((4, 6), (1, 6), AllenRelation.FINISHES),
    ((1, 6), (4, 6), AllenRelation.FINISHES),     # finished-by
    ((1, 6), (1, 6), AllenRelation.CONCURRENT),   # equals
]


def test_allen_mapping_total_and_in_set():
    for a, b, expected in CANONICAL_13:
        assert allen_relation(a, b) is expected
    rng = random.Random(13)
    for _ in range(5000):
        endpoints = [rng.randint(0, 6) for _ in range(4)]
        a = (min(endpoints[0], endpoints[1]), max(endpoints[0], endpoints[1]))
        b = (min(endpoints[2], endpoints[3]), max(endpoints[2], endpoints[3]))
        if rng.random() < 0.1:
            b = (b[0], None)
        assert allen_relation(a, b) in AllenRelation
    ok("Allen 13->9 mapping hits every target; no input maps outside the nine-value set")


def test_evaluator_artifacts_reproduced():
    not_found = evaluate("current_state", "currently active", "NOT FOUND IN CURRENT RECORDS", "v2")
    assert not_found.correct
    template = evaluate("negation", "any gold", formats.NO_EDGES_TEMPLATE, "v2")
    assert template.correct
    abstain = evaluate("negation", "any gold", "insufficient evidence in the notes", "v2")
    assert not abstain.correct and abstain.abstention
    ok(
        "evaluator artifacts: NOT FOUND correct on current_state; no-edges template "
        "correct on negation; bare abstention incorrect"
    )


def test_change_routing_matches_brute_force_on_1000_graphs():
    rng = random.Random(4242)
    for _ in range(1000):
        universe = list(range(1, rng.randint(3, 9)))
        g = make_graph("p", {c: f"concept{c}" for c in universe})
        members = {1: set(), 2: set()}
        for adm in (1, 2):
            for cid in rng.sample(universe, rng.randint(1, len(universe))):
                g.add_edge(make_edge(cid, hadm_id=adm))
                members[adm].add(cid)
        diff = route_change(g).pairs[0]
        # Independent brute-force oracle: direct set arithmetic on membership.
        assert diff.added == members[2] - members[1]
        assert diff.removed == members[1] - members[2]
        assert diff.shared == members[1] & members[2]
    ok("change routing equals brute-force set-difference oracle on 1000 random graphs")


FIXTURE_10 = [1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0, 21.0, 34.0, 55.0]


def test_bca_bootstrap_determinism_and_oracle():
    mean = lambda xs: float(np.mean(xs))
    first = stats.bca_bootstrap(FIXTURE_10, mean)
    second = stats.bca_bootstrap(FIXTURE_10, mean)
    assert (first.lower, first.upper) == (second.lower, second.upper)

    # Independent direct computation (same conventions, separate code path).
    from scipy.stats import norm

    data = np.asarray(FIXTURE_10)
    theta = float(np.mean(data))
    thetas = np.empty(2000)
    for i in range(2000):
        gen = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=42, spawn_key=(i,)))
        )
        thetas[i] = np.mean(data[gen.integers(0, len(data), len(data))])
    z0 = norm.ppf(np.sum(thetas < theta) / 2000)
    jack = np.array([np.mean(np.delete(data, i)) for i in range(len(data))])
    jm = jack.mean()
    accel = float(np.sum((jm - jack) ** 3)) / (6.0 * float(np.sum((jm - jack) ** 2)) ** 1.5)
    expected = []
    for q in (0.025, 0.975):
        adj = norm.cdf(z0 + (z0 + norm.ppf(q)) / (1 - accel * (z0 + norm.ppf(q))))
        expected.append(float(np.quantile(np.sort(thetas), adj)))
    assert first.lower == pytest.approx(expected[0], abs=1e-9)
    assert first.upper == pytest.approx(expected[1], abs=1e-9)

    constant = stats.bca_bootstrap([7.0] * 12, mean)
    assert constant.lower == constant.upper == 7.0
    ok(
        f"BCa bootstrap: seed-42 deterministic, matches direct oracle to 1e-9 "
        f"([{first.lower:.6f}, {first.upper:.6f}]), constant data degenerate"
    )


def test_end_to_end_reproduction_under_60s_and_jobs_invariant(tmp_path):
    started = time.monotonic()
    doc1 = build_reproduce_report(FIXTURES, tmp_path / "out1", jobs=1)
    elapsed = time.monotonic() - started
    assert elapsed < 60.0

    doc4 = build_reproduce_report(FIXTURES, tmp_path / "out4", jobs=4)
    text1, text4 = render_report(doc1), render_report(doc4)
    assert text1 == text4

    golden = (FIXTURES / "golden" / "report.json").read_text(encoding="utf-8")
    assert text1 == golden
    assert doc1["fixture_delta"]["positive"]
    assert doc1["reference_checks_pass"]
    ok(
        f"fixture reproduction in {elapsed:.1f}s (<60s), byte-identical to golden across "
        f"--jobs settings, routed-over-baseline delta "
        f"{doc1['fixture_delta']['delta'] * 100:+.1f} pp positive"
    )


class SixHundredBackend:
    name = "sixhundred"
    deterministic = True

    def generate(self, prompt: str) -> str:
        return "y" * 600


def test_no_truncation_regression(tmp_path, bench_env, fixture_questions):
    path = tmp_path / "checkpoint.jsonl"
    run_condition(CONDITIONS["C1"], fixture_questions[:1], bench_env, SixHundredBackend(), path)
    stored = read_checkpoint(path)[0]
    assert len(stored.predicted_answer) == 600
    raw = json.loads(path.read_text().splitlines()[0])
    assert len(raw["predicted_answer"]) == 600
    ok("600-character answer stored at 600 characters (no checkpoint truncation)")


def _make_400_question_file(path) -> tuple[list, list[str]]:
    """Fixture-format 400-question file: 30 change, 370 others, with 8
    experiencer-defect-style qids among the non-change categories."""
    rows = []
    categories = [
        ("negation", 110), ("conditional", 20), ("uncertainty", 40),
        ("family_history", 30), ("sequence", 40), ("current_state", 50),
        ("duration", 30), ("historical", 50), ("change", 30),
    ]
    for category, count in categories:
        for i in range(count):
            rows.append(
                {
                    "qid": f"bench_b_{category}_{i:08x}",
                    "task": "B",
                    "category": category,
                    "patient_id": f"p{i % 43:03d}",
                    "admission_ids": [1, 2],
                    "question": f"{category} question {i}?",
                    "expected_answer": f"{category} answer {i}.",
                }
            )
    assert len(rows) == 400
    defect_qids = [r["qid"] for r in rows if r["category"] == "current_state"][:7]
    defect_qids += [r["qid"] for r in rows if r["category"] == "historical"][:1]
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return rows, defect_qids


def test_exclusion_arithmetic_400_to_362_and_370(tmp_path):
    path = tmp_path / "questions400.jsonl"
    _, defect_qids = _make_400_question_file(path)
    questions = load_questions(path)
    assert len(questions) == 400
    assert len(defect_qids) == 8

    change_only = apply_exclusions(questions, exclude_change=True)
    assert len(change_only) == 370
    endpoint = apply_exclusions(questions, defect_qids, exclude_change=True)
    assert len(endpoint) == 362
    ok("exclusion arithmetic: 400 -> 370 (change-only) -> 362 (change + 8 listed qids)")


# -- secondary-component criteria exercised through the service API ----------


def _rating(item_id, slot, model="correct"):
    return {
        "item_id": item_id,
        "slot": slot,
        "gold_correctness": "correct",
        "model_correctness": model,
        "score_fairness": "agree",
        "safety": "safe",
        "utility": "helpful",
        "note": "",
    }


def _direct_fleiss(table):
    n_items = len(table)
    n_raters = sum(table[0])
    total = n_items * n_raters
    p_cat = [sum(row[j] for row in table) / total for j in range(len(table[0]))]
    p_item = [
        (sum(x * x for x in row) - n_raters) / (n_raters * (n_raters - 1)) for row in table
    ]
    p_bar = sum(p_item) / n_items
    p_exp = sum(p * p for p in p_cat)
    return (p_bar - p_exp) / (1 - p_exp)


def test_blinding_property_and_keyed_fleiss(tmp_path):
    with open(FIXTURES / "adjudication_items.json", encoding="utf-8") as fh:
        items = json.load(fh)[:4]
    client = TestClient(create_app(tmp_path / "adj"))
    seed = 77
    scripts = {
        "r1": [("correct", "incorrect")] * 4,
        "r2": [("correct", "incorrect"), ("partial", "incorrect"), ("correct", "correct"), ("correct", "incorrect")],
        "r3": [("incorrect", "incorrect"), ("correct", "partial"), ("correct", "incorrect"), ("correct", "correct")],
    }
    sids = []
    unkeyed_payloads = []
    for rater, script in scripts.items():
        response = client.post(
            "/sessions", json={"rater_id": rater, "blinding_seed": seed, "items": items}
        )
        unkeyed_payloads.append(response.text)
        sid = response.json()["session_id"]
        sids.append(sid)
        for model_a, model_b in script:
            nxt = client.get(f"/sessions/{sid}/next")
            unkeyed_payloads.append(nxt.text)
            item_id = nxt.json()["item"]["item_id"]
            for slot, model in (("A", model_a), ("B", model_b)):
                unkeyed_payloads.append(
                    client.post(f"/sessions/{sid}/ratings", json=_rating(item_id, slot, model)).text
                )
        unkeyed_payloads.append(client.get(f"/sessions/{sid}/progress").text)
        unkeyed_payloads.append(client.get(f"/sessions/{sid}/export").text)

    for payload in unkeyed_payloads:
        assert '"C1"' not in payload and '"C4g"' not in payload

    export = client.post("/export", json={"session_ids": sids, "key": seed}).json()
    table, _ = fleiss_table(export["ratings"], "model_correctness")
    kappa = stats.fleiss_kappa(table)
    assert kappa == pytest.approx(_direct_fleiss(table), abs=1e-9)
    ok(
        f"blinding crawl found zero condition identifiers in unkeyed responses; "
        f"keyed export Fleiss kappa {kappa:.6f} matches hand oracle to 1e-9"
    )


def test_session_determinism_and_balance(tmp_path):
    ids = [f"item{i:03d}" for i in range(100)]
    conditions = {i: ("C1", "C4g") for i in ids}
    seed = 31337
    first = slot_assignment(seed, ids, conditions)

    with open(FIXTURES / "adjudication_items.json", encoding="utf-8") as fh:
        items = json.load(fh)
    data = tmp_path / "adj"
    client = TestClient(create_app(data))
    sid = client.post(
        "/sessions", json={"rater_id": "r1", "blinding_seed": seed, "items": items}
    ).json()["session_id"]
    before = client.app.state.store.sessions[sid]
    restarted = TestClient(create_app(data))
    after = restarted.app.state.store.sessions[sid]
    assert after.order == before.order
    assert after.slots == before.slots
    assert slot_assignment(seed, ids, conditions) == first

    a_count = sum(1 for s in first.values() if s["A"] == "C1")
    assert 40 <= a_count <= 60
    ok(
        f"session assignments identical after restart; A-slot balance {a_count}/100 "
        f"within [40, 60]"
    )
