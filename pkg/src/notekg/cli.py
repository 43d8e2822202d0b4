"""Command-line entry point.

Subcommands: ingest (notes -> graphs), run (one condition over a question
set), score (checkpoint -> per-item scores), stats (paired statistics over
two scored runs), report (multi-run report), reproduce (full fixture
pipeline checked against the golden report), serve (adjudication service).

Exit codes: 0 success, 2 configuration/usage error, 3 data error,
4 verification failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import stats
from .bench import (
    CONDITIONS,
    BenchEnvironment,
    HttpJsonBackend,
    ReplayBackend,
    ScriptedBackend,
    apply_corrections,
    apply_exclusions,
    build_graph,
    category_histogram,
    load_corpus,
    load_corrections,
    load_questions,
    load_registries,
    load_vocabulary,
    read_checkpoint,
    report,
    run_condition,
    score_run,
    write_scores_jsonl,
)
from .epistemics import load_pattern_inventory
from .errors import ConfigError, DataError
from .kgraph import load_graph, save_graph
from .router import default_intent_rules, default_templates, load_intent_rules, load_templates

log = logging.getLogger("notekg")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_VERIFY = 4

LADDER = ["C1", "C1b", "C2", "C2b", "C3", "C4", "C4g_kw", "C4g_oracle", "C4gPlus", "C6", "C7"]
REPRODUCE_COMPARISONS = [
    ("C1", "C4g_oracle"),
    ("C1", "C4g_kw"),
    ("C2b", "C4g_kw"),
    ("C3", "C4g_oracle"),
    ("C4", "C4g_oracle"),
]


def _resource_path(name: str) -> Path:
    return Path(__file__).parent / "resources" / name


def _build_environment(args) -> BenchEnvironment:
    vocabulary = load_vocabulary(args.vocabulary)
    registries = load_registries(args.registries or _resource_path("registries.json"))
    inventory = load_pattern_inventory(args.patterns or _resource_path("patterns.jsonl"))
    rules = load_intent_rules(args.intent_rules) if args.intent_rules else default_intent_rules()
    templates = load_templates(args.templates) if args.templates else default_templates()

    graphs, documents = {}, {}
    for record in load_corpus(args.corpus):
        documents[record.patient_id] = record.documents()
        if args.graphs:
            graphs[record.patient_id] = load_graph(Path(args.graphs) / f"{record.patient_id}.json")
        else:
            graph, _, _ = build_graph(record, vocabulary, inventory, registries)
            graphs[record.patient_id] = graph
    return BenchEnvironment(
        graphs=graphs,
        documents=documents,
        vocabulary=vocabulary,
        intent_rules=rules,
        templates=templates,
        predicate_by_node_type=registries["predicate_by_node_type"],
    )


def _make_backend(spec: str):
    if spec == "scripted":
        return ScriptedBackend()
    if spec.startswith("replay:"):
        return ReplayBackend(spec.split(":", 1)[1])
    if spec.startswith("http:"):
        return HttpJsonBackend(name=spec.split(":", 1)[1])
    raise ConfigError(f"unknown backend {spec!r} (use scripted, replay:PATH, or http:MODEL)")


# -- subcommands -------------------------------------------------------------


def cmd_ingest(args) -> int:
    from .bench.ingest import load_patient_record

    vocabulary = load_vocabulary(args.vocabulary)
    registries = load_registries(args.registries or _resource_path("registries.json"))
    inventory = load_pattern_inventory(args.patterns or _resource_path("patterns.jsonl"))
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    paths = sorted(Path(args.corpus).glob("*.json"))
    if not paths:
        log.warning("corpus %s contains no patient records", args.corpus)
        return EXIT_OK
    failures = []
    for path in paths:
        try:
            record = load_patient_record(path)
            graph, mentions, preservation = build_graph(record, vocabulary, inventory, registries)
            save_graph(graph, out_dir / f"{record.patient_id}.json")
            print(
                f"{record.patient_id}: {len(mentions)} mentions, "
                f"{len(graph.edges())} edges, preservation "
                f"{preservation.preserved}/{preservation.total} "
                f"{'OK' if preservation.ok else 'VIOLATED'}"
            )
            if not preservation.ok:
                failures.append(record.patient_id)
        except DataError as exc:
            print(f"{path.stem}: FAILED ({exc})", file=sys.stderr)
            failures.append(path.stem)
    return EXIT_DATA if failures else EXIT_OK


def cmd_run(args) -> int:
    if args.condition not in CONDITIONS:
        raise ConfigError(f"unknown condition {args.condition!r}; choose from {LADDER}")
    condition = CONDITIONS[args.condition]
    env = _build_environment(args)
    questions = load_questions(args.questions)
    backend = None if condition.retrieval == "deterministic" else _make_backend(args.backend)
    summary = run_condition(
        condition,
        questions,
        env,
        backend,
        args.out,
        resume=args.resume,
        jobs=args.jobs,
    )
    print(
        f"{condition.id}: {summary.answered} answered, {summary.skipped} resumed, "
        f"{len(summary.errors)} errors"
    )
    if summary.errors:
        print("errored qids: " + ", ".join(summary.errors))
    return EXIT_OK


def _load_gold(args):
    questions = load_questions(args.gold)
    if getattr(args, "corrections", None):
        questions = apply_corrections(questions, load_corrections(args.corrections))
    exclusion_qids = []
    if getattr(args, "exclusions", None):
        with open(args.exclusions, encoding="utf-8") as fh:
            exclusion_qids = json.load(fh)["qids"]
    if exclusion_qids or getattr(args, "exclude_change", False):
        questions = apply_exclusions(questions, exclusion_qids, args.exclude_change)
    return questions


def cmd_score(args) -> int:
    questions = _load_gold(args)
    predictions = read_checkpoint(args.checkpoint)
    keep = {q.qid for q in questions}
    predictions = [p for p in predictions if p.qid in keep]
    scored = score_run(predictions, questions, version=args.version)
    if args.out:
        write_scores_jsonl(scored, args.out)
    print(f"n={scored.n} accuracy={scored.accuracy:.1%} (evaluator {args.version})")
    for category, acc in scored.per_category().items():
        print(f"  {category:<15} {acc:.1%}")
    return EXIT_OK


def _read_scored(path) -> dict[str, bool]:
    outcomes = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                outcomes[obj["qid"]] = bool(obj["correct"])
    if not outcomes:
        raise DataError(f"{path}: no scored items")
    return outcomes


def cmd_stats(args) -> int:
    a = _read_scored(args.run_a)
    b = _read_scored(args.run_b)
    if set(a) != set(b):
        raise DataError("scored runs cover different qid sets")
    qids = sorted(a)
    table = stats.paired_table_from_outcomes([a[q] for q in qids], [b[q] for q in qids])
    delta, ci = stats.newcombe_paired_ci(table)
    doc = {
        "n": table.n,
        "table": {"a": table.a, "b": table.b, "c": table.c, "d": table.d},
        "delta": delta,
        "newcombe_ci": [ci.lower, ci.upper],
        "mcnemar_exact_p": stats.mcnemar_exact(table.b, table.c),
    }
    if table.b + table.c:
        chi2, chi2_p = stats.mcnemar_chi2(table.b, table.c)
        doc["mcnemar_chi2"] = chi2
        doc["mcnemar_chi2_p"] = chi2_p
    print(json.dumps(doc, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    runs = {}
    for spec in args.scored:
        name, _, path = spec.partition("=")
        if not path:
            raise ConfigError(f"--scored expects NAME=FILE, got {spec!r}")
        outcomes = _read_scored(path)
        runs[name] = outcomes
    comparisons = [tuple(c.split(",")) for c in args.compare]
    doc: dict = {"schema_version": 1, "runs": {}, "comparisons": {}}
    for name, outcomes in sorted(runs.items()):
        doc["runs"][name] = {
            "n": len(outcomes),
            "accuracy": sum(outcomes.values()) / len(outcomes),
        }
    for first, second in comparisons:
        if first not in runs or second not in runs:
            raise ConfigError(f"comparison ({first}, {second}) references unknown runs")
        qids = sorted(runs[first])
        if set(qids) != set(runs[second]):
            raise DataError(f"runs {first} and {second} cover different qid sets")
        table = stats.paired_table_from_outcomes(
            [runs[first][q] for q in qids], [runs[second][q] for q in qids]
        )
        delta, ci = stats.newcombe_paired_ci(table)
        doc["comparisons"][f"{first}_vs_{second}"] = {
            "table": {"a": table.a, "b": table.b, "c": table.c, "d": table.d},
            "delta": delta,
            "newcombe_ci": [ci.lower, ci.upper],
            "mcnemar_exact_p": stats.mcnemar_exact(table.b, table.c),
        }
    text = json.dumps(_round_floats(doc), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    return EXIT_OK


# -- reproduce ---------------------------------------------------------------


_CHECK_OPS = {
    "mcnemar_exact": lambda a: stats.mcnemar_exact(a["b"], a["c"]),
    "mcnemar_chi2_stat": lambda a: stats.mcnemar_chi2(a["b"], a["c"])[0],
    "newcombe_delta": lambda a: stats.newcombe_paired_ci(stats.PairedTable(a["a"], a["b"], a["c"], a["d"]))[0],
    "newcombe_lower": lambda a: stats.newcombe_paired_ci(stats.PairedTable(a["a"], a["b"], a["c"], a["d"]))[1].lower,
    "newcombe_upper": lambda a: stats.newcombe_paired_ci(stats.PairedTable(a["a"], a["b"], a["c"], a["d"]))[1].upper,
    "wilson_lower": lambda a: stats.wilson_ci(a["k"], a["n"]).lower,
    "wilson_upper": lambda a: stats.wilson_ci(a["k"], a["n"]).upper,
    "by_factor": lambda a: stats.by_adjustment_factor(a["m"]),
    "regression_slope": lambda a: stats.linear_regression(a["xs"], a["ys"])[0],
    "regression_r": lambda a: stats.linear_regression(a["xs"], a["ys"])[2],
    "regression_p": lambda a: stats.linear_regression(a["xs"], a["ys"])[3],
    "sign_test": lambda a: stats.sign_test(a["n_positive"], a["n_negative"]),
    "faithfulness_bound": lambda a: __import__("notekg.epistemics", fromlist=["faithfulness_bound"]).faithfulness_bound(a["f_np"]),
}


def _run_reference_checks(path) -> tuple[list[dict], bool]:
    with open(path, encoding="utf-8") as fh:
        specs = json.load(fh)
    results, all_ok = [], True
    for spec in specs:
        op = _CHECK_OPS.get(spec["op"])
        if op is None:
            raise ConfigError(f"unknown reference-check op {spec['op']!r}")
        got = float(op(spec["args"]))
        expect = spec["expect"]
        if "lt" in expect:
            ok = got < expect["lt"]
        else:
            ok = abs(got - expect["value"]) <= expect["tol"]
        all_ok &= ok
        results.append({"name": spec["name"], "value": got, "pass": ok})
    return results, all_ok


def _round_floats(value, digits: int = 12):
    # Significant-figure rounding keeps the report byte-stable without
    # flattening small p-values to zero.
    if isinstance(value, float):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: _round_floats(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [_round_floats(v, digits) for v in value]
    return value


def build_reproduce_report(fixtures: Path, out_dir: Path, jobs: int = 1) -> dict:
    """Run the whole fixture pipeline and assemble the report document."""
    ns = argparse.Namespace(
        vocabulary=fixtures / "vocabulary.json",
        registries=None,
        patterns=None,
        intent_rules=None,
        templates=None,
        corpus=fixtures / "corpus",
        graphs=None,
    )
    env = _build_environment(ns)
    questions = load_questions(fixtures / "questions_v2.jsonl")
    backend = ReplayBackend(fixtures / "replay_corpus.jsonl")

    checkpoint_dir = out_dir / "checkpoints" / backend.name
    checkpoint_dir.mkdir(parents=True, exist_ok=True)
    runs, checkpoint_files = {}, {}
    for condition_id in LADDER:
        condition = CONDITIONS[condition_id]
        checkpoint = checkpoint_dir / f"{condition_id}.jsonl"
        summary = run_condition(
            condition,
            questions,
            env,
            None if condition.retrieval == "deterministic" else backend,
            checkpoint,
            jobs=jobs,
        )
        runs[condition_id] = score_run(summary.predictions, questions, version="v2")
        checkpoint_files[condition_id] = f"{backend.name}/{condition_id}.jsonl"

    doc = report(runs, REPRODUCE_COMPARISONS, checkpoint_files)
    doc["question_histogram"] = category_histogram(questions)
    checks, checks_ok = _run_reference_checks(fixtures / "reference_checks.json")
    doc["reference_checks"] = checks
    doc["reference_checks_pass"] = checks_ok
    delta = runs["C4g_oracle"].accuracy - runs["C1"].accuracy
    doc["fixture_delta"] = {
        "baseline": runs["C1"].accuracy,
        "routed": runs["C4g_oracle"].accuracy,
        "delta": delta,
        "positive": delta > 0,
    }
    return _round_floats(doc)


def render_report(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_reproduce(args) -> int:
    started = time.monotonic()
    fixtures = Path(args.fixtures)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = build_reproduce_report(fixtures, out_dir, jobs=args.jobs)
    text = render_report(doc)
    report_path = out_dir / "report.json"
    report_path.write_text(text, encoding="utf-8")
    elapsed = time.monotonic() - started

    for check in doc["reference_checks"]:
        print(f"{'PASS' if check['pass'] else 'FAIL'}  {check['name']}: {check['value']:.6g}")
    print(
        f"fixture delta: baseline {doc['fixture_delta']['baseline']:.1%} -> "
        f"routed {doc['fixture_delta']['routed']:.1%} "
        f"({'positive' if doc['fixture_delta']['positive'] else 'NOT positive'})"
    )
    print(f"report written to {report_path} in {elapsed:.1f}s")

    failed = not doc["reference_checks_pass"] or not doc["fixture_delta"]["positive"]
    if args.write_golden:
        return EXIT_VERIFY if failed else EXIT_OK

    golden_path = Path(args.golden) if args.golden else fixtures / "golden" / "report.json"
    try:
        golden = golden_path.read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"golden report {golden_path} not found", file=sys.stderr)
        return EXIT_DATA
    if text != golden:
        got_lines = text.splitlines()
        want_lines = golden.splitlines()
        diffs = [
            f"line {i + 1}: got {g!r}, want {w!r}"
            for i, (g, w) in enumerate(zip(got_lines, want_lines))
            if g != w
        ]
        if len(got_lines) != len(want_lines):
            diffs.append(f"line counts differ: {len(got_lines)} vs {len(want_lines)}")
        print("report differs from golden:", file=sys.stderr)
        for d in diffs[:20]:
            print("  " + d, file=sys.stderr)
        return EXIT_VERIFY
    print("report matches golden byte-for-byte")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_serve(args) -> int:
    try:
        import uvicorn
    except ImportError as exc:
        raise ConfigError("serving requires uvicorn (pip install notekg[serve])") from exc
    from .adjudication import create_app

    app = create_app(args.data)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def _add_env_options(parser) -> None:
    parser.add_argument("--vocabulary", required=True, help="concept lexicon JSON")
    parser.add_argument("--corpus", required=True, help="directory of patient record JSON files")
    parser.add_argument("--graphs", help="directory of pre-built graph files (skips ingestion)")
    parser.add_argument("--patterns", help="trigger inventory JSONL (default: shipped)")
    parser.add_argument("--registries", help="node/edge type registries JSON (default: shipped)")
    parser.add_argument("--intent-rules", help="intent rules JSON (default: shipped)")
    parser.add_argument("--templates", help="prompt template directory (default: shipped)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="notekg")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="extract mentions from notes and materialize patient graphs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocabulary", required=True)
    p.add_argument("--patterns")
    p.add_argument("--registries")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="run one condition over a question set")
    p.add_argument("--condition", required=True)
    p.add_argument("--questions", required=True)
    p.add_argument("--backend", default="scripted")
    p.add_argument("--out", required=True, help="checkpoint JSONL path")
    p.add_argument("--resume", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    _add_env_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score a checkpoint against gold")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--corrections")
    p.add_argument("--version", default="v2", choices=["v0", "v1", "v2"])
    p.add_argument("--exclusions")
    p.add_argument("--exclude-change", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stats", help="paired statistics over two scored runs")
    p.add_argument("--run-a", required=True)
    p.add_argument("--run-b", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="multi-run report with paired comparisons")
    p.add_argument("--scored", nargs="+", required=True, metavar="NAME=FILE")
    p.add_argument("--compare", nargs="*", default=[], metavar="A,B")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("reproduce", help="run the fixture pipeline and verify the golden report")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--out", default="reproduce_out")
    p.add_argument("--golden")
    p.add_argument("--write-golden", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("serve", help="run the adjudication review service")
    p.add_argument("--data", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
