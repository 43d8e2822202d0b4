"""Benchmark harness: data model, condition ladder, backends, runner, reports."""

from .questions import (  # noqa: F401
    Question,
    apply_corrections,
    apply_exclusions,
    category_histogram,
    load_corrections,
    load_questions,
)
from .conditions import (  # noqa: F401
    BenchEnvironment,
    Chunk,
    Condition,
    CONDITIONS,
    Document,
    Vocabulary,
    build_context,
    chunk_documents,
    dense_retrieve,
    deterministic_answer_c7,
    extract_concepts,
    load_vocabulary,
    tfidf_retrieve,
)
from .backends import (  # noqa: F401
    HttpJsonBackend,
    LlmBackend,
    ReplayBackend,
    ScriptedBackend,
    prompt_key,
)
from .runner import (  # noqa: F401
    Prediction,
    RunSummary,
    ScoredItem,
    ScoredRun,
    cross_model_section,
    leave_rater_out_table,
    paired_table,
    read_checkpoint,
    report,
    run_condition,
    score_run,
    write_scores_jsonl,
)
from .ingest import (  # noqa: F401
    PatientRecord,
    PreservationReport,
    build_graph,
    load_corpus,
    load_registries,
)
