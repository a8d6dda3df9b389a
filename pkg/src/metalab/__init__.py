"""Desk-scale laboratory for meta-learning vs union pre-training studies.

The package trains small feed-forward classifiers on synthetic Gaussian
few-shot benchmarks in two regimes (episodic meta-learning with first- or
higher-order bilevel gradients, and supervised pre-training on the union of
all classes), embeds tasks through Fisher-information diagnostics, measures
benchmark diversity, and adjudicates method comparisons with effect-size and
confidence-interval decision rules.

Module map:

- ``autodiff``: reverse-mode engine over numpy arrays with second-order
  support (gradients of gradients).
- ``nets``: parameter layouts, MLP forward pass, cross-entropy, gradient
  entry points including differentiation through inner-loop updates.
- ``rng``: the named, splittable random-stream scheme used everywhere.
- ``tasks``: synthetic Gaussian sources, benchmark unions, episode sampling.
- ``learners``: MAML / pre-training loops, adaptation, head refits,
  meta-test evaluation.
- ``task2vec``: FIM-diagonal task embeddings, cosine distances, diversity
  coefficient, distance histograms.
- ``stats``: pooled std, Cohen's d, the 1% threshold, decision rules,
  summaries.
- ``harness``: experiment configs, end-to-end comparison runs, table
  reproduction, report emission.
- ``refdata``: frozen reference statistics from large-scale comparison
  studies, used by the reproduction machinery.
"""

from metalab.nets import (
    Batch,
    NetSpec,
    ParamVector,
    cross_entropy,
    finite_diff_grad,
    forward,
    grad,
    grad_through_updates,
)
from metalab.tasks import (
    Benchmark,
    FewShotTask,
    Source,
    benchmark_from_sources,
    ground_truth_divergence,
    make_source,
    sample_task,
    translate_source,
    union,
    union_all,
    union_dataset,
)
from metalab.learners import (
    EvalResult,
    Model,
    TrainConfig,
    TrainResult,
    adapt,
    episodic_vs_union_loss,
    fit_head,
    meta_test,
    model_l2_norm,
    train_maml,
    train_pt,
)
from metalab.task2vec import (
    DistanceHistogram,
    DiversityReport,
    Probe,
    TaskEmbedding,
    build_probe,
    cosine_distance,
    distance_histogram,
    diversity_coefficient,
    embed_task,
)
from metalab.stats import (
    Decision,
    GroupSummary,
    SampleStats,
    SummaryReport,
    cohens_d,
    confidence_interval,
    decide_ci,
    decide_es,
    decide_from_es,
    delta_threshold,
    pooled_std,
    summarize,
    summarize_cells,
)
from metalab.harness import (
    BenchmarkSpec,
    ExperimentConfig,
    RunRecord,
    SourceSpec,
    emit_report,
    high_diversity_preset,
    low_diversity_preset,
    reproduce_decisions,
    run_comparison,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "Batch",
    "Benchmark",
    "BenchmarkSpec",
    "Decision",
    "DistanceHistogram",
    "DiversityReport",
    "EvalResult",
    "ExperimentConfig",
    "FewShotTask",
    "GroupSummary",
    "Model",
    "NetSpec",
    "ParamVector",
    "Probe",
    "RunRecord",
    "SampleStats",
    "Source",
    "SourceSpec",
    "SummaryReport",
    "TaskEmbedding",
    "TrainConfig",
    "TrainResult",
    "adapt",
    "benchmark_from_sources",
    "build_probe",
    "cohens_d",
    "confidence_interval",
    "cosine_distance",
    "cross_entropy",
    "decide_ci",
    "decide_es",
    "decide_from_es",
    "delta_threshold",
    "distance_histogram",
    "diversity_coefficient",
    "emit_report",
    "embed_task",
    "episodic_vs_union_loss",
    "finite_diff_grad",
    "fit_head",
    "forward",
    "grad",
    "grad_through_updates",
    "ground_truth_divergence",
    "high_diversity_preset",
    "low_diversity_preset",
    "make_source",
    "meta_test",
    "model_l2_norm",
    "pooled_std",
    "reproduce_decisions",
    "run_comparison",
    "run_suite",
    "sample_task",
    "summarize",
    "summarize_cells",
    "train_maml",
    "train_pt",
    "translate_source",
    "union",
    "union_all",
    "union_dataset",
]
