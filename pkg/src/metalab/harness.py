"""Experiment orchestration: configs, comparisons, persistence, reports.

One experiment compares union pre-training against episodic meta-learning
on a synthetic Gaussian benchmark: both models start from the same seeded
initialization, both are evaluated on the identical meta-test episode
list, the benchmark's diversity is measured with a frozen probe, and the
three decision rules (effect size, CI overlap, CI overlap with a 1%
allowance) adjudicate each adaptation-depth variant. `run_comparison`
executes that pipeline and persists a `RunRecord`; `emit_report` renders
any number of records into decision tables, grouped summaries, histogram
files, and a plain-text digest; `reproduce_decisions` replays the
effect-size rule over externally reported tables and flags mismatches.

Configuration document (YAML) schema, with defaults:

    name: lowdiv-0         # required; also names the run directory
    regime: all            # report grouping label, e.g. lowdiv / highdiv
    seed: 0                # root seed; the specific seeds below default to it
    init_seed: null        # model init + training episode draws
    task_seed: null        # meta-test episode draws
    diversity_seed: null   # probe training + diversity episode draws
    maml_order: fo         # fo | ho (first- vs higher-order outer gradient)
    hidden_dims: [32]      # shared body architecture for both methods
    n_way: 5
    k_shot: 5
    q_query: 15
    meta_batch: 300        # meta-test episodes
    eval_steps: [5, 10]    # adaptation depths evaluated for the meta-learner
    diversity_tasks: 150   # episodes embedded for the coefficient; 0 disables
    probe_method: pt       # pt | random
    probe_hidden_dims: [32]
    histogram_tasks: 0     # source-pure episodes for the histogram; 0 disables
    histogram_bins: 20
    pt: {}                 # TrainConfig overrides for the pre-training leg
    maml: {}               # TrainConfig overrides for the meta-learning leg
    benchmark:
      seed: 0
      sources:
        - num_classes: 40  # required
          input_dim: 8     # required
          mean_scale: 2.0  # required
          class_spread: 1.0  # required
          seed: null       # default: benchmark seed * 1000 + source index
          offset: null     # optional translation added to every class mean
          name: null       # default: gauss<seed>x<num_classes>

`pt:` / `maml:` may override any TrainConfig field except method, seed,
hidden_dims, and the episode shape (those are pinned by the experiment so
the two legs stay comparable).

Persistence: one directory per run holding config.yaml, record.json (the
authority; every reported number traces back to it), decisions.csv, and
accuracies.csv. Records are append-only: saving over an existing
record.json raises. Re-running the same config reproduces record.json
byte-for-byte except the wall_clock_seconds field.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from metalab import stats
from metalab.learners import (
    EvalResult,
    Model,
    TrainConfig,
    TrainResult,
    meta_test,
    model_l2_norm,
    train_maml,
    train_pt,
)
from metalab.stats import Decision, SampleStats, decide_ci, decide_es, sig6
from metalab.task2vec import (
    DistanceHistogram,
    DiversityReport,
    Probe,
    build_probe,
    distance_histogram,
    diversity_coefficient,
)
from metalab.tasks import (
    Benchmark,
    Source,
    benchmark_from_sources,
    make_source,
    sample_task,
    translate_source,
)

__all__ = [
    "HarnessError",
    "SourceSpec",
    "BenchmarkSpec",
    "ExperimentConfig",
    "RunRecord",
    "ReproducedDecision",
    "run_comparison",
    "run_suite",
    "reproduce_decisions",
    "write_reproduction_table",
    "emit_report",
    "low_diversity_preset",
    "high_diversity_preset",
]

_MAML_ORDERS = ("fo", "ho")
_RESERVED_OVERRIDES = ("method", "seed", "hidden_dims", "n_way", "k_shot", "q_query")


class HarnessError(RuntimeError):
    """A pipeline stage failed; `.stage` names it for the exit message."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r}: {message}")
        self.stage = stage
        self.message = message


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceSpec:
    """Recipe for one Gaussian source (serializable, seed included)."""

    num_classes: int
    input_dim: int
    mean_scale: float
    class_spread: float
    seed: int | None = None
    offset: tuple[float, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        if self.offset is not None:
            object.__setattr__(self, "offset", tuple(float(v) for v in self.offset))
            if len(self.offset) != self.input_dim:
                raise ValueError("offset length must equal input_dim")

    def build(self, default_seed: int) -> Source:
        seed = self.seed if self.seed is not None else default_seed
        src = make_source(seed, self.num_classes, self.input_dim,
                          self.mean_scale, self.class_spread, name=self.name)
        if self.offset is not None:
            src = translate_source(src, np.asarray(self.offset), name=src.name)
        return src

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "input_dim": self.input_dim,
            "mean_scale": self.mean_scale,
            "class_spread": self.class_spread,
            "seed": self.seed,
            "offset": list(self.offset) if self.offset is not None else None,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SourceSpec":
        _check_keys(d, {"num_classes", "input_dim", "mean_scale", "class_spread",
                        "seed", "offset", "name"}, "benchmark source")
        return cls(
            num_classes=int(d["num_classes"]),
            input_dim=int(d["input_dim"]),
            mean_scale=float(d["mean_scale"]),
            class_spread=float(d["class_spread"]),
            seed=None if d.get("seed") is None else int(d["seed"]),
            offset=None if d.get("offset") is None else tuple(d["offset"]),
            name=d.get("name"),
        )


@dataclass(frozen=True)
class BenchmarkSpec:
    """Recipe for a benchmark: sources plus a seed for unseeded ones."""

    sources: tuple[SourceSpec, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise ValueError("a benchmark spec needs at least one source")

    def build(self) -> Benchmark:
        built = [spec.build(self.seed * 1000 + i)
                 for i, spec in enumerate(self.sources)]
        return benchmark_from_sources(built)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "sources": [s.to_dict() for s in self.sources]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BenchmarkSpec":
        _check_keys(d, {"seed", "sources"}, "benchmark")
        return cls(sources=tuple(SourceSpec.from_dict(s) for s in d["sources"]),
                   seed=int(d.get("seed", 0)))


def _check_keys(d: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one comparison run needs; round-trips through YAML.

    The three specific seeds default to the root `seed`; distinct RNG
    streams keep init, training episodes, meta-test episodes, and
    diversity episodes independent even when all three share one value.
    """

    name: str
    benchmark: BenchmarkSpec
    regime: str = "all"
    seed: int = 0
    init_seed: int | None = None
    task_seed: int | None = None
    diversity_seed: int | None = None
    maml_order: str = "fo"
    hidden_dims: tuple[int, ...] = (32,)
    n_way: int = 5
    k_shot: int = 5
    q_query: int = 15
    meta_batch: int = 300
    eval_steps: tuple[int, ...] = (5, 10)
    diversity_tasks: int = 150
    probe_method: str = "pt"
    probe_hidden_dims: tuple[int, ...] = (32,)
    histogram_tasks: int = 0
    histogram_bins: int = 20
    pt: Mapping = field(default_factory=dict)
    maml: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if not self.name:
            raise ValueError("config needs a name")
        if self.maml_order not in _MAML_ORDERS:
            raise ValueError(f"maml_order must be one of {_MAML_ORDERS}")
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "probe_hidden_dims",
                           tuple(int(h) for h in self.probe_hidden_dims))
        object.__setattr__(self, "eval_steps", tuple(int(s) for s in self.eval_steps))
        if not self.eval_steps:
            raise ValueError("eval_steps must be nonempty")
        if any(s < 0 for s in self.eval_steps):
            raise ValueError("eval_steps must be nonnegative")
        if len(set(self.eval_steps)) != len(self.eval_steps):
            raise ValueError("eval_steps must be distinct")
        if self.meta_batch < 2:
            raise ValueError("meta_batch must be at least 2 (CIs need a spread)")
        for leg, overrides in (("pt", self.pt), ("maml", self.maml)):
            clash = set(overrides) & set(_RESERVED_OVERRIDES)
            if clash:
                raise ValueError(
                    f"{leg} overrides may not set {sorted(clash)}; "
                    "those fields are pinned by the experiment config")
        for attr in ("init_seed", "task_seed", "diversity_seed"):
            if getattr(self, attr) is None:
                object.__setattr__(self, attr, int(self.seed))

    def pt_config(self) -> TrainConfig:
        return TrainConfig(method="pt", seed=self.init_seed,
                           hidden_dims=self.hidden_dims, n_way=self.n_way,
                           k_shot=self.k_shot, q_query=self.q_query, **self.pt)

    def maml_config(self) -> TrainConfig:
        return TrainConfig(method=f"{self.maml_order}_maml", seed=self.init_seed,
                           hidden_dims=self.hidden_dims, n_way=self.n_way,
                           k_shot=self.k_shot, q_query=self.q_query, **self.maml)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "regime": self.regime,
            "seed": self.seed,
            "init_seed": self.init_seed,
            "task_seed": self.task_seed,
            "diversity_seed": self.diversity_seed,
            "maml_order": self.maml_order,
            "hidden_dims": list(self.hidden_dims),
            "n_way": self.n_way,
            "k_shot": self.k_shot,
            "q_query": self.q_query,
            "meta_batch": self.meta_batch,
            "eval_steps": list(self.eval_steps),
            "diversity_tasks": self.diversity_tasks,
            "probe_method": self.probe_method,
            "probe_hidden_dims": list(self.probe_hidden_dims),
            "histogram_tasks": self.histogram_tasks,
            "histogram_bins": self.histogram_bins,
            "pt": {k: self.pt[k] for k in sorted(self.pt)},
            "maml": {k: self.maml[k] for k in sorted(self.maml)},
            "benchmark": self.benchmark.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        allowed = {"name", "regime", "seed", "init_seed", "task_seed",
                   "diversity_seed", "maml_order", "hidden_dims", "n_way",
                   "k_shot", "q_query", "meta_batch", "eval_steps",
                   "diversity_tasks", "probe_method", "probe_hidden_dims",
                   "histogram_tasks", "histogram_bins", "pt", "maml", "benchmark"}
        _check_keys(d, allowed, "config")
        if "name" not in d or "benchmark" not in d:
            raise ValueError("config needs at least 'name' and 'benchmark'")
        kwargs = dict(d)
        kwargs["benchmark"] = BenchmarkSpec.from_dict(d["benchmark"])
        for key in ("hidden_dims", "probe_hidden_dims", "eval_steps"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        for key in ("pt", "maml"):
            if kwargs.get(key) is None:
                kwargs[key] = {}
        return cls(**kwargs)

    @classmethod
    def from_yaml(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
        if not isinstance(doc, Mapping):
            raise ValueError(f"{path}: config document must be a mapping")
        return cls.from_dict(doc)

    def to_yaml(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


# ---------------------------------------------------------------------------
# run records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunRecord:
    """Everything one comparison produced; the authority for reports.

    `evals` is keyed "pt" plus "maml<steps>" per evaluated adaptation
    depth; `decision_ids` parallels `decisions` with "maml<steps>/<rule>"
    labels. All evaluations share the episode list in `task_ids`.
    """

    config: ExperimentConfig
    status: str
    task_ids: tuple[str, ...]
    evals: Mapping[str, EvalResult]
    loss_curves: Mapping[str, tuple[float, ...]]
    epochs_run: Mapping[str, int]
    converged: Mapping[str, bool]
    l2_norms: Mapping[str, float]
    diversity: DiversityReport | None
    histogram: DistanceHistogram | None
    decisions: tuple[Decision, ...]
    decision_ids: tuple[str, ...]
    wall_clock_seconds: float

    def __post_init__(self):
        if len(self.decisions) != len(self.decision_ids):
            raise ValueError("decision_ids must parallel decisions")
        for key in self.evals:
            if key != "pt" and not key.startswith("maml"):
                raise ValueError(f"unexpected eval key {key!r}")

    def eval_labels(self) -> tuple[str, ...]:
        return ("pt",) + tuple(f"maml{s}" for s in self.config.eval_steps)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "status": self.status,
            "task_ids": list(self.task_ids),
            "evals": {
                k: {
                    "per_task_accuracy": list(v.per_task_accuracy),
                    "mean": v.mean,
                    "ci95_halfwidth": v.ci95_halfwidth,
                    "meta_batch": v.meta_batch,
                }
                for k, v in sorted(self.evals.items())
            },
            "loss_curves": {k: list(v) for k, v in sorted(self.loss_curves.items())},
            "epochs_run": dict(sorted(self.epochs_run.items())),
            "converged": dict(sorted(self.converged.items())),
            "l2_norms": dict(sorted(self.l2_norms.items())),
            "diversity": None if self.diversity is None else {
                "coefficient": self.diversity.coefficient,
                "ci95_halfwidth": self.diversity.ci95_halfwidth,
                "num_tasks": self.diversity.num_tasks,
                "num_pairs": self.diversity.num_pairs,
                "probe_provenance": self.diversity.probe_provenance,
            },
            "histogram": None if self.histogram is None else {
                "bin_edges": list(self.histogram.bin_edges),
                "counts": {k: [int(c) for c in v]
                           for k, v in sorted(self.histogram.counts.items())},
                "partition_means": dict(sorted(self.histogram.partition_means.items())),
                "distances": {k: list(map(float, v))
                              for k, v in sorted(self.histogram.distances.items())},
                "num_tasks": self.histogram.num_tasks,
                "num_pairs": self.histogram.num_pairs,
            },
            "decisions": [
                {
                    "verdict": d.verdict,
                    "effect_size": d.effect_size,
                    "delta": d.delta,
                    "maml_variant": d.maml_variant,
                    "rule": d.rule,
                }
                for d in self.decisions
            ],
            "decision_ids": list(self.decision_ids),
            "wall_clock_seconds": self.wall_clock_seconds,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RunRecord":
        return cls(
            config=ExperimentConfig.from_dict(d["config"]),
            status=d["status"],
            task_ids=tuple(d["task_ids"]),
            evals={
                k: EvalResult(per_task_accuracy=tuple(v["per_task_accuracy"]),
                              mean=v["mean"], ci95_halfwidth=v["ci95_halfwidth"],
                              meta_batch=v["meta_batch"])
                for k, v in d["evals"].items()
            },
            loss_curves={k: tuple(v) for k, v in d["loss_curves"].items()},
            epochs_run=dict(d["epochs_run"]),
            converged=dict(d["converged"]),
            l2_norms=dict(d["l2_norms"]),
            diversity=None if d["diversity"] is None else DiversityReport(
                coefficient=d["diversity"]["coefficient"],
                ci95_halfwidth=d["diversity"]["ci95_halfwidth"],
                num_tasks=d["diversity"]["num_tasks"],
                num_pairs=d["diversity"]["num_pairs"],
                probe_provenance=d["diversity"]["probe_provenance"]),
            histogram=None if d["histogram"] is None else DistanceHistogram(
                bin_edges=np.asarray(d["histogram"]["bin_edges"]),
                counts={k: np.asarray(v, dtype=np.int64)
                        for k, v in d["histogram"]["counts"].items()},
                partition_means=dict(d["histogram"]["partition_means"]),
                distances={k: np.asarray(v)
                           for k, v in d["histogram"]["distances"].items()},
                num_tasks=d["histogram"]["num_tasks"],
                num_pairs=d["histogram"]["num_pairs"]),
            decisions=tuple(
                Decision(verdict=x["verdict"], effect_size=x["effect_size"],
                         delta=x["delta"], maml_variant=x["maml_variant"],
                         rule=x["rule"])
                for x in d["decisions"]
            ),
            decision_ids=tuple(d["decision_ids"]),
            wall_clock_seconds=d["wall_clock_seconds"],
        )

    def save(self, run_dir: str | Path) -> Path:
        """Persist config.yaml, record.json, and the per-run tables.

        Records are append-only: an existing record.json is never
        overwritten.
        """
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        record_path = run_dir / "record.json"
        if record_path.exists():
            raise FileExistsError(f"{record_path} already written (append-only)")
        self.config.to_yaml(run_dir / "config.yaml")
        stats.write_decision_table(
            run_dir / "decisions.csv",
            [(f"{self.config.name}/{label}", d.effect_size, d.delta, d.verdict)
             for label, d in zip(self.decision_ids, self.decisions)])
        with open(run_dir / "accuracies.csv", "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "mean", "ci95_halfwidth", "meta_batch"])
            for label in self.eval_labels():
                ev = self.evals[label]
                writer.writerow([label, sig6(ev.mean), sig6(ev.ci95_halfwidth),
                                 ev.meta_batch])
        with open(record_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
        return record_path

    @classmethod
    def load(cls, run_dir: str | Path) -> "RunRecord":
        with open(Path(run_dir) / "record.json", "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# the comparison pipeline
# ---------------------------------------------------------------------------


def _variant_label(steps: int) -> str:
    return f"maml{steps}"


def run_comparison(config: ExperimentConfig,
                   out_dir: str | Path | None = None) -> RunRecord:
    """Train both methods, evaluate on shared episodes, decide, persist.

    Stages run in order: build-benchmark, train-pt, train-maml, meta-test,
    diversity, decide, persist. A failure raises HarnessError naming the
    stage; when `out_dir` is given, a failed.json marker with the stage
    name is left there and partial artifacts are retained.
    """
    t0 = time.perf_counter()
    run_dir = None
    if out_dir is not None:
        run_dir = Path(out_dir)
        run_dir.mkdir(parents=True, exist_ok=True)

    def fail(stage: str, exc: Exception) -> HarnessError:
        if run_dir is not None:
            marker = {"status": "failed", "stage": stage, "error": str(exc)}
            with open(run_dir / "failed.json", "w", encoding="utf-8") as fh:
                json.dump(marker, fh, sort_keys=True, indent=1)
                fh.write("\n")
        return HarnessError(stage, str(exc))

    stage = "build-benchmark"
    try:
        benchmark = config.benchmark.build()
        if len(benchmark.split_pool("test")) < config.n_way:
            raise ValueError(
                f"test pool has {len(benchmark.split_pool('test'))} classes, "
                f"fewer than n_way={config.n_way}")
    except Exception as exc:
        raise fail(stage, exc) from exc

    stage = "train-pt"
    try:
        pt_result = train_pt(benchmark, config.pt_config())
    except Exception as exc:
        raise fail(stage, exc) from exc

    stage = "train-maml"
    try:
        maml_cfg = config.maml_config()
        maml_result = train_maml(benchmark, maml_cfg)
    except Exception as exc:
        raise fail(stage, exc) from exc

    stage = "meta-test"
    try:
        tasks = [sample_task(benchmark, "test", config.n_way, config.k_shot,
                             config.q_query, (config.task_seed, i))
                 for i in range(config.meta_batch)]
        evals: dict[str, EvalResult] = {
            "pt": meta_test(pt_result.model, "pt_head_refit", tasks)
        }
        for steps in config.eval_steps:
            evals[_variant_label(steps)] = meta_test(
                maml_result.model, "maml_adapt", tasks,
                steps=steps, lr=maml_cfg.inner_lr)
    except Exception as exc:
        raise fail(stage, exc) from exc

    stage = "diversity"
    diversity = None
    histogram = None
    try:
        if config.diversity_tasks >= 2 or config.histogram_tasks >= 2:
            probe_cfg = TrainConfig(method="pt", seed=config.diversity_seed,
                                    hidden_dims=config.probe_hidden_dims)
            probe = build_probe(benchmark, config.diversity_seed,
                                config=probe_cfg, method=config.probe_method)
            if config.diversity_tasks >= 2:
                diversity = diversity_coefficient(
                    probe, benchmark, config.diversity_tasks,
                    config.diversity_seed, n_way=config.n_way,
                    k_shot=config.k_shot, q_query=config.q_query)
            if config.histogram_tasks >= 2:
                histogram = distance_histogram(
                    probe, benchmark, config.histogram_tasks,
                    config.histogram_bins, config.diversity_seed,
                    n_way=config.n_way, k_shot=config.k_shot,
                    q_query=config.q_query)
    except Exception as exc:
        raise fail(stage, exc) from exc

    stage = "decide"
    try:
        pt_accs = evals["pt"].per_task_accuracy
        decisions: list[Decision] = []
        decision_ids: list[str] = []
        for steps in config.eval_steps:
            label = _variant_label(steps)
            variant = label if label in ("maml5", "maml10") else "other"
            maml_accs = evals[label].per_task_accuracy
            for rule_name, decision in (
                ("es", decide_es(pt_accs, maml_accs, maml_variant=variant)),
                ("ci", decide_ci(pt_accs, maml_accs, overlap_threshold=0.0,
                                 maml_variant=variant)),
                ("ci_1pct", decide_ci(pt_accs, maml_accs, overlap_threshold=0.01,
                                      maml_variant=variant)),
            ):
                decisions.append(decision)
                decision_ids.append(f"{label}/{rule_name}")
    except Exception as exc:
        raise fail(stage, exc) from exc

    record = RunRecord(
        config=config,
        status="ok",
        task_ids=tuple(t.task_id for t in tasks),
        evals=evals,
        loss_curves={"pt": pt_result.loss_curve, "maml": maml_result.loss_curve},
        epochs_run={"pt": pt_result.epochs_run, "maml": maml_result.epochs_run},
        converged={"pt": pt_result.converged, "maml": maml_result.converged},
        l2_norms={"pt": model_l2_norm(pt_result.model),
                  "maml": model_l2_norm(maml_result.model)},
        diversity=diversity,
        histogram=histogram,
        decisions=tuple(decisions),
        decision_ids=tuple(decision_ids),
        wall_clock_seconds=time.perf_counter() - t0,
    )

    stage = "persist"
    try:
        if run_dir is not None:
            record.save(run_dir)
    except Exception as exc:
        raise fail(stage, exc) from exc
    return record


def run_suite(configs: Sequence[ExperimentConfig],
              out_root: str | Path | None = None) -> list[RunRecord]:
    """Run independent comparisons sequentially, one directory per run.

    Runs share nothing, so a caller may parallelize across processes; the
    per-run directories (named by config) never contend.
    """
    names = [c.name for c in configs]
    if len(set(names)) != len(names):
        raise ValueError("config names must be unique within a suite")
    records = []
    for config in configs:
        run_dir = None if out_root is None else Path(out_root) / config.name
        records.append(run_comparison(config, run_dir))
    return records


# ---------------------------------------------------------------------------
# replaying reported decision tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReproducedDecision:
    """One reported effect-size cell replayed through the decision rule.

    `match` is None when no threshold row exists for the cell (flagged
    unverifiable rather than guessed).
    """

    group: str
    dataset: str
    variant: str
    es: float
    reported_verdict: str
    delta: float | None
    computed_verdict: str | None
    match: bool | None


# The threshold table publishes one high-diversity batch under a plain key.
_DELTA_GROUP_ALIASES = {"highdiv_all": "highdiv"}


def reproduce_decisions(es_table: str | Path,
                        delta_table: str | Path) -> tuple[ReproducedDecision, ...]:
    """Replay decide_from_es over a reported (group,dataset,variant) table.

    Both inputs are UTF-8 CSVs: the effect-size table needs columns
    group,dataset,variant,es,verdict; the threshold table needs
    group,dataset,variant,delta. Rows join on the key triple (with the
    published group aliases); an unmatched effect-size row comes back with
    match=None.
    """
    with open(es_table, newline="", encoding="utf-8") as fh:
        es_rows = list(csv.DictReader(fh))
    with open(delta_table, newline="", encoding="utf-8") as fh:
        delta_rows = list(csv.DictReader(fh))
    deltas = {(r["group"], r["dataset"], r["variant"]): float(r["delta"])
              for r in delta_rows}
    out = []
    for r in es_rows:
        key = (r["group"], r["dataset"], r["variant"])
        alias = (_DELTA_GROUP_ALIASES.get(r["group"], r["group"]),
                 r["dataset"], r["variant"])
        delta = deltas.get(key, deltas.get(alias))
        es = float(r["es"])
        if delta is None:
            computed, match = None, None
        else:
            computed = stats.decide_from_es(es, delta)
            match = computed == r["verdict"]
        out.append(ReproducedDecision(
            group=r["group"], dataset=r["dataset"], variant=r["variant"],
            es=es, reported_verdict=r["verdict"], delta=delta,
            computed_verdict=computed, match=match))
    return tuple(out)


def write_reproduction_table(path: str | Path,
                             rows: Iterable[ReproducedDecision]) -> None:
    """Emit replayed decisions as UTF-8 CSV; unverifiable cells stay blank."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "dataset", "variant", "es", "delta",
                         "computed_verdict", "reported_verdict", "match"])
        for r in rows:
            writer.writerow([
                r.group, r.dataset, r.variant, sig6(r.es),
                "" if r.delta is None else sig6(r.delta),
                "" if r.computed_verdict is None else r.computed_verdict,
                r.reported_verdict,
                "" if r.match is None else str(r.match).lower(),
            ])


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------


def _safe_name(text: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in text)


def _h1_pool(decisions: Sequence[Decision]) -> list[float]:
    return [d.effect_size for d in decisions
            if d.verdict in (stats.H1_PT, stats.H1_MAML)]


def _mean_ci(values: Sequence[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, None
    half = float(1.96 * np.std(values, ddof=1) / math.sqrt(len(values)))
    return mean, half


def _fmt(x: float | None, na: str = "no-data") -> str:
    return na if x is None else sig6(x)


def emit_report(records: Sequence[RunRecord], out_dir: str | Path) -> Path:
    """Render records into tables, summaries, histograms, and a digest.

    Outputs, all deterministic given the records: decisions.csv (every
    decision across runs), per-run decisions_<name>.csv, accuracies.csv,
    diversity.csv, norms.csv, summary.csv (effect-size rule grouped by
    "<regime>_<maml order>", with pooled-H1 means and CIs), per-partition
    histogram_<run>_<partition>.csv files (bin_center,count), and
    digest.txt. Numbers are rendered from record fields only.
    """
    if not records:
        raise ValueError("emit_report needs at least one record")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    all_rows = []
    for rec in records:
        rows = [(f"{rec.config.name}/{label}", d.effect_size, d.delta, d.verdict)
                for label, d in zip(rec.decision_ids, rec.decisions)]
        all_rows.extend(rows)
        stats.write_decision_table(
            out_dir / f"decisions_{_safe_name(rec.config.name)}.csv", rows)
    stats.write_decision_table(out_dir / "decisions.csv", all_rows)

    with open(out_dir / "accuracies.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "method", "mean", "ci95_halfwidth", "meta_batch"])
        for rec in records:
            for label in rec.eval_labels():
                ev = rec.evals[label]
                writer.writerow([rec.config.name, label, sig6(ev.mean),
                                 sig6(ev.ci95_halfwidth), ev.meta_batch])

    with open(out_dir / "diversity.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "coefficient", "ci95_halfwidth",
                         "num_tasks", "num_pairs", "probe"])
        for rec in records:
            if rec.diversity is None:
                continue
            dv = rec.diversity
            writer.writerow([rec.config.name, sig6(dv.coefficient),
                             sig6(dv.ci95_halfwidth), dv.num_tasks,
                             dv.num_pairs, dv.probe_provenance])

    with open(out_dir / "norms.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "method", "l2_norm"])
        for rec in records:
            for method in sorted(rec.l2_norms):
                writer.writerow([rec.config.name, method,
                                 sig6(rec.l2_norms[method])])

    for rec in records:
        if rec.histogram is None:
            continue
        edges = np.asarray(rec.histogram.bin_edges)
        centers = (edges[:-1] + edges[1:]) / 2.0
        for part in sorted(rec.histogram.counts):
            fname = (f"histogram_{_safe_name(rec.config.name)}_"
                     f"{_safe_name(part)}.csv")
            with open(out_dir / fname, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["bin_center", "count"])
                for c, n in zip(centers, rec.histogram.counts[part]):
                    writer.writerow([sig6(c), int(n)])

    # effect-size-rule decisions grouped by diversity regime and maml order
    es_decisions: list[Decision] = []
    group_labels: list[str] = []
    for rec in records:
        group = f"{rec.config.regime}_{rec.config.maml_order}"
        for d in rec.decisions:
            if d.rule == "es":
                es_decisions.append(d)
                group_labels.append(group)
    summary = stats.summarize(es_decisions, group_labels)
    grouped: dict[str, list[Decision]] = {}
    for g, d in zip(group_labels, es_decisions):
        grouped.setdefault(g, []).append(d)

    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "n", "h0_count", "h1_pt_count", "h1_maml_count",
                         "h0_mean", "h1_pt_mean", "h1_maml_mean",
                         "h1_pooled_mean", "h1_pooled_ci95"])
        for gs in summary.groups:
            pooled_mean, pooled_ci = _mean_ci(_h1_pool(grouped[gs.group]))
            writer.writerow([
                gs.group, gs.total,
                gs.counts[stats.H0], gs.counts[stats.H1_PT], gs.counts[stats.H1_MAML],
                _fmt(gs.bucket_means[stats.H0], ""),
                _fmt(gs.bucket_means[stats.H1_PT], ""),
                _fmt(gs.bucket_means[stats.H1_MAML], ""),
                _fmt(pooled_mean, ""), _fmt(pooled_ci, ""),
            ])

    digest_lines = _digest(records, summary, grouped)
    with open(out_dir / "digest.txt", "w", encoding="utf-8") as fh:
        fh.write("\n".join(digest_lines) + "\n")
    return out_dir


def _digest(records: Sequence[RunRecord],
            summary: stats.SummaryReport,
            grouped: Mapping[str, list[Decision]]) -> list[str]:
    lines = ["comparison digest", "=" * 17, f"runs: {len(records)}", ""]
    for rec in records:
        cfg = rec.config
        lines.append(f"[{cfg.name}] regime={cfg.regime} maml_order={cfg.maml_order} "
                     f"seed={cfg.seed}")
        lines.append(f"  status: {rec.status}; wall clock "
                     f"{rec.wall_clock_seconds:.1f} s")
        for label in rec.eval_labels():
            ev = rec.evals[label]
            lines.append(f"  {label}: accuracy {ev.mean:.4f} +/- "
                         f"{ev.ci95_halfwidth:.4f} over {ev.meta_batch} episodes")
        lines.append(f"  l2 norms: pt {rec.l2_norms['pt']:.3f}, "
                     f"maml {rec.l2_norms['maml']:.3f}")
        for method in ("pt", "maml"):
            state = "converged" if rec.converged[method] else "epoch cap"
            lines.append(f"  {method} training: {rec.epochs_run[method]} epochs "
                         f"({state})")
        if rec.diversity is not None:
            dv = rec.diversity
            lines.append(f"  diversity: {dv.coefficient:.4f} +/- "
                         f"{dv.ci95_halfwidth:.4f} ({dv.num_tasks} tasks, "
                         f"{dv.num_pairs} pairs)")
        if rec.histogram is not None:
            means = ", ".join(f"{k} {v:.4f}" for k, v in
                              sorted(rec.histogram.partition_means.items()))
            lines.append(f"  histogram partition means: {means}")
        for label, d in zip(rec.decision_ids, rec.decisions):
            lines.append(f"  decision {label}: es {sig6(d.effect_size)} "
                         f"delta {sig6(d.delta)} -> {d.verdict}")
        lines.append("")
    lines.append("grouped summary (effect-size rule)")
    lines.append("-" * 34)
    for gs in summary.groups:
        lines.append(f"{gs.group}: n={gs.total} "
                     f"H0={gs.counts[stats.H0]} "
                     f"H1_pt={gs.counts[stats.H1_PT]} "
                     f"H1_maml={gs.counts[stats.H1_MAML]}")
        lines.append(f"  bucket means: H0 {_fmt(gs.bucket_means[stats.H0])}, "
                     f"H1_pt {_fmt(gs.bucket_means[stats.H1_PT])}, "
                     f"H1_maml {_fmt(gs.bucket_means[stats.H1_MAML])}")
        pooled_mean, pooled_ci = _mean_ci(_h1_pool(grouped[gs.group]))
        ci_text = "n/a" if pooled_ci is None else sig6(pooled_ci)
        lines.append(f"  mean H1 effect size: {_fmt(pooled_mean)} "
                     f"+/- {ci_text} (95% CI)")
    return lines


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------


def low_diversity_preset(seed: int = 0, name: str | None = None,
                         **overrides) -> ExperimentConfig:
    """One Gaussian cloud: every episode reuses the same tight structure.

    Union pre-training sees all the structure there is, so its converged
    per-episode head refit tends to beat few-step adaptation, the
    low-diversity regime's signature. Keyword overrides are applied on top
    (e.g. maml_order="ho").
    """
    base = dict(
        name=name or f"lowdiv-{seed}",
        regime="lowdiv",
        seed=seed,
        benchmark=BenchmarkSpec(
            sources=(SourceSpec(num_classes=40, input_dim=8, mean_scale=2.0,
                                class_spread=1.0, name="cloud"),),
            seed=seed),
        maml_order="fo",
        hidden_dims=(32,),
        meta_batch=300,
        eval_steps=(5, 10),
        diversity_tasks=120,
        pt={"max_epochs": 400},
        maml={"max_epochs": 150},
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def high_diversity_preset(seed: int = 0, name: str | None = None,
                          **overrides) -> ExperimentConfig:
    """Union of translated clouds: episodes differ in where and how they sit.

    The shared structure across episodes is thin, so a meta-learned
    initialization that adapts every parameter per episode tends to match
    or beat the frozen-feature baseline. Keyword overrides as above.
    """
    num_sources = 4
    dim = 8
    specs = []
    for i in range(num_sources):
        offset = [0.0] * dim
        offset[i % dim] = 6.0
        specs.append(SourceSpec(num_classes=25, input_dim=dim, mean_scale=1.5,
                                class_spread=1.0, offset=tuple(offset),
                                name=f"cloud{i}"))
    base = dict(
        name=name or f"highdiv-{seed}",
        regime="highdiv",
        seed=seed,
        benchmark=BenchmarkSpec(sources=tuple(specs), seed=seed),
        maml_order="fo",
        hidden_dims=(8,),
        meta_batch=300,
        eval_steps=(5, 10),
        diversity_tasks=120,
        pt={"max_epochs": 400},
        # 16 episodes per outer step steadies the meta gradient; the higher
        # inner rate lets few-step adaptation finish re-orienting the narrow
        # body per episode. Both matter for the meta-learner to pull ahead.
        maml={"max_epochs": 400, "inner_lr": 0.1, "meta_batch": 16},
    )
    base.update(overrides)
    return ExperimentConfig(**base)
