"""One end-to-end comparison run, persisted and rendered into a report.

`run_comparison` stitches everything together: build the benchmark, train
both contenders, meta-test them on shared episodes at several adaptation
depths, adjudicate each depth under three decision rules, measure the
benchmark's diversity, and persist an append-only run directory. The same
pipeline is scripted here exactly as the CLI drives it (`metalab run`,
`metalab report`); the two diversity regimes used across seeds come from
`low_diversity_preset` / `high_diversity_preset`.
"""

import tempfile
from pathlib import Path

from metalab.harness import (
    BenchmarkSpec,
    ExperimentConfig,
    SourceSpec,
    emit_report,
    run_comparison,
)

config = ExperimentConfig(
    name="demo",
    benchmark=BenchmarkSpec(
        sources=(SourceSpec(num_classes=20, input_dim=4, mean_scale=2.0,
                            class_spread=1.0, name="cloud"),),
        seed=0),
    seed=0,
    hidden_dims=(16,),
    n_way=3,
    k_shot=5,
    q_query=10,
    meta_batch=40,
    eval_steps=(5, 10),
    diversity_tasks=20,
    probe_hidden_dims=(16,),
    pt={"max_epochs": 200},
    maml={"max_epochs": 60},
)

out = Path(tempfile.mkdtemp(prefix="metalab-demo-"))
record = run_comparison(config, out_dir=out / "runs" / config.name)
print(f"status {record.status} in {record.wall_clock_seconds:.1f} s; "
      f"run dir {out / 'runs' / config.name}")
for label in record.eval_labels():
    ev = record.evals[label]
    print(f"  {label:7s} accuracy {ev.mean:.4f} +/- {ev.ci95_halfwidth:.4f} "
          f"over {ev.meta_batch} episodes")
for decision_id, decision in zip(record.decision_ids, record.decisions):
    print(f"  {decision_id:14s} es {decision.effect_size:+.4f} "
          f"-> {decision.verdict}")
if record.diversity is not None:
    print(f"  diversity {record.diversity.coefficient:.4f} "
          f"+/- {record.diversity.ci95_halfwidth:.4f}")

report_dir = emit_report([record], out / "report")
print(f"\nreport bundle in {report_dir}:")
for path in sorted(report_dir.iterdir()):
    print(f"  {path.name}")
print("\ndigest tail:")
for line in (report_dir / "digest.txt").read_text().splitlines()[-5:]:
    print(f"  {line}")

print("\nsame thing from a shell:")
print("  metalab run config.yaml --out runs")
print("  metalab report runs --out report")
print("  metalab diversity config.yaml")
print("  metalab reproduce-tables   # replay the packaged reference tables")
