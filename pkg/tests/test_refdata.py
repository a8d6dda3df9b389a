"""Packaged reference tables: shape, typing, and cross-table consistency."""

import pytest

from metalab.refdata import (
    load_accuracies,
    load_deltas,
    load_effect_sizes,
    load_l2_norms,
    load_summary_counts,
    load_summary_means,
)
from metalab.stats import VERDICTS

GROUPS = ("lowdiv_fo", "lowdiv_ho", "highdiv_all", "highdiv_5cnn")


def test_effect_size_table_shape_and_typing():
    rows = load_effect_sizes()
    assert len(rows) == 82
    assert {r.group for r in rows} == set(GROUPS)
    assert all(r.verdict in VERDICTS for r in rows)
    assert all(isinstance(r.es, float) for r in rows)
    assert len(load_effect_sizes("lowdiv_fo")) == 22
    assert len(load_effect_sizes("lowdiv_ho")) == 18
    assert len(load_effect_sizes("highdiv_all")) == 26
    assert len(load_effect_sizes("highdiv_5cnn")) == 16
    assert load_effect_sizes("nope") == ()


def test_effect_size_cells_are_unique_per_key():
    rows = load_effect_sizes()
    keys = [(r.group, r.dataset, r.variant) for r in rows]
    assert len(set(keys)) == len(keys)
    assert {r.variant for r in rows} == {"maml5", "maml10"}


def test_verdict_counts_table_matches_the_effect_size_table():
    # The counts were published separately from the per-cell verdicts;
    # they must agree cell-for-cell.
    counts = {c.setting: c for c in load_summary_counts()}
    assert set(counts) == set(GROUPS)
    for group in GROUPS:
        rows = load_effect_sizes(group)
        c = counts[group]
        assert sum(1 for r in rows if r.verdict == "H0_no_diff") == c.h0
        assert sum(1 for r in rows if r.verdict == "H1_pt") == c.h1_pt
        assert sum(1 for r in rows if r.verdict == "H1_maml") == c.h1_maml
        assert c.total == len(rows)


def test_delta_table_shape():
    rows = load_deltas()
    assert len(rows) == 54
    assert all(r.delta > 0 for r in rows)
    assert {r.group for r in rows} == {"lowdiv_fo", "lowdiv_ho", "highdiv"}
    keys = [(r.group, r.dataset, r.variant) for r in rows]
    assert len(set(keys)) == len(keys)


def test_every_low_diversity_cell_has_a_threshold():
    deltas = {(r.group, r.dataset, r.variant) for r in load_deltas()}
    for group in ("lowdiv_fo", "lowdiv_ho"):
        for r in load_effect_sizes(group):
            assert (group, r.dataset, r.variant) in deltas


def test_accuracy_table_shape():
    rows = load_accuracies()
    assert len(rows) == 33
    assert all(r.n == 300 for r in rows)
    assert all(0.0 < r.mean < 1.0 for r in rows)
    assert all(r.ci95 > 0 for r in rows)
    assert {r.method for r in rows} == {"pt", "maml5", "maml10"}
    assert load_accuracies("lowdiv_fo") == rows  # single published group


def test_summary_means_table_shape():
    rows = {r.setting: r for r in load_summary_means()}
    assert set(rows) == set(GROUPS) | {"pooled_lowdiv", "pooled_highdiv"}
    assert rows["lowdiv_ho"].h0 is None  # empty bucket published as blank
    assert rows["lowdiv_fo"].h1_pt == pytest.approx(0.778)
    assert rows["pooled_highdiv"].h1_maml == pytest.approx(-0.167)


def test_l2_norm_table_shape():
    rows = load_l2_norms()
    assert len(rows) == 20
    assert all(r.maml > 0 and r.pt > 0 for r in rows)
    assert len(load_l2_norms("lowdiv_fo")) == 5
    assert len(load_l2_norms("lowdiv_ho")) == 10
    assert len(load_l2_norms("highdiv")) == 5
