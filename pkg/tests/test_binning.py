"""Logarithmic degree bins and the depth/degree case-study table."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ggcnlab.binning import case_study, degree_bins
from ggcnlab.dataio import SynthSpec, generate_splits, generate_synthetic
from ggcnlab.dynamics import ClassFeatureModel
from ggcnlab.errors import InvalidRangeError
from ggcnlab.layers import ModelConfig
from ggcnlab.train import TrainConfig

QUICK = TrainConfig(max_epochs=5, patience=10, seed=0)


def test_bin_bounds_frozen_wide_range():
    bins = degree_bins(1, 168, 5)
    assert bins.bounds == ((1, 2), (3, 7), (8, 21), (22, 60), (61, 168))


def test_bin_bounds_frozen_medium_range():
    bins = degree_bins(1, 99, 5)
    assert bins.bounds == ((1, 2), (3, 6), (7, 15), (16, 39), (40, 99))


def test_bin_boundaries_are_geometric():
    bins = degree_bins(2, 64, 5)
    reals = np.asarray(bins.boundaries)
    ratios = reals[:, 1] / reals[:, 0]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-12)
    assert reals[0, 0] == 2.0
    assert reals[-1, 1] == pytest.approx(64.0)


def test_degenerate_single_degree_assigns_last_bin():
    bins = degree_bins(7, 7, 3)
    idx, clamped = bins.assign(np.full(10, 7))
    assert clamped == 0
    assert np.all(idx == 2)
    assert bins.bounds[-1] == (7, 7)


def test_bin_validation():
    with pytest.raises(InvalidRangeError):
        degree_bins(0, 10, 3)
    with pytest.raises(InvalidRangeError):
        degree_bins(10, 5, 3)
    with pytest.raises(InvalidRangeError):
        degree_bins(1, 10, 0)


def test_assign_clamps_out_of_range_degrees():
    bins = degree_bins(3, 20, 4)
    idx, clamped = bins.assign([1, 2, 5, 25])
    assert clamped == 3
    assert idx[0] == 0 and idx[1] == 0
    assert idx[-1] == bins.n_bins - 1


@settings(max_examples=60)
@given(
    d_min=st.integers(min_value=1, max_value=40),
    span=st.integers(min_value=0, max_value=400),
    n=st.integers(min_value=1, max_value=8),
)
def test_every_degree_lands_in_a_containing_bin(d_min, span, n):
    d_max = d_min + span
    bins = degree_bins(d_min, d_max, n)
    assert bins.bounds[0][0] == d_min
    assert bins.bounds[-1][1] == d_max
    degrees = np.arange(d_min, d_max + 1)
    idx, clamped = bins.assign(degrees)
    assert clamped == 0
    for d, b in zip(degrees, idx):
        lo, hi = bins.bounds[b]
        assert lo <= d <= hi


def _powerlaw_dataset():
    spec = SynthSpec(
        n=80, target_h=0.7, degree_model=("powerlaw", 2.5, 1, 12),
        feature_model=ClassFeatureModel(mu=[1.0, 0.5], sigma=[1.0, 1.0]),
        seed=5,
    )
    return generate_synthetic(spec)


def test_case_study_table_structure(tiny_dataset, tiny_splits):
    table = case_study(tiny_dataset, tiny_splits, (1, 2),
                       model_config=ModelConfig(arch="gcn", hidden_dim=8),
                       train_config=QUICK)
    assert [r["depth"] for r in table.rows] == [1, 2]
    assert table.clamped == 0
    n_test = sum(len(s["test"]) for s in tiny_splits)
    for row in table.rows:
        assert len(row["per_bin"]) == table.bins.n_bins
        assert sum(b["population"] for b in row["per_bin"]) == n_test
        for cell in row["per_bin"]:
            if cell["population"] == 0:
                assert cell["accuracy"] is None and cell["mean_eff_h"] is None
            else:
                assert 0.0 <= cell["accuracy"] <= 1.0
                assert 0.0 <= cell["mean_eff_h"] <= 1.0
        assert len(row["per_split_accuracy"]) == len(tiny_splits)
        assert 0.0 <= row["overall_accuracy"] <= 1.0

    # regular graph: a single populated (last) bin
    for row in table.rows:
        pops = [b["population"] for b in row["per_bin"]]
        assert pops[:-1] == [0] * (table.bins.n_bins - 1)


def test_case_study_initial_stage_consistent_with_rows(tiny_dataset, tiny_splits):
    table = case_study(tiny_dataset, tiny_splits, (1, 2),
                       model_config=ModelConfig(arch="gcn", hidden_dim=8),
                       train_config=QUICK)
    qualifying = [
        row["depth"] for row in table.rows
        if all(b["mean_eff_h"] > 0.5 for b in row["per_bin"] if b["population"])
    ]
    expected = qualifying[-1] if qualifying else None
    assert table.initial_stage_last_depth == expected


def test_case_study_spreads_over_bins_on_skewed_degrees():
    ds = _powerlaw_dataset()
    splits = generate_splits(ds, seeds=range(1))
    table = case_study(ds, splits, (2,), train_config=QUICK, n_bins=4)
    populated = [b for b in table.rows[0]["per_bin"] if b["population"]]
    assert len(populated) >= 2
    assert table.bins.bounds[0][0] == int(ds.graph.degrees.min())
    assert table.bins.bounds[-1][1] == int(ds.graph.degrees.max())


def test_case_study_thread_count_invariant(tiny_dataset, tiny_splits, monkeypatch):
    cfg = ModelConfig(arch="gcn", hidden_dim=8)
    monkeypatch.setenv("GGCNLAB_THREADS", "1")
    a = case_study(tiny_dataset, tiny_splits, (1, 2), cfg, QUICK)
    monkeypatch.setenv("GGCNLAB_THREADS", "2")
    b = case_study(tiny_dataset, tiny_splits, (1, 2), cfg, QUICK)
    assert a.rows == b.rows
    assert a.initial_stage_last_depth == b.initial_stage_last_depth
