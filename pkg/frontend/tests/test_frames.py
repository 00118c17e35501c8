"""Trace loading and schema validation."""

import pandas as pd
import pytest

from lnsplots import TraceFormatError, load_aggregate, load_trace, load_traces
from conftest import trace_frame, write_trace_csv


def test_label_defaults_to_stem(tmp_path):
    df = trace_frame("x", {"i0": [(0, 2, 2), (1, 0, 0)]})
    path = tmp_path / "random_sample.csv"
    write_trace_csv(path, df)
    loaded = load_trace(path)
    assert set(loaded["config"]) == {"random_sample"}
    labeled = load_trace(path, label="mylabel")
    assert set(labeled["config"]) == {"mylabel"}


def test_missing_column_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    pd.DataFrame({"instance": ["a"], "iter": [0], "cost": [1]}).to_csv(path, index=False)
    with pytest.raises(TraceFormatError, match="missing trace columns"):
        load_trace(path)


def test_non_increasing_iterations_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    df = trace_frame("x", {"i0": [(0, 2, 2), (0, 1, 1)]})
    write_trace_csv(path, df)
    with pytest.raises(TraceFormatError, match="strictly increasing"):
        load_trace(path)


def test_rising_best_cost_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    df = trace_frame("x", {"i0": [(0, 2, 2), (1, 3, 3)]})
    write_trace_csv(path, df)
    with pytest.raises(TraceFormatError, match="best_cost increases"):
        load_trace(path)


def test_load_traces_concatenates(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_trace_csv(p1, trace_frame("x", {"i0": [(0, 1, 1)]}))
    write_trace_csv(p2, trace_frame("x", {"i0": [(0, 2, 2)]}))
    df = load_traces([("one", p1), (None, p2)])
    assert set(df["config"]) == {"one", "b"}


def test_empty_trace_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("instance,iter,cost,best_cost,elapsed_ms\n")
    with pytest.raises(TraceFormatError, match="no rows"):
        load_trace(path)


def test_aggregate_requires_columns(tmp_path):
    path = tmp_path / "agg.csv"
    pd.DataFrame({"config": ["c"], "instance": ["i"]}).to_csv(path, index=False)
    with pytest.raises(TraceFormatError, match="missing aggregate column"):
        load_aggregate(path)
