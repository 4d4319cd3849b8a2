import numpy as np
import pandas as pd
import pytest

from densesparse.dataio import (
    dataset_frame,
    ingest,
    read_long,
    scenario_frame,
    write_long,
)
from densesparse.dgp import ScenarioSpec, build_scenario
from densesparse.exceptions import EmptyGroup, RaggedGrid, SchemaError


def long_rows(sample, group, curves, times):
    rows = []
    for cid, vals in curves.items():
        for t, v in zip(times, vals):
            rows.append({"sample": sample, "group": group, "curve_id": cid, "time": t, "value": v})
    return rows


@pytest.fixture
def tiny():
    rows = long_rows("sparse", "a", {"c1": [1.0, 2.0, 3.0], "c2": [4.0, 5.0, 6.0]}, [0.1, 0.5, 0.9])
    rows += long_rows("dense", "a", {"d1": [0.0] * 5, "d2": [1.0] * 5, "d3": [2.0] * 5},
                      [0.1, 0.3, 0.5, 0.7, 0.9])
    return pd.DataFrame(rows)


def test_two_by_three(tiny):
    data = ingest(tiny)
    g = data["a"]
    np.testing.assert_array_equal(g.sparse.values, [[1, 2, 3], [4, 5, 6]])
    assert g.sparse_ids == ("c1", "c2")
    assert g.dense.values.shape == (3, 5)
    np.testing.assert_array_equal(g.sparse.grid.points, [0.1, 0.5, 0.9])
    assert (g.offset, g.scale) == (0.0, 1.0)
    assert list(data) == ["a"] and len(data) == 1


def test_row_order_does_not_matter(tiny):
    shuffled = tiny.sample(frac=1.0, random_state=0)
    a, b = ingest(tiny)["a"], ingest(shuffled)["a"]
    assert set(a.sparse_ids) == set(b.sparse_ids)
    order = [b.sparse_ids.index(c) for c in a.sparse_ids]
    np.testing.assert_array_equal(a.sparse.values, b.sparse.values[order])


def test_missing_time_row_names_the_curve(tiny):
    df = tiny.drop(index=4)  # c2 at t=0.5
    with pytest.raises(RaggedGrid, match="'c2'"):
        ingest(df)


def test_schema_errors(tiny):
    with pytest.raises(SchemaError, match="value"):
        ingest(tiny.drop(columns="value"))
    bad = tiny.copy()
    bad.loc[0, "sample"] = "medium"
    with pytest.raises(SchemaError, match="medium"):
        ingest(bad)
    bad = tiny.copy()
    bad["value"] = bad["value"].astype(object)
    bad.loc[2, "value"] = "n/a"
    with pytest.raises(SchemaError, match="row 2"):
        ingest(bad)
    with pytest.raises(SchemaError, match="duplicate"):
        ingest(pd.concat([tiny, tiny.iloc[[0]]]))
    with pytest.raises(SchemaError):
        ingest(tiny.iloc[0:0])


def test_empty_groups(tiny):
    with pytest.raises(EmptyGroup, match="dense"):
        ingest(tiny[tiny["sample"] == "sparse"])
    with pytest.raises(EmptyGroup, match="july"):
        ingest(tiny, groups=["a", "july"])


def test_custom_group_column(tiny):
    df = tiny.rename(columns={"group": "month"})
    assert list(ingest(df, group_column="month")) == ["a"]


def test_time_rescaling():
    rows = long_rows("sparse", "g", {"1": [1.0, 2.0], "2": [3.0, 4.0]}, [0.0, 24.0])
    rows += long_rows("dense", "g", {"1": [0.0] * 3, "2": [1.0] * 3}, [0.0, 12.0, 24.0])
    g = ingest(pd.DataFrame(rows))["g"]
    np.testing.assert_allclose(g.dense.grid.points, [0.0, 0.5, 1.0])
    assert (g.offset, g.scale) == (0.0, 24.0)
    np.testing.assert_allclose(g.to_original(np.array([0.25])), [6.0])


def test_scenario_round_trip_is_bit_identical(tmp_path):
    sc = build_scenario(ScenarioSpec(12, 25, 15, 100, "alternative"), seed=31)
    first = tmp_path / "first.csv"
    write_long(scenario_frame(sc, "7"), first)
    data = ingest(read_long(first))
    g = data["7"]
    assert np.array_equal(g.sparse.values, sc.sparse.values)
    assert np.array_equal(g.dense.values, sc.dense.values)
    assert np.array_equal(g.sparse.grid.points, sc.sparse.grid.points)
    second = tmp_path / "second.csv"
    write_long(dataset_frame(data), second)
    assert first.read_bytes() == second.read_bytes()


def test_read_multiple_files(tmp_path, tiny):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_long(tiny[tiny["sample"] == "sparse"], a)
    write_long(tiny[tiny["sample"] == "dense"], b)
    assert ingest([a, b])["a"].dense.n == 3
    with pytest.raises(SchemaError):
        read_long([])
