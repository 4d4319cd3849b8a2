"""Long-format CSV input and output.

One row per observation with columns ``sample, group, curve_id, time,
value``.  ``sample`` is ``dense`` or ``sparse``; all curves of one sample
within one group must share their observation times.  Curves keep the order
in which they first appear, which matters because curves are serially
dependent.
"""
from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import pandas as pd

from densesparse.exceptions import EmptyGroup, RaggedGrid, SchemaError
from densesparse.mean_diff import CurveMatrix
from densesparse.weights import DesignGrid

__all__ = [
    "COLUMNS",
    "GroupData",
    "GroupedDataset",
    "read_long",
    "ingest",
    "dataset_frame",
    "scenario_frame",
    "write_long",
]

COLUMNS = ("sample", "group", "curve_id", "time", "value")
SAMPLES = ("sparse", "dense")


@dataclass(frozen=True)
class GroupData:
    """Both samples of one group, on the unit interval.

    ``time = offset + scale * u`` maps internal points ``u`` back to the
    original time axis; ``times`` holds the original observation times
    exactly as read, so that output can be re-emitted without rounding.
    """

    key: str
    sparse: CurveMatrix
    dense: CurveMatrix
    sparse_ids: tuple
    dense_ids: tuple
    sparse_times: np.ndarray
    dense_times: np.ndarray
    offset: float = 0.0
    scale: float = 1.0

    def to_original(self, u):
        return self.offset + self.scale * np.asarray(u, dtype=float)


class GroupedDataset(Mapping):
    """Ordered mapping ``group key -> GroupData``."""

    def __init__(self, groups: dict):
        self._groups = dict(groups)

    def __getitem__(self, key):
        return self._groups[str(key)]

    def __iter__(self):
        return iter(self._groups)

    def __len__(self):
        return len(self._groups)

    def __repr__(self):
        parts = [f"{k}: n={g.sparse.n}x{g.sparse.p}, n~={g.dense.n}x{g.dense.p}"
                 for k, g in self._groups.items()]
        return f"GroupedDataset({'; '.join(parts)})"


def read_long(paths) -> pd.DataFrame:
    """Read and concatenate long-format CSVs with exact float round-tripping."""
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    frames = [
        pd.read_csv(p, float_precision="round_trip",
                    dtype={"sample": str, "group": str, "curve_id": str})
        for p in paths
    ]
    if not frames:
        raise SchemaError("no input files")
    return pd.concat(frames, ignore_index=True)


def _validate(df: pd.DataFrame, group_column: str) -> pd.DataFrame:
    need = ["sample", group_column, "curve_id", "time", "value"]
    missing = [c for c in need if c not in df.columns]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    df = df[need].rename(columns={group_column: "group"})
    if df.empty:
        raise SchemaError("input has no rows")
    bad = sorted(set(df["sample"].dropna()) - set(SAMPLES))
    if bad or df["sample"].isna().any():
        raise SchemaError(f"sample must be 'dense' or 'sparse', found {bad or ['<missing>']}")
    for col in ("group", "curve_id"):
        if df[col].isna().any():
            raise SchemaError(f"column {col!r} has missing entries")
    df = df.astype({"group": str, "curve_id": str})
    for col in ("time", "value"):
        num = pd.to_numeric(df[col], errors="coerce")
        if num.isna().any() or not np.all(np.isfinite(num.to_numpy(dtype=float))):
            row = int(np.flatnonzero(num.isna().to_numpy() | ~np.isfinite(num.to_numpy(dtype=float)))[0])
            raise SchemaError(f"column {col!r} has a missing or non-numeric entry (row {row})")
        df[col] = num.astype(float)
    dup = df.duplicated(["sample", "group", "curve_id", "time"])
    if dup.any():
        r = df[dup].iloc[0]
        raise SchemaError(f"duplicate observation: {r['sample']} group {r['group']} curve "
                          f"{r['curve_id']} time {r['time']!r}")
    return df


def _matrix(part: pd.DataFrame, sample: str, key: str):
    ids = tuple(pd.unique(part["curve_id"]))
    by_curve = {cid: g.sort_values("time", kind="stable") for cid, g in part.groupby("curve_id", sort=False)}
    ref = by_curve[ids[0]]["time"].to_numpy()
    rows = []
    for cid in ids:
        g = by_curve[cid]
        t = g["time"].to_numpy()
        if t.shape != ref.shape or not np.array_equal(t, ref):
            raise RaggedGrid(
                f"{sample} curve {cid!r} in group {key!r} has times that differ from curve "
                f"{ids[0]!r} ({t.size} vs {ref.size} observations)"
            )
        rows.append(g["value"].to_numpy())
    return ids, ref, np.vstack(rows)


def ingest(paths_or_frame, group_column: str = "group", groups=None) -> GroupedDataset:
    """Validate long-format data and build one sparse/dense pair per group.

    Times are mapped affinely onto ``[0, 1]`` per group, using the smallest
    and largest time of both samples, unless they already lie in ``[0, 1]``
    (then the map is the identity).  ``groups`` lists keys that must be
    present; a listed key without data raises :class:`EmptyGroup`.
    """
    df = paths_or_frame if isinstance(paths_or_frame, pd.DataFrame) else read_long(paths_or_frame)
    df = _validate(df, group_column)
    keys = list(pd.unique(df["group"]))
    if groups is not None:
        absent = [str(k) for k in groups if str(k) not in keys]
        if absent:
            raise EmptyGroup(f"group(s) without observations: {', '.join(absent)}")
        keys = [str(k) for k in groups]
    out = {}
    for key in keys:
        part = df[df["group"] == key]
        mats = {}
        for sample in SAMPLES:
            sub = part[part["sample"] == sample]
            if sub.empty:
                raise EmptyGroup(f"group {key!r} has no {sample} curves")
            mats[sample] = _matrix(sub, sample, key)
        lo = min(mats[s][1][0] for s in SAMPLES)
        hi = max(mats[s][1][-1] for s in SAMPLES)
        if lo >= 0.0 and hi <= 1.0:
            offset, scale = 0.0, 1.0
        else:
            if hi <= lo:
                raise SchemaError(f"group {key!r} spans a single time point")
            offset, scale = float(lo), float(hi - lo)

        def unit(t):
            return np.clip((t - offset) / scale, 0.0, 1.0)

        sids, st, sv = mats["sparse"]
        dids, dt, dv = mats["dense"]
        try:
            sparse = CurveMatrix(sv, DesignGrid(unit(st)), "sparse")
            dense = CurveMatrix(dv, DesignGrid(unit(dt)), "dense")
        except ValueError as exc:
            raise SchemaError(f"group {key!r}: {exc}") from exc
        out[key] = GroupData(key, sparse, dense, sids, dids, st, dt, offset, scale)
    return GroupedDataset(out)


def _frame(key, sample, ids, times, values) -> pd.DataFrame:
    n, p = values.shape
    return pd.DataFrame({
        "sample": sample,
        "group": key,
        "curve_id": np.repeat(np.asarray(ids, dtype=object), p),
        "time": np.tile(times, n),
        "value": values.ravel(),
    })


def dataset_frame(data: GroupedDataset) -> pd.DataFrame:
    """Re-emit a dataset in long format on its original time axis."""
    frames = []
    for key, g in data.items():
        frames.append(_frame(key, "sparse", g.sparse_ids, g.sparse_times, g.sparse.values))
        frames.append(_frame(key, "dense", g.dense_ids, g.dense_times, g.dense.values))
    return pd.concat(frames, ignore_index=True)


def scenario_frame(scenario, group="1") -> pd.DataFrame:
    """Long-format table of a simulated scenario; curve ids count from 0."""
    sp, de = scenario.sparse, scenario.dense
    return pd.concat([
        _frame(str(group), "sparse", [str(i) for i in range(sp.n)], sp.grid.points, sp.values),
        _frame(str(group), "dense", [str(i) for i in range(de.n)], de.grid.points, de.values),
    ], ignore_index=True)


def write_long(frame: pd.DataFrame, path) -> None:
    """Write with shortest round-trip float formatting."""
    frame.loc[:, list(COLUMNS)].to_csv(path, index=False, lineterminator="\n")
