"""
Grouped data through the command line
=====================================

Real data come as a long table: one row per observation with columns
``sample, group, curve_id, time, value``.  Here two simulated "months" are
written in that format on an hourly axis (0 to 24), then the ``band``
command fits each month with CV scores pooled over both, as one would pool
the months of a season.
"""

import json
import tempfile
from pathlib import Path

import pandas as pd

from densesparse import ScenarioSpec, build_scenario
from densesparse.cli import main
from densesparse.dataio import scenario_frame, write_long

work = Path(tempfile.mkdtemp())
frames = []
for month, kind in (("jan", "null"), ("feb", "alternative")):
    sc = build_scenario(ScenarioSpec(120, 25, 144, 100, kind), seed=len(frames))
    f = scenario_frame(sc, month)
    f["time"] = f["time"] * 24  # hours
    frames.append(f)
write_long(pd.concat(frames), work / "curves.csv")

(work / "run.json").write_text(json.dumps({
    "n_boot": 500, "seed": 3, "cv_groups": {"jan": "winter", "feb": "winter"},
}))
code = main(["band", "--input", str(work / "curves.csv"), "--out-dir", str(work / "out"),
             "--config", str(work / "run.json")])
print("exit code", code)

summary = json.loads((work / "out" / "summary.json").read_text())
for month, entry in summary["groups"].items():
    print(month, "reject constant:", entry["reject_constant"], "bandwidths:", entry["bandwidths"])

band = pd.read_csv(work / "out" / "band_feb.csv")
print(band[band.kind == "centered"].iloc[::20].to_string(index=False))
