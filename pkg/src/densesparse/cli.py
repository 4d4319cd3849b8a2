"""Command-line interface: ``densesparse {simulate,band,montecarlo,kernels,cv-trace}``.

Run settings come from an optional JSON or TOML file whose keys are the
:class:`~densesparse.pipeline.RunConfig` fields; every field can also be set
by a flag (``--n-boot 500``), and flags win.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from densesparse.covkernel import cov_kernel, long_run_kernel
from densesparse.cv import pool_cv
from densesparse.dataio import ingest, scenario_frame, write_long
from densesparse.dgp import OUParams, ScenarioSpec, build_scenario
from densesparse.exceptions import DenseSparseError
from densesparse.mean_diff import make_eval_grid
from densesparse.pipeline import RunConfig, analyze, cv_results, run_montecarlo, select_bandwidths

log = logging.getLogger("densesparse")

BAND_COLUMNS = ["t", "estimate", "se", "lower", "upper", "kind"]


def load_config(path) -> dict:
    if path is None:
        return {}
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    else:
        with open(path) as fh:
            data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a table/object")
    return data


def _floats(text):
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    return vals[0] if len(vals) == 1 else tuple(vals)


def _ints(text):
    return [int(v) for v in str(text).split(",") if v.strip()]


_FLAG_TYPES = {
    "kernel_h": _floats,
    "kernel_h_dense": _floats,
    "candidates": lambda s: tuple(float(v) for v in s.split(",")),
}


def _add_run_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("run settings (override the config file)")
    g.add_argument("--config", help="JSON or TOML file with run settings")
    for f in dataclasses.fields(RunConfig):
        if f.name in ("cv_groups",):
            continue
        flag = "--" + f.name.replace("_", "-")
        if f.name in _FLAG_TYPES:
            typ = _FLAG_TYPES[f.name]
        elif f.name == "bandwidth_mode":
            g.add_argument(flag, choices=("fixed", "cv"), default=None)
            continue
        elif f.name == "regime":
            g.add_argument(flag, choices=("pooled", "sparse_only"), default=None)
            continue
        elif f.type == "int":
            typ = int
        elif f.type in ("float", "float | None"):
            typ = float
        else:
            typ = str
        g.add_argument(flag, type=typ, default=None, dest=f.name)


def resolve_config(args) -> RunConfig:
    data = load_config(getattr(args, "config", None))
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            data[f.name] = v
    return RunConfig.from_mapping(data)


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _safe(key: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in str(key))


def _group_bandwidths(data, config):
    """Bandwidths per group; CV scores are pooled over ``config.cv_groups`` if given."""
    if config.bandwidth_mode == "fixed":
        return {k: select_bandwidths(g.sparse, g.dense, config) for k, g in data.items()}, {}
    runs, errors = {}, {}
    for k, g in data.items():
        try:
            runs[k] = cv_results(g.sparse, g.dense, config)
        except (DenseSparseError, ValueError) as exc:
            errors[k] = f"{type(exc).__name__}: {exc}"
    mapping = {str(k): str(v) for k, v in (config.cv_groups or {}).items()}
    pools = {}
    for k in runs:
        pools.setdefault(mapping.get(k, k), []).append(k)
    out = {}
    for members in pools.values():
        if len(members) == 1:
            pooled = runs[members[0]]
        else:
            pooled = {name: pool_cv([runs[k][name] for k in members]) for name in runs[members[0]]}
        for k in members:
            out[k] = select_bandwidths(data[k].sparse, data[k].dense, config, pooled)
    return out, errors


def cmd_simulate(args) -> int:
    spec = ScenarioSpec(args.n, args.p, args.n_dense, args.p_dense, args.scenario)
    params = OUParams(args.theta, args.sigma, args.rho, args.noise_sd)
    sc = build_scenario(spec, params, args.seed)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_long(scenario_frame(sc, args.group), out)
    log.info("wrote %s", out)
    return 0


def cmd_band(args) -> int:
    config = resolve_config(args)
    data = ingest(args.input, config.group_column)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    bws, errors = _group_bandwidths(data, config)
    summary = {"config": config.as_dict(), "groups": {}}
    for key, g in data.items():
        if key in errors:
            summary["groups"][key] = {"error": errors[key]}
            continue
        try:
            res = analyze(g.sparse, g.dense, config, bws[key])
        except (DenseSparseError, ValueError) as exc:
            summary["groups"][key] = {"error": f"{type(exc).__name__}: {exc}"}
            log.error("group %s failed: %s", key, exc)
            continue
        frames = []
        for kind, band in (("delta", res.band), ("centered", res.centered_band)):
            se = band.se / math.sqrt(band.n - 1)
            frames.append(pd.DataFrame({
                "t": g.to_original(band.eval_grid), "estimate": band.estimate, "se": se,
                "lower": band.lower, "upper": band.upper, "kind": kind,
            }))
        path = outdir / f"band_{_safe(key)}.csv"
        pd.concat(frames, ignore_index=True)[BAND_COLUMNS].to_csv(path, index=False, lineterminator="\n")
        entry = res.summary()
        entry.pop("config")
        entry["integral"]["estimate_original_units"] = entry["integral"]["estimate"] * g.scale
        entry["band_file"] = path.name
        summary["groups"][key] = entry
    _dump_json(summary, outdir / "summary.json")
    failed = [k for k, v in summary["groups"].items() if "error" in v]
    for k in failed:
        print(f"group {k}: {summary['groups'][k]['error']}", file=sys.stderr)
    return 1 if failed else 0


def cmd_montecarlo(args) -> int:
    config = resolve_config(args)
    if args.reps < 1:
        raise ValueError("--reps must be positive")
    ns = _ints(args.n)
    if args.n_dense:
        nds = _ints(args.n_dense)
        if len(nds) == 1:
            nds = nds * len(ns)
        if len(nds) != len(ns):
            raise ValueError("--n-dense needs one value or one per --n value")
    else:
        nds = [int(round(n / args.ratio)) for n in ns]
    specs = [ScenarioSpec(n, args.p, nd, args.p_dense, kind)
             for kind in args.scenario.split(",") for n, nd in zip(ns, nds)]
    params = OUParams(args.theta, args.sigma, args.rho, args.noise_sd)
    table = run_montecarlo(specs, args.reps, config, args.seed, params)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, lineterminator="\n")
    _dump_json({"config": config.as_dict(), "reps": args.reps, "seed": args.seed,
                "params": dataclasses.asdict(params)}, out.with_suffix(".json"))
    print(table.to_string(index=False))
    return 1 if (table["failures"] > 0).any() else 0


def cmd_kernels(args) -> int:
    config = resolve_config(args)
    data = ingest(args.input, config.group_column)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    bws, errors = _group_bandwidths(data, config)
    x = make_eval_grid(config.grid_size)
    summary = {"config": config.as_dict(), "groups": {}}
    for key, g in data.items():
        if key in errors:
            summary["groups"][key] = {"error": errors[key]}
            continue
        entry = {}
        try:
            for sample, mat, hs, m in (("sparse", g.sparse, bws[key].kernel, config.m),
                                       ("dense", g.dense, bws[key].kernel_dense, config.m_dense)):
                lag0 = cov_kernel(mat, hs[0], x)
                lr = long_run_kernel(mat, m, hs, x)
                sd0 = np.sqrt(np.clip(lag0.diagonal, 0, None))
                sdl = np.sqrt(np.clip(lr.diagonal, 0, None))
                path = outdir / f"kernels_{_safe(key)}_{sample}.csv"
                pd.DataFrame({"t": g.to_original(x), "sd_lag0": sd0, "sd_longrun": sdl}).to_csv(
                    path, index=False, lineterminator="\n")
                if args.full:
                    lag0.to_csv(outdir / f"field_{_safe(key)}_{sample}_lag0.csv")
                    lr.to_csv(outdir / f"field_{_safe(key)}_{sample}_longrun.csv")
                entry[sample] = {
                    "bandwidths": list(hs), "m": m, "file": path.name,
                    "longrun_exceeds_lag0": bool(np.all(sdl >= sd0)),
                }
        except (DenseSparseError, ValueError) as exc:
            entry = {"error": f"{type(exc).__name__}: {exc}"}
        summary["groups"][key] = entry
    _dump_json(summary, outdir / "kernels.json")
    return 1 if any("error" in v for v in summary["groups"].values()) else 0


def cmd_cv_trace(args) -> int:
    config = resolve_config(args).replace(bandwidth_mode="cv")
    data = ingest(args.input, config.group_column)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    summary = {"config": config.as_dict(), "groups": {}}
    for key, g in data.items():
        try:
            runs = cv_results(g.sparse, g.dense, config)
        except (DenseSparseError, ValueError) as exc:
            summary["groups"][key] = {"error": f"{type(exc).__name__}: {exc}"}
            continue
        entry = {}
        for name, r in runs.items():
            path = outdir / f"cv_{_safe(key)}_{name}.csv"
            r.trace().to_csv(path, index=False, lineterminator="\n")
            entry[name] = {"selected": r.selected, "failed": {str(k): v for k, v in r.failed.items()},
                           "file": path.name}
        summary["groups"][key] = entry
    _dump_json(summary, outdir / "cv.json")
    return 1 if any("error" in v for v in summary["groups"].values()) else 0


def _add_ou_flags(p):
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=4.0)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--noise-sd", type=float, default=0.1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="densesparse", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a scenario and write it as long-format CSV")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, default=25)
    p.add_argument("--n-dense", type=int, required=True)
    p.add_argument("--p-dense", type=int, default=100)
    p.add_argument("--scenario", choices=("null", "alternative"), default="null")
    p.add_argument("--group", default="1")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_ou_flags(p)
    p.set_defaults(func=cmd_simulate)

    for name, func, help_ in (
        ("band", cmd_band, "uniform bands, constant test and integral CI per group"),
        ("kernels", cmd_kernels, "lag-0 and long-run standard deviation curves per group"),
        ("cv-trace", cmd_cv_trace, "cross-validation score traces per group"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--input", nargs="+", required=True, help="long-format CSV file(s)")
        p.add_argument("--out-dir", required=True)
        if name == "kernels":
            p.add_argument("--full", action="store_true", help="also write the full kernel fields")
        _add_run_flags(p)
        p.set_defaults(func=func)

    p = sub.add_parser("montecarlo", help="coverage and rejection rates over simulated data")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--n", default="100", help="comma-separated sparse sample sizes")
    p.add_argument("--n-dense", default=None, help="comma-separated dense sample sizes")
    p.add_argument("--ratio", type=float, default=5 / 6, help="n / n_dense when --n-dense is absent")
    p.add_argument("--p", type=int, default=25)
    p.add_argument("--p-dense", type=int, default=100)
    p.add_argument("--scenario", default="null", help="null, alternative or both comma-separated")
    p.add_argument("--out", required=True)
    _add_ou_flags(p)
    _add_run_flags(p)
    # the seed is mandatory here; argparse keeps the last definition of --seed
    for action in p._actions:
        if action.dest == "seed":
            action.required = True
    p.set_defaults(func=cmd_montecarlo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DenseSparseError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
