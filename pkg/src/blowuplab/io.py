"""File formats: problem JSON in, trajectory CSV plus sidecar metadata, report JSON and series CSV out."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .asymptotics import AsymptoticsReport
from .errors import ConfigError
from .integrator import BlowupTrajectory
from .problem import ProblemSpec

SCHEMA = "blowuplab.trajectory/1"


def load_json(path) -> dict:
    path = Path(path)
    try:
        with path.open() as fh:
            data = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return data


def dump_json(obj, path) -> None:
    # sorted keys and fixed float repr keep reruns byte-identical
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def meta_path(csv_path) -> Path:
    p = Path(csv_path)
    return p.with_name(p.stem + ".meta.json")


def write_trajectory(path, traj: BlowupTrajectory, spec: ProblemSpec | None = None) -> Path:
    """Write samples as CSV; ``t`` is the rounded time and ``t_lo`` its low-order part.

    Manufactured problems get the exact state and the relative deviation from it.
    """
    path = Path(path)
    n = traj.states.shape[1]
    header = ["t", "t_lo"] + [f"y{k + 1}" for k in range(n)] + ["norm"]
    oracle = spec.oracle if spec is not None else None
    if oracle is not None:
        header += [f"exact{k + 1}" for k in range(n)] + ["oracle_rel_err"]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, lo, y in zip(traj.times, traj.t_lo, traj.states):
            row = [repr(float(t)), repr(float(lo))] + [repr(float(v)) for v in y] + [repr(float(np.linalg.norm(y)))]
            if oracle is not None:
                ex = oracle.y_exact(t, lo)
                rel = float(np.linalg.norm(y - ex) / np.linalg.norm(ex))
                row += [repr(float(v)) for v in ex] + [repr(rel)]
            w.writerow(row)

    meta = {k: v for k, v in traj.meta().items() if k != "t_lo"}
    meta["schema"] = SCHEMA
    meta["dim"] = n
    if spec is not None:
        meta["problem"] = spec.source
    dump_json(meta, meta_path(path))
    return path


def read_trajectory(path) -> BlowupTrajectory:
    path = Path(path)
    meta = load_json(meta_path(path))
    if meta.get("schema") != SCHEMA:
        raise ConfigError(f"{meta_path(path)}: unsupported schema {meta.get('schema')!r}")
    n = int(meta["dim"])
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    header, body = rows[0], rows[1:]
    want = ["t", "t_lo"] + [f"y{k + 1}" for k in range(n)]
    if header[: len(want)] != want or not body:
        raise ConfigError(f"{path}: columns {header[:len(want)]} do not match {want}")
    try:
        data = np.array([[float(x) for x in r[: len(want)]] for r in body])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    return BlowupTrajectory(
        times=data[:, 0],
        t_lo=data[:, 1],
        states=data[:, 2:],
        alpha=float(meta["alpha"]),
        stop_reason=str(meta["stop_reason"]),
        accepted=int(meta["accepted"]),
        rejected=int(meta["rejected"]),
        ctrl=dict(meta.get("ctrl", {})),
        t0=float(meta.get("t0", data[0, 0])),
    )


def write_series(path, series: dict) -> Path:
    path = Path(path)
    keys = [k for k in ("t", "s", "norm", "lambda", "w_error", "V1", "V2", "calE0") if k in series]
    cols = [np.asarray(series[k], dtype=float) for k in keys]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    return path


def write_report(outdir, report: AsymptoticsReport) -> dict[str, Path]:
    outdir = Path(outdir)
    paths = {"json": outdir / "report.json", "text": outdir / "report.txt", "series": outdir / "series.csv"}
    dump_json(report.to_dict(), paths["json"])
    paths["text"].write_text(report.to_text())
    write_series(paths["series"], report.series)
    return paths
