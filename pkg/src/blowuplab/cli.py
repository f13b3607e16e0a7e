"""Command-line front end.

    blowuplab simulate --config problem.json [--out DIR] [--rel-tol X] [--norm-cap X]
    blowuplab analyze  --trajectory DIR/trajectory.csv [--config problem.json] [--out DIR]
    blowuplab sweep    --config sweep.json [--jobs N]
    blowuplab verify

Exit codes: 0 success, 2 run stopped early (StepUnderflow, MaxSteps, LeftDomain),
3 numerical failure, 4 bad input.  The output directory is ``--out``, else
``$BLOWUPLAB_OUT``, else ``./blowuplab_out``.
"""

from __future__ import annotations

import argparse
import copy
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import io as bio
from .asymptotics import Options, analyze
from .errors import BlowupLabError, ConfigError, DimensionMismatch, NonDiagonalizable, NonPositiveSpectrum
from .integrator import Control, integrate_blowup
from .problem import ProblemSpec, from_dict

log = logging.getLogger("blowuplab")

EXIT_OK, EXIT_EARLY_STOP, EXIT_NUMERIC, EXIT_INPUT = 0, 2, 3, 4
# errors raised while building a problem are input errors, whatever their type
INPUT_ERRORS = (ConfigError, NonPositiveSpectrum, NonDiagonalizable, DimensionMismatch, ValueError, KeyError, TypeError)


@dataclass
class RunConfig:
    problem: dict
    ctrl: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)
    out: Path = Path("blowuplab_out")
    seed: int | None = None

    def spec(self) -> ProblemSpec:
        d = copy.deepcopy(self.problem)
        if self.seed is not None:
            d["seed"] = self.seed
        spec = from_dict(d)
        if spec.y0 is None:
            raise ConfigError("problem has no initial state y0")
        return spec

    def control(self, spec: ProblemSpec) -> Control:
        c = dict(self.ctrl)
        unknown = set(c) - set(Control.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown ctrl keys {sorted(unknown)}")
        n0 = float(np.linalg.norm(spec.y0))
        cap = c.get("norm_cap")
        if cap is not None and not cap >= 1e3 * n0:
            raise ConfigError(f"norm_cap {cap:g} is below 1e3 |y0| = {1e3 * n0:g}")
        try:
            return Control(**c)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def options(self) -> Options:
        try:
            return Options(**self.analysis)
        except TypeError as exc:
            raise ConfigError(f"bad analysis options: {exc}") from exc


def output_dir(flag: str | None) -> Path:
    out = Path(flag or os.environ.get("BLOWUPLAB_OUT") or "blowuplab_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_run_config(path, args) -> RunConfig:
    """A file holding either a bare problem or ``{"problem": ..., "ctrl": ..., "analysis": ...}``."""
    data = bio.load_json(path)
    if "problem" in data:
        prob = data["problem"]
        if isinstance(prob, str):
            prob = bio.load_json(Path(path).parent / prob)
        rc = RunConfig(prob, dict(data.get("ctrl", {})), dict(data.get("analysis", {})), seed=data.get("seed"))
    else:
        rc = RunConfig(data)
    for flag, key in (("rel_tol", "rel_tol"), ("norm_cap", "norm_cap"), ("max_steps", "max_steps")):
        v = getattr(args, flag, None)
        if v is not None:
            rc.ctrl[key] = v
    if getattr(args, "seed", None) is not None:
        rc.seed = args.seed
    rc.out = output_dir(getattr(args, "out", None) or data.get("out"))
    return rc


def _exit_for_stop(reason: str) -> int:
    return EXIT_OK if reason == "NormCap" else EXIT_EARLY_STOP


# -- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        rc = load_run_config(args.config, args)
        spec = rc.spec()
        ctrl = rc.control(spec)
    except INPUT_ERRORS as exc:
        log.error("invalid configuration: %s", exc)
        return EXIT_INPUT
    try:
        traj = integrate_blowup(spec, ctrl=ctrl)
    except BlowupLabError as exc:
        log.error("integration failed: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    path = bio.write_trajectory(rc.out / "trajectory.csv", traj, spec)
    log.info("%s: %d samples, stop %s, last |y| = %.4g", path, traj.size, traj.stop_reason, traj.norms[-1])
    return _exit_for_stop(traj.stop_reason)


def cmd_analyze(args) -> int:
    try:
        traj = bio.read_trajectory(args.trajectory)
        if args.config:
            rc = load_run_config(args.config, args)
        else:
            meta = bio.load_json(bio.meta_path(args.trajectory))
            if not meta.get("problem"):
                raise ConfigError("trajectory metadata carries no problem; pass --config")
            rc = RunConfig(meta["problem"], out=output_dir(args.out))
            if args.seed is not None:
                rc.seed = args.seed
        spec = rc.spec()
        opts = rc.options()
        if traj.states.shape[1] != spec.dim:
            raise ConfigError(f"trajectory has dimension {traj.states.shape[1]}, problem has {spec.dim}")
    except INPUT_ERRORS as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INPUT
    try:
        report = analyze(traj, spec, opts)
    except BlowupLabError as exc:
        log.error("analysis failed: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERIC
    paths = bio.write_report(rc.out, report)
    from .plotting import render_all

    pngs = render_all(report, spec.alpha, rc.out)
    sys.stdout.write(report.to_text())
    log.info("wrote %s and %d figures", ", ".join(str(p) for p in paths.values()), len(pngs))
    return EXIT_OK if report.accepted else EXIT_NUMERIC


def set_path(d: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    for k in keys[:-1]:
        d = d.setdefault(k, {})
    d[keys[-1]] = value


SUMMARY_FIELDS = ("row", "value", "ok", "stop_reason", "Lambda", "cert_eigen", "cert_H", "fitted_kind",
                  "fitted_exponent", "predicted_kind", "predicted_exponent", "hypotheses", "error")


def _sweep_row(job: tuple) -> dict:
    idx, value, rc = job
    row = dict.fromkeys(SUMMARY_FIELDS, "")
    row.update(row=idx, value=value, ok=False)
    rowdir = rc.out / f"row_{idx:03d}"
    rowdir.mkdir(parents=True, exist_ok=True)
    try:
        spec = rc.spec()
        traj = integrate_blowup(spec, ctrl=rc.control(spec))
        bio.write_trajectory(rowdir / "trajectory.csv", traj, spec)
        rep = analyze(traj, spec, rc.options())
        bio.write_report(rowdir, rep)
    except (BlowupLabError, *INPUT_ERRORS) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    fit, pred = rep.fitted_rate, rep.predicted_rate
    row.update(
        ok=rep.accepted,
        stop_reason=traj.stop_reason,
        Lambda=rep.Lambda_hat,
        cert_eigen=rep.cert_eigen_residual,
        cert_H=rep.cert_H_residual,
        fitted_kind=fit.kind if fit else rep.status.get("rate", ""),
        fitted_exponent=fit.exponent if fit else "",
        predicted_kind=pred.kind if pred else rep.status.get("prediction", ""),
        predicted_exponent=pred.exponent if pred else "",
        hypotheses=";".join(f"{k}={v}" for k, v in rep.hypotheses.items()),
        error="" if rep.accepted else "; ".join(f"{k}: {v}" for k, v in rep.status.items() if v != "ok"),
    )
    return row


def cmd_sweep(args) -> int:
    try:
        data = bio.load_json(args.config)
        param, values = data.get("parameter"), data.get("values")
        if not param or not isinstance(values, list):
            raise ConfigError("sweep needs 'parameter' (dotted path into the problem) and a 'values' list")
        if not values:
            raise ConfigError("empty parameter grid")
        prob = data.get("problem")
        if isinstance(prob, str):
            prob = bio.load_json(Path(args.config).parent / prob)
        if not isinstance(prob, dict):
            raise ConfigError("sweep needs a base 'problem'")
        base = RunConfig(prob, dict(data.get("ctrl", {})), dict(data.get("analysis", {})), seed=data.get("seed"))
        if args.rel_tol is not None:
            base.ctrl["rel_tol"] = args.rel_tol
        if args.norm_cap is not None:
            base.ctrl["norm_cap"] = args.norm_cap
        if args.seed is not None:
            base.seed = args.seed
        out = output_dir(args.out or data.get("out"))
    except INPUT_ERRORS as exc:
        log.error("invalid sweep: %s", exc)
        return EXIT_INPUT

    jobs = []
    for i, v in enumerate(values):
        p = copy.deepcopy(base.problem)
        set_path(p, param, v)
        jobs.append((i, v, replace(base, problem=p, out=out)))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]

    with (out / "summary.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS)
        w.writeheader()
        w.writerows(rows)
    bio.dump_json({"parameter": param, "rows": [_json_row(r) for r in rows]}, out / "summary.json")
    for r in rows:
        log.info("%s=%s ok=%s fitted=%s %s predicted=%s %s %s", param, r["value"], r["ok"], r["fitted_kind"],
                 r["fitted_exponent"], r["predicted_kind"], r["predicted_exponent"], r["error"])
    return EXIT_OK if any(r["ok"] for r in rows) else EXIT_NUMERIC


def _json_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, (float, np.floating)) and not np.isfinite(v):
            v = str(float(v))
        elif isinstance(v, np.generic):
            v = v.item()
        out[k] = v
    return out


def cmd_verify(args) -> int:
    from .verify import run_suite

    checks = run_suite()
    for c in checks:
        sys.stdout.write(c.line() + "\n")
    if args.out or os.environ.get("BLOWUPLAB_OUT"):
        bio.dump_json({"checks": [c.to_dict() for c in checks]}, output_dir(args.out) / "verify.json")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_NUMERIC


# -- entry point ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="blowuplab", description="Finite-time blow-up simulation and analysis.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="problem or run-config JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--rel-tol", dest="rel_tol", type=float)
        p.add_argument("--norm-cap", dest="norm_cap", type=float)
        p.add_argument("--max-steps", dest="max_steps", type=int)
        p.add_argument("--seed", type=int, help="seed for kernel sampling")

    p = sub.add_parser("simulate", help="integrate a problem and write its trajectory")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="analyze a trajectory and write report, series and figures")
    p.add_argument("--trajectory", required=True, help="trajectory CSV written by simulate")
    common(p, config_required=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep", help="simulate and analyze over a parameter grid")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the built-in property suite")
    p.add_argument("--out", help="also write verify.json here")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; 2 means early stop here
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
