"""PNG figures for analysis reports.  Every figure uses the remaining time ``Tstar - t`` as abscissa."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .asymptotics import AsymptoticsReport  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 3.6),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _window_mask(report: AsymptoticsReport, n: int) -> np.ndarray:
    m = np.zeros(n, dtype=bool)
    i0, i1 = report.window
    if i1 > i0:
        m[i0:i1 + 1] = True
    return m


def _model_curve(rate, s: np.ndarray) -> np.ndarray:
    if rate.kind == "power":
        return rate.amplitude * s**rate.exponent
    if rate.kind == "log":
        return rate.amplitude * np.abs(np.log(s)) ** (-rate.exponent)
    return np.full_like(s, np.nan)


def plot_error(report: AsymptoticsReport, path) -> Path | None:
    s, err = report.series.get("s"), report.series.get("w_error")
    if s is None or err is None:
        return None
    ok = (s > 0) & (err > 0)
    win = _window_mask(report, len(s)) & ok
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(s[ok], err[ok], ".", color="0.6", ms=3, label="|w - xi*|")
        ax.loglog(s[win], err[win], ".", color="C0", ms=4, label="analysis window")
        fit = report.fitted_rate
        if fit is not None and fit.kind in ("power", "log") and win.any():
            ss = np.geomspace(s[win].min(), s[win].max(), 50)
            ax.loglog(ss, _model_curve(fit, ss), "-", color="C3",
                      label=f"fit: {fit.kind} {fit.exponent:.3g}")
        ax.set_xlabel("Tstar - t")
        ax.set_ylabel("profile error")
        ax.invert_xaxis()
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_lambda(report: AsymptoticsReport, path) -> Path | None:
    s, lam = report.series.get("s"), report.series.get("lambda")
    if s is None or lam is None:
        return None
    ok = s > 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogx(s[ok], lam[ok], "-", color="C0", label="Dirichlet quotient")
        if report.Lambda_hat is not None:
            ax.axhline(report.Lambda_hat, color="C3", ls="--", lw=1, label=f"Lambda = {report.Lambda_hat:.6g}")
        ax.set_xlabel("Tstar - t")
        ax.set_ylabel("lambda(t)")
        ax.invert_xaxis()
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_projections(report: AsymptoticsReport, path) -> Path | None:
    s = report.series.get("s")
    if s is None or "V1" not in report.series:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for key, color in (("V1", "C0"), ("V2", "C1"), ("calE0", "C2")):
            v = report.series.get(key)
            if v is None:
                continue
            ok = (s > 0) & np.isfinite(v) & (v > 0)
            if ok.any():
                ax.loglog(s[ok], v[ok], "-", color=color, label=key)
        if not ax.lines:
            ax.text(0.5, 0.5, "V1, V2 vanish identically", ha="center", transform=ax.transAxes)
        ax.set_xlabel("Tstar - t")
        ax.set_ylabel("deviation")
        if ax.lines:
            ax.set_xscale("log")
            ax.invert_xaxis()
            ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def plot_growth(report: AsymptoticsReport, alpha: float, path) -> Path | None:
    s, norm = report.series.get("s"), report.series.get("norm")
    if s is None or norm is None:
        return None
    ok = s > 0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(s[ok], norm[ok], ".", color="C0", ms=3, label="|y|")
        if report.xi_star is not None:
            ax.loglog(s[ok], np.linalg.norm(report.xi_star) * s[ok] ** (-1.0 / alpha), "--", color="C3", lw=1,
                      label="|xi*| (Tstar - t)^(-1/alpha)")
        ax.set_xlabel("Tstar - t")
        ax.set_ylabel("|y|")
        ax.invert_xaxis()
        ax.legend()
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return Path(path)


def render_all(report: AsymptoticsReport, alpha: float, outdir) -> list[Path]:
    outdir = Path(outdir)
    made = [
        plot_error(report, outdir / "error.png"),
        plot_lambda(report, outdir / "lambda.png"),
        plot_projections(report, outdir / "projections.png"),
        plot_growth(report, alpha, outdir / "growth.png"),
    ]
    return [p for p in made if p is not None]
