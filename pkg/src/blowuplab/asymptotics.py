"""Post-processing of blow-up trajectories.

Pipeline: blow-up time from the affine tail of ``|y|^-alpha`` -> Dirichlet
quotient and limiting eigenvalue -> profile ``xi`` of the rescaled solution
``w = (Tstar - t)^(1/alpha) y`` -> eigen-certificate -> decay rate of
``|w - xi|`` -> comparison with the predicted rate.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize

from . import envelope as envl
from . import homogeneous as hom
from .errors import (
    AllErrorsAtNoiseFloor,
    AmbiguousLimit,
    BlowupLabError,
    HypothesisViolated,
    InsufficientGrowth,
    NoDecay,
    NonAffineTail,
    WindowTooShort,
)
from .integrator import BlowupTrajectory
from .problem import ProblemSpec, attached_envelope
from .spectral import SpectralData


@dataclass(frozen=True)
class Options:
    window_decades: float = 2.0  # trailing decades of |y| used for Tstar
    exclude_decades: float = 0.5  # final decades left out of every fit
    skip_decades: float = 1.0  # initial transient left out of whole-run checks
    power_margin: float = 0.05  # preference for the power model
    noise_rel: float | None = None  # relative noise floor; default 10 rel_tol
    holder_radius: float = 0.25
    seed: int = 0


@dataclass(frozen=True)
class TstarEstimate:
    Tstar: float
    uncertainty: float
    offset: float  # Tstar - t_last, resolved below double spacing
    roots: tuple[float, ...]
    window: tuple[int, int]


@dataclass(frozen=True)
class ProfileFit:
    xi: np.ndarray
    offset: float
    kind: str
    exponent: float
    rms: float
    indices: np.ndarray


@dataclass
class AsymptoticsReport:
    Tstar_hat: float
    Tstar_uncertainty: float
    Tstar_affine: float
    Lambda_hat: float | None
    mu: float | None
    Lambda_position: str | None
    v_star: np.ndarray | None
    xi_star: np.ndarray | None
    cert_eigen_residual: float | None
    cert_H_residual: float | None
    fitted_rate: envl.RateModel | None
    predicted_rate: envl.RateModel | None
    window: tuple[int, int]
    hypotheses: dict
    checks: dict
    status: dict
    details: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return all(v == "ok" for k, v in self.status.items() if k in ("Tstar", "Lambda", "profile"))

    def to_dict(self, include_series: bool = False) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if k == "series" and not include_series:
                continue
            out[k] = _jsonable(v)
        out["fitted_rate"] = _jsonable(self.fitted_rate.to_dict()) if self.fitted_rate else None
        out["predicted_rate"] = _jsonable(self.predicted_rate.to_dict()) if self.predicted_rate else None
        return out

    def to_text(self) -> str:
        def fmt(x):
            if x is None:
                return "n/a"
            if isinstance(x, np.ndarray):
                return "[" + ", ".join(f"{v:.10g}" for v in x) + "]"
            return f"{x:.10g}" if isinstance(x, float) else str(x)

        lines = [
            f"Tstar          {fmt(self.Tstar_hat)}  (affine {fmt(self.Tstar_affine)}, +- {fmt(self.Tstar_uncertainty)})",
            f"Lambda         {fmt(self.Lambda_hat)}  ({self.Lambda_position}, gap {fmt(self.mu)})",
            f"xi*            {fmt(self.xi_star)}",
            f"v*             {fmt(self.v_star)}",
            f"certificate    eigen {fmt(self.cert_eigen_residual)}   H {fmt(self.cert_H_residual)}",
        ]
        for label, rate in (("fitted rate", self.fitted_rate), ("predicted", self.predicted_rate)):
            if rate is None:
                lines.append(f"{label:<14} n/a")
            else:
                lines.append(f"{label:<14} {rate.kind} exponent {fmt(rate.exponent)}  amplitude {fmt(rate.amplitude)}")
        lines.append("hypotheses     " + ", ".join(f"{k}={v}" for k, v in self.hypotheses.items()))
        lines.append("checks         " + ", ".join(f"{k}={v}" for k, v in self.checks.items()))
        lines.append("status         " + ", ".join(f"{k}={v}" for k, v in self.status.items()))
        return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


# -- windows ----------------------------------------------------------------


def window_indices(norms: np.ndarray, lo_decades: float, hi_decades: float) -> np.ndarray:
    """Samples with ``|y|`` between ``|y_last|/10^lo`` and ``|y_last|/10^hi``."""
    top = norms[-1]
    return np.flatnonzero((norms >= top / 10**lo_decades) & (norms <= top / 10**hi_decades))


def _analyzable(traj: BlowupTrajectory, decades: float = 3.0) -> None:
    if traj.growth_decades() < decades:
        raise InsufficientGrowth(f"only {traj.growth_decades():.2f} decades of growth (need {decades})")


# -- blow-up time -----------------------------------------------------------


def estimate_Tstar(traj: BlowupTrajectory, alpha: float | None = None, opts: Options = Options()) -> TstarEstimate:
    """Root of a weighted affine fit of ``|y|^-alpha`` against ``t`` over the trailing window.

    The uncertainty is the spread of the roots over three nested sub-windows.
    """
    alpha = traj.alpha if alpha is None else alpha
    _analyzable(traj)
    norms = traj.norms
    x = traj.offsets()
    z = norms ** (-alpha)
    roots = []
    for lo in (opts.window_decades, 0.75 * opts.window_decades + 0.25 * opts.exclude_decades,
               0.5 * (opts.window_decades + opts.exclude_decades)):
        idx = window_indices(norms, lo, opts.exclude_decades)
        if idx.size < 3:
            raise WindowTooShort(f"window with {idx.size} samples")
        # relative residuals: weight 1/z
        wts = 1.0 / z[idx]
        slope, icpt = np.polyfit(x[idx], z[idx], 1, w=wts)
        if slope >= 0:
            raise NonAffineTail("|y|^-alpha is not decreasing over the window")
        roots.append(-icpt / slope)
    offset = roots[0]
    t_last = traj.times[-1] + traj.t_lo[-1]
    Tstar = t_last + offset
    spread = max(roots) - min(roots)
    if offset <= 0:
        raise NonAffineTail("fitted blow-up time precedes the last sample")
    if spread > 1e-3 * (Tstar - traj.t0):
        raise NonAffineTail(f"sub-window roots disagree by {spread:.3g}")
    idx = window_indices(norms, opts.window_decades, opts.exclude_decades)
    return TstarEstimate(Tstar, spread, offset, tuple(roots), (int(idx[0]), int(idx[-1])))


# -- Dirichlet quotient and eigenvalue -------------------------------------


def dirichlet_series(traj_or_states, sd: SpectralData) -> np.ndarray:
    """``y.Ay/|y|^2`` per sample; computed on ``z = S y`` with ``A0`` for non-symmetric ``A``."""
    Y = traj_or_states.states if isinstance(traj_or_states, BlowupTrajectory) else np.atleast_2d(traj_or_states)
    if sd.is_symmetric:
        num = np.einsum("ij,jk,ik->i", Y, sd.matrix, Y)
        return num / np.einsum("ij,ij->i", Y, Y)
    Z = Y @ sd.conjugator.T
    d = np.diag(sd.diagonal)
    return (Z**2 @ d) / np.einsum("ij,ij->i", Z, Z)


def identify_Lambda(lam_series, sd: SpectralData, norms=None) -> tuple[float, float]:
    """Eigenvalue nearest the median of the last decade of ``lambda`` and its gap ``mu``."""
    lam_series = np.asarray(lam_series, dtype=float)
    if norms is not None:
        tail = lam_series[np.asarray(norms) >= np.asarray(norms)[-1] / 10.0]
    else:
        tail = lam_series[-max(1, lam_series.size // 4):]
    med = float(np.median(tail))
    j = int(np.argmin(np.abs(sd.distinct_eigenvalues - med)))
    Lam = float(sd.distinct_eigenvalues[j])
    mu = sd.gap(Lam)
    if math.isfinite(mu) and abs(med - Lam) > mu / 4:
        raise AmbiguousLimit(f"lambda tail median {med:.6g} is not within mu/4 of {Lam:.6g}")
    return Lam, mu


# -- profile ----------------------------------------------------------------


def rescaled(traj: BlowupTrajectory, offset: float, alpha: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``s_i = Tstar - t_i`` and ``w_i = s_i^(1/alpha) y_i`` for ``Tstar = t_last + offset``."""
    alpha = traj.alpha if alpha is None else alpha
    s = offset - traj.offsets()
    return s, s[:, None] ** (1.0 / alpha) * traj.states


def _basis(kind: str, s: np.ndarray) -> np.ndarray:
    return np.log(s) if kind == "power" else np.log(np.abs(np.log(s)))


def _phi(kind: str, s: np.ndarray, expo: float) -> np.ndarray:
    return s**expo if kind == "power" else np.abs(np.log(s)) ** (-expo)


def _difference_scale(w: np.ndarray) -> np.ndarray:
    """Smoothed size of the sample-to-sample change of ``w``: a model-free error scale."""
    d = np.linalg.norm(np.gradient(w, axis=0), axis=1)
    k = min(5, len(d))
    pad = np.pad(d, (k // 2, k // 2), mode="edge")
    return np.median(np.lib.stride_tricks.sliding_window_view(pad, k), axis=1)


def _profile_lsq(x, Y, alpha, offset0, kind, expo, floor, iters=6):
    """Weighted fit of ``w_i = xi + C phi(s_i)`` with a first-order blow-up time shift.

    Moving the blow-up time by ``b`` changes ``w_i`` by ``b w_i / (alpha s_i)``,
    so the shift enters linearly next to ``xi`` and ``C``; a few passes
    re-center the offset.  Weights come from the local change of ``w`` so
    every decade of data counts alike whatever the model.
    """
    n = Y.shape[1]
    off = offset0
    for _ in range(iters):
        s = off - x
        if np.any(s <= 0):
            return math.inf, off, None, None
        w = s[:, None] ** (1.0 / alpha) * Y
        ph = _phi(kind, s, expo)
        wt = 1.0 / (_difference_scale(w) + floor)
        m = len(s)
        D = np.zeros((m * n, 2 * n + 1))
        for k in range(n):
            rows = slice(k * m, (k + 1) * m)
            D[rows, k] = 1.0
            D[rows, n + k] = ph
            D[rows, 2 * n] = -w[:, k] / (alpha * s)
        W = np.tile(wt, n)
        coef, *_ = np.linalg.lstsq(D * W[:, None], w.T.reshape(-1) * W, rcond=None)
        xi, C, b = coef[:n], coef[n:2 * n], coef[2 * n]
        off = off + b
        if abs(b) <= 1e-15 * off:
            break
    s = off - x
    if np.any(s <= 0):
        return math.inf, off, None, None
    w = s[:, None] ** (1.0 / alpha) * Y
    ph = _phi(kind, s, expo)
    r = np.linalg.norm(w - xi - np.outer(ph, C), axis=1) / (_difference_scale(w) + floor)
    return float(np.sqrt(np.mean(r**2))), off, xi, C


def fit_profile(traj: BlowupTrajectory, offset0: float, indices: np.ndarray, floor: float, margin: float = 0.05,
                select: np.ndarray | None = None) -> ProfileFit:
    """Joint estimate of the blow-up time offset and ``xi``.

    The rescaled states are modelled as ``xi + C s^eps`` (power decay) or
    ``xi + C |ln s|^-p`` (logarithmic decay).  For a fixed exponent the fit is
    linear; the exponent is found by a bracketed scalar search.  The two
    families compete on rms with a preference margin for power, over the
    ``select`` samples when given: a short trailing window cannot tell a slow
    power from a logarithm.  The winner is then refitted on ``indices``.
    """
    chosen = _profile_family(traj, offset0, indices if select is None else select, floor, margin, None)
    if select is None:
        return chosen
    try:
        return _profile_family(traj, offset0, indices, floor, margin, chosen.kind)
    except WindowTooShort:
        return chosen


def _profile_family(traj, offset0, indices, floor, margin, only):
    alpha = traj.alpha
    x = traj.offsets()[indices]
    Y = traj.states[indices]
    fits = {}
    for kind, lo, hi in (("power", 0.01, 4.0), ("log", 0.05, 10.0)):
        if only is not None and kind != only:
            continue
        mask = np.ones_like(x, dtype=bool) if kind == "power" else (offset0 - x) < math.exp(-1.0)
        if mask.sum() < 8:
            continue
        xm, Ym = x[mask], Y[mask]
        obj = lambda e: _profile_lsq(xm, Ym, alpha, offset0, kind, e, floor)[0]
        grid = np.geomspace(lo, hi, 25)
        vals = [obj(e) for e in grid]
        j = int(np.argmin(vals))
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(obj, bounds=(a, b), method="bounded", options={"xatol": 1e-6 * b})
        expo = float(res.x) if res.fun <= vals[j] else float(grid[j])
        rms, off, xi, _ = _profile_lsq(xm, Ym, alpha, offset0, kind, expo, floor)
        if xi is not None and math.isfinite(rms):
            fits[kind] = ProfileFit(xi, off, kind, expo, rms, indices[mask])

    if not fits:
        raise WindowTooShort("fewer than 8 usable samples for the profile fit")
    if "log" in fits and "power" in fits:
        return fits["power"] if fits["power"].rms <= (1 + margin) * fits["log"].rms else fits["log"]
    return next(iter(fits.values()))


def projection_diagnostics(traj: BlowupTrajectory, sd: SpectralData, Lambda: float, offset: float, xi: np.ndarray):
    """V1, V2 series plus ``v*`` and ``xi*``.

    For non-symmetric ``A`` both deviations are measured on ``z = S y`` where
    the eigen-projections are orthogonal; ``xi`` itself stays in ``y``.
    """
    Y = traj.states
    if sd.is_symmetric:
        V = Y / np.linalg.norm(Y, axis=1, keepdims=True)
        R = sd.projection(Lambda)
        vstar = xi / np.linalg.norm(xi)
        ref = vstar
    else:
        Z = Y @ sd.conjugator.T
        V = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        R = sd.hat_projection(Lambda)
        zxi = sd.conjugator @ xi
        ref = zxi / np.linalg.norm(zxi)
        vstar = xi / np.linalg.norm(xi)
    V1 = np.linalg.norm(V - V @ R.T, axis=1)
    V2 = np.linalg.norm(V - ref, axis=1)
    return V1, V2, vstar, xi


def verify_certificate(xi, Lambda: float, sd: SpectralData, h: hom.HomogeneousFn, alpha: float | None = None):
    """``(|A xi - Lambda xi| / |xi|, |alpha Lambda H(xi) - 1|)``."""
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    alpha = h.degree if alpha is None else alpha
    eig = float(np.linalg.norm(sd.matrix @ xi - Lambda * xi) / np.linalg.norm(xi))
    return eig, abs(alpha * Lambda * hom.evaluate(h, xi) - 1.0)


# -- rate fitting -----------------------------------------------------------


def fit_rate(times=None, errors=None, Tstar: float | None = None, *, s=None, margin: float = 0.05,
             floor: float | None = None, min_samples: int = 8) -> envl.RateModel:
    """Power fit ``ln err ~ ln s`` against log fit ``ln err ~ ln|ln s|``; smaller rms wins.

    The power model is kept unless the log model beats it by more than
    ``margin``.  Both candidates are reported in ``details``.
    """
    errors = np.asarray(errors, dtype=float)
    s = np.asarray(s if s is not None else Tstar - np.asarray(times, dtype=float), dtype=float)
    if np.any(errors < 0):
        raise ValueError("errors must be nonnegative")
    top = float(errors.max()) if errors.size else 0.0
    thresh = max(1e-12 * top, floor or 0.0)
    keep = (errors > thresh) & (s > 0)
    if keep.sum() < min_samples or top == 0.0:
        raise AllErrorsAtNoiseFloor(f"{int(keep.sum())} samples above the noise floor")
    s, err = s[keep], errors[keep]

    cands = {}
    for kind in ("power", "log"):
        m = np.ones_like(s, dtype=bool) if kind == "power" else s < math.exp(-1.0)
        if m.sum() < min_samples:
            continue
        X = _basis(kind, s[m])
        slope, icpt = np.polyfit(X, np.log(err[m]), 1)
        rms = float(np.sqrt(np.mean((np.log(err[m]) - (icpt + slope * X)) ** 2)))
        expo = slope if kind == "power" else -slope
        cands[kind] = {"exponent": float(expo), "amplitude": float(math.exp(icpt)), "rms": rms, "samples": int(m.sum())}

    if "log" in cands and cands["power"]["rms"] > (1 + margin) * cands["log"]["rms"]:
        kind = "log"
    else:
        kind = "power"
    best = cands[kind]
    if not best["exponent"] > 0:
        raise NoDecay(f"fitted {kind} exponent {best['exponent']:.3g} is not positive")
    return envl.RateModel(kind, best["exponent"], best["amplitude"], best["rms"], details={"candidates": cands})


# -- orchestration ----------------------------------------------------------


def analyze(traj: BlowupTrajectory, spec: ProblemSpec, opts: Options = Options()) -> AsymptoticsReport:
    """Run the full chain and collect a report; stage failures are recorded, not raised."""
    status, hyps, checks, details = {}, {}, {}, {}
    sd, h, alpha = spec.sd, spec.h, spec.alpha
    rel_tol = float(traj.ctrl.get("rel_tol", 1e-10))
    empty = lambda: AsymptoticsReport(math.nan, math.nan, math.nan, None, None, None, None, None, None, None, None,
                                      None, (0, 0), hyps, checks, status, details)

    if traj.stop_reason not in ("NormCap", "StepUnderflow"):
        status["Tstar"] = f"unanalyzed: run stopped by {traj.stop_reason}"
        return empty()
    try:
        est = estimate_Tstar(traj, alpha, opts)
        status["Tstar"] = "ok"
    except BlowupLabError as exc:
        status["Tstar"] = f"{type(exc).__name__}: {exc}"
        return empty()

    norms = traj.norms
    lam = dirichlet_series(traj, sd)
    lam_range = (sd.lowest - 10 * rel_tol * sd.highest, sd.highest * (1 + 10 * rel_tol))
    checks["lambda_in_spectrum_range"] = bool(np.all((lam >= lam_range[0]) & (lam <= lam_range[1])))
    try:
        Lam, mu = identify_Lambda(lam, sd, norms)
        position = sd.position(Lam)
        status["Lambda"] = "ok"
    except BlowupLabError as exc:
        status["Lambda"] = f"{type(exc).__name__}: {exc}"
        Lam = mu = position = None

    body_idx = np.flatnonzero((norms >= norms[0] * 10**opts.skip_decades) & (norms <= norms[-1] / 10**opts.exclude_decades))
    win = window_indices(norms, opts.window_decades, opts.exclude_decades)
    noise_rel = opts.noise_rel if opts.noise_rel is not None else max(10 * rel_tol, 1e-13)
    try:
        _, w0 = rescaled(traj, est.offset)
        floor = noise_rel * float(np.linalg.norm(w0[win[-1]]))
        prof = fit_profile(traj, est.offset, win, floor, opts.power_margin,
                           select=body_idx if body_idx.size >= 8 else None)
        offset, xi = prof.offset, prof.xi
        status["profile"] = "ok"
        details["profile_model"] = {"kind": prof.kind, "exponent": prof.exponent, "rms": prof.rms}
    except BlowupLabError as exc:
        status["profile"] = f"{type(exc).__name__}: {exc}"
        offset = est.offset
        _, w0 = rescaled(traj, offset)
        xi = w0[win].mean(axis=0)
        floor = noise_rel * float(np.linalg.norm(xi))
    t_last = traj.times[-1] + traj.t_lo[-1]
    Tstar = t_last + offset
    details["Tstar_offset_from_last_sample"] = offset

    s, w = rescaled(traj, offset)
    err = np.linalg.norm(w - xi, axis=1)
    series = {"t": traj.times, "s": s, "norm": norms, "lambda": lam, "w_error": err}

    vstar = cert_e = cert_h = None
    if Lam is not None:
        V1, V2, vstar, xi = projection_diagnostics(traj, sd, Lam, offset, xi)
        series["V1"], series["V2"] = V1, V2
        cert_e, cert_h = verify_certificate(xi, Lam, sd, h, alpha)
        wl = w[win[-1]]
        checks["v_star_consistency"] = float(np.linalg.norm(vstar - wl / np.linalg.norm(wl)))
    band = np.linalg.norm(w[win], axis=1) / np.linalg.norm(xi)
    details["band"] = [float(band.min()), float(band.max())]
    checks["two_sided_band"] = bool(band.min() >= 0.5 and band.max() <= 2.0)

    fitted = None
    try:
        fitted = fit_rate(errors=err[win], s=s[win], margin=opts.power_margin, floor=3 * floor)
        status["rate"] = "ok"
    except AllErrorsAtNoiseFloor as exc:
        status["rate"] = "noise-floor"
        details["rate_note"] = str(exc)
    except BlowupLabError as exc:
        status["rate"] = f"{type(exc).__name__}: {exc}"

    predicted = None
    env = None
    try:
        env = attached_envelope(spec, Tstar, float(np.linalg.norm(xi)))
    except (ValueError, BlowupLabError) as exc:
        details["envelope_note"] = str(exc)
    if env is not None and Lam is not None:
        details["envelope"] = {k: v for k, v in env.to_dict().items() if k not in ("s", "E0")}
        predicted = _predict(spec, env, Lam, mu, position, vstar, xi, opts, hyps, details, status)
        if "V1" in series:
            _composite(env, traj, s, series, spec, xi, vstar, opts, hyps, details)
        if spec.kind != "general" and spec.f is not None:
            ratio = np.array([np.linalg.norm(spec.forcing_at(t, y, lo)) / np.linalg.norm(y) ** (1 + alpha)
                              for t, lo, y in zip(traj.times, traj.t_lo, traj.states)])
            bound = env.E0_of_s(np.maximum(s, 1e-300))
            checks["forcing_within_envelope"] = bool(np.all(ratio[body_idx] <= bound[body_idx] * 1.05 + 1e-300))
    elif env is None:
        hyps["envelope"] = "unknown"

    return AsymptoticsReport(
        Tstar_hat=float(Tstar),
        Tstar_uncertainty=float(est.uncertainty),
        Tstar_affine=float(est.Tstar),
        Lambda_hat=Lam,
        mu=mu,
        Lambda_position=position,
        v_star=vstar,
        xi_star=xi,
        cert_eigen_residual=cert_e,
        cert_H_residual=cert_h,
        fitted_rate=fitted,
        predicted_rate=predicted,
        window=(int(win[0]), int(win[-1])),
        hypotheses=hyps,
        checks=checks,
        status=status,
        details=details,
        series=series,
    )


def _theory_kernel(spec: ProblemSpec) -> hom.HomogeneousFn:
    # the rate theory runs on z = S y for non-symmetric A
    if spec.sd.is_symmetric:
        return spec.h
    return hom.conjugated(spec.h, spec.sd.conjugator_inverse).with_bounds(spec.dim)


def _anchor(spec: ProblemSpec, vstar: np.ndarray) -> np.ndarray:
    if spec.sd.is_symmetric:
        return vstar
    z = spec.sd.conjugator @ vstar
    return z / np.linalg.norm(z)


def _predict(spec, env, Lam, mu, position, vstar, xi, opts, hyps, details, status):
    hk = _theory_kernel(spec)
    hol = hom.holder_probe(hk, _anchor(spec, vstar), r=opts.holder_radius, seed=opts.seed)
    details["holder"] = hol.to_dict()
    gamma = hol.gamma
    theta0 = envl.theta0_bound(hk.c1, hk.c2, mu, spec.alpha, spec.sd.highest) if math.isfinite(mu) else math.inf
    details["theta0"] = theta0
    ints = envl.integrals_of(env) if env.family != "log" or env.span < 1 else None
    if ints is not None:
        for name in ("Z1", "Z2", "Z3"):
            hyps[name] = "satisfied" if math.isfinite(getattr(ints, name)) else "violated"
    else:
        for name in ("Z1", "Z2", "Z3"):
            hyps[name] = "unknown"
    if env.family == "log":
        hyps["p_gt_1_plus_1_over_gamma"] = "satisfied" if env.p > 1 + 1 / gamma else "violated"
    try:
        pred = envl.predict_rate(env, gamma, theta0, position)
        status["prediction"] = "ok"
        return pred
    except HypothesisViolated as exc:
        status["prediction"] = f"HypothesisViolated: {exc}"
        return None


def _composite(env, traj, s, series, spec, xi, vstar, opts, hyps, details):
    hk = _theory_kernel(spec)
    hol = hom.holder_probe(hk, _anchor(spec, vstar), r=opts.holder_radius, seed=opts.seed)
    keep = s > 0
    try:
        comp = envl.composite_envelope(env, traj.times[keep], series["V1"][keep], series["V2"][keep], hol,
                                       Tstar=env.Tstar, s=s[keep])
    except BlowupLabError as exc:
        hyps["calZ1"] = "unknown"
        details["composite_note"] = str(exc)
        return
    series["calE0"] = np.where(keep, np.interp(-s, -comp.s, comp.values), np.nan)
    hyps["calZ1"] = "satisfied" if comp.Z1_finite else "violated"
    details["composite_tail_exponent"] = comp.tail_exponent
