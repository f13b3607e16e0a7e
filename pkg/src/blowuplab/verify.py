"""Built-in property suite run by ``blowuplab verify``.

Each check builds its own small problem, runs it end to end and compares
one measured number against a fixed threshold.  The suite is meant as a
smoke test of an installation; it is lighter than the test suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from . import asymptotics as asy
from . import envelope as envl
from . import homogeneous as hom
from . import integrator as integ
from . import problem as prob
from . import spectral as spec


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{flag}  {self.name:<28} measured {self.measured:.3e}  threshold {self.threshold:.1e}  {self.detail}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = bool(self.passed)
        d["measured"] = float(self.measured)
        if not math.isfinite(d["measured"]):
            d["measured"] = str(d["measured"])
        return d


def _closed_form() -> Check:
    p = prob.reference(1.0, 2.0, y0=[1.0])
    rep = asy.analyze(integ.integrate_blowup(p), p)
    err = max(abs(rep.Tstar_hat - 0.5) / 1e-5, abs(float(np.linalg.norm(rep.xi_star)) - 2**-0.5) / 1e-4)
    return Check("closed-form blow-up", err <= 1.0, err, 1.0, "max of |dT|/1e-5 and |dxi|/1e-4")


def random_symmetric(rng: np.random.Generator, n: int, top_ratio: float = 3.0) -> np.ndarray:
    """Positive definite matrix whose top eigenvalue exceeds the rest by ``top_ratio``."""
    lam = rng.uniform(2.0, 4.0)
    eig = np.append(rng.uniform(0.3, lam / top_ratio, n - 1), lam)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = Q @ np.diag(eig) @ Q.T
    return (A + A.T) / 2


def random_nonsymmetric(rng: np.random.Generator, n: int, cond_max: float = 1e3, top_ratio: float = 3.0) -> np.ndarray:
    lam = rng.uniform(2.0, 4.0)
    eig = np.append(rng.uniform(0.3, lam / top_ratio, n - 1), lam)
    while True:
        S = rng.normal(size=(n, n)) + 2.0 * np.eye(n)
        if np.linalg.cond(S) <= cond_max:
            return np.linalg.solve(S, np.diag(eig) @ S)


def _certificates(count: int = 6, seed: int = 11) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    accepted = 0
    for k in range(count):
        n = int(rng.integers(2, 5))
        A = random_symmetric(rng, n) if k % 2 == 0 else random_nonsymmetric(rng, n)
        p = prob.general(A, hom.euclidean(1.0), y0=rng.normal(size=n))
        rep = asy.analyze(integ.integrate_blowup(p), p)
        if rep.accepted:
            accepted += 1
            worst = max(worst, rep.cert_eigen_residual, rep.cert_H_residual)
    ok = accepted > 0 and worst <= 1e-3
    return Check("certificate residuals", ok, worst, 1e-3, f"{accepted}/{count} accepted")


def _eigen_selection() -> Check:
    p = prob.general(np.diag([1.0, 3.0]), hom.euclidean(1.0), y0=[1.0, 1.0])
    rep = asy.analyze(integ.integrate_blowup(p), p)
    drop = float(-np.min(np.diff(rep.series["lambda"])))
    ok = rep.Lambda_hat == 3.0 and drop <= 10 * 1e-10
    return Check("eigenvalue selection", ok, max(drop, 0.0), 1e-9, f"Lambda {rep.Lambda_hat}")


def _threshold() -> Check:
    p = prob.general([[1.0]], hom.euclidean(1.0), prob.make_perturbation("linear", 1.0, {"c": 1.0}), y0=[8.0])
    th = prob.blowup_threshold(p)
    worst = -math.inf
    for y0 in (8.0, -8.0, 20.0, 200.0):
        tr = integ.integrate_blowup(p, y0=[y0])
        end = tr.times[-1] + tr.t_lo[-1]
        worst = max(worst, (end - th.Tstar_upper(y0)) / (th.Tstar_upper(y0) - p.t0))
        if tr.stop_reason != "NormCap":
            worst = math.inf
    return Check("blow-up threshold", worst < 0 and th.r0 == 8.0, worst, 0.0, "relative margin to Tstar_upper")


def _spectral(count: int = 30, seed: int = 3) -> Check:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 6))
        A = random_nonsymmetric(rng, n, cond_max=1e2, top_ratio=1.5)
        sd = spec.decompose(A)
        scale = np.linalg.norm(A, 2)
        P = sd.projections
        worst = max(worst, np.linalg.norm(sum(P) - np.eye(n), 2))
        worst = max(worst, np.linalg.norm(sum(l * R for l, R in zip(sd.distinct_eigenvalues, P)) - A, 2) / scale)
        for i, Ri in enumerate(P):
            for j, Rj in enumerate(P):
                target = Ri if i == j else 0.0
                worst = max(worst, np.linalg.norm(Ri @ Rj - target, 2))
    return Check("projection identities", worst <= 1e-8, worst, 1e-8, f"{count} matrices")


def _quadrature() -> Check:
    worst = 0.0
    for env in (envl.Envelope("power", 0.5, 0.0, M=1.0, delta=0.5), envl.Envelope("log", 0.5, 0.0, M=1.0, p=3.0)):
        closed = envl.integrals_of(env)
        for s in (1e-6, 1e-3, 0.3):
            t = env.Tstar - s
            num = envl.numeric_integrals(env, t)
            worst = max(worst, abs(num["E1"] / float(closed.E1(t)) - 1), abs(num["E2"] / float(closed.E2(t)) - 1))
    return Check("envelope quadrature", worst <= 1e-6, worst, 1e-6)


def _nonsymmetric() -> Check:
    S = np.array([[1.0, 0.7], [0.0, 1.0]])
    z0 = np.array([1.0, 1.0])
    diag = prob.general(np.diag([1.0, 3.0]), hom.conjugated(hom.euclidean(1.0), np.linalg.inv(S)), y0=z0)
    shear = prob.general(np.linalg.solve(S, np.diag([1.0, 3.0]) @ S), hom.euclidean(1.0), y0=np.linalg.solve(S, z0))
    rd = asy.analyze(integ.integrate_blowup(diag), diag)
    rs = asy.analyze(integ.integrate_blowup(shear), shear)
    dev = max(abs(rd.Lambda_hat - rs.Lambda_hat), float(np.max(np.abs(S @ rs.xi_star - rd.xi_star))))
    return Check("non-symmetric equivalence", dev <= 1e-3, dev, 1e-3)


def _self_convergence() -> Check:
    p, m = prob.manufactured(prob.make_corrector("orthogonal", [0.0, 1 / 3], delta=0.5, w=[1.0, 0.0]), 0.5,
                             np.diag([1.0, 3.0]), hom.euclidean(1.0))
    errs = []
    for tol in (1e-9, 1e-10):
        ctrl = integ.Control(rel_tol=tol, abs_tol=tol * 1e-3, norm_cap=1e3 * float(np.linalg.norm(p.y0)))
        tr = integ.integrate_blowup(p, ctrl=ctrl)
        ex = np.array([m.y_exact(t, lo) for t, lo in zip(tr.times, tr.t_lo)])
        errs.append(float(np.max(np.linalg.norm(tr.states - ex, axis=1) / np.linalg.norm(ex, axis=1))))
    ratio = errs[0] / errs[1]
    return Check("integrator self-convergence", ratio >= 4.0, ratio, 4.0, "error reduction for 10x tighter rel_tol")


def _rate_roundtrip() -> Check:
    rng = np.random.default_rng(0)
    s = np.geomspace(1e-2, 1e-8, 40)
    worst = 0.0
    for kind, expo in (("power", 0.5), ("log", 2.0)):
        clean = 2.0 * s**expo if kind == "power" else 3.0 * np.abs(np.log(s)) ** (-expo)
        noisy = clean * (1 + 0.01 * rng.standard_normal(s.size))
        fit = asy.fit_rate(errors=noisy, s=s, floor=0.0)
        worst = max(worst, abs(fit.exponent / expo - 1) if fit.kind == kind else math.inf)
    return Check("rate fit round trip", worst <= 0.05, worst, 0.05)


CHECKS: tuple[Callable[[], Check], ...] = (
    _closed_form,
    _spectral,
    _quadrature,
    _eigen_selection,
    _threshold,
    _nonsymmetric,
    _certificates,
    _self_convergence,
    _rate_roundtrip,
)


def run_suite(checks=CHECKS) -> list[Check]:
    out = []
    for fn in checks:
        t = time.perf_counter()
        try:
            c = fn()
        except Exception as exc:  # a crashing check is a failed check
            c = Check(fn.__name__.strip("_").replace("_", " "), False, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
        out.append(Check(**{**asdict(c), "seconds": round(time.perf_counter() - t, 3)}))
    return out
