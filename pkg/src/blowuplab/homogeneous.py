"""Positively homogeneous nonlinearities and their numerical probes.

A kernel is specified by its restriction to the unit sphere; the full
function is recovered as ``H(x) = |x|^alpha * H(x/|x|)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import norm, qmc

from .errors import NonPositiveValueDetected, ZeroVector

SphereFn = Callable[[np.ndarray], float]

KERNELS = ("euclidean", "quadratic-form", "p-norm", "custom-polynomial")


@dataclass(frozen=True)
class HomogeneousFn:
    degree: float
    sphere_eval: SphereFn
    name: str = "custom"
    params: dict = field(default_factory=dict)
    c1: float | None = None
    c2: float | None = None
    sample_count: int = 0

    def __call__(self, x) -> float:
        return evaluate(self, x)

    def with_bounds(self, dim: int, samples: int | None = None, seed: int = 0) -> "HomogeneousFn":
        samples = samples or 200 * dim
        c1, c2 = sphere_bounds(self, samples, dim=dim, seed=seed)
        return replace(self, c1=c1, c2=c2, sample_count=samples)

    def describe(self) -> dict:
        return {"kernel": self.name, "alpha": self.degree, "params": _jsonable(self.params), "c1": self.c1, "c2": self.c2}


@dataclass(frozen=True)
class HolderModulus:
    gamma: float
    C: float
    r: float
    anchor: np.ndarray

    def omega(self, s):
        return self.C * np.power(np.asarray(s, dtype=float), self.gamma)

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "C": self.C, "r": self.r, "anchor": np.asarray(self.anchor).tolist()}


def evaluate(h: HomogeneousFn, x) -> float:
    x = np.asarray(x, dtype=float)
    nx = math.sqrt(float(x @ x)) if x.ndim else abs(float(x))
    if nx == 0.0:
        raise ZeroVector("H is undefined at the origin")
    return nx**h.degree * float(h.sphere_eval(x / nx))


# -- kernel registry --------------------------------------------------------


def euclidean(alpha: float) -> HomogeneousFn:
    return HomogeneousFn(alpha, lambda v: 1.0, name="euclidean")


def quadratic_form(alpha: float, D) -> HomogeneousFn:
    D = np.array(D, dtype=float)
    D.setflags(write=False)
    half = alpha / 2.0

    def sphere(v):
        q = float(v @ D @ v)
        return q**half if q > 0.0 else q

    return HomogeneousFn(alpha, sphere, name="quadratic-form", params={"matrix": D})


def p_norm(alpha: float, p: float) -> HomogeneousFn:
    p = float(p)

    def sphere(v):
        return float(np.linalg.norm(v, ord=p)) ** alpha

    return HomogeneousFn(alpha, sphere, name="p-norm", params={"p": p})


def custom_polynomial(alpha: float, terms) -> HomogeneousFn:
    """``H = P^(alpha/m)`` for a homogeneous polynomial ``P`` of degree ``m``.

    ``terms`` is a list of ``[coefficient, [e_1, ..., e_n]]`` monomials.
    """
    coefs = np.array([float(c) for c, _ in terms])
    exps = np.array([list(e) for _, e in terms], dtype=float)
    degrees = exps.sum(axis=1)
    if degrees.size == 0 or np.ptp(degrees) != 0 or degrees[0] <= 0:
        raise ValueError("custom-polynomial terms must share one positive total degree")
    power = alpha / degrees[0]

    def sphere(v):
        val = float(coefs @ np.prod(np.power(v[None, :], exps), axis=1))
        return val**power if val > 0.0 else val

    return HomogeneousFn(alpha, sphere, name="custom-polynomial", params={"terms": [[float(c), list(map(float, e))] for c, e in terms]})


def conjugated(h: HomogeneousFn, S_inv) -> HomogeneousFn:
    """``z -> H(S^{-1} z)``; homogeneous of the same degree."""
    S_inv = np.array(S_inv, dtype=float)

    def sphere(v):
        return evaluate(h, S_inv @ v)

    return HomogeneousFn(h.degree, sphere, name=f"{h.name}∘S^-1", params=dict(h.params))


def make_kernel(name: str, alpha: float, params: dict | None = None) -> HomogeneousFn:
    params = params or {}
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if name == "euclidean":
        return euclidean(alpha)
    if name == "quadratic-form":
        return quadratic_form(alpha, params["matrix"])
    if name == "p-norm":
        return p_norm(alpha, params.get("p", 2.0))
    if name == "custom-polynomial":
        return custom_polynomial(alpha, params["terms"])
    raise ValueError(f"unknown kernel {name!r}; choose from {KERNELS}")


# -- probes -----------------------------------------------------------------


def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic low-discrepancy points on the unit sphere."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    u = qmc.Halton(d=dim, scramble=True, seed=seed).random(count)
    g = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sphere_bounds(h: HomogeneousFn, samples: int, dim: int, seed: int = 0) -> tuple[float, float]:
    """Estimate ``(min, max)`` of H on the unit sphere.

    Low-discrepancy sampling followed by three rounds of local pattern
    search around the extreme samples.
    """
    if samples < 100 * dim:
        raise ValueError(f"need at least {100 * dim} samples for dimension {dim}")
    pts = sphere_points(dim, samples, seed)
    vals = np.array([h.sphere_eval(p) for p in pts])
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0.0):
        bad = pts[np.argmin(np.where(np.isfinite(vals), vals, -np.inf))]
        raise NonPositiveValueDetected(f"kernel is not positive at {bad.tolist()}")
    if dim == 1:
        return float(vals.min()), float(vals.max())

    step = 2.0 * samples ** (-1.0 / (dim - 1))
    lo = _refine(h, pts[np.argsort(vals)[:5]], step, sign=1.0)
    hi = _refine(h, pts[np.argsort(vals)[-5:]], step, sign=-1.0)
    return float(min(lo, vals.min())), float(max(hi, vals.max()))


def _refine(h: HomogeneousFn, starts: np.ndarray, step: float, sign: float) -> float:
    best = np.inf
    dim = starts.shape[1]
    moves = np.vstack([np.eye(dim), -np.eye(dim)])
    for x in starts:
        fx = sign * h.sphere_eval(x)
        s = step
        for _ in range(3):
            improved = True
            while improved:
                improved = False
                for m in moves:
                    y = x + s * m
                    y /= np.linalg.norm(y)
                    fy = sign * h.sphere_eval(y)
                    if fy <= 0 and sign > 0:
                        raise NonPositiveValueDetected(f"kernel is not positive at {y.tolist()}")
                    if fy < fx:
                        x, fx, improved = y, fy, True
            s *= 0.25
        best = min(best, fx)
    return sign * best


def holder_probe(
    h: HomogeneousFn, anchor, r: float = 0.25, samples: int = 700, seed: int = 0, domain: str = "sphere"
) -> HolderModulus:
    """Fit ``|H(x) - H(v)| <= C |x - v|^gamma`` around the unit vector ``v``.

    Probes distances ``r * 2^-k`` (k = 0..6) either along the unit sphere
    (``domain="sphere"``, the modulus used for the composite envelope) or in
    every direction of R^n (``domain="space"``).  The per-distance maximal
    deviation is regressed on the distance in log-log form, the slope is
    clamped to (0, 1] and C is inflated by 1.5 over the worst probed ratio.
    """
    v = np.asarray(anchor, dtype=float).reshape(-1)
    if not 0.0 < r < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise ValueError("anchor must be a unit vector")
    if domain not in ("sphere", "space"):
        raise ValueError("domain must be 'sphere' or 'space'")
    dim = v.size
    h0 = evaluate(h, v)
    radii = r * 2.0 ** -np.arange(7)
    if dim == 1 and domain == "sphere":
        # the only sphere points near v are v itself
        return HolderModulus(gamma=1.0, C=0.0, r=r, anchor=v)

    per_radius = max(samples // len(radii), 4 * dim)
    dirs = sphere_points(dim, per_radius, seed)
    if domain == "sphere":
        dirs = dirs - np.outer(dirs @ v, v)
        lengths = np.linalg.norm(dirs, axis=1)
        dirs = dirs[lengths > 1e-6] / lengths[lengths > 1e-6, None]

    dist, diff = [], []
    for rho in radii:
        if domain == "sphere":
            phi = 2.0 * math.asin(rho / 2.0)
            pts = math.cos(phi) * v + math.sin(phi) * dirs
        else:
            pts = v + rho * dirs
        for x in pts:
            dist.append(rho)
            diff.append(abs(evaluate(h, x) - h0))
    dist, diff = np.array(dist), np.array(diff)

    floor = 1e-13 * max(1.0, abs(h0))
    if np.max(diff) <= floor:
        return HolderModulus(gamma=1.0, C=0.0, r=r, anchor=v)

    maxima = np.array([diff[dist == rho].max() for rho in radii])
    keep = maxima > floor
    slope = np.polyfit(np.log(radii[keep]), np.log(maxima[keep]), 1)[0] if keep.sum() >= 2 else 1.0
    gamma = float(min(max(slope, 1e-3), 1.0))
    C = 1.5 * float(np.max(diff / dist**gamma))
    return HolderModulus(gamma=gamma, C=C, r=r, anchor=v)


def _jsonable(params: dict) -> dict:
    out = {}
    for k, val in params.items():
        out[k] = val.tolist() if isinstance(val, np.ndarray) else val
    return out
