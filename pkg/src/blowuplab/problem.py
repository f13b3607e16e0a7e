"""Problem definitions: general, forced and reference equations.

``general``    y' = H(y) A y + G(t, y)
``forced``     y' = H(y) A y + f(t)
``reference``  y' = a |y|^alpha y + f(t)

Also houses manufactured solutions (prescribed exact trajectories whose
implied forcing defines a test problem) and the blow-up threshold constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import homogeneous as hom
from .envelope import Envelope
from .errors import ConfigError, CorrectorVanishes, UnboundedPerturbation, ZeroState
from .spectral import SpectralData, decompose

KINDS = ("general", "forced", "reference")
PERTURBATIONS = ("zero", "power", "log", "linear", "custom")

Vector = np.ndarray
Forcing = Callable[[float], Vector]


# -- perturbations G(t, x) --------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Autonomous-or-not perturbation ``G(t, x)`` with a known size bound.

    power   ``M |x|^(alpha - delta) B x`` with ``|B| = 1``, so ``|G| <= M |x|^(1 + alpha - delta)``
    log     ``M |x|^alpha x / ln(max(|x|, r_log))^p``
    linear  ``c x``
    custom  any callable; no size bound is known
    """

    family: str
    alpha: float
    M: float = 0.0
    delta: float | None = None
    p: float | None = None
    c: float = 0.0
    r_log: float = math.e
    B: np.ndarray | None = None
    func: Callable[[float, Vector], Vector] | None = None

    def __post_init__(self):
        if self.family not in PERTURBATIONS:
            raise ValueError(f"unknown perturbation family {self.family!r}")
        if self.family == "power" and not (self.delta and self.delta > 0):
            raise ValueError("power perturbation needs delta > 0")
        if self.family == "log" and not (self.p and self.p > 0 and self.r_log > 1.0):
            raise ValueError("log perturbation needs p > 0 and r_log > 1")
        if self.family == "custom" and self.func is None:
            raise ValueError("custom perturbation needs a callable")

    def __call__(self, t: float, x: Vector) -> Vector:
        fam = self.family
        if fam == "zero":
            return np.zeros_like(x)
        if fam == "linear":
            return self.c * x
        if fam == "custom":
            return np.asarray(self.func(t, x), dtype=float)
        nx = float(np.linalg.norm(x))
        if fam == "power":
            Bx = x if self.B is None else self.B @ x
            return self.M * nx ** (self.alpha - self.delta) * Bx
        return self.M * nx**self.alpha * x / math.log(max(nx, self.r_log)) ** self.p

    def ratio_bound(self, radius: float) -> float:
        """Upper bound of ``|G(t, x)| / |x|^(1+alpha)`` at ``|x| = radius``."""
        fam = self.family
        if fam == "zero":
            return 0.0
        if fam == "power":
            return self.M * radius ** (-self.delta)
        if fam == "log":
            return self.M / math.log(max(radius, self.r_log)) ** self.p
        if fam == "linear":
            return abs(self.c) * radius ** (-self.alpha)
        raise UnboundedPerturbation("custom perturbation carries no size bound")

    def radius_for(self, a: float) -> float:
        """A radius beyond which ``|G|/|x|^(1+alpha) <= a``; 1 when G vanishes."""
        fam = self.family
        if fam == "zero" or (fam in ("power", "log") and self.M == 0.0) or (fam == "linear" and self.c == 0.0):
            return 1.0
        if fam == "power":
            return (self.M / a) ** (1.0 / self.delta)
        if fam == "log":
            return math.exp((self.M / a) ** (1.0 / self.p))
        if fam == "linear":
            return (abs(self.c) / a) ** (1.0 / self.alpha)
        raise UnboundedPerturbation("custom perturbation carries no size bound")

    def to_dict(self) -> dict:
        params = {"power": {"M": self.M, "delta": self.delta}, "log": {"M": self.M, "p": self.p, "r_log": self.r_log},
                  "linear": {"c": self.c}}.get(self.family, {})
        if self.family == "power" and self.B is not None:
            params["B"] = self.B.tolist()
        return {"family": self.family, "params": params}


def make_perturbation(family: str, alpha: float, params: dict | None = None, func=None) -> Perturbation:
    params = dict(params or {})
    if family == "power":
        B = params.get("B")
        if B is not None:
            B = np.array(B, dtype=float)
            B = B / np.linalg.norm(B, 2)
        return Perturbation("power", alpha, M=float(params.get("M", 1.0)), delta=float(params["delta"]), B=B)
    if family == "log":
        return Perturbation("log", alpha, M=float(params.get("M", 1.0)), p=float(params["p"]),
                            r_log=float(params.get("r_log", math.e)))
    if family == "linear":
        return Perturbation("linear", alpha, c=float(params.get("c", 1.0)))
    if family == "custom":
        return Perturbation("custom", alpha, func=func)
    return Perturbation(family, alpha)


# -- manufactured solutions -------------------------------------------------


@dataclass(frozen=True)
class Corrector:
    """Curve ``u(s)`` in the remaining time ``s = Tstar - t`` with ``u -> xi`` as ``s -> 0``.

    constant    ``xi``
    power       ``xi (1 + c s^delta)``
    orthogonal  ``xi + c s^delta w``
    log         ``xi (1 + c |ln s|^-p)``
    custom      ``func(s)``; derivative by 5-point central differences
    """

    kind: str
    xi: np.ndarray
    c: float = 1.0
    delta: float | None = None
    p: float | None = None
    w: np.ndarray | None = None
    func: Callable[[float], Vector] | None = None

    def u(self, s: float) -> Vector:
        k = self.kind
        if k == "constant":
            return self.xi.copy()
        if k == "power":
            return self.xi * (1.0 + self.c * s**self.delta)
        if k == "orthogonal":
            return self.xi + self.c * s**self.delta * self.w
        if k == "log":
            return self.xi * (1.0 + self.c * abs(math.log(s)) ** (-self.p))
        return np.asarray(self.func(s), dtype=float)

    def du(self, s: float) -> Vector:
        k = self.kind
        if k == "constant":
            return np.zeros_like(self.xi)
        if k == "power":
            return self.xi * (self.c * self.delta * s ** (self.delta - 1.0))
        if k == "orthogonal":
            return self.c * self.delta * s ** (self.delta - 1.0) * self.w
        if k == "log":
            L = -math.log(s)
            return self.xi * (self.c * self.p * L ** (-self.p - 1.0) / s)
        h = 1e-4 * s
        return (-self.u(s + 2 * h) + 8 * self.u(s + h) - 8 * self.u(s - h) + self.u(s - 2 * h)) / (12.0 * h)

    def envelope_family(self) -> tuple[str, float | None]:
        """Family and exponent the implied forcing envelope decays with."""
        if self.kind == "constant":
            return "zero", None
        if self.kind in ("power", "orthogonal"):
            return "power", self.delta
        if self.kind == "log":
            return "log", self.p
        return "table", None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "c": self.c}
        if self.delta is not None:
            d["delta"] = self.delta
        if self.p is not None:
            d["p"] = self.p
        if self.w is not None:
            d["w"] = self.w.tolist()
        return d


def make_corrector(kind: str, xi, **params) -> Corrector:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if kind not in ("constant", "power", "orthogonal", "log", "custom"):
        raise ValueError(f"unknown corrector kind {kind!r}")
    w = params.get("w")
    if kind == "orthogonal":
        if w is None:
            raise ValueError("orthogonal corrector needs a direction w")
        w = np.atleast_1d(np.asarray(w, dtype=float))
        w = w - (w @ xi) / (xi @ xi) * xi
        if np.linalg.norm(w) == 0.0:
            raise ValueError("w must not be parallel to xi")
        w = w / np.linalg.norm(w)
    if kind in ("power", "orthogonal") and not params.get("delta", 0) > 0:
        raise ValueError(f"{kind} corrector needs delta > 0")
    if kind == "log" and not params.get("p", 0) > 0:
        raise ValueError("log corrector needs p > 0")
    return Corrector(kind, xi, c=float(params.get("c", 1.0)), delta=params.get("delta"), p=params.get("p"), w=w,
                     func=params.get("func"))


@dataclass(frozen=True)
class Manufactured:
    """Exact solution ``y(t) = (Tstar - t)^(-1/alpha) u(Tstar - t)`` and its implied forcing."""

    corrector: Corrector
    Tstar: float
    alpha: float
    A: np.ndarray
    h: hom.HomogeneousFn

    @property
    def xi(self) -> np.ndarray:
        return self.corrector.xi

    def y_exact(self, t: float, t_lo: float = 0.0) -> Vector:
        s = (self.Tstar - t) - t_lo
        return s ** (-1.0 / self.alpha) * self.corrector.u(s)

    def forcing(self, t: float, t_lo: float = 0.0) -> Vector:
        # y' - H(y) A y written as s^(-1-1/alpha) (u/alpha - s u' - H(u) A u)
        s = (self.Tstar - t) - t_lo
        u = self.corrector.u(s)
        inner = u / self.alpha - s * self.corrector.du(s) - hom.evaluate(self.h, u) * (self.A @ u)
        return s ** (-1.0 - 1.0 / self.alpha) * inner

    def implied_E0(self, t: float) -> float:
        y = self.y_exact(t)
        return float(np.linalg.norm(self.forcing(t)) / np.linalg.norm(y) ** (1.0 + self.alpha))

    def to_dict(self) -> dict:
        return {"Tstar": self.Tstar, "xi": self.xi.tolist(), "corrector": self.corrector.to_dict()}


def profile_scale(v, Lambda: float, alpha: float, h: hom.HomogeneousFn) -> np.ndarray:
    """Rescale the direction ``v`` so that ``alpha Lambda H(xi) = 1``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return v * (alpha * Lambda * hom.evaluate(h, v)) ** (-1.0 / alpha)


# -- problem spec -----------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    kind: str
    sd: SpectralData
    h: hom.HomogeneousFn
    t0: float = 0.0
    y0: np.ndarray | None = None
    G: Perturbation | None = None
    f: Forcing | None = None
    a: float | None = None
    envelope: dict | None = None  # family + params, anchored once Tstar is known
    oracle: Manufactured | None = None
    source: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return self.h.degree

    @property
    def dim(self) -> int:
        return self.sd.dim

    @property
    def A(self) -> np.ndarray:
        return self.sd.matrix

    def forcing_at(self, t: float, y: Vector, t_lo: float = 0.0) -> Vector:
        """The perturbation term actually added to ``H(y) A y``.

        ``t_lo`` is the low-order part of a compensated time; manufactured
        forcings use it to resolve ``Tstar - t`` below the spacing of doubles.
        """
        if self.kind == "general":
            return self.G(t + t_lo, y) if self.G is not None else np.zeros_like(y)
        if self.oracle is not None:
            return self.oracle.forcing(t, t_lo)
        return self.f(t + t_lo) if self.f is not None else np.zeros_like(y)


def rhs(spec: ProblemSpec, t: float, y: Vector, t_lo: float = 0.0) -> Vector:
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        raise ZeroState(f"state reached the origin at t = {t!r}")
    if spec.kind == "reference":
        core = spec.a * ny**spec.alpha * y
    else:
        core = hom.evaluate(spec.h, y) * (spec.A @ y)
    return core + spec.forcing_at(t, y, t_lo)


def general(A, h: hom.HomogeneousFn, G: Perturbation | None = None, t0: float = 0.0, y0=None, **kw) -> ProblemSpec:
    sd = A if isinstance(A, SpectralData) else decompose(A)
    h = h if h.c1 is not None else h.with_bounds(sd.dim)
    return ProblemSpec("general", sd, h, t0=t0, y0=_vec(y0), G=G or Perturbation("zero", h.degree), **kw)


def forced(A, h: hom.HomogeneousFn, f: Forcing | None = None, t0: float = 0.0, y0=None, **kw) -> ProblemSpec:
    sd = A if isinstance(A, SpectralData) else decompose(A)
    h = h if h.c1 is not None else h.with_bounds(sd.dim)
    return ProblemSpec("forced", sd, h, t0=t0, y0=_vec(y0), f=f, **kw)


def reference(a: float, alpha: float, f: Forcing | None = None, t0: float = 0.0, y0=None, dim: int = 1, **kw) -> ProblemSpec:
    """``y' = a |y|^alpha y + f(t)``, stored as ``A = a I`` with the euclidean kernel."""
    if not a > 0:
        raise ValueError("a must be positive")
    sd = decompose(a * np.eye(dim))
    h = hom.euclidean(alpha).with_bounds(dim)
    return ProblemSpec("reference", sd, h, t0=t0, y0=_vec(y0), f=f, a=float(a), **kw)


def manufactured(corrector: Corrector, Tstar: float, A, h: hom.HomogeneousFn, t0: float = 0.0,
                 table_points: int = 241) -> tuple[ProblemSpec, Manufactured]:
    """Forced problem whose exact solution is ``(Tstar - t)^(-1/alpha) u``.

    The implied envelope ``|f|/|y|^(1+alpha)`` is tabulated on a logarithmic
    grid in ``Tstar - t`` and attached to the returned ProblemSpec.
    """
    sd = A if isinstance(A, SpectralData) else decompose(A)
    h = h if h.c1 is not None else h.with_bounds(sd.dim)
    if corrector.xi.size != sd.dim:
        raise ValueError("corrector dimension does not match A")
    if not Tstar > t0:
        raise ValueError("Tstar must exceed t0")
    if corrector.kind == "log" and Tstar - t0 >= 1.0:
        raise ValueError("log corrector requires Tstar - t0 < 1")
    span = Tstar - t0
    s_grid = span * np.logspace(0.0, -10.0, table_points)
    prev = None
    for s in s_grid:
        u = corrector.u(float(s))
        # a sign flip between neighbours means u passed through zero in between
        if np.linalg.norm(u) <= 1e-12 * max(1.0, np.linalg.norm(corrector.xi)) or (prev is not None and u @ prev <= 0):
            raise CorrectorVanishes(f"u vanishes near Tstar - t = {s:.3g}")
        prev = u
    if np.linalg.norm(corrector.xi) == 0.0:
        raise CorrectorVanishes("limit profile is zero")

    m = Manufactured(corrector, float(Tstar), h.degree, sd.matrix, h)
    times = Tstar - s_grid
    E0 = np.array([m.implied_E0(float(t)) for t in times])
    family, exponent = corrector.envelope_family()
    envelope = {"family": family, "table_s": s_grid[::-1].tolist(), "table_E0": E0[::-1].tolist()}
    if family == "power":
        envelope["delta"] = exponent
    elif family == "log":
        envelope["p"] = exponent
    spec = ProblemSpec("forced", sd, h, t0=float(t0), y0=m.y_exact(t0), f=m.forcing, envelope=envelope, oracle=m)
    return spec, m


# -- envelopes attached to a problem ---------------------------------------


def attached_envelope(spec: ProblemSpec, Tstar: float, xi_norm: float | None = None) -> Envelope | None:
    """Forcing envelope anchored at ``Tstar`` in the family the theory uses.

    For general problems the size bound of ``G`` is converted with
    ``|y| ~ |xi| s^(-1/alpha)``; tabulated manufactured envelopes keep their
    analytic family when the corrector has one, with the amplitude fitted.
    """
    alpha = spec.alpha
    t0 = spec.t0
    if spec.kind == "general":
        G = spec.G
        if G is None or G.family == "zero":
            return Envelope("zero", Tstar, t0)
        if G.family == "custom":
            return None
        r = xi_norm if xi_norm else 1.0
        if G.family == "power":
            return Envelope("power", Tstar, t0, M=G.M * r ** (-G.delta), delta=G.delta / alpha)
        if G.family == "linear":
            return Envelope("power", Tstar, t0, M=abs(G.c) * r ** (-alpha), delta=1.0) if G.c else Envelope("zero", Tstar, t0)
        if Tstar - t0 >= 1.0:
            return None
        return Envelope("log", Tstar, t0, M=G.M * alpha**G.p, p=G.p)

    env = spec.envelope
    if env is None:
        return Envelope("zero", Tstar, t0) if spec.f is None else None
    fam = env["family"]
    if fam == "zero":
        return Envelope("zero", Tstar, t0)
    if "table_s" in env:
        table = Envelope("table", Tstar, t0, table_s=np.array(env["table_s"]), table_E0=np.array(env["table_E0"]))
        if fam == "power":
            s, v = table.table_s, table.table_E0
            M = float(np.median(v / s ** env["delta"]))
            return Envelope("power", Tstar, t0, M=M, delta=env["delta"])
        if fam == "log":
            s, v = table.table_s, table.table_E0
            M = float(np.max(v * np.abs(np.log(s)) ** env["p"]))
            return Envelope("log", Tstar, t0, M=M, p=env["p"])
        return table
    return Envelope(fam, Tstar, t0, M=float(env.get("M", 1.0)), delta=env.get("delta"), p=env.get("p"))


# -- blow-up threshold -----------------------------------------------------


@dataclass(frozen=True)
class BlowupThreshold:
    a0: float
    r_star: float
    r0: float
    t0: float
    alpha: float
    symmetric: bool
    norm_S: float = 1.0
    S: np.ndarray | None = None

    def Tstar_upper(self, y0) -> float:
        """Latest possible blow-up time for a run started at ``y0`` with ``|y0| >= r0``.

        Accepts a norm in the symmetric case; the conjugated bound needs the vector.
        """
        y0 = np.atleast_1d(np.asarray(y0, dtype=float))
        if self.symmetric:
            n0 = float(np.linalg.norm(y0)) if y0.size > 1 else abs(float(y0[0]))
        else:
            if self.S is None or y0.size != self.S.shape[0]:
                raise ValueError("the conjugated bound needs the initial vector")
            n0 = float(np.linalg.norm(self.S @ y0))
        return self.t0 + n0 ** (-self.alpha) / (self.alpha * self.a0)

    def to_dict(self) -> dict:
        return {"a0": self.a0, "r_star": self.r_star, "r0": self.r0, "symmetric": self.symmetric}


def blowup_threshold(spec: ProblemSpec) -> BlowupThreshold:
    """``a0 = c1 Lambda_1 / 2``, the radius where ``|G| <= a0 |x|^(1+alpha)`` and ``r0 = 4 r_star``.

    For non-symmetric ``A`` the constants come from the conjugated system
    ``z = S y``, and ``r_star`` is converted back to a radius in ``y``.
    """
    if spec.kind != "general":
        raise ValueError("threshold is defined for general problems")
    G = spec.G or Perturbation("zero", spec.alpha)
    sd, alpha = spec.sd, spec.alpha
    if sd.is_symmetric:
        a0 = spec.h.c1 * sd.lowest / 2.0
        r_star = G.radius_for(a0)
        return BlowupThreshold(a0, r_star, 4.0 * r_star, spec.t0, alpha, True)
    ht = hom.conjugated(spec.h, sd.conjugator_inverse).with_bounds(sd.dim)
    a0 = ht.c1 * sd.lowest / 2.0
    nS, nSi = sd.norm_S, sd.norm_S_inv
    if G.family == "zero":
        r_star = 1.0
    else:
        r_x = G.radius_for(a0 / (nS * nSi ** (1.0 + alpha)))
        r_star = nSi * nS * r_x
    return BlowupThreshold(a0, r_star, 4.0 * r_star, spec.t0, alpha, False, nS, np.array(sd.conjugator))


# -- config round trip -----------------------------------------------------


def _vec(x):
    if x is None:
        return None
    return np.atleast_1d(np.asarray(x, dtype=float))


def from_dict(d: dict) -> ProblemSpec:
    """Build a problem from its JSON form; raises ConfigError on schema problems."""
    try:
        return _from_dict(d)
    except ConfigError:
        raise
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed problem: {exc!r}") from exc


def _from_dict(d: dict) -> ProblemSpec:
    kind = d.get("kind", "general")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    t0 = float(d.get("t0", 0.0))
    Hd = d.get("H", {})
    alpha = float(Hd.get("alpha", d.get("alpha", 1.0)))

    if kind == "reference":
        dim = len(np.atleast_1d(d["y0"])) if "y0" in d else int(d.get("dim", 1))
        f = _forcing(d.get("forcing"), dim)
        spec = reference(float(d["a"]), alpha, f=f, t0=t0, y0=d.get("y0"), dim=dim,
                         envelope=d.get("envelope"), source=d)
        return spec

    A = np.array(d["matrix"], dtype=float)
    sd = decompose(A, tol_spec=float(d.get("tol_spec", 1e-8)))
    h = hom.make_kernel(Hd.get("kernel", "euclidean"), alpha, Hd.get("params")).with_bounds(
        sd.dim, seed=int(d.get("seed", 0)))

    if kind == "general":
        pd = d.get("perturbation", {"family": "zero"})
        if pd.get("family") == "custom":
            raise ConfigError("custom perturbations can only be built in code")
        G = make_perturbation(pd.get("family", "zero"), alpha, pd.get("params"))
        return ProblemSpec("general", sd, h, t0=t0, y0=_vec(d.get("y0")), G=G, source=d)

    oracle = d.get("oracle")
    if oracle:
        cd = dict(oracle.get("corrector", {"kind": "constant"}))
        ck = cd.pop("kind", "constant")
        xi = oracle.get("xi")
        if xi is None:
            raise ConfigError("oracle needs xi")
        if oracle.get("scale_xi", False):
            lam = float(sd.distinct_eigenvalues[-1] if "Lambda" not in oracle else oracle["Lambda"])
            xi = profile_scale(xi, lam, alpha, h)
        spec, _ = manufactured(make_corrector(ck, xi, **cd), float(oracle["Tstar"]), sd, h, t0=t0)
        if "y0" in d:
            spec = ProblemSpec(spec.kind, sd, h, t0, _vec(d["y0"]), f=spec.f, envelope=spec.envelope,
                               oracle=spec.oracle, source=d)
        else:
            spec = ProblemSpec(spec.kind, sd, h, t0, spec.y0, f=spec.f, envelope=spec.envelope,
                               oracle=spec.oracle, source=d)
        return spec
    f = _forcing(d.get("forcing"), sd.dim)
    return ProblemSpec("forced", sd, h, t0=t0, y0=_vec(d.get("y0")), f=f, envelope=d.get("envelope"), source=d)


def _forcing(fd: dict | None, dim: int) -> Forcing | None:
    if not fd or fd.get("family", "zero") == "zero":
        return None
    if fd["family"] == "constant":
        vec = np.atleast_1d(np.asarray(fd["vector"], dtype=float))
        if vec.size != dim:
            raise ConfigError("constant forcing has the wrong dimension")
        return lambda t: vec.copy()
    raise ConfigError(f"unknown forcing family {fd['family']!r}")
