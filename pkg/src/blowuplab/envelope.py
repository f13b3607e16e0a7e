"""Forcing-size envelopes and the integral quantities built from them.

Every envelope is anchored at a blow-up time ``Tstar`` and expressed in the
remaining time ``s = Tstar - t``.  Integrals against ``dt / (Tstar - t)`` are
carried out in ``u = -ln s`` where that weight becomes ``du``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from .errors import DivergentIntegral, HypothesisViolated, InsufficientSamples

FAMILIES = ("power", "log", "zero", "table")


@dataclass(frozen=True)
class Envelope:
    family: str
    Tstar: float
    t0: float
    M: float = 1.0
    delta: float | None = None
    p: float | None = None
    table_s: np.ndarray | None = None  # ascending remaining times
    table_E0: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown envelope family {self.family!r}")
        if not self.Tstar > self.t0:
            raise ValueError("Tstar must exceed t0")
        if self.family == "power" and not (self.delta and self.delta > 0 and self.M > 0):
            raise ValueError("power envelope needs M > 0 and delta > 0")
        if self.family == "log" and not (self.p and self.p > 0 and self.M > 0):
            raise ValueError("log envelope needs M > 0 and p > 0")
        if self.family == "table":
            if self.table_s is None or len(self.table_s) < 2:
                raise ValueError("table envelope needs at least two points")

    @classmethod
    def tabulated(cls, times, values, Tstar: float, t0: float | None = None) -> "Envelope":
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        s = Tstar - times
        order = np.argsort(s)
        s, values = s[order], values[order]
        keep = s > 0
        if t0 is None:
            t0 = float(times.min())
        return cls("table", Tstar=Tstar, t0=t0, table_s=s[keep], table_E0=np.maximum(values[keep], 0.0))

    @property
    def span(self) -> float:
        return self.Tstar - self.t0

    def E0(self, t):
        return self.E0_of_s(self.Tstar - np.asarray(t, dtype=float))

    def E0_of_s(self, s):
        s = np.asarray(s, dtype=float)
        if self.family == "zero":
            return np.zeros_like(s)
        if self.family == "power":
            return self.M * s**self.delta
        if self.family == "log":
            return self.M / np.abs(np.log(s)) ** self.p
        return _table_interp(self, s)

    def E0_of_u(self, u: float) -> float:
        """``E0`` at ``s = exp(-u)``, evaluated without underflowing ``s``."""
        if self.family == "zero":
            return 0.0
        if self.family == "power":
            return self.M * math.exp(-self.delta * u)
        if self.family == "log":
            return self.M * abs(u) ** (-self.p)
        if u > 690.0:
            K, b = self.tail_fit()
            return K * math.exp(-b * u)
        return float(_table_interp(self, np.array(math.exp(-u))))

    def tail_fit(self) -> tuple[float, float]:
        """``(K, b)`` with ``E0 ~ K s^b`` fitted on the smallest-s table entries."""
        return _tail_fit(self.table_s, self.table_E0)

    def to_dict(self) -> dict:
        d = {"family": self.family, "Tstar": self.Tstar, "t0": self.t0, "M": self.M}
        if self.delta is not None:
            d["delta"] = self.delta
        if self.p is not None:
            d["p"] = self.p
        if self.family == "table":
            d["s"] = self.table_s.tolist()
            d["E0"] = self.table_E0.tolist()
        return d


@dataclass(frozen=True)
class EnvelopeIntegrals:
    E1: Callable
    E2: Callable
    e_star: Callable
    Z1: float
    Z2: float
    Z3: float
    analytic: bool

    def finite(self) -> dict:
        return {"Z1": math.isfinite(self.Z1), "Z2": math.isfinite(self.Z2), "Z3": math.isfinite(self.Z3)}


@dataclass(frozen=True)
class RateModel:
    kind: str  # "power" or "log"
    exponent: float
    amplitude: float = float("nan")
    fit_residual: float = float("nan")
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("power", "log"):
            raise ValueError(f"unknown rate kind {self.kind!r}")
        if not self.exponent > 0:
            raise ValueError("rate exponent must be positive")

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "power":
            return self.amplitude * s**self.exponent
        return self.amplitude * np.abs(np.log(s)) ** (-self.exponent)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "fit_residual": self.fit_residual,
            "details": dict(self.details),
        }


# -- table helpers ----------------------------------------------------------

_TINY = 1e-300


def _tail_fit(s: np.ndarray, vals: np.ndarray, count: int = 6) -> tuple[float, float]:
    k = min(count, len(s))
    ls = np.log(s[:k])
    lv = np.log(np.maximum(vals[:k], _TINY))
    if k < 2 or np.ptp(ls) == 0:
        return float(vals[0]), 0.0
    b, a = np.polyfit(ls, lv, 1)
    return float(math.exp(a)), float(b)


def _table_interp(env: Envelope, s: np.ndarray) -> np.ndarray:
    ls = np.log(env.table_s)
    lv = np.log(np.maximum(env.table_E0, _TINY))
    x = np.log(np.maximum(s, _TINY))
    out = np.exp(np.interp(x, ls, lv))
    K, b = env.tail_fit()
    below = s < env.table_s[0]
    if np.any(below):
        out = np.where(below, K * np.maximum(s, 0.0) ** b, out)
    return out


def _segment_integrals(u: np.ndarray, logv: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Exact integrals of ``exp(logv + shift*u)`` over consecutive u-segments,
    with ``logv`` linear inside each segment."""
    du = np.diff(u)
    f0 = logv[:-1] + shift * u[:-1]
    f1 = logv[1:] + shift * u[1:]
    slope = (f1 - f0) / du
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        exact = (np.exp(f1) - np.exp(f0)) / slope
    flat = np.abs(slope * du) < 1e-8
    return np.where(flat, du * np.exp(0.5 * (f0 + f1)), exact)


# -- integrals --------------------------------------------------------------


def integrals_of(env: Envelope) -> EnvelopeIntegrals:
    """Closed forms for power/log/zero envelopes, exact quadrature of the
    log-linear interpolant (in ``u = -ln s``) for tables."""
    s0 = env.span
    if env.family == "zero":
        zero = lambda t: np.zeros_like(np.asarray(t, dtype=float))
        return EnvelopeIntegrals(zero, zero, zero, 0.0, 0.0, 0.0, analytic=True)

    if env.family == "power":
        M, d = env.M, env.delta
        E1 = lambda t: M * (env.Tstar - np.asarray(t, dtype=float)) ** d / d
        E2 = lambda t: M * (env.Tstar - np.asarray(t, dtype=float)) ** d / math.sqrt(2 * d)
        es = lambda t: M * (env.Tstar - np.asarray(t, dtype=float)) ** d / (d + 1)
        return EnvelopeIntegrals(E1, E2, es, M * s0**d / d, M**2 * s0 ** (2 * d) / (2 * d), M * s0**d / d**2, True)

    if env.family == "log":
        if s0 >= 1.0:
            raise ValueError("log envelope requires Tstar - t0 < 1")
        M, p = env.M, env.p
        L = lambda t: np.abs(np.log(env.Tstar - np.asarray(t, dtype=float)))
        inf = float("inf")
        L0 = abs(math.log(s0))
        E1 = (lambda t: M / ((p - 1) * L(t) ** (p - 1))) if p > 1 else (lambda t: np.full_like(L(t), inf))
        E2 = (lambda t: M / (math.sqrt(2 * p - 1) * L(t) ** (p - 0.5))) if p > 0.5 else (lambda t: np.full_like(L(t), inf))

        def es(t):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            out = np.array([_log_average(M, p, float(Li)) for Li in L(t)])
            return out

        Z1 = M / ((p - 1) * L0 ** (p - 1)) if p > 1 else inf
        Z2 = M**2 / ((2 * p - 1) * L0 ** (2 * p - 1)) if p > 0.5 else inf
        Z3 = M / ((p - 1) * (p - 2) * L0 ** (p - 2)) if p > 2 else inf
        return EnvelopeIntegrals(E1, E2, es, Z1, Z2, Z3, True)

    return _table_integrals(env)


def _log_average(M: float, p: float, L: float) -> float:
    # (1/s) * int_0^s M |ln r|^-p dr  with r = e^-v:  e^L * int_L^inf M v^-p e^-v dv
    val, _ = integrate.quad(lambda v: M * v ** (-p) * math.exp(L - v), L, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    return val


def _table_integrals(env: Envelope) -> EnvelopeIntegrals:
    s = env.table_s
    vals = np.maximum(env.table_E0, _TINY)
    u = -np.log(s)[::-1]  # ascending u == descending s
    lv = np.log(vals)[::-1]
    K, b = env.tail_fit()
    s_min = float(s[0])
    inf = float("inf")

    def cumulative(logv, shift, tail):
        seg = _segment_integrals(u, logv, shift)
        # integral from u_i to u_max, then tail beyond u_max
        from_node = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]]) + tail
        return from_node

    tail1 = K * s_min**b / b if b > 0 else inf
    tail2 = K**2 * s_min ** (2 * b) / (2 * b) if b > 0 else inf
    tail_avg = K * s_min ** (b + 1) / (b + 1) if b > -1 else inf
    I1 = cumulative(lv, 0.0, tail1)
    I2 = cumulative(2 * lv, 0.0, tail2)
    Iavg = cumulative(lv, -1.0, tail_avg)  # e^-u du == ds

    def at(t, nodes, kind):
        t = np.asarray(t, dtype=float)
        uq = -np.log(np.maximum(env.Tstar - t, _TINY))
        out = np.empty_like(np.atleast_1d(uq))
        for k, q in enumerate(np.atleast_1d(uq)):
            out[k] = _partial(q, u, lv, nodes, kind, K, b)
        return out if t.ndim else out[0]

    E1 = lambda t: at(t, I1, 1)
    E2 = lambda t: np.sqrt(at(t, I2, 2))
    es = lambda t: at(t, Iavg, 0) / (env.Tstar - np.asarray(t, dtype=float))

    Z1 = float(E1(env.t0))
    Z2 = float(E2(env.t0)) ** 2
    if math.isfinite(Z1):
        # Z3 = int E1(tau)/(Tstar - tau) d tau, quadrature in u over the interpolant
        u0 = -math.log(env.span)
        Z3, _ = integrate.quad(lambda q: float(E1(env.Tstar - math.exp(-q))), u0, np.inf, limit=200, epsrel=1e-8)
    else:
        Z3 = inf
    return EnvelopeIntegrals(E1, E2, es, Z1, Z2, float(Z3), analytic=False)


def _partial(q, u, lv, nodes, kind, K, b):
    """Integral from u=q to infinity for one of the table integrands."""
    mult = 2.0 if kind == 2 else 1.0
    shift = -1.0 if kind == 0 else 0.0
    if q >= u[-1]:
        # inside the extrapolated tail: K s^b with s = e^-q
        s = math.exp(-q)
        if kind == 1:
            return K * s**b / b if b > 0 else float("inf")
        if kind == 2:
            return K**2 * s ** (2 * b) / (2 * b) if b > 0 else float("inf")
        return K * s ** (b + 1) / (b + 1)
    if q <= u[0]:
        lead = 0.0
        if q < u[0]:
            # constant continuation beyond the largest tabulated s
            v = math.exp(mult * lv[0])
            lead = v * (u[0] - q) if kind != 0 else v * (math.exp(-q) - math.exp(-u[0]))
        return lead + nodes[0]
    i = int(np.searchsorted(u, q)) - 1
    frac = (q - u[i]) / (u[i + 1] - u[i])
    lq = lv[i] + frac * (lv[i + 1] - lv[i])
    piece = _segment_integrals(np.array([q, u[i + 1]]), mult * np.array([lq, lv[i + 1]]), shift)[0]
    return piece + nodes[i + 1]


def _quad_to_infinity(f: Callable[[float], float], L: float, epsrel: float) -> float:
    """``int_L^inf f(q) dq`` for integrands decaying exponentially or algebraically.

    ``q = L e^v`` turns algebraic decay into exponential decay in ``v``.
    """
    kw = dict(epsabs=0.0, epsrel=epsrel, limit=400)
    head = 0.0
    if L < 1.0:
        head, _ = integrate.quad(f, L, 1.0, **kw)
        L = 1.0

    def g(v):
        q = L * math.exp(min(v, 700.0))
        if v > 700.0 or not math.isfinite(q):
            return 0.0
        val = f(q) * q
        return val if math.isfinite(val) else 0.0

    tail, _ = integrate.quad(g, 0.0, np.inf, **kw)
    return head + tail


def numeric_integrals(env: Envelope, t, epsrel: float = 1e-12) -> dict:
    """Adaptive quadrature of E1, E2 and e_* straight from ``E0`` (oracle path).

    Uses ``u = -ln(Tstar - tau)`` so the ``1/(Tstar - tau)`` weight becomes ``du``.
    """
    s = env.Tstar - float(t)
    L = -math.log(s)
    f = _E0_in_u(env)
    E1 = _quad_to_infinity(f, L, epsrel)
    E2sq = _quad_to_infinity(lambda q: f(q) ** 2, L, epsrel)
    avg = _quad_to_infinity(lambda q: f(q) * math.exp(-q), L, epsrel)
    return {"E1": E1, "E2": math.sqrt(E2sq), "e_star": avg / s}


def fubini_sides(env: Envelope, epsrel: float = 1e-10) -> tuple[float, float]:
    """Both sides of the Fubini identity for ``Z3``.

    Left: ``int E1(tau)/(Tstar - tau) dtau`` with E1 itself by quadrature.
    Right: ``int E0(s)/(Tstar - s) ln((Tstar - t0)/(Tstar - s)) ds``.
    """
    u0 = -math.log(env.span)
    f = _E0_in_u(env)
    left = _quad_to_infinity(lambda q: _quad_to_infinity(f, q, epsrel), u0, epsrel * 10)
    right = _quad_to_infinity(lambda q: f(q) * (q - u0), u0, epsrel)
    return left, right


def _E0_in_u(env: Envelope) -> Callable[[float], float]:
    return env.E0_of_u


# -- composite envelope -----------------------------------------------------


@dataclass(frozen=True)
class CompositeEnvelope:
    times: np.ndarray
    s: np.ndarray
    values: np.ndarray  # calE0 at the samples
    E1_values: np.ndarray  # calE1 at the samples
    tail_amplitude: float
    tail_exponent: float
    Z1_finite: bool
    Tstar: float

    def E1(self, t):
        """calE1 at arbitrary times, log-linear in (ln s, ln calE1) between samples."""
        if not self.Z1_finite:
            return np.full_like(np.asarray(t, dtype=float), np.inf)
        q = np.log(np.maximum(self.Tstar - np.asarray(t, dtype=float), _TINY))
        order = np.argsort(self.s)
        return np.exp(np.interp(q, np.log(self.s[order]), np.log(np.maximum(self.E1_values[order], _TINY))))


def composite_envelope(E0: Envelope, times, V1, V2, omega, Tstar: float | None = None, s=None) -> CompositeEnvelope:
    """Pointwise ``omega(V2) + V1 + E0`` and its integral against ``dt/(Tstar - t)``.

    Trapezoidal quadrature in ``u = -ln s`` over the samples; the part beyond
    the last sample uses a power law fitted to the last six composite values.
    """
    times = np.asarray(times, dtype=float)
    V1 = np.asarray(V1, dtype=float)
    V2 = np.asarray(V2, dtype=float)
    if times.size < 8:
        raise InsufficientSamples(f"composite envelope needs >= 8 samples, got {times.size}")
    Tstar = E0.Tstar if Tstar is None else Tstar
    # precomputed remaining times avoid cancellation in Tstar - t near the singularity
    s = Tstar - times if s is None else np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise ValueError("all samples must precede Tstar")
    order = np.argsort(-s)  # increasing time
    times, s, V1, V2 = times[order], s[order], V1[order], V2[order]
    om = omega.omega(V2) if hasattr(omega, "omega") else omega(V2)
    values = om + V1 + E0.E0_of_s(s)

    u = -np.log(s)
    if np.all(values <= _TINY):
        zero = np.zeros_like(values)
        return CompositeEnvelope(times, s, zero, zero, 0.0, math.inf, True, float(Tstar))
    K, b = _tail_fit(s[::-1], values[::-1])
    finite = b > 1e-12
    tail = K * s[-1] ** b / b if finite else np.inf
    seg = 0.5 * (values[1:] + values[:-1]) * np.diff(u)
    E1_values = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]]) + tail
    return CompositeEnvelope(times, s, values, E1_values, K, b, bool(finite), float(Tstar))


# -- rate predictions -------------------------------------------------------


def theta0_bound(c1: float, c2: float, mu: float, alpha: float, Lambda_n: float) -> float:
    """Solution-independent admissible theta0: ``c1 mu / (2 alpha c2 Lambda_n)``."""
    return c1 * mu / (2.0 * alpha * c2 * Lambda_n)


def interior_power_exponent(delta: float, gamma: float, theta0: float) -> tuple[float, float]:
    """Maximize ``min((1-eps) theta0, eps delta) * min(1, gamma)`` over eps in (0, 1).

    Returns ``(best exponent, maximizing eps)``; the optimum balances the two
    terms at ``eps = theta0 / (theta0 + delta)``.
    """
    if math.isinf(theta0):
        return delta * min(1.0, gamma), 1.0
    if math.isinf(delta):
        return theta0 * min(1.0, gamma), 0.0
    eps = theta0 / (theta0 + delta)
    return min((1 - eps) * theta0, eps * delta) * min(1.0, gamma), eps


def predict_rate(env: Envelope, gamma: float, theta0: float, position: str) -> RateModel:
    """Predicted decay of ``|(Tstar - t)^(1/alpha) y - xi|`` for an envelope family."""
    if position not in ("single", "lowest", "interior"):
        raise ValueError("position must be single, lowest or interior")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    family = env.family
    delta = env.delta
    if family == "table":
        _, delta = env.tail_fit()
        if delta <= 0:
            raise HypothesisViolated("tabulated envelope does not decay")
        family = "power"
    if family == "zero":
        delta = math.inf
        family = "power"

    if family == "power":
        eps1 = min(gamma * delta, delta)
        if position == "single":
            return RateModel("power", eps1, details={"eps1": eps1})
        eps3, eps = interior_power_exponent(delta, gamma, theta0)
        if not eps3 > 0:
            raise HypothesisViolated("no spectral gap: theta0 = 0 gives no rate")
        eps2 = eps3 / min(1.0, gamma)
        return RateModel("power", eps3, details={"eps": eps, "eps2": eps2, "eps3": eps3, "theta0": theta0})

    p = env.p
    if not p > 1 + 1 / gamma:
        raise HypothesisViolated(f"log envelope needs p > 1 + 1/gamma = {1 + 1 / gamma:.6g}, got p = {p}")
    p1 = gamma * (p - 1)
    return RateModel("log", p1 - 1, details={"p1": p1})


def require_finite(integrals: EnvelopeIntegrals, *names: str) -> None:
    for name in names:
        if not math.isfinite(getattr(integrals, name)):
            raise DivergentIntegral(f"{name} is infinite for this envelope")
