"""Adaptive integration of trajectories into a finite-time singularity.

Dormand-Prince 5(4) with PI step control.  Two additions tailor it to
blow-up runs:

* every step is capped at ``kappa`` times the local time-to-blow-up
  estimate ``|y| / (alpha |F(t, y)|)``;
* time is carried as an unevaluated sum ``t_hi + t_lo`` so that steps far
  below the spacing of doubles near ``Tstar`` still advance the clock.

States are sampled each time ``|y|`` crosses ``|y0| 2^(k/4)``, which gives
even coverage in ``ln(Tstar - t)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import homogeneous as hom
from .errors import ImmediateDomainExit, NonFiniteState, NotOnEigenray, ZeroState
from .problem import ProblemSpec, rhs
from .spectral import SpectralData

STOP_REASONS = ("NormCap", "StepUnderflow", "MaxSteps", "LeftDomain")

# Dormand-Prince tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


@dataclass(frozen=True)
class Control:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    norm_cap: float | None = None  # absolute; default 1e9 |y0|
    max_steps: int = 200_000
    kappa: float = 0.1
    samples_per_doubling: int = 4

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.kappa <= 1:
            raise ValueError("kappa must lie in (0, 1]")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class BlowupTrajectory:
    times: np.ndarray
    t_lo: np.ndarray  # low-order parts of the sample times
    states: np.ndarray  # (samples, n)
    alpha: float
    stop_reason: str
    accepted: int
    rejected: int
    ctrl: dict = field(default_factory=dict)
    t0: float = 0.0

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def inv_norm_pow(self) -> np.ndarray:
        return self.norms ** (-self.alpha)

    @property
    def size(self) -> int:
        return len(self.times)

    def offsets(self, ref: int = -1) -> np.ndarray:
        """``t_i - t_ref`` without the cancellation of subtracting rounded times."""
        return (self.times - self.times[ref]) + (self.t_lo - self.t_lo[ref])

    def growth_decades(self) -> float:
        n = self.norms
        return float(math.log10(n.max() / n[0]))

    def meta(self) -> dict:
        return {
            "alpha": self.alpha,
            "t0": self.t0,
            "stop_reason": self.stop_reason,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "samples": self.size,
            "ctrl": dict(self.ctrl),
            "t_lo": self.t_lo.tolist(),
        }


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def integrate_blowup(spec: ProblemSpec, y0=None, ctrl: Control | None = None) -> BlowupTrajectory:
    """Integrate from ``(spec.t0, y0)`` until ``|y|`` reaches the norm cap or a stop condition fires."""
    ctrl = ctrl or Control()
    y = np.atleast_1d(np.asarray(spec.y0 if y0 is None else y0, dtype=float)).copy()
    if y.size != spec.dim:
        raise ValueError(f"initial state has length {y.size}, problem has dimension {spec.dim}")
    n0 = float(np.linalg.norm(y))
    if n0 == 0.0:
        raise ZeroState("initial state is the origin")
    cap = ctrl.norm_cap if ctrl.norm_cap is not None else 1e9 * n0
    if cap < 1e3 * n0:
        raise ValueError("norm_cap must be at least 1e3 |y0|")
    alpha = spec.alpha

    def F(hi: float, lo: float, x: np.ndarray) -> np.ndarray:
        return rhs(spec, hi, x, lo)

    t_hi, t_lo = float(spec.t0), 0.0
    times, lows, states = [t_hi], [t_lo], [y.copy()]
    ratio = 2.0 ** (1.0 / ctrl.samples_per_doubling)
    next_level = n0 * ratio
    grown = False

    k1 = F(t_hi, t_lo, y)
    if not np.all(np.isfinite(k1)):
        raise NonFiniteState("right-hand side is not finite at the initial state")
    h = 0.01 * _time_scale(y, k1, alpha, spec.t0)
    err_old = 1e-4
    accepted = rejected = 0
    bad = 0
    reason = "MaxSteps"

    while accepted + rejected < ctrl.max_steps:
        ny = float(np.linalg.norm(y))
        h = min(h, ctrl.kappa * _time_scale(y, k1, alpha, spec.t0))
        if h < 1e-14 * (t_hi - spec.t0 + 1.0):
            reason = "StepUnderflow"
            break

        ks = [k1]
        try:
            for i in range(1, 7):
                yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
                ks.append(F(t_hi, t_lo + _C[i] * h, yi))
        except ZeroState:
            ks = None
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks)) if ks is not None else None
        if ks is None or not np.all(np.isfinite(y5)) or not all(np.all(np.isfinite(k)) for k in ks):
            rejected += 1
            bad += 1
            if bad > 40:
                raise NonFiniteState(f"non-finite state near t = {t_hi!r}; loosen or tighten the tolerances")
            h *= 0.1
            continue
        bad = 0
        err_vec = h * sum(e * k for e, k in zip(_E, ks))
        scale = ctrl.abs_tol + ctrl.rel_tol * max(ny, float(np.linalg.norm(y5)))
        err = float(np.linalg.norm(err_vec)) / scale

        if err <= 1.0:
            t_hi, t_lo = _two_sum(t_hi, t_lo + h)
            y = y5
            k1 = ks[6]  # first-same-as-last
            accepted += 1
            fac = 0.9 * max(err, 1e-10) ** (-0.7 / 5) * err_old ** (0.4 / 5)
            h *= min(5.0, max(0.2, fac))
            err_old = max(err, 1e-4)
            ny = float(np.linalg.norm(y))
            if ny >= next_level or ny >= cap:
                grown = True
                times.append(t_hi)
                lows.append(t_lo)
                states.append(y.copy())
                while next_level <= ny:
                    next_level *= ratio
            if ny >= cap:
                reason = "NormCap"
                break
            if ny < 1e-8 * n0:
                if not grown:
                    raise ImmediateDomainExit("state decayed towards the origin before growing")
                reason = "LeftDomain"
                break
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** (-1 / 5))

    if times[-1] != t_hi or lows[-1] != t_lo:
        times.append(t_hi)
        lows.append(t_lo)
        states.append(y.copy())
    return BlowupTrajectory(
        times=np.array(times),
        t_lo=np.array(lows),
        states=np.array(states),
        alpha=alpha,
        stop_reason=reason,
        accepted=accepted,
        rejected=rejected,
        ctrl={**ctrl.to_dict(), "norm_cap": cap},
        t0=float(spec.t0),
    )


def _time_scale(y: np.ndarray, k: np.ndarray, alpha: float, t0: float) -> float:
    # time for |y|^-alpha to reach zero at the current radial rate
    nk = float(np.linalg.norm(k))
    if nk == 0.0:
        return 1.0 + abs(t0)
    return float(np.linalg.norm(y)) / (alpha * nk)


# -- closed-form unforced solutions -----------------------------------------


@dataclass(frozen=True)
class ExactSolution:
    Tstar: float
    a_eff: float
    alpha: float
    direction: np.ndarray
    t0: float

    @property
    def xi(self) -> np.ndarray:
        return (self.alpha * self.a_eff) ** (-1.0 / self.alpha) * self.direction

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        r = (self.alpha * self.a_eff * (self.Tstar - t)) ** (-1.0 / self.alpha)
        return np.multiply.outer(r, self.direction)


def exact_unforced(sd: SpectralData, h: hom.HomogeneousFn, y0, t0: float = 0.0, a: float | None = None,
                   tol: float = 1e-10) -> ExactSolution:
    """Closed-form solution when the dynamics reduce to a scalar equation on a ray.

    With ``a`` given, the reference equation ``y' = a |y|^alpha y`` is solved;
    otherwise ``y0`` must be an eigenvector of ``A`` and ``a_eff = Lambda H(v0)``.
    """
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    n0 = float(np.linalg.norm(y0))
    if n0 == 0.0:
        raise ZeroState("initial state is the origin")
    v0 = y0 / n0
    alpha = h.degree
    if a is not None:
        a_eff = float(a)
    else:
        lam = float(v0 @ sd.matrix @ v0) if sd.is_symmetric else _ray_eigenvalue(sd, v0)
        scale = float(np.linalg.norm(sd.matrix, 2))
        if np.linalg.norm(sd.matrix @ v0 - lam * v0) > tol * scale:
            raise NotOnEigenray("initial state is not an eigenvector of A")
        a_eff = lam * hom.evaluate(h, v0)
    Tstar = t0 + n0 ** (-alpha) / (alpha * a_eff)
    return ExactSolution(Tstar=Tstar, a_eff=a_eff, alpha=alpha, direction=v0, t0=t0)


def _ray_eigenvalue(sd: SpectralData, v: np.ndarray) -> float:
    Av = sd.matrix @ v
    return float(Av @ v)
