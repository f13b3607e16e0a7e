"""End-to-end acceptance gate.

Each test carries ``@pytest.mark.acceptance(number, title)``; the terminal
summary prints one PASS/FAIL line per criterion number.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from blowuplab import asymptotics as asy
from blowuplab import envelope as envl
from blowuplab import homogeneous as hom
from blowuplab import integrator as integ
from blowuplab import problem as prob
from blowuplab import spectral as spec
from blowuplab.verify import random_nonsymmetric, random_symmetric


def run(p, ctrl=None):
    tr = integ.integrate_blowup(p, ctrl=ctrl)
    return tr, asy.analyze(tr, p)


# -- shared runs ------------------------------------------------------------


def _random_problem(rng, symmetric: bool):
    n = int(rng.integers(2, 7))
    A = random_symmetric(rng, n) if symmetric else random_nonsymmetric(rng, n, cond_max=1e3)
    alpha = float(rng.choice([1.0, 2.0]))
    if rng.random() < 0.5:
        h = hom.euclidean(alpha)
    else:
        B = rng.normal(size=(n, n))
        D = B @ B.T + n * np.eye(n)
        h = hom.quadratic_form(alpha, D / np.linalg.eigvalsh(D)[-1])
    G = None
    if rng.random() < 0.5:
        G = prob.make_perturbation("power", alpha, {"M": rng.uniform(0.05, 0.3), "delta": rng.uniform(0.5, 1.0)})
    # start on the self-similar scale of unit remaining time: alpha lambda(y0) H(y0) = 1
    v = rng.normal(size=n)
    v /= np.linalg.norm(v)
    return prob.general(A, h, G, y0=prob.profile_scale(v, float(np.linalg.norm(A @ v)), alpha, h))


@pytest.fixture(scope="module")
def certificate_suite():
    rng = np.random.default_rng(7)
    t = time.perf_counter()
    out = []
    for k in range(20):
        p = _random_problem(rng, symmetric=k < 10)
        out.append((p,) + run(p))
    return out, time.perf_counter() - t


POWER_DELTAS = (0.25, 0.5, 1.0)


def _manufactured_power(delta):
    p, _ = prob.manufactured(prob.make_corrector("power", [2**-0.5], delta=delta), 0.5, [[1.0]], hom.euclidean(2.0))
    ctrl = integ.Control(rel_tol=1e-13, abs_tol=1e-16, norm_cap=1e3 * float(np.linalg.norm(p.y0)))
    return p, ctrl


def _general_power(delta):
    G = prob.make_perturbation("power", 1.0, {"M": 1.0, "delta": delta})
    p = prob.general([[1.0]], hom.euclidean(1.0), G, y0=[1.0])
    return p, integ.Control(rel_tol=1e-13, norm_cap=1e6)


@pytest.fixture(scope="module")
def power_runs():
    t = time.perf_counter()
    out = {}
    for label, build in (("manufactured", _manufactured_power), ("reference", _general_power)):
        for d in POWER_DELTAS:
            p, ctrl = build(d)
            out[label, d] = (p,) + run(p, ctrl)
    return out, time.perf_counter() - t


# -- 1 ----------------------------------------------------------------------


@pytest.mark.acceptance(1, "closed-form blow-up time and profile")
def test_closed_form_blowup(record_property):
    t = time.perf_counter()
    p = prob.reference(1.0, 2.0, y0=[1.0])
    _, rep = run(p)
    elapsed = time.perf_counter() - t
    xi = float(np.linalg.norm(rep.xi_star))
    record_property("Tstar_err", f"{abs(rep.Tstar_hat - 0.5):.2e}")
    record_property("xi_err", f"{abs(xi - 2**-0.5):.2e}")
    record_property("seconds", f"{elapsed:.2f}")
    assert abs(rep.Tstar_hat - 0.5) <= 1e-5
    assert abs(xi - 2**-0.5) <= 1e-4
    assert elapsed < 1.0


# -- 2 ----------------------------------------------------------------------


@pytest.mark.acceptance(2, "certificate residuals on 20 random problems")
def test_certificate_suite(certificate_suite, record_property):
    runs, elapsed = certificate_suite
    accepted = [rep for _, _, rep in runs if rep.accepted]
    worst_e = max(rep.cert_eigen_residual for rep in accepted)
    worst_h = max(rep.cert_H_residual for rep in accepted)
    record_property("accepted", f"{len(accepted)}/20")
    record_property("worst", f"{max(worst_e, worst_h):.2e}")
    record_property("seconds", f"{elapsed:.1f}")
    assert sum(not p.sd.is_symmetric for p, _, _ in runs) == 10
    assert len(accepted) >= 15
    assert worst_e <= 1e-3 and worst_h <= 1e-3
    assert elapsed < 60.0


# -- 3 ----------------------------------------------------------------------


@pytest.mark.acceptance(3, "eigenvalue selection by the Dirichlet quotient")
def test_eigenvalue_selection(record_property):
    A = np.diag([1.0, 3.0])
    p = prob.general(A, hom.euclidean(1.0), y0=[1.0, 1.0])
    tr, rep = run(p)
    lam = rep.series["lambda"]
    rel_tol = tr.ctrl["rel_tol"]
    drop = float(-np.min(np.diff(lam)))
    record_property("max_drop", f"{drop:.1e}")
    assert rep.Lambda_hat == 3.0
    assert np.all(np.diff(lam) >= -10 * rel_tol)

    p1 = prob.general(A, hom.euclidean(1.0), y0=[1.0, 0.0])
    _, rep1 = run(p1)
    assert rep1.Lambda_hat == 1.0
    assert np.all(rep1.series["V1"] == 0.0)


# -- 4 ----------------------------------------------------------------------


@pytest.mark.acceptance(4, "power rate: fitted exponent within 15% of delta")
@pytest.mark.parametrize("label", ["manufactured", "reference"])
@pytest.mark.parametrize("delta", POWER_DELTAS)
def test_power_rate(power_runs, label, delta, record_property):
    runs, elapsed = power_runs
    _, _, rep = runs[label, delta]
    fit = rep.fitted_rate
    record_property(f"{label[:3]}{delta}", f"{fit.kind}:{fit.exponent:.3f}" if fit else "none")
    assert elapsed < 30.0
    assert fit is not None and fit.kind == "power"
    assert abs(fit.exponent - delta) <= 0.15 * delta


# -- 5 ----------------------------------------------------------------------


@pytest.mark.acceptance(5, "log rate: log model selected, tail product bounded")
def test_log_rate(record_property):
    G = prob.make_perturbation("log", 1.0, {"M": 1.0, "p": 3.0})
    p = prob.general([[1.0]], hom.euclidean(1.0), G, y0=[3.0])
    _, rep = run(p, integ.Control(norm_cap=3e6))
    assert rep.predicted_rate.kind == "log" and rep.predicted_rate.exponent == pytest.approx(1.0)
    fit = rep.fitted_rate
    i0, i1 = rep.window
    s = rep.series["s"][i0:i1 + 1]
    err = rep.series["w_error"][i0:i1 + 1]
    prod = err * np.abs(np.log(s)) ** rep.predicted_rate.exponent
    spread = float(prod.max() / prod.min())
    record_property("model", f"{fit.kind}:{fit.exponent:.2f}")
    record_property("tail_ratio", f"{spread:.2f}")
    assert fit.kind == "log"
    assert spread <= 10.0


# -- 6 ----------------------------------------------------------------------


@pytest.mark.acceptance(6, "blow-up threshold for G(t, x) = x")
@pytest.mark.parametrize("y0", [8.0, -8.0, 9.0, 20.0, 100.0, 1000.0])
def test_blowup_threshold(y0, record_property):
    p = prob.general([[1.0]], hom.euclidean(1.0), prob.make_perturbation("linear", 1.0, {"c": 1.0}), y0=[y0])
    th = prob.blowup_threshold(p)
    assert th.r0 == pytest.approx(8.0)
    upper = th.Tstar_upper(abs(y0))
    assert upper == pytest.approx(p.t0 + abs(y0) ** -1 / 0.5)
    tr = integ.integrate_blowup(p)
    end = tr.times[-1] + tr.t_lo[-1]
    record_property(f"margin{y0:g}", f"{(upper - end) / upper:.3f}")
    assert tr.stop_reason == "NormCap"
    assert end < upper


# -- 7 ----------------------------------------------------------------------


@pytest.mark.acceptance(7, "two-sided band on accepted runs")
def test_two_sided_band(certificate_suite, power_runs, record_property):
    runs = list(certificate_suite[0]) + list(power_runs[0].values())
    ref = prob.reference(1.0, 2.0, y0=[1.0])
    runs.append((ref,) + run(ref))
    lo, hi, count = math.inf, -math.inf, 0
    for p, _, rep in runs:
        if not rep.accepted:
            continue
        count += 1
        i0, i1 = rep.window
        s = rep.series["s"][i0:i1 + 1]
        norm = rep.series["norm"][i0:i1 + 1]
        band = s ** (1.0 / p.alpha) * norm / np.linalg.norm(rep.xi_star)
        lo, hi = min(lo, band.min()), max(hi, band.max())
    record_property("runs", count)
    record_property("band", f"[{lo:.4f}, {hi:.4f}]")
    assert count >= 20
    assert lo >= 0.5 and hi <= 2.0


# -- 8 ----------------------------------------------------------------------


@pytest.mark.acceptance(8, "projection identities on 100 random matrices")
def test_spectral_identities(record_property):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for k in range(100):
        n = int(rng.integers(2, 7))
        A = random_symmetric(rng, n) if k % 4 == 0 else random_nonsymmetric(rng, n, cond_max=1e3, top_ratio=1.2)
        sd = spec.decompose(A)
        nA = np.linalg.norm(A, 2)
        P = sd.projections
        worst = max(worst, np.linalg.norm(sum(P) - np.eye(n), 2) / nA)
        for lam, R in zip(sd.distinct_eigenvalues, P):
            worst = max(worst, np.linalg.norm(A @ R - lam * R, 2) / nA)
        for i, Ri in enumerate(P):
            for j, Rj in enumerate(P):
                worst = max(worst, np.linalg.norm(Ri @ Rj - (Rj if i == j else 0.0), 2) / nA)
    record_property("worst", f"{worst:.1e}")
    assert worst <= 1e-8


# -- 9 ----------------------------------------------------------------------


ENVELOPES = [
    envl.Envelope("power", 0.5, 0.0, M=1.0, delta=0.5),
    envl.Envelope("power", 0.5, 0.0, M=2.0, delta=2.0),
    envl.Envelope("log", 0.5, 0.0, M=1.0, p=3.0),
    envl.Envelope("log", 0.5, 0.0, M=0.5, p=2.5),
]


@pytest.mark.acceptance(9, "envelope quadrature and Fubini identity")
@pytest.mark.parametrize("env", ENVELOPES, ids=lambda e: f"{e.family}-{e.delta or e.p}")
def test_envelope_quadrature(env, record_property):
    closed = envl.integrals_of(env)
    worst = 0.0
    for s in np.geomspace(1e-6, 0.5, 25):
        t = env.Tstar - s
        num = envl.numeric_integrals(env, t)
        worst = max(worst, abs(num["E1"] / float(closed.E1(t)) - 1), abs(num["E2"] / float(closed.E2(t)) - 1))
    left, right = envl.fubini_sides(env)
    fub = abs(left / right - 1)
    record_property(f"{env.family}{env.delta or env.p}", f"{worst:.1e}/{fub:.1e}")
    assert worst <= 1e-6
    assert fub <= 1e-4


# -- 10 ---------------------------------------------------------------------


@pytest.mark.acceptance(10, "non-symmetric equivalence under a shear")
def test_nonsymmetric_equivalence(record_property):
    S = np.array([[1.0, 0.7], [0.0, 1.0]])
    D = np.diag([1.0, 3.0])
    z0 = np.array([1.0, 1.0])
    h = hom.euclidean(1.0)
    diag = prob.general(D, hom.conjugated(h, np.linalg.inv(S)), y0=z0)
    shear = prob.general(np.linalg.solve(S, D @ S), h, y0=np.linalg.solve(S, z0))
    _, rd = run(diag)
    _, rs = run(shear)
    dev = float(np.max(np.abs(S @ rs.xi_star - rd.xi_star)))
    record_property("deviation", f"{dev:.1e}")
    assert rd.Lambda_hat == rs.Lambda_hat == 3.0
    assert dev <= 1e-3


# -- 11 ---------------------------------------------------------------------


def _correctors():
    power = prob.manufactured(prob.make_corrector("power", [2**-0.5], delta=0.5), 0.5, [[1.0]], hom.euclidean(2.0))
    orth = prob.manufactured(prob.make_corrector("orthogonal", [0.0, 1 / 3], delta=0.5, w=[1.0, 0.0]), 0.5,
                             np.diag([1.0, 3.0]), hom.euclidean(1.0))
    log = prob.manufactured(prob.make_corrector("log", [2**-0.5], p=2.0, c=0.5), 0.25, [[1.0]], hom.euclidean(2.0))
    return {"power": power, "orthogonal": orth, "log": log}


def _oracle_error(p, m, rel_tol):
    ctrl = integ.Control(rel_tol=rel_tol, abs_tol=rel_tol * 1e-3, norm_cap=1e3 * float(np.linalg.norm(p.y0)))
    tr = integ.integrate_blowup(p, ctrl=ctrl)
    exact = np.array([m.y_exact(t, lo) for t, lo in zip(tr.times, tr.t_lo)])
    return float(np.max(np.linalg.norm(tr.states - exact, axis=1) / np.linalg.norm(exact, axis=1)))


@pytest.mark.acceptance(11, "integrator against manufactured solutions")
@pytest.mark.parametrize("kind", ["power", "orthogonal", "log"])
def test_manufactured_sup_norm(kind, record_property):
    p, m = _correctors()[kind]
    rel_tol = 1e-10
    err = _oracle_error(p, m, rel_tol)
    record_property(f"{kind}_sup/tol", f"{err / rel_tol:.1e}")
    assert err <= 10 * rel_tol


@pytest.mark.acceptance(11, "integrator against manufactured solutions")
@pytest.mark.parametrize("kind", ["power", "orthogonal", "log"])
def test_manufactured_self_convergence(kind, record_property):
    p, m = _correctors()[kind]
    ratio = _oracle_error(p, m, 1e-10) / _oracle_error(p, m, 1e-11)
    record_property(f"{kind}_ratio", f"{ratio:.1f}")
    assert ratio >= 4.0
