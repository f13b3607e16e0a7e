import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blowuplab import homogeneous as hom
from blowuplab.errors import NonPositiveValueDetected, ZeroVector

QUARTIC = hom.custom_polynomial(2.0, [[1.0, [4, 0]], [1.0, [0, 4]]])  # (x1^4 + x2^4)^(1/2)


def test_evaluate_examples():
    assert hom.evaluate(hom.euclidean(2.0), [3.0, 4.0]) == pytest.approx(25.0)
    h1 = hom.euclidean(1.0)
    assert hom.evaluate(h1, [7.0, 0.0]) == pytest.approx(7.0 * hom.evaluate(h1, [1.0, 0.0]))
    assert hom.evaluate(QUARTIC, [1.0, 1.0]) == pytest.approx(math.sqrt(2))
    assert hom.evaluate(QUARTIC, [2.0, 2.0]) == pytest.approx(4 * math.sqrt(2))


def test_zero_vector():
    with pytest.raises(ZeroVector):
        hom.evaluate(hom.euclidean(1.0), [0.0, 0.0])


def test_sphere_bounds_examples():
    assert hom.sphere_bounds(hom.euclidean(1.0), 200, dim=2) == (1.0, 1.0)
    c1, c2 = hom.sphere_bounds(hom.quadratic_form(2.0, np.diag([1.0, 2.0])), 200, dim=2)
    assert c1 == pytest.approx(1.0, rel=1e-6) and c2 == pytest.approx(2.0, rel=1e-6)
    c1, c2 = hom.sphere_bounds(QUARTIC, 200, dim=2)
    assert c1 == pytest.approx(math.sqrt(2) / 2, rel=1e-6) and c2 == pytest.approx(1.0, rel=1e-6)


def test_sphere_bounds_rejects_nonpositive_kernel():
    h = hom.HomogeneousFn(1.0, lambda v: float(v[0]))
    with pytest.raises(NonPositiveValueDetected):
        hom.sphere_bounds(h, 200, dim=2)


def test_sphere_points_are_deterministic_unit_vectors():
    a = hom.sphere_points(3, 50, seed=4)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
    np.testing.assert_array_equal(a, hom.sphere_points(3, 50, seed=4))


def test_holder_constant_kernel():
    m = hom.holder_probe(hom.euclidean(1.0), [1.0, 0.0], 0.25)
    assert m.gamma == 1.0 and m.C == 0.0


def test_holder_smooth_kernel():
    h = hom.quadratic_form(2.0, np.diag([1.0, 2.0]))
    m = hom.holder_probe(h, [1.0, 0.0], 0.25, domain="space")
    assert m.gamma >= 0.9
    # gradient of x.Dx at e1 is 2 D e1
    assert 1.0 <= m.C <= 4.0
    # on the circle the kernel is 1 + sin^2, flat at e1
    assert hom.holder_probe(h, [1.0, 0.0], 0.25).C < 1.0


def test_holder_square_root_kernel():
    h = hom.HomogeneousFn(1.0, lambda v: 1.0 + math.sqrt(abs(v[0])))
    m = hom.holder_probe(h, [0.0, 1.0], 0.25)
    assert m.gamma == pytest.approx(0.5, abs=0.1)


def test_holder_bound_holds_on_probes():
    h = hom.p_norm(1.0, 3.0)
    v = np.array([0.6, 0.8])
    m = hom.holder_probe(h, v, 0.2)
    rng = np.random.default_rng(0)
    for _ in range(200):
        x = v + rng.uniform(-0.2, 0.2, 2)
        x /= np.linalg.norm(x)
        d = np.linalg.norm(x - v)
        if d < m.r:
            assert abs(hom.evaluate(h, x) - hom.evaluate(h, v)) <= m.C * d**m.gamma + 1e-12


def test_holder_argument_checks():
    with pytest.raises(ValueError):
        hom.holder_probe(hom.euclidean(1.0), [1.0, 1.0])
    with pytest.raises(ValueError):
        hom.holder_probe(hom.euclidean(1.0), [1.0, 0.0], r=1.5)


def test_make_kernel_registry():
    assert hom.make_kernel("p-norm", 1.0, {"p": 1.0})([1.0, -1.0]) == pytest.approx(2.0)
    assert hom.make_kernel("quadratic-form", 2.0, {"matrix": [[2.0, 0.0], [0.0, 1.0]]})([1.0, 0.0]) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        hom.make_kernel("nope", 1.0)
    with pytest.raises(ValueError):
        hom.make_kernel("euclidean", -1.0)


KERNELS = [
    hom.euclidean(1.5),
    hom.quadratic_form(2.0, [[2.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 3.0]]),
    hom.p_norm(0.7, 4.0),
    hom.custom_polynomial(1.0, [[1.0, [2, 0, 0]], [2.0, [0, 2, 0]], [1.0, [0, 0, 2]], [0.5, [1, 1, 0]]]),
]


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(KERNELS), st.lists(st.floats(-10, 10), min_size=3, max_size=3), st.sampled_from([1e-3, 1.0, 1e3]))
def test_homogeneity(h, x, t):
    x = np.array(x)
    if np.linalg.norm(x) < 1e-6:
        return
    ref = t**h.degree * hom.evaluate(h, x)
    assert abs(hom.evaluate(h, t * x) - ref) <= 1e-10 * ref


def test_conjugated_kernel_bounds():
    h = hom.quadratic_form(2.0, np.diag([1.0, 2.0]))
    S = np.array([[1.0, 0.7], [0.0, 1.0]])
    ht = hom.conjugated(h, np.linalg.inv(S))
    z = np.array([0.3, -1.2])
    assert hom.evaluate(ht, 3 * z) == pytest.approx(9 * hom.evaluate(ht, z))
    c1, _ = hom.sphere_bounds(h, 400, dim=2)
    ct1, _ = hom.sphere_bounds(ht, 400, dim=2)
    assert ct1 >= c1 * np.linalg.norm(S, 2) ** -2.0 * (1 - 1e-9)
