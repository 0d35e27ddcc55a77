import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import exterior_points
from knotform import integrals, preset, transport
from knotform.errors import CoincidentPoints, PointOnKnot
from knotform.moebius import Inversion, MoebiusMap, TangentVector, invert, random_moebius

E1, E2, E3 = np.eye(3)
ORIGIN = np.zeros(3)


def unit_inversion(center):
    return MoebiusMap((Inversion(np.asarray(center, dtype=float), 1.0),))


def random_config(rng, n=None):
    shape = (3,) if n is None else (n, 3)
    y, v, u = rng.normal(size=shape), rng.normal(size=shape), rng.normal(size=shape)
    x = y + rng.normal(size=shape) + 0.2 * np.sign(rng.normal(size=shape))
    return y, v, x, u


def angle(a, b):
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=-1), np.sum(a * b, axis=-1))


# -- examples ------------------------------------------------------------------


def test_unit_transport_examples():
    np.testing.assert_allclose(transport.unit_transport(ORIGIN, E3, [0, 0, 2]), E3)
    np.testing.assert_allclose(transport.unit_transport(ORIGIN, E1, [0, 0, 2]), -E1)
    v = np.array([1.0, 0, 1]) / np.sqrt(2)
    np.testing.assert_allclose(transport.unit_transport(ORIGIN, v, [0, 0, 5]), np.array([-1.0, 0, 1]) / np.sqrt(2))


def test_transport_examples():
    np.testing.assert_allclose(transport.transport(ORIGIN, E2, [2, 0, 0]), [0, -0.25, 0])
    np.testing.assert_allclose(transport.transport(ORIGIN, E2, [1, 0, 0]), [0, -1, 0])


def test_omega_tilde_examples(rng):
    assert transport.omega_tilde(ORIGIN, E2, [2, 0, 0], E2) == pytest.approx(-0.25)
    y, v, x, _ = random_config(rng)
    tv = transport.transport(y, v, x)
    u = np.cross(tv, rng.normal(size=3))
    assert abs(transport.omega_tilde(y, v, x, u)) < 1e-14 * np.linalg.norm(u) * np.linalg.norm(tv)


def test_psi_examples():
    assert transport.psi(ORIGIN, E1, [2, 0, 0]) == pytest.approx(-0.5)
    assert transport.psi(ORIGIN, E1, [0, 3, 0]) == 0.0


def test_coincident_points():
    with pytest.raises(CoincidentPoints):
        transport.transport(E1, E2, E1)
    with pytest.raises(CoincidentPoints):
        transport.psi(E1, E2, E1 + 1e-14)


# -- transport result properties -------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_transport_result_invariants(seed):
    y, v, x, _ = random_config(np.random.default_rng(seed))
    vh = transport.unit_transport(y, v, x)
    assert np.linalg.norm(vh) == pytest.approx(np.linalg.norm(v), rel=1e-12)
    np.testing.assert_allclose(transport.transport(y, v, x) * np.sum((x - y) ** 2), vh, rtol=1e-15, atol=1e-15 * np.linalg.norm(v))
    np.testing.assert_allclose(transport.unit_transport(y, vh, x), v, atol=1e-12 * np.linalg.norm(v))


def test_batched_matches_scalar(rng):
    y, v, x, u = random_config(rng, 8)
    batched = transport.omega_tilde(y, v, x, u)
    scalar = [transport.omega_tilde(y[i], v[i], x[i], u[i]) for i in range(8)]
    np.testing.assert_allclose(batched, scalar, rtol=1e-15)


# -- inversion expressions -------------------------------------------------------


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_transport_is_minus_inversion_pushforward(seed):
    y, v, x, u = random_config(np.random.default_rng(seed))
    tv = transport.transport(y, v, x)
    _, pushed = unit_inversion(x).pushforward(TangentVector(y, v))
    np.testing.assert_allclose(tv, -pushed, rtol=0, atol=1e-12 * np.linalg.norm(tv))
    _, pu = unit_inversion(y).pushforward(TangentVector(x, u))
    om = transport.omega_tilde(y, v, x, u)
    assert abs(om - (-(v @ pu))) <= 1e-12 * np.linalg.norm(u) * np.linalg.norm(tv)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_psi_gradient(seed):
    y, v, x, _ = random_config(np.random.default_rng(seed))
    h = 1e-5
    grad = np.array([(transport.psi(y, v, x + h * e) - transport.psi(y, v, x - h * e)) / (2 * h) for e in np.eye(3)])
    tv = transport.transport(y, v, x)
    np.testing.assert_allclose(grad, tv, rtol=0, atol=1e-7 * max(1.0, np.linalg.norm(tv)))


def test_psi_matches_inversion(rng):
    y, v, x, _ = random_config(rng)
    assert transport.psi(y, v, x) == pytest.approx(-(invert(y, 1.0, x) @ v), rel=1e-14)


# -- conformal invariance --------------------------------------------------------


def _admissible(T, pts):
    return T.min_pole_distance(np.asarray(pts)) > 0.05


@settings(max_examples=200, deadline=None)
@given(tseed=st.integers(0, 2**31 - 1), seed=st.integers(0, 2**32 - 1))
def test_omega_tilde_invariance(tseed, seed):
    T = random_moebius(tseed)
    y, v, x, u = random_config(np.random.default_rng(seed))
    if not _admissible(T, [y, x]):
        return
    Ty, Tv = T.pushforward(TangentVector(y, v))
    Tx, Tu = T.pushforward(TangentVector(x, u))
    before = transport.omega_tilde(y, v, x, u)
    after = transport.omega_tilde(Ty, Tv, Tx, Tu)
    scale = np.linalg.norm(u) * np.linalg.norm(transport.transport(y, v, x))
    assert abs(after - before) <= 1e-9 * scale
    # the angle between u and the transported vector is preserved as well
    a0 = angle(u, transport.transport(y, v, x))
    a1 = angle(Tu, transport.transport(Ty, Tv, Tx))
    assert abs(a1 - a0) <= 1e-9


@pytest.mark.parametrize("name", ["circle", "trefoil", "figure_eight"])
def test_six_form_invariance(name, rng):
    k = preset(name)
    avoid = k.eval(np.arange(512) / 512)
    for seed in range(5):
        T = random_moebius(seed, bound=3.0, avoid=avoid, min_clearance=0.3)
        x = k.eval(rng.random(60)) + rng.normal(scale=0.5, size=(60, 3))
        x = x[[_admissible(T, p[None]) for p in x]]
        assert integrals.six_form_deviation(k, T, rng.random((len(x), 3)), x) < 1e-9


def test_six_form_orientation_matters(trefoil, rng):
    # dropping the orientation sign breaks invariance under a single inversion
    T = MoebiusMap((Inversion(np.array([0.0, 0.0, 4.0]), 1.0),))
    s = rng.random((20, 3))
    x = rng.normal(size=(20, 3))
    Y = trefoil.eval(s.ravel()).reshape(-1, 3, 3)
    D = trefoil.deriv(s.ravel(), 1).reshape(-1, 3, 3)
    before = integrals.conformal_det(Y, D, x)
    P = T.pushforward(TangentVector(Y, D))
    after = integrals.conformal_det(P.base, P.vec, T.apply(x))
    unsigned = after * T.conformal_factor(x) ** 6
    np.testing.assert_allclose(unsigned, -before, rtol=1e-9)


# -- knot-averaged form -------------------------------------------------------------


def test_omega_tilde_K_circle_axis(circle):
    assert np.linalg.norm(transport.omega_tilde_K(circle, [0, 0, 1])) < 1e-8


@pytest.mark.parametrize("name", ["trefoil", "figure_eight", "perturbed_circle"])
def test_omega_tilde_K_vanishes(name, rng):
    k = preset(name)
    for x in exterior_points(k, rng, 10):
        assert np.linalg.norm(transport.omega_tilde_K(k, x)) < 1e-6


def test_omega_tilde_K_on_knot(trefoil):
    with pytest.raises(PointOnKnot):
        transport.omega_tilde_K(trefoil, trefoil.eval(0.3))


def test_open_arc_telescopes(trefoil):
    x = np.array([0.3, -0.4, 1.2])
    a, b = 0.1, 0.45
    arc = transport.omega_tilde_arc(trefoil, x, a, b)
    expect = -(invert(x, 1.0, trefoil.eval(b)) - invert(x, 1.0, trefoil.eval(a)))
    np.testing.assert_allclose(arc, expect, rtol=1e-10)
    assert np.linalg.norm(arc) > 0.1


# -- conformal angle -----------------------------------------------------------------


def test_circle_angle_vanishes(circle):
    t = np.linspace(0.01, 0.99, 99)
    assert np.max(transport.conformal_angle(circle, 0.0, t)) < 1e-10
    assert transport.angle_coefficient(circle, 0.3) < 1e-12


@settings(max_examples=100, deadline=None)
@given(s=st.floats(0, 1), t=st.floats(0, 1))
def test_angle_in_range(s, t):
    k = preset("figure_eight")
    if np.linalg.norm(k.eval(s) - k.eval(t)) < 1e-9:
        return
    th = transport.conformal_angle(k, s, t)
    assert 0.0 <= th <= np.pi


@pytest.mark.parametrize("s", [0.1, 0.3, 0.71])
def test_angle_coefficient_trefoil(trefoil, s):
    fitted, _ = transport.fit_angle_coefficient(trefoil, s)
    assert fitted == pytest.approx(transport.angle_coefficient(trefoil, s), rel=0.02)


def test_angle_coefficient_perturbed_circle():
    k = preset("perturbed_circle")
    for s in (0.05, 0.3):
        fitted, _ = transport.fit_angle_coefficient(k, s)
        assert fitted == pytest.approx(transport.angle_coefficient(k, s), rel=0.02)


def test_angle_coefficient_ellipse_planar():
    # planar curve: only the curvature derivative contributes
    k = preset("ellipse")
    fr = k.frenet(0.1)
    assert transport.angle_coefficient(k, 0.1) == pytest.approx(abs(fr.curvature_deriv) / 6)
    fitted, _ = transport.fit_angle_coefficient(k, 0.1)
    assert fitted == pytest.approx(abs(fr.curvature_deriv) / 6, rel=0.02)
