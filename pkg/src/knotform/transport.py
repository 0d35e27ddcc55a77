"""Conformal transportation of tangent vectors.

A vector ``v`` at ``y`` is carried to ``x`` along the circle through ``x``
that is tangent to ``v`` at ``y``.  The unit transport reflects ``v`` in
the line through ``x - y``; the full transport also divides by
``|x - y|**2``, which makes the resulting 1-form Moebius invariant.

All point/vector arguments broadcast over leading axes.
"""

from __future__ import annotations

import numpy as np

from .errors import CoincidentPoints, PointOnKnot

COINCIDENT_TOL = 1e-12


def _separation(y, x):
    w = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    if np.any(r2 < COINCIDENT_TOL**2):
        raise CoincidentPoints("x and y coincide")
    return w, r2


def unit_transport(y, v, x):
    w, r2 = _separation(y, x)
    v = np.asarray(v, dtype=float)
    return 2.0 * np.sum(v * w, axis=-1, keepdims=True) * w / r2 - v


def transport(y, v, x):
    w, r2 = _separation(y, x)
    v = np.asarray(v, dtype=float)
    return (2.0 * np.sum(v * w, axis=-1, keepdims=True) * w / r2 - v) / r2


def omega_tilde(y, v, x, u):
    return np.sum(np.asarray(u, dtype=float) * transport(y, v, x), axis=-1)


def psi(y, v, x):
    """Potential of ``omega_tilde(y, v, .)``: minus the unit inversion about ``y`` of ``x``, dotted with ``v``."""
    w, r2 = _separation(y, x)
    image = np.asarray(y, dtype=float) + w / r2
    return -np.sum(image * np.asarray(v, dtype=float), axis=-1)


def _check_off_curve(curve, x, tol=1e-6):
    d = curve.distance_to(x)
    if d < tol:
        raise PointOnKnot(f"x lies within {d:.2e} of the knot")
    return d


def omega_tilde_K(knot, x, tol=1e-12, n_min=64, n_max=2**14):
    """Vector dual to the knot-averaged form: ``int transport(gamma, gamma', x) ds``.

    Periodic trapezoidal rule with node doubling; returns once two
    successive estimates agree to ``tol`` (absolute) or ``n_max`` is hit.
    """
    x = np.asarray(x, dtype=float)
    _check_off_curve(knot, x)
    n = n_min
    prev = None
    while True:
        s = np.arange(n) / n
        val = transport(knot.eval(s), knot.deriv(s, 1), x).mean(axis=0)
        if prev is not None and (np.linalg.norm(val - prev) < tol or n >= n_max):
            return val
        prev = val
        n *= 2


def omega_tilde_arc(curve, x, a, b, n=64):
    """Gauss-Legendre integral of the transported tangent over the open arc ``[a, b]``."""
    nodes, weights = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (b - a) * nodes + 0.5 * (a + b)
    vals = transport(curve.eval(s), curve.deriv(s, 1), np.asarray(x, dtype=float))
    return 0.5 * (b - a) * (weights[:, None] * vals).sum(axis=0)


def _angle(a, b):
    # atan2 keeps precision for tiny angles where arccos would not
    cr = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cr, np.sum(a * b, axis=-1))


def conformal_angle(knot, s, t):
    """Angle at ``x = gamma(s)`` between the knot and the circle tangent to it at ``y = gamma(t)``."""
    x, y = knot.eval(s), knot.eval(t)
    vx, vy = knot.unit_tangent(s), knot.unit_tangent(t)
    theta = _angle(unit_transport(y, vy, x), vx)
    return np.clip(theta, 0.0, np.pi)


def angle_coefficient(knot, s):
    """Predicted leading coefficient of the conformal angle in ``|x - y|**2``."""
    fr = knot.frenet(s)
    return float(np.sqrt(fr.curvature_deriv**2 + (fr.curvature * fr.torsion) ** 2) / 6.0)


def fit_angle_coefficient(knot, s, d_min=1e-3, d_max=1e-2, n=16):
    """Least-squares ``theta / d**2 = a + b d`` over separations ``d`` in ``[d_min, d_max]``.

    Offsets are taken on both sides of ``s``.  Returns ``(a, b)``.
    """
    speed = float(knot.speed(s))
    h = np.geomspace(d_min, d_max, n) / speed
    t = np.concatenate([s + h, s - h])
    d = np.linalg.norm(knot.eval(t) - knot.eval(s), axis=1)
    keep = (d >= 0.9 * d_min) & (d <= 1.1 * d_max)
    theta = conformal_angle(knot, s, t[keep])
    d = d[keep]
    A = np.column_stack([np.ones_like(d), d])
    coef, *_ = np.linalg.lstsq(A, theta / d**2, rcond=None)
    return float(coef[0]), float(coef[1])
