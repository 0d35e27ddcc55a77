"""Closed space curves stored as finite Fourier series.

A knot is ``gamma(s) = sum_k C[:, k] cos(2 pi k s) + S[:, k] sin(2 pi k s)``
on the unit period ``s in [0, 1)``.  Every derivative is exact, which keeps
finite-difference noise out of curvature, torsion and the arc-length
derivative of curvature.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import DegenerateCurve, ParseError, ValidationError

TWO_PI = 2.0 * math.pi

# knot-table values of the second Conway coefficient
V2_TABLE = {"unknot": 0, "trefoil": 1, "figure_eight": -1}


@dataclass(frozen=True)
class FrenetData:
    point: np.ndarray
    unit_tangent: np.ndarray
    speed: float
    curvature: float
    torsion: float
    curvature_deriv: float  # d kappa / d(arc length)


@dataclass(frozen=True, eq=False)
class FourierKnot:
    """Closed curve with coefficient arrays of shape ``(3, K + 1)``.

    ``cos[:, 0]`` is the constant term; ``sin[:, 0]`` is ignored and kept
    at zero.  Instances are immutable and safe to share between threads.
    """

    cos: np.ndarray
    sin: np.ndarray
    name: str = "custom"
    v2: int | None = None
    orientation: int = 1
    embedded: bool = True
    _freq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.cos, dtype=float, copy=True)
        s = np.array(self.sin, dtype=float, copy=True)
        if c.ndim != 2 or c.shape[0] != 3 or c.shape != s.shape:
            raise ValidationError(f"coefficient arrays must share shape (3, K+1); got {c.shape} and {s.shape}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(s))):
            raise ValidationError("non-finite Fourier coefficient")
        s[:, 0] = 0.0
        c.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "cos", c)
        object.__setattr__(self, "sin", s)
        object.__setattr__(self, "_freq", TWO_PI * np.arange(c.shape[1]))

    @property
    def n_harmonics(self):
        return self.cos.shape[1] - 1

    def deriv(self, s, order=0):
        """``order``-th derivative of gamma with respect to ``s``.

        Returns shape ``(3,)`` for scalar ``s`` and ``(n, 3)`` for arrays.
        """
        s_arr = np.asarray(s, dtype=float)
        flat = np.atleast_1d(s_arr)
        phase = np.outer(flat, self._freq) + order * (math.pi / 2.0)
        scale = self._freq**order if order else np.ones_like(self._freq)
        cw = np.cos(phase) * scale
        sw = np.sin(phase) * scale
        if order:
            cw[:, 0] = 0.0
        out = cw @ self.cos.T + sw @ self.sin.T
        return out[0] if s_arr.ndim == 0 else out

    def eval(self, s):
        return self.deriv(s, 0)

    __call__ = eval

    def speed(self, s):
        return np.linalg.norm(self.deriv(s, 1), axis=-1)

    def unit_tangent(self, s):
        d = self.deriv(s, 1)
        return d / np.linalg.norm(d, axis=-1, keepdims=True)

    def frenet(self, s) -> FrenetData:
        s = float(s)
        d1, d2, d3 = (self.deriv(s, k) for k in (1, 2, 3))
        sp = float(np.linalg.norm(d1))
        if sp < 1e-12:
            raise DegenerateCurve(f"speed {sp:.3e} at s={s}")
        c = np.cross(d1, d2)
        nc = float(np.linalg.norm(c))
        kappa = nc / sp**3
        if nc > 1e-300:
            tau = float(c @ d3) / nc**2
            dnc = float(c @ np.cross(d1, d3)) / nc
        else:
            tau = 0.0
            dnc = float(np.linalg.norm(np.cross(d1, d3)))
        dkappa_dt = dnc / sp**3 - 3.0 * nc * float(d1 @ d2) / sp**5
        return FrenetData(
            point=self.eval(s),
            unit_tangent=d1 / sp,
            speed=sp,
            curvature=kappa,
            torsion=tau,
            curvature_deriv=dkappa_dt / sp,
        )

    def length(self):
        val, _ = integrate.quad(lambda t: float(self.speed(t)), 0.0, 1.0, limit=400, epsabs=1e-13, epsrel=1e-13)
        return val

    def min_speed(self, n=4096):
        return float(self.speed(np.arange(n) / n).min())

    def distortion_bound(self, n=512):
        """Min of ``|gamma(s) - gamma(t)|`` over chordal parameter distance on an ``n`` grid."""
        s = np.arange(n) / n
        p = self.eval(s)
        z = np.exp(1j * TWO_PI * s)
        best = np.inf
        for i in range(n - 1):
            d = np.linalg.norm(p[i + 1 :] - p[i], axis=1)
            c = np.abs(z[i + 1 :] - z[i])
            best = min(best, float((d / c).min()))
        return best

    def distance_to(self, x, n=2048):
        """Distance from a point to the curve: grid search refined by a bounded 1-D minimization."""
        x = np.asarray(x, dtype=float)
        s = np.arange(n) / n
        d = np.linalg.norm(self.eval(s) - x, axis=1)
        i = int(np.argmin(d))
        res = optimize.minimize_scalar(
            lambda t: float(np.linalg.norm(self.eval(t) - x)),
            bounds=(s[i] - 1.0 / n, s[i] + 1.0 / n),
            method="bounded",
            options={"xatol": 1e-14},
        )
        return min(float(d[i]), float(res.fun))

    # -- affine edits keep the Fourier form --------------------------------
    def translated(self, b):
        c = self.cos.copy()
        c[:, 0] += np.asarray(b, dtype=float)
        return self._replace(cos=c)

    def scaled(self, factor):
        return self._replace(cos=self.cos * factor, sin=self.sin * factor)

    def rotated(self, q):
        q = np.asarray(q, dtype=float)
        return self._replace(cos=q @ self.cos, sin=q @ self.sin)

    def reversed(self):
        """Same curve traversed backwards, ``s -> -s``."""
        return self._replace(sin=-self.sin, orientation=-self.orientation)

    def shifted(self, c0):
        """Phase shift ``s -> s + c0`` of the parametrization."""
        w = self._freq * c0
        cw, sw = np.cos(w), np.sin(w)
        return self._replace(cos=self.cos * cw + self.sin * sw, sin=self.sin * cw - self.cos * sw)

    def _replace(self, **kw):
        args = dict(cos=self.cos, sin=self.sin, name=self.name, v2=self.v2, orientation=self.orientation, embedded=self.embedded)
        args.update(kw)
        return FourierKnot(**args)


def _coeffs(terms, kmax=5):
    """Build coefficient arrays from ``(axis, 'c'|'s', k, amplitude)`` tuples."""
    c = np.zeros((3, kmax + 1))
    s = np.zeros((3, kmax + 1))
    for axis, kind, k, amp in terms:
        (c if kind == "c" else s)[axis, k] += amp
    return c, s


def _circle():
    return _coeffs([(0, "c", 1, 1.0), (1, "s", 1, 1.0)], 1)


def _trefoil():
    # (2,3) torus knot on radii 2 and 1: ((2 + cos 3p) cos 2p, (2 + cos 3p) sin 2p, -sin 3p)
    return _coeffs(
        [
            (0, "c", 2, 2.0), (0, "c", 5, 0.5), (0, "c", 1, 0.5),
            (1, "s", 2, 2.0), (1, "s", 5, 0.5), (1, "s", 1, -0.5),
            (2, "s", 3, -1.0),
        ]
    )


def _figure_eight():
    # ((2 + cos 2p) cos 3p, (2 + cos 2p) sin 3p, sin 4p)
    return _coeffs(
        [
            (0, "c", 3, 2.0), (0, "c", 5, 0.5), (0, "c", 1, 0.5),
            (1, "s", 3, 2.0), (1, "s", 5, 0.5), (1, "s", 1, 0.5),
            (2, "s", 4, 1.0),
        ]
    )


PRESETS = {
    "circle": (_circle, "unknot", True),
    "ellipse": (lambda: _coeffs([(0, "c", 1, 2.0), (1, "s", 1, 1.0)], 1), "unknot", True),
    "perturbed_circle": (
        lambda: _coeffs([(0, "c", 1, 1.0), (1, "s", 1, 1.0), (2, "s", 3, 0.15), (2, "c", 2, 0.1)], 3),
        "unknot",
        True,
    ),
    "trefoil": (_trefoil, "trefoil", True),
    "figure_eight": (_figure_eight, "figure_eight", True),
    # planar, immersed with one double point; for planarity tests only
    "lemniscate": (lambda: _coeffs([(0, "c", 1, 1.0), (1, "s", 2, 0.5)], 2), None, False),
    "hopf_a": (_circle, "unknot", True),
    "hopf_b": (lambda: _coeffs([(0, "c", 0, 1.0), (0, "c", 1, 1.0), (2, "s", 1, 1.0)], 1), "unknot", True),
}


def preset(name) -> FourierKnot:
    try:
        build, knot_type, embedded = PRESETS[name]
    except KeyError:
        raise ParseError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    c, s = build()
    v2 = V2_TABLE.get(knot_type) if knot_type else None
    return FourierKnot(c, s, name=name, v2=v2, embedded=embedded)


def _parse_axis(spec, axis):
    if not isinstance(spec, dict):
        raise ParseError(f"fourier.{axis} must be an object with 'cos'/'sin' lists")
    try:
        cos = [float(v) for v in spec.get("cos", [])]
        sin = [float(v) for v in spec.get("sin", [])]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"fourier.{axis}: {exc}") from None
    return cos, sin


def knot_from_document(doc) -> FourierKnot:
    if not isinstance(doc, dict):
        raise ParseError("knot document must be a JSON object")
    if "preset" in doc:
        knot = preset(doc["preset"])
    elif "fourier" in doc:
        four = doc["fourier"]
        if not isinstance(four, dict):
            raise ParseError("'fourier' must be an object")
        axes = [_parse_axis(four.get(a, {}), a) for a in "xyz"]
        kmax = max(1, *(max(len(c), len(s)) for c, s in axes)) - 1
        cos = np.zeros((3, kmax + 1))
        sin = np.zeros((3, kmax + 1))
        for i, (c, s) in enumerate(axes):
            cos[i, : len(c)] = c
            sin[i, : len(s)] = s
        v2 = doc.get("v2")
        knot = FourierKnot(cos, sin, name=str(doc.get("name", "custom")), v2=None if v2 is None else int(v2))
    else:
        raise ParseError("knot document needs a 'preset' or 'fourier' key")

    orientation = doc.get("orientation", 1)
    if orientation not in (1, -1):
        raise ParseError("orientation must be +1 or -1")
    if orientation == -1:
        knot = knot.reversed()
    if "scale" in doc:
        scale = float(doc["scale"])
        if not scale > 0:
            raise ValidationError("scale must be positive")
        knot = knot.scaled(scale)
    if "translate" in doc:
        b = np.asarray(doc["translate"], dtype=float)
        if b.shape != (3,):
            raise ParseError("translate must be a 3-vector")
        knot = knot.translated(b)

    if knot.min_speed() < 1e-9:
        raise ValidationError(f"curve {knot.name!r} is not regular (vanishing speed)")
    return knot


def load_knot(source) -> FourierKnot:
    """Load from a dict, a JSON string, or a path to a JSON file."""
    if isinstance(source, dict):
        return knot_from_document(source)
    text = str(source)
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid knot JSON: {exc}") from None
    return knot_from_document(doc)
