"""Moebius transformations of R^3 as chains of primitive maps.

A chain is applied left to right.  Each primitive knows its value, its
Jacobian and its conformal factor ``|det dT|**(1/6)`` in closed form, so
the chain's factor is the product of the primitives' factors evaluated
along the running image point.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParseError, PoleError, ValidationError

POLE_TOL = 1e-12


class TangentVector(NamedTuple):
    base: np.ndarray
    vec: np.ndarray


def invert(center, radius, x):
    """Inversion in the sphere of given center and radius."""
    center = np.asarray(center, dtype=float)
    w = np.asarray(x, dtype=float) - center
    r2 = np.sum(w * w, axis=-1, keepdims=True)
    if np.any(r2 < POLE_TOL**2):
        raise PoleError(f"point coincides with inversion center {center.tolist()}")
    return center + radius * radius * w / r2


@dataclass(frozen=True, eq=False)
class Translation:
    b: np.ndarray

    def apply(self, x):
        return x + self.b

    def jacobian(self, x):
        return np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3))

    def factor(self, x):
        return np.ones(x.shape[:-1])

    def orientation(self, x):
        return np.ones(x.shape[:-1])

    def to_document(self):
        return {"type": "translate", "b": self.b.tolist()}


@dataclass(frozen=True, eq=False)
class Scaling:
    l: float

    def apply(self, x):
        return self.l * x

    def jacobian(self, x):
        return np.broadcast_to(self.l * np.eye(3), x.shape[:-1] + (3, 3))

    def factor(self, x):
        # |det| = l^3, so the sixth root is sqrt(l)
        return np.full(x.shape[:-1], math.sqrt(self.l))

    def orientation(self, x):
        return np.ones(x.shape[:-1])

    def to_document(self):
        return {"type": "scale", "l": self.l}


@dataclass(frozen=True, eq=False)
class Orthogonal:
    matrix: np.ndarray

    def apply(self, x):
        return x @ self.matrix.T

    def jacobian(self, x):
        return np.broadcast_to(self.matrix, x.shape[:-1] + (3, 3))

    def factor(self, x):
        return np.ones(x.shape[:-1])

    def orientation(self, x):
        return np.full(x.shape[:-1], np.sign(np.linalg.det(self.matrix)))

    def to_document(self):
        return {"type": "orthogonal", "matrix": self.matrix.tolist()}


@dataclass(frozen=True, eq=False)
class Inversion:
    center: np.ndarray
    radius: float

    def _offset(self, x):
        w = x - self.center
        r2 = np.sum(w * w, axis=-1)
        if np.any(r2 < POLE_TOL**2):
            raise PoleError(f"point maps onto inversion center {self.center.tolist()}")
        return w, r2

    def apply(self, x):
        w, r2 = self._offset(x)
        return self.center + (self.radius**2 / r2)[..., None] * w

    def jacobian(self, x):
        # r^2 (I - 2 w w^T / |w|^2) / |w|^2
        w, r2 = self._offset(x)
        outer = w[..., :, None] * w[..., None, :] / r2[..., None, None]
        return (self.radius**2 / r2)[..., None, None] * (np.eye(3) - 2.0 * outer)

    def factor(self, x):
        _, r2 = self._offset(x)
        return self.radius / np.sqrt(r2)

    def orientation(self, x):
        return -np.ones(x.shape[:-1])

    def to_document(self):
        return {"type": "inversion", "center": self.center.tolist(), "radius": self.radius}


def _vec3(value, what):
    arr = np.asarray(value, dtype=float)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ParseError(f"{what} must be a finite 3-vector")
    return arr


def primitive_from_document(item):
    if not isinstance(item, dict) or "type" not in item:
        raise ParseError("each Moebius primitive must be an object with a 'type'")
    kind = item["type"]
    try:
        if kind == "translate":
            return Translation(_vec3(item["b"], "translate.b"))
        if kind == "scale":
            lam = float(item["l"])
            if not lam > 0:
                raise ValidationError("scale factor must be positive")
            return Scaling(lam)
        if kind == "orthogonal":
            q = np.asarray(item["matrix"], dtype=float)
            if q.shape != (3, 3) or not np.allclose(q @ q.T, np.eye(3), atol=1e-10):
                raise ValidationError("orthogonal.matrix must be a 3x3 orthogonal matrix")
            return Orthogonal(q)
        if kind == "inversion":
            r = float(item["radius"])
            if not r > 0:
                raise ValidationError("inversion radius must be positive")
            return Inversion(_vec3(item["center"], "inversion.center"), r)
    except KeyError as exc:
        raise ParseError(f"{kind} primitive is missing field {exc}") from None
    raise ParseError(f"unknown primitive type {kind!r}")


@dataclass(frozen=True, eq=False)
class MoebiusMap:
    chain: tuple = ()

    @classmethod
    def identity(cls):
        return cls(())

    @classmethod
    def from_document(cls, doc):
        if isinstance(doc, dict) and "chain" in doc:
            doc = doc["chain"]
        if not isinstance(doc, list):
            raise ParseError("Moebius document must be a list of primitives")
        return cls(tuple(primitive_from_document(item) for item in doc))

    def to_document(self):
        return [p.to_document() for p in self.chain]

    def then(self, other: "MoebiusMap") -> "MoebiusMap":
        return MoebiusMap(self.chain + other.chain)

    def _walk(self, x):
        """Yield ``(primitive, running point)`` pairs."""
        for prim in self.chain:
            yield prim, x
            x = prim.apply(x)

    def __call__(self, x):
        return self.apply(x)

    def apply(self, x):
        x = np.asarray(x, dtype=float)
        for prim in self.chain:
            x = prim.apply(x)
        return x

    def jacobian(self, x):
        x = np.asarray(x, dtype=float)
        jac = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3))
        for prim, y in self._walk(x):
            jac = prim.jacobian(y) @ jac
        return jac

    def conformal_factor(self, x):
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for prim, y in self._walk(x):
            out = out * prim.factor(y)
        return out[()] if out.ndim == 0 else out

    def orientation(self, x):
        """Sign of ``det dT(x)``: -1 per inversion, ``det Q`` per orthogonal factor."""
        x = np.asarray(x, dtype=float)
        out = np.ones(x.shape[:-1])
        for prim, y in self._walk(x):
            out = out * prim.orientation(y)
        return out[()] if out.ndim == 0 else out

    def pushforward(self, tv: TangentVector) -> TangentVector:
        base = np.asarray(tv.base, dtype=float)
        vec = np.asarray(tv.vec, dtype=float)
        jac = self.jacobian(base)
        return TangentVector(self.apply(base), np.einsum("...ij,...j->...i", jac, vec))

    def min_pole_distance(self, points):
        """Smallest distance from the running image of ``points`` to any inversion center."""
        x = np.asarray(points, dtype=float)
        best = np.inf
        for prim in self.chain:
            if isinstance(prim, Inversion):
                d = np.linalg.norm(x - prim.center, axis=-1)
                best = min(best, float(np.min(d)))
                if best < POLE_TOL:
                    return best
            x = prim.apply(x)
        return best


class TransformedCurve:
    """Image of a curve under a Moebius map; supports ``eval`` and first ``deriv``."""

    def __init__(self, curve, T: MoebiusMap):
        self.curve = curve
        self.T = T

    def eval(self, s):
        return self.T.apply(self.curve.eval(s))

    def deriv(self, s, order=0):
        if order == 0:
            return self.eval(s)
        if order != 1:
            raise NotImplementedError("only first derivatives of transformed curves are exposed")
        p = self.curve.eval(s)
        return np.einsum("...ij,...j->...i", self.T.jacobian(p), self.curve.deriv(s, 1))


def random_orthogonal(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if rng.random() < 0.5:
        q[:, 0] = -q[:, 0]
    return q


def random_moebius(seed, bound=5.0, avoid=(), min_clearance=0.1, max_len=4, require_inversion=True):
    """Random chain of at most ``max_len`` primitives.

    Translations and inversion centers lie in ``[-bound, bound]^3``; scale
    factors and radii in ``[1/2, 2]`` (clipped to ``bound``).  Inversion
    centers stay ``min_clearance`` away from the running image of every
    point in ``avoid``.
    """
    if not bound > 0:
        raise ValueError("bound must be positive")
    rng = np.random.default_rng(seed)
    avoid = np.asarray(avoid, dtype=float).reshape(-1, 3)
    lo, hi = 0.5, min(2.0, bound)
    lo = min(lo, hi)
    length = int(rng.integers(1, max_len + 1))
    kinds = list(rng.choice(["translate", "scale", "orthogonal", "inversion"], size=length))
    if require_inversion and "inversion" not in kinds:
        kinds[int(rng.integers(length))] = "inversion"
    chain = []
    running = avoid.copy()
    for kind in kinds:
        if kind == "translate":
            prim = Translation(rng.uniform(-bound, bound, 3))
        elif kind == "scale":
            prim = Scaling(float(rng.uniform(lo, hi)))
        elif kind == "orthogonal":
            prim = Orthogonal(random_orthogonal(rng))
        else:
            for _ in range(10_000):
                c = rng.uniform(-bound, bound, 3)
                if len(running) == 0 or np.min(np.linalg.norm(running - c, axis=1)) >= min_clearance:
                    break
            else:  # pragma: no cover
                raise ValueError("could not place an inversion center away from the avoidance set")
            prim = Inversion(c, float(rng.uniform(lo, hi)))
        chain.append(prim)
        if len(running):
            running = prim.apply(running)
    return MoebiusMap(tuple(chain))


def load_moebius(source) -> MoebiusMap:
    if isinstance(source, (list, dict)):
        return MoebiusMap.from_document(source)
    text = str(source)
    if os.path.exists(text):
        with open(text) as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid Moebius JSON: {exc}") from None
    return MoebiusMap.from_document(doc)
