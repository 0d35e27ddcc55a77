"""Numerical laboratory for conformally invariant Y-energies of knots."""

from . import curves, gaussforms, integrals, moebius, transport
from ._backend import BACKEND
from .curves import FourierKnot, load_knot, preset
from .integrals import Estimate, QuadratureSpec
from .moebius import MoebiusMap, TangentVector, random_moebius

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Estimate",
    "FourierKnot",
    "MoebiusMap",
    "QuadratureSpec",
    "TangentVector",
    "curves",
    "gaussforms",
    "integrals",
    "load_knot",
    "moebius",
    "preset",
    "random_moebius",
    "transport",
]
