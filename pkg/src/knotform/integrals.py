"""Configuration-space integrals over K^4 and K^3 x R^3 by Monte Carlo.

Curve parameters are drawn uniformly on the unit torus and multiplied by
the cyclic-order indicator.  The ambient point ``x`` comes from a mixture
of three radial densities centered at the knot points,

    q(r) = (a - 3) / (4 pi L) / (r^2 (1 + r/L)^(a - 2)),

which cancels the ``1/r^2`` singularity of each kernel and decays faster
than the ``O(|x|^-6)`` integrands.

The signed Y-integrands are only conditionally integrable near the
stratum where ``x`` meets two knot points.  Their leading term is odd
under the point reflection ``x -> y_i + y_j - x`` through the midpoint of
the closest pair, so each draw is paired with its reflection and the
estimator ``(f(x) + f(x')) / (p(x) + p(x'))`` is used.  The reflection is
a measure-preserving involution fixed by the knot points, so the
estimator stays unbiased.

Budgets are split into fixed-size blocks.  Block ``b`` of stream ``k``
draws from a Philox generator keyed by ``SeedSequence(seed,
spawn_key=(k, b))``; block partial sums are reduced in block order, so
results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .errors import DuplicateParameter, InvalidCutoff

STREAM_GI_X, STREAM_GI_Y, STREAM_E_Y, STREAM_AE_Y, STREAM_INNER, STREAM_MIXTURE = range(1, 7)


@dataclass(frozen=True)
class QuadratureSpec:
    samples: int = 1_000_000
    seed: int = 42
    epsilon: float = 0.0
    shells: tuple = ()
    weights: tuple = (1 / 3, 1 / 3, 1 / 3)
    tail_exponent: float = 5.0
    tail_scale: float = 1.0
    block_size: int = 1 << 16
    workers: int = 1

    def __post_init__(self):
        if int(self.samples) < 1:
            raise ValueError("samples must be >= 1")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be three nonnegative reals with positive sum")
        object.__setattr__(self, "weights", tuple(float(v) for v in w / w.sum()))
        if not self.tail_exponent > 3:
            raise ValueError("tail_exponent must exceed 3")
        if not self.tail_scale > 0:
            raise ValueError("tail_scale must be positive")
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be positive")
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "shells", tuple(float(s) for s in self.shells))

    def replace(self, **kw):
        args = asdict(self)
        args.update(kw)
        return QuadratureSpec(**args)

    def to_dict(self):
        d = asdict(self)
        d["shells"] = list(d["shells"])
        d["weights"] = list(d["weights"])
        return d


@dataclass(frozen=True)
class Estimate:
    value: float
    standard_error: float
    samples: int
    accepted_fraction: float
    abs_mean: float = float("nan")  # mean |per-sample estimator|; scale for power checks

    def __add__(self, other):
        return combine([(1.0, self), (1.0, other)])

    def to_dict(self):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}


def combine(terms, constant=0.0):
    """Linear combination ``constant + sum c_i E_i`` with independent errors."""
    value = constant + sum(c * e.value for c, e in terms)
    se = math.sqrt(sum((c * e.standard_error) ** 2 for c, e in terms))
    return Estimate(value, se, sum(e.samples for _, e in terms), float("nan"))


def cyclic_order(params) -> bool:
    """True iff ``params`` is a cyclic rotation of its sorted order."""
    a = [float(p) for p in params]
    if len(set(a)) != len(a):
        raise DuplicateParameter(f"repeated parameter in {a}")
    if len(a) < 3:
        return True
    return sum(a[i] > a[(i + 1) % len(a)] for i in range(len(a))) == 1


# --------------------------------------------------------------------------
# block engine
# --------------------------------------------------------------------------


def block_rng(seed, stream, block):
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1), spawn_key=(stream, block))
    return np.random.Generator(np.random.Philox(ss))


def _blocks(quad):
    n, b = quad.samples, quad.block_size
    return [(i, min(b, n - i * b)) for i in range((n + b - 1) // b)]


def run_blocks(quad, stream, block_fn):
    """Evaluate ``block_fn(rng, size) -> dict of arrays`` per block; stack in block order."""
    blocks = _blocks(quad)

    def one(item):
        i, size = item
        return block_fn(block_rng(quad.seed, stream, i), size)

    if quad.workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=quad.workers) as pool:
            parts = list(pool.map(one, blocks))
    else:
        parts = [one(b) for b in blocks]
    return {k: np.stack([p[k] for p in parts]) for k in parts[0]}


def _moments(vals):
    return np.array([vals.sum(), (vals * vals).sum(), np.abs(vals).sum()])


def _finish(moments, accepted, n):
    s1, s2, sa = moments
    mean = s1 / n
    var = max(0.0, (s2 - n * mean * mean) / (n - 1)) if n > 1 else 0.0
    return Estimate(float(mean), float(math.sqrt(var / n)), int(n), float(accepted / n), float(sa / n))


def _reduce(parts, n):
    # block partials combine with numpy's pairwise summation in block order
    return _finish(parts["m"].sum(axis=0), int(parts["acc"].sum()), n)


# --------------------------------------------------------------------------
# X diagram
# --------------------------------------------------------------------------


def gi_x(knot, quad: QuadratureSpec, backend=None) -> Estimate:
    """Chord integral over cyclically ordered ``(s1..s4)`` of ``k(1,3) k(2,4)``.

    ``k`` is the Gauss kernel with curve derivatives (speed included).
    """

    def block(rng, size):
        S = rng.random((size, 4))
        vals, acc = _kernels.x_samples(knot.cos, knot.sin, S, backend)
        return {"m": _moments(vals), "acc": np.array(acc)}

    return _reduce(run_blocks(quad, STREAM_GI_X, block), quad.samples)


# --------------------------------------------------------------------------
# Y diagrams
# --------------------------------------------------------------------------


def _y_estimate(knot, quad, kind, symmetrize, eps, stream, backend, shells=None, fixed=None):
    w = np.asarray(quad.weights)

    def block(rng, size):
        U = rng.random((size, 7))
        if fixed is None:
            S = U[:, :3]
        else:
            S = np.broadcast_to(fixed, (size, 3))
        vals, dmin, acc = _kernels.y_samples(
            knot.cos, knot.sin, S, U[:, 3:], w, quad.tail_exponent, quad.tail_scale, kind, symmetrize, eps, backend
        )
        out = {"m": _moments(vals), "acc": np.array(acc)}
        if shells is not None:
            n_lo, n_hi = shells
            with np.errstate(divide="ignore"):
                idx = np.floor(-np.log2(dmin))
            sm = np.zeros((n_hi - n_lo + 1, 3))
            for j, n in enumerate(range(n_lo, n_hi + 1)):
                sm[j] = _moments(np.where(idx == n, vals, 0.0))
            out["shell"] = sm
        return out

    parts = run_blocks(quad, stream, block)
    total = _reduce(parts, quad.samples)
    if shells is None:
        return total
    acc = int(parts["acc"].sum())
    sums = parts["shell"].sum(axis=0)
    return total, [_finish(sums[j], acc, quad.samples) for j in range(sums.shape[0])]


def gi_y(knot, quad: QuadratureSpec, backend=None) -> Estimate:
    """``-int det(X_G(y1), X_G(y2), X_G(y3))(x)`` over cyclically ordered triples and ``x``."""
    return _y_estimate(knot, quad, _kernels.GAUSS, True, 0.0, STREAM_GI_Y, backend)


def v2_from_integrals(gix: Estimate, giy: Estimate) -> Estimate:
    return combine([(0.25, gix), (-1.0 / 3.0, giy)], constant=1.0 / 24.0)


def e_y(knot, quad: QuadratureSpec, backend=None, guard=True) -> Estimate:
    """Signed conformal Y-energy ``int det(tv1, tv2, tv3) dvol`` over ordered triples."""
    if guard:
        six_form_guard(knot, seed=quad.seed)
    return _y_estimate(knot, quad, _kernels.CONFORMAL, True, 0.0, STREAM_E_Y, backend)


def e_y_inner(knot, params, quad: QuadratureSpec, backend=None) -> Estimate:
    """Inner ``x``-integral of the conformal Y-integrand for a fixed triple of parameters."""
    p = np.sort(np.asarray(params, dtype=float) % 1.0)
    if len(set(p.tolist())) != 3:
        raise DuplicateParameter("knot points must be distinct")
    return _y_estimate(knot, quad, _kernels.CONFORMAL, True, 0.0, STREAM_INNER, backend, fixed=p)


def ae_y(knot, quad: QuadratureSpec, backend=None, guard=True) -> Estimate:
    """Absolute conformal Y-energy with every singular distance kept above ``quad.epsilon``.

    Knot-point separations are chordal distances in R^3.
    """
    if not quad.epsilon > 0:
        raise InvalidCutoff("the absolute Y-energy diverges without an excision radius")
    if guard:
        six_form_guard(knot, seed=quad.seed)
    return _y_estimate(knot, quad, _kernels.CONFORMAL_ABS, False, quad.epsilon, STREAM_AE_Y, backend)


def divergence_scan(knot, quad: QuadratureSpec, n_min: int, n_max: int, backend=None):
    """Contribution of each dyadic shell ``2^-(n+1) < dmin <= 2^-n`` for ``n_min <= n <= n_max``.

    ``dmin`` is the smallest of ``|x - y_i|`` and ``|y_i - y_j|``.  One
    sample run feeds all shells, so ``sum(shells)`` equals
    ``ae_y(2^-(n_max+1)) - ae_y(2^-n_min)`` for the same draws.
    """
    if not (n_max > n_min >= 1):
        raise ValueError("need n_max > n_min >= 1")
    eps = 2.0 ** (-(n_max + 1))
    six_form_guard(knot, seed=quad.seed)
    _, shells = _y_estimate(
        knot, quad, _kernels.CONFORMAL_ABS, False, eps, STREAM_AE_Y, backend, shells=(n_min, n_max)
    )
    return list(zip(range(n_min, n_max + 1), shells))


def cumulative_slope(scan):
    """Least-squares slope of the running shell sum against ``n``."""
    ns = np.array([n for n, _ in scan], dtype=float)
    cum = np.cumsum([e.value for _, e in scan])
    return float(np.polyfit(ns, cum, 1)[0])


# --------------------------------------------------------------------------
# checks
# --------------------------------------------------------------------------


def mixture_integral(func, centers, quad: QuadratureSpec, backend=None) -> Estimate:
    """Importance-sampled ``int_{R^3} func(x) dx`` with the three-center mixture."""
    centers = np.asarray(centers, dtype=float)

    def block(rng, size):
        U = rng.random((size, 4))
        X, P = _kernels.mixture_sample(centers, U, quad.weights, quad.tail_exponent, quad.tail_scale, backend)
        return {"m": _moments(func(X) / P), "acc": np.array(size)}

    return _reduce(run_blocks(quad, STREAM_MIXTURE, block), quad.samples)


def conformal_det(Y, D, x):
    """``det`` of the three conformally transported tangents (rows) at ``x``."""
    from .transport import transport

    return np.linalg.det(transport(Y, D, x[..., None, :]))


def gauss_det(Y, D, x):
    from .gaussforms import x_g

    return -np.linalg.det(x_g(Y, D, x[..., None, :]))


def six_form_deviation(knot, T, s, x):
    """Max relative deviation of the conformal Y 6-form under ``T`` on given configurations.

    ``s`` has shape ``(n, 3)``; ``x`` shape ``(n, 3)``.  The 6-form pulls
    back with ``det dT(x)`` from the volume factor; the ``dy_i`` factors are
    absorbed by pushing the curve derivatives forward.
    """
    from .moebius import TangentVector
    from .transport import transport

    Y = knot.eval(s.ravel()).reshape(-1, 3, 3)
    D = knot.deriv(s.ravel(), 1).reshape(-1, 3, 3)
    M = transport(Y, D, x[:, None, :])
    before = np.linalg.det(M)
    scale = np.prod(np.linalg.norm(M, axis=2), axis=1)
    pushed = T.pushforward(TangentVector(Y, D))
    Tx = T.apply(x)
    after = np.linalg.det(transport(pushed.base, pushed.vec, Tx[:, None, :]))
    det_dT = T.orientation(x) * T.conformal_factor(x) ** 6
    return float(np.max(np.abs(after * det_dT - before) / scale))


def six_form_guard(knot, seed=0, n=100, tol=1e-9):
    """Re-assert 6-form invariance on ``n`` random configurations; raises on failure."""
    from .moebius import random_moebius

    rng = np.random.default_rng([seed & 0xFFFFFFFF, 977])
    s = rng.random((n, 3))
    x = knot.eval(rng.random(n)) + rng.normal(scale=0.5, size=(n, 3))
    avoid = np.concatenate([knot.eval(np.arange(512) / 512), x])
    T = random_moebius(int(rng.integers(2**31)), bound=3.0, avoid=avoid, min_clearance=0.3)
    dev = six_form_deviation(knot, T, s, x)
    if not dev < tol:
        raise RuntimeError(f"6-form invariance guard failed: deviation {dev:.3e}")
    return dev
