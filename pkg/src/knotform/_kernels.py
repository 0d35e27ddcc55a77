"""Hot loops, each in an ``@njit`` flavour and a vectorised numpy flavour.

The public names at the bottom of the module dispatch on
``_backend.BACKEND``.  Both flavours consume the same uniform variates and
return per-sample arrays, so reductions happen once, in numpy, with the
same summation order whichever flavour produced the samples.

Y-diagram integrand kinds:

``GAUSS`` (0)
    ``-det(X_G(y1; y1'), X_G(y2; y2'), X_G(y3; y3'))`` at ``x``.
``CONFORMAL`` (1)
    ``det(tv1, tv2, tv3)`` of the conformally transported tangents.
``CONFORMAL_ABS`` (2)
    its absolute value, zeroed below a round-off floor.
"""

import math

import numpy as np

from ._backend import njit, use_numba

GAUSS, CONFORMAL, CONFORMAL_ABS = 0, 1, 2
TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi
# |det| of normalised columns below this is round-off, not signal
DET_FLOOR = 1e-12


# --------------------------------------------------------------------------
# numba flavour
# --------------------------------------------------------------------------


@njit
def _nb_curve(cos, sin, s, p, d):
    K = cos.shape[1]
    for a in range(3):
        p[a] = cos[a, 0]
        d[a] = 0.0
    for k in range(1, K):
        w = TWO_PI * k
        arg = w * s
        ck = math.cos(arg)
        sk = math.sin(arg)
        for a in range(3):
            p[a] += cos[a, k] * ck + sin[a, k] * sk
            d[a] += w * (sin[a, k] * ck - cos[a, k] * sk)


@njit
def _nb_det3(m):
    return (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )


@njit
def _nb_q(r, tail, scale):
    return (tail - 3.0) / (FOUR_PI * scale) / (r * r * (1.0 + r / scale) ** (tail - 2.0))


@njit
def _nb_density(x, Y, weights, tail, scale):
    p = 0.0
    for j in range(3):
        d0 = x[0] - Y[j, 0]
        d1 = x[1] - Y[j, 1]
        d2 = x[2] - Y[j, 2]
        r = math.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if weights[j] > 0.0:
            p += weights[j] * _nb_q(r, tail, scale)
    return p


@njit
def _nb_draw(Y, u, weights, tail, scale, x):
    # u = (component, radius, cos polar, azimuth) uniforms
    acc = 0.0
    comp = 2
    for j in range(3):
        acc += weights[j]
        if u[0] < acc:
            comp = j
            break
    r = scale * ((1.0 - u[1]) ** (-1.0 / (tail - 3.0)) - 1.0)
    z = 2.0 * u[2] - 1.0
    st = math.sqrt(max(0.0, 1.0 - z * z))
    ph = TWO_PI * u[3]
    x[0] = Y[comp, 0] + r * st * math.cos(ph)
    x[1] = Y[comp, 1] + r * st * math.sin(ph)
    x[2] = Y[comp, 2] + r * z


@njit
def _nb_integrand(x, Y, D, kind, M):
    for i in range(3):
        w0 = x[0] - Y[i, 0]
        w1 = x[1] - Y[i, 1]
        w2 = x[2] - Y[i, 2]
        r2 = w0 * w0 + w1 * w1 + w2 * w2
        if r2 == 0.0:
            return 0.0
        v0 = D[i, 0]
        v1 = D[i, 1]
        v2 = D[i, 2]
        if kind == GAUSS:
            r3 = FOUR_PI * r2 * math.sqrt(r2)
            M[i, 0] = (w1 * v2 - w2 * v1) / r3
            M[i, 1] = (w2 * v0 - w0 * v2) / r3
            M[i, 2] = (w0 * v1 - w1 * v0) / r3
        else:
            dot = 2.0 * (v0 * w0 + v1 * w1 + v2 * w2) / r2
            M[i, 0] = (dot * w0 - v0) / r2
            M[i, 1] = (dot * w1 - v1) / r2
            M[i, 2] = (dot * w2 - v2) / r2
    det = _nb_det3(M)
    if kind == GAUSS:
        return -det
    if kind == CONFORMAL:
        return det
    norm = 1.0
    for i in range(3):
        norm *= math.sqrt(M[i, 0] ** 2 + M[i, 1] ** 2 + M[i, 2] ** 2)
    if abs(det) <= DET_FLOOR * norm:
        return 0.0
    return abs(det)


@njit
def _nb_cyclic(a, n):
    desc = 0
    for i in range(n):
        if a[i] > a[(i + 1) % n]:
            desc += 1
    return desc == 1


@njit
def _nb_y_samples(cos, sin, S, U, weights, tail, scale, kind, symmetrize, eps, vals, dmin):
    n = S.shape[0]
    Y = np.empty((3, 3))
    D = np.empty((3, 3))
    M = np.empty((3, 3))
    x = np.empty(3)
    xs = np.empty(3)
    accepted = 0
    for k in range(n):
        vals[k] = 0.0
        dmin[k] = np.inf
        if not _nb_cyclic(S[k], 3):
            continue
        accepted += 1
        for i in range(3):
            _nb_curve(cos, sin, S[k, i], Y[i], D[i])
        _nb_draw(Y, U[k], weights, tail, scale, x)
        best = np.inf
        bi = 0
        bj = 1
        for i in range(3):
            for j in range(i + 1, 3):
                dd = math.sqrt((Y[i, 0] - Y[j, 0]) ** 2 + (Y[i, 1] - Y[j, 1]) ** 2 + (Y[i, 2] - Y[j, 2]) ** 2)
                if dd < best:
                    best = dd
                    bi = i
                    bj = j
        dm = best
        for i in range(3):
            dx = math.sqrt((x[0] - Y[i, 0]) ** 2 + (x[1] - Y[i, 1]) ** 2 + (x[2] - Y[i, 2]) ** 2)
            if dx < dm:
                dm = dx
        dmin[k] = dm
        if dm <= eps:
            continue
        p = _nb_density(x, Y, weights, tail, scale)
        f = _nb_integrand(x, Y, D, kind, M)
        if symmetrize:
            for a in range(3):
                xs[a] = Y[bi, a] + Y[bj, a] - x[a]
            ps = _nb_density(xs, Y, weights, tail, scale)
            fs = _nb_integrand(xs, Y, D, kind, M)
            vals[k] = (f + fs) / (p + ps)
        else:
            vals[k] = f / p
    return accepted


@njit
def _nb_gauss(P, V, Q, W):
    w0 = P[0] - Q[0]
    w1 = P[1] - Q[1]
    w2 = P[2] - Q[2]
    r2 = w0 * w0 + w1 * w1 + w2 * w2
    det = V[0] * (W[1] * w2 - W[2] * w1) - V[1] * (W[0] * w2 - W[2] * w0) + V[2] * (W[0] * w1 - W[1] * w0)
    return det / (FOUR_PI * r2 * math.sqrt(r2))


@njit
def _nb_x_samples(cos, sin, S, vals):
    n = S.shape[0]
    P = np.empty((4, 3))
    D = np.empty((4, 3))
    accepted = 0
    for k in range(n):
        vals[k] = 0.0
        if not _nb_cyclic(S[k], 4):
            continue
        accepted += 1
        for i in range(4):
            _nb_curve(cos, sin, S[k, i], P[i], D[i])
        vals[k] = _nb_gauss(P[0], D[0], P[2], D[2]) * _nb_gauss(P[1], D[1], P[3], D[3])
    return accepted


@njit
def _nb_gauss_double_sum(P1, D1, P2, D2):
    total = 0.0
    for i in range(P1.shape[0]):
        row = 0.0
        for j in range(P2.shape[0]):
            w0 = P1[i, 0] - P2[j, 0]
            w1 = P1[i, 1] - P2[j, 1]
            w2 = P1[i, 2] - P2[j, 2]
            r2 = w0 * w0 + w1 * w1 + w2 * w2
            a = D1[i]
            b = D2[j]
            det = a[0] * (b[1] * w2 - b[2] * w1) - a[1] * (b[0] * w2 - b[2] * w0) + a[2] * (b[0] * w1 - b[1] * w0)
            row += det / (r2 * math.sqrt(r2))
        total += row
    return total


@njit
def _nb_mixture(Y, U, weights, tail, scale, X, P):
    for k in range(U.shape[0]):
        _nb_draw(Y, U[k], weights, tail, scale, X[k])
        P[k] = _nb_density(X[k], Y, weights, tail, scale)


# --------------------------------------------------------------------------
# numpy flavour
# --------------------------------------------------------------------------


def _np_curve(cos, sin, s):
    k = np.arange(cos.shape[1])
    w = TWO_PI * k
    arg = s[..., None] * w
    ck, sk = np.cos(arg), np.sin(arg)
    p = ck @ cos.T + sk @ sin.T
    d = (sk * -w) @ cos.T + (ck * w) @ sin.T
    return p, d


def _np_cyclic(S):
    return (S > np.roll(S, -1, axis=1)).sum(axis=1) == 1


def _np_density(x, Y, weights, tail, scale):
    r = np.linalg.norm(x[:, None, :] - Y, axis=2)
    with np.errstate(divide="ignore"):
        q = (tail - 3.0) / (FOUR_PI * scale) / (r * r * (1.0 + r / scale) ** (tail - 2.0))
    w = np.asarray(weights)
    return np.where(w > 0.0, q * w, 0.0).sum(axis=1)


def _np_draw(Y, U, weights, tail, scale):
    cum = np.cumsum(weights)
    comp = np.minimum((U[:, 0:1] >= cum[None, :]).sum(axis=1), 2)
    r = scale * ((1.0 - U[:, 1]) ** (-1.0 / (tail - 3.0)) - 1.0)
    z = 2.0 * U[:, 2] - 1.0
    st = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    ph = TWO_PI * U[:, 3]
    offs = np.stack([r * st * np.cos(ph), r * st * np.sin(ph), r * z], axis=1)
    return Y[np.arange(len(U)), comp] + offs


def _np_integrand(x, Y, D, kind):
    w = x[:, None, :] - Y
    r2 = np.sum(w * w, axis=2, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == GAUSS:
            M = np.cross(w, D) / (FOUR_PI * r2 * np.sqrt(r2))
        else:
            dot = 2.0 * np.sum(D * w, axis=2, keepdims=True) / r2
            M = (dot * w - D) / r2
    det = np.linalg.det(M)
    bad = (r2[:, :, 0] == 0.0).any(axis=1)
    if kind == GAUSS:
        out = -det
    elif kind == CONFORMAL:
        out = det
    else:
        norm = np.prod(np.linalg.norm(M, axis=2), axis=1)
        out = np.where(np.abs(det) <= DET_FLOOR * norm, 0.0, np.abs(det))
    return np.where(bad, 0.0, out)


def _np_y_samples(cos, sin, S, U, weights, tail, scale, kind, symmetrize, eps, vals, dmin):
    n = S.shape[0]
    ok = _np_cyclic(S)
    vals[:] = 0.0
    dmin[:] = np.inf
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return 0
    Yf, Df = _np_curve(cos, sin, S[idx].reshape(-1))
    Y = Yf.reshape(-1, 3, 3)
    D = Df.reshape(-1, 3, 3)
    x = _np_draw(Y, U[idx], weights, tail, scale)
    pairs = np.array([(0, 1), (0, 2), (1, 2)])
    pd = np.linalg.norm(Y[:, pairs[:, 0]] - Y[:, pairs[:, 1]], axis=2)
    best = np.argmin(pd, axis=1)  # first minimum, matching the loop's strict '<'
    dm = np.minimum(pd.min(axis=1), np.linalg.norm(x[:, None, :] - Y, axis=2).min(axis=1))
    dmin[idx] = dm
    live = dm > eps
    p = _np_density(x, Y, weights, tail, scale)
    f = _np_integrand(x, Y, D, kind)
    if symmetrize:
        rows = np.arange(len(idx))
        xs = Y[rows, pairs[best, 0]] + Y[rows, pairs[best, 1]] - x
        ps = _np_density(xs, Y, weights, tail, scale)
        fs = _np_integrand(xs, Y, D, kind)
        v = (f + fs) / (p + ps)
    else:
        v = f / p
    vals[idx] = np.where(live, v, 0.0)
    return int(idx.size)


def _np_gauss(P, V, Q, W):
    w = P - Q
    r2 = np.sum(w * w, axis=-1)
    det = np.sum(V * np.cross(W, w), axis=-1)
    return det / (FOUR_PI * r2 * np.sqrt(r2))


def _np_x_samples(cos, sin, S, vals):
    ok = _np_cyclic(S)
    vals[:] = 0.0
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return 0
    Pf, Df = _np_curve(cos, sin, S[idx].reshape(-1))
    P = Pf.reshape(-1, 4, 3)
    D = Df.reshape(-1, 4, 3)
    vals[idx] = _np_gauss(P[:, 0], D[:, 0], P[:, 2], D[:, 2]) * _np_gauss(P[:, 1], D[:, 1], P[:, 3], D[:, 3])
    return int(idx.size)


def _np_gauss_double_sum(P1, D1, P2, D2, chunk=256):
    rows = []
    for i in range(0, len(P1), chunk):
        w = P1[i : i + chunk, None, :] - P2[None, :, :]
        r2 = np.sum(w * w, axis=2)
        det = np.sum(D1[i : i + chunk, None, :] * np.cross(D2[None, :, :], w), axis=2)
        rows.append((det / (r2 * np.sqrt(r2))).sum(axis=1))
    return float(np.concatenate(rows).sum())


def _np_mixture(Y, U, weights, tail, scale, X, P):
    Yb = np.broadcast_to(Y, (len(U), 3, 3))
    X[:] = _np_draw(Yb, U, weights, tail, scale)
    P[:] = _np_density(X, Yb, weights, tail, scale)


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

_IMPL = {
    "numba": dict(
        y=_nb_y_samples, x=_nb_x_samples, gauss_double_sum=_nb_gauss_double_sum, mixture=_nb_mixture
    ),
    "numpy": dict(
        y=_np_y_samples, x=_np_x_samples, gauss_double_sum=_np_gauss_double_sum, mixture=_np_mixture
    ),
}


def _pick(backend):
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    return _IMPL[backend]


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def y_samples(cos, sin, S, U, weights, tail, scale, kind, symmetrize, eps, backend=None):
    """Per-sample Y-diagram estimator values and minimal singular distances."""
    n = len(S)
    vals = np.empty(n)
    dmin = np.empty(n)
    accepted = _pick(backend)["y"](
        _f64(cos), _f64(sin), _f64(S), _f64(U), _f64(weights), float(tail), float(scale),
        int(kind), bool(symmetrize), float(eps), vals, dmin,
    )
    return vals, dmin, int(accepted)


def x_samples(cos, sin, S, backend=None):
    vals = np.empty(len(S))
    accepted = _pick(backend)["x"](_f64(cos), _f64(sin), _f64(S), vals)
    return vals, int(accepted)


def gauss_double_sum(P1, D1, P2, D2, backend=None):
    """``sum_ij det(D1_i, D2_j, P1_i - P2_j) / |P1_i - P2_j|^3``."""
    return float(_pick(backend)["gauss_double_sum"](_f64(P1), _f64(D1), _f64(P2), _f64(D2)))


def mixture_sample(centers, U, weights, tail, scale, backend=None):
    """Draw points from the three-center radial mixture; returns ``(x, density)``."""
    X = np.empty((len(U), 3))
    P = np.empty(len(U))
    _pick(backend)["mixture"](_f64(centers), _f64(U), _f64(weights), float(tail), float(scale), X, P)
    return X, P


def curve_points(cos, sin, s):
    return _np_curve(np.asarray(cos, float), np.asarray(sin, float), np.asarray(s, float))
