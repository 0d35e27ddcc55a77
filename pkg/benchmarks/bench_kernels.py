"""Compare the compiled and numpy kernels on the Monte-Carlo hot loops.

    python3 benchmarks/bench_kernels.py [--samples N] [--repeat R]

The first compiled call includes JIT compilation (or a cache load), so
each backend is warmed up on a small batch before timing.
"""

import argparse
import time

import numpy as np

from knotform import _backend, _kernels, preset


def _y(knot, kind, symmetrize):
    def run(S, U, backend):
        return _kernels.y_samples(knot.cos, knot.sin, S, U, (1 / 3, 1 / 3, 1 / 3), 5.0, 1.0, kind, symmetrize, 0.0, backend)

    return run


def _x(knot):
    def run(S, U, backend):
        return _kernels.x_samples(knot.cos, knot.sin, np.concatenate([S, U[:, :1]], axis=1), backend)

    return run


def best_time(fn, S, U, backend, repeat):
    fn(S[:1000], U[:1000], backend)  # warm-up
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(S, U, backend)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)

    knot = preset("trefoil")
    rng = np.random.default_rng(0)
    S, U = rng.random((args.samples, 3)), rng.random((args.samples, 4))
    cases = {
        "GI_Y integrand (Gauss, reflected)": _y(knot, _kernels.GAUSS, True),
        "E_Y integrand (conformal, reflected)": _y(knot, _kernels.CONFORMAL, True),
        "AE_Y integrand (conformal, absolute)": _y(knot, _kernels.CONFORMAL_ABS, False),
        "GI_X integrand (two chords)": _x(knot),
    }
    backends = ["numpy"] + (["numba"] if _backend.HAVE_NUMBA else [])
    print(f"{args.samples} samples, best of {args.repeat}")
    print(f"{'kernel':40s}" + "".join(f"{b:>12s}" for b in backends) + ("     speedup" if len(backends) == 2 else ""))
    for name, fn in cases.items():
        t = [best_time(fn, S, U, b, args.repeat) for b in backends]
        row = f"{name:40s}" + "".join(f"{v:11.3f}s" for v in t)
        if len(t) == 2:
            row += f"{t[0] / t[1]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
