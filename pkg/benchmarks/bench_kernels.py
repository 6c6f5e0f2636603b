"""Time the compiled replication kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--horizon H] [--repeat R]

Both backends run the same replication from the same seed; the script also
checks that their outputs agree bit for bit.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from circpoll import _backend, _pykernels
from circpoll.dists import SystemParams, make_batch_dist, make_service_dist
from circpoll.engine import KernelModel

CASES = {
    "continuous rho=0.5 K=1": (0.5, {"kind": "deterministic", "k": 1}, {"kind": "exponential", "rate": 1.0}, None),
    "continuous rho=0.9 geometric(5)": (0.02 * 9, {"kind": "geometric", "mean": 5}, {"kind": "exponential", "mean": 1.0}, None),
    "discrete N=10 rho=0.7 K=5": (0.14, {"kind": "deterministic", "k": 5}, {"kind": "exponential", "rate": 1.0}, 10),
}


def _run(mod, model, horizon, n_queues):
    if n_queues is None:
        grid = tuple(round(0.1 * i, 10) for i in range(1, 11))
        return mod.continuous_rep(model, horizon, 0.1 * horizon, 1.0, grid, np.random.PCG64(1), np.random.PCG64(2), 0)
    return mod.discrete_rep(model, n_queues, 1.0, horizon, 0.1 * horizon, np.random.PCG64(1))


def _best(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def _identical(a, b) -> bool:
    return a.keys() == b.keys() and all(np.array_equal(np.asarray(a[k]), np.asarray(b[k])) for k in a)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=2e4)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not _backend.compiled_available():
        raise SystemExit("compiled kernels are not built; nothing to compare")
    fast = _backend.get_backend("compiled")

    print(f"{'case':34s} {'events':>9s} {'python s':>9s} {'compiled s':>10s} {'speedup':>8s}  identical")
    for name, (lam, batch, service, n) in CASES.items():
        p = SystemParams(lam, 1.0, make_batch_dist(batch), make_service_dist(service))
        model = KernelModel.from_params(p)
        t_py, out_py = _best(lambda: _run(_pykernels, model, args.horizon, n), args.repeat)
        t_c, out_c = _best(lambda: _run(fast, model, args.horizon, n), args.repeat)
        same = _identical(out_py, out_c)
        print(f"{name:34s} {out_c['n_events']:9d} {t_py:9.3f} {t_c:10.4f} {t_py / t_c:7.1f}x  {same}")


if __name__ == "__main__":
    main()
