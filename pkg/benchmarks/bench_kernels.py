"""Throughput comparison of the numba and numpy kernel backends.

Run as a script:

    python benchmarks/bench_kernels.py [--rows 4000] [--cols 44] [--repeat 5]

Each kernel is warmed up once (letting the JIT compile), then timed over the
best of ``--repeat`` runs. The numba path is skipped when numba is missing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from deltaseq import _kernels


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--cols", type=int, default=44)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    a = rng.normal(size=(args.rows, args.cols))
    b = rng.normal(size=(args.rows, args.cols))
    values = rng.uniform(-1.0, 1.0, size=4_000_000)

    rows = []

    def time_pair(name, numpy_fn, numba_fn):
        t_np = best_of(numpy_fn, args.repeat)
        if numba_fn is None:
            rows.append((name, t_np, None, None))
            return
        numba_fn()  # warmup: triggers compilation
        t_nb = best_of(numba_fn, args.repeat)
        rows.append((name, t_np, t_nb, t_np / t_nb))

    counts_np = np.zeros(50, dtype=np.int64)
    counts_nb = np.zeros(50, dtype=np.int64)
    time_pair(
        f"ks_scaled_batch {args.rows}x{args.cols}",
        lambda: _kernels.ks_scaled_batch_numpy(a, b),
        (lambda: _kernels.ks_scaled_batch_numba(a, b)) if _kernels.HAVE_NUMBA else None,
    )
    time_pair(
        "hist_accumulate 4M values",
        lambda: _kernels.hist_accumulate_numpy(values, -1.0, 25.0, counts_np),
        (lambda: _kernels.hist_accumulate_numba(values, -1.0, 25.0, counts_nb))
        if _kernels.HAVE_NUMBA
        else None,
    )

    if _kernels.HAVE_NUMBA:
        s_np, _ = _kernels.ks_scaled_batch_numpy(a, b)
        s_nb, _ = _kernels.ks_scaled_batch_numba(a, b)
        assert np.array_equal(s_np, s_nb), "backends disagree"

    print(f"active backend: {_kernels.ACTIVE_BACKEND}")
    print(f"{'kernel':<34} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}")
    for name, t_np, t_nb, speedup in rows:
        nb = f"{t_nb:>10.4f}" if t_nb is not None else f"{'n/a':>10}"
        sp = f"{speedup:>7.1f}x" if speedup is not None else f"{'n/a':>8}"
        print(f"{name:<34} {t_np:>10.4f} {nb} {sp}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
