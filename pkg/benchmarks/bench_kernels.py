"""Time the compiled and pure-Python kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--events 20000] [--repeat 5]
"""

import argparse
import time

import numpy as np

from mcpflow import kernels


def _history_inputs(rng, n_events, n_dynamic, density=0.1):
    times = np.cumsum(rng.integers(1, 8, n_events)).astype(np.float64)
    rows = [np.flatnonzero(rng.random(n_dynamic) < density) for _ in range(n_events)]
    indptr = np.zeros(n_events + 1, dtype=np.int64)
    indptr[1:] = np.cumsum([len(r) for r in rows])
    indices = np.concatenate(rows).astype(np.int64)
    hist_lens = np.arange(1, n_events + 1, dtype=np.int64)
    return times, indptr, indices, times.copy(), hist_lens


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=2000, help="events in one long sequence")
    ap.add_argument("--samples", type=int, default=200_000)
    ap.add_argument("--classes", type=int, default=16)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    hist = _history_inputs(rng, args.events, 30)
    logits = rng.normal(size=(args.samples, args.classes))
    labels = rng.integers(-1, args.classes, args.samples).astype(np.int64)
    weights = rng.random(args.samples) + 0.5

    backends = kernels.backends()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<14} {'backend':<8} {'seconds':>10}")
    results = {}
    for name, mod in backends.items():
        for variant in ("mcp", "scp"):
            code = kernels.VARIANT_CODES[variant]
            t = _best(lambda: mod.history_block(*hist, code, 2.0, 30), args.repeat)
            results[(f"history/{variant}", name)] = t
        resid = np.empty_like(logits)
        results[("softmax_xent", name)] = _best(lambda: mod.softmax_xent(logits, labels, weights, resid), args.repeat)
    for (kernel, name), t in results.items():
        print(f"{kernel:<14} {name:<8} {t:>10.4f}")
    if len(backends) == 2:
        for kernel in sorted({k for k, _ in results}):
            print(f"speedup {kernel}: {results[(kernel, 'python')] / results[(kernel, 'cython')]:.1f}x")


if __name__ == "__main__":
    main()
