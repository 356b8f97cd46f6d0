"""Throughput of the compiled kernel against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--batch 20000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from atiyah import kernels
from atiyah.geometry import Sampler, sample_with_rng


def sample_batch(n: int, count: int, real: bool, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    dim = 2 if real else 3
    return np.stack([sample_with_rng(rng, n, dim, Sampler()).points for _ in range(count)])


def best_time(fn, pts, real, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(pts, real)
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--batch", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--arities", default="3,4,6,8")
    args = ap.parse_args()

    backends = {"python": kernels.python_batch_eval}
    if kernels.BACKEND == "cython":
        backends["cython"] = kernels.batch_eval
    print(f"{'n':>3} {'real':>5} " + " ".join(f"{b + ' (1/s)':>16}" for b in backends) + f" {'speedup':>8}")
    for n in map(int, args.arities.split(",")):
        for real in (False, True):
            pts = sample_batch(n, args.batch, real, n)
            rates = {b: args.batch / best_time(fn, pts, real, args.repeat) for b, fn in backends.items()}
            speed = rates.get("cython", float("nan")) / rates["python"]
            print(f"{n:>3} {str(real):>5} " + " ".join(f"{r:>16.0f}" for r in rates.values()) + f" {speed:>8.1f}")


if __name__ == "__main__":
    main()
