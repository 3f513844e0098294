"""Benchmark the radiation kernel backends.

Times the compiled extension against the pure-numpy fallback on identical
random source/observer sets and reports pair throughput plus the maximum
cross-backend deviation.

Usage: python benchmarks/bench_radiate.py [n_src] [n_obs] [repeats]
"""

from __future__ import annotations

import sys
import time

import numpy as np

from reflectsim import _radiate_np

try:
    from reflectsim import _radiate_cy
except ImportError:
    _radiate_cy = None


def make_case(n_src: int, n_obs: int, seedval: int = 7):
    rng = np.random.default_rng(seedval)
    src = rng.uniform(-100, 100, (n_src, 3))
    areas = rng.uniform(0.5, 2.0, n_src)
    cj = rng.standard_normal((n_src, 3)) + 1j * rng.standard_normal((n_src, 3))
    cm = rng.standard_normal((n_src, 3)) + 1j * rng.standard_normal((n_src, 3))
    obs = rng.uniform(-100, 100, (n_obs, 3)) + np.array([0.0, 0.0, 500.0])
    return src, areas, cj, cm, obs


def run(fn, case, k, eta, repeats: int):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*case, k, eta, 1)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> int:
    n_src = int(sys.argv[1]) if len(sys.argv) > 1 else 3000
    n_obs = int(sys.argv[2]) if len(sys.argv) > 2 else 3000
    repeats = int(sys.argv[3]) if len(sys.argv) > 3 else 3
    k = 0.5063 + 0.0j
    eta = 376.73 + 0.0j
    case = make_case(n_src, n_obs)
    pairs = n_src * n_obs

    t_np, (e_np, h_np) = run(_radiate_np.radiate_pairs, case, k, eta, repeats)
    print(f"numpy   : {t_np * 1e3:8.1f} ms  {pairs / t_np / 1e6:8.1f} Mpairs/s")

    if _radiate_cy is None:
        print("compiled backend not available; build the extension to compare")
        return 0

    t_cy, (e_cy, h_cy) = run(_radiate_cy.radiate_pairs, case, k, eta, repeats)
    print(f"compiled: {t_cy * 1e3:8.1f} ms  {pairs / t_cy / 1e6:8.1f} Mpairs/s")
    print(f"speedup : {t_np / t_cy:.2f}x")

    scale = max(np.abs(e_np).max(), np.abs(h_np).max())
    dev = max(
        np.abs(e_cy - e_np).max() / scale,
        np.abs(h_cy - h_np).max() / scale,
    )
    print(f"max relative cross-backend deviation: {dev:.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
