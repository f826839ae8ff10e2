"""Compare the compiled and pure-Python slot kernels on the same workload.

    python3 benchmarks/bench_kernel.py --slots 200000 --repeat 3

Both backends consume identical pre-drawn random numbers, so the script also
checks that their outputs agree bit for bit.
"""
import argparse
import time

import numpy as np

from qkdlab import _kernels
from qkdlab.detector import DetectorParams, EfficiencyCurve, GateSchedule
from qkdlab.protocol import run_detectors
from qkdlab.pulses import PulseBatch


def workload(n, seed):
    rng = np.random.default_rng(seed)
    params = (DetectorParams(afterpulse_prob=0.05, jitter_sigma=0.1, dark_count_prob=1e-4),
              DetectorParams(curve=EfficiencyCurve(center=0.4), afterpulse_prob=0.05,
                             jitter_sigma=0.1, centroid_offset=0.5, dark_count_prob=1e-4))
    bright = rng.random(n) < 0.3
    batch = PulseBatch(np.arange(n), np.where(bright, 2.5, rng.uniform(-1, 1, n)),
                       np.where(bright, 1.5e5, 1.0), rng.uniform(0, 180, n))
    return params, GateSchedule(), batch, rng.integers(0, 2, n).astype(np.int8)


def timed(kernel, n, case, seed, repeat):
    params, sched, batch, basis = case
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = run_detectors(n, basis, batch, params, sched, np.random.default_rng(seed), kernel=kernel)
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    case = workload(args.slots, args.seed)
    t_py, out_py = timed(_kernels.get_kernel("python"), args.slots, case, args.seed, args.repeat)
    print(f"python  {t_py:8.3f} s  {args.slots / t_py:12.0f} slots/s")
    try:
        cy = _kernels.get_kernel("cython")
    except ImportError:
        print("cython  not built (set up with `pip install -e .` and a C compiler)")
        return 0
    t_cy, out_cy = timed(cy, args.slots, case, args.seed, args.repeat)
    same = np.array_equal(out_py[0], out_cy[0]) and np.array_equal(out_py[1], out_cy[1], equal_nan=True)
    print(f"cython  {t_cy:8.3f} s  {args.slots / t_cy:12.0f} slots/s")
    print(f"speedup {t_py / t_cy:.1f}x, outputs identical: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    raise SystemExit(main())
