"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import time

import numpy as np

from auvtrack import kernels
from auvtrack.acoustic import AcousticConfig, make_observations, paper_buoys
from auvtrack.kalman import build_model
from auvtrack.linalg import pseudoinverse


def chan_case(n=100_000):
    rng = np.random.default_rng(0)
    b = paper_buoys()
    pts = rng.uniform([-700, -900, -450], [100, 100, -10], size=(n, 3))
    deltas = make_observations(pts, b, AcousticConfig(1500.0, 1 / 1500), rng)
    return pseudoinverse(b.auxiliaries - b.reference), b.positions, deltas, 1500.0


def kalman_case(n=20_000):
    rng = np.random.default_rng(1)
    m = build_model(10.0, np.diag([0.01] * 3 + [1e-4] * 3), np.diag([0.5, 0.8, 1.2]))
    u = rng.normal(size=(n, 3)) * 0.01
    z = rng.normal(size=(n, 3))
    mask = rng.uniform(size=n) > 0.1
    return m.f, m.g, m.q, m.r, np.zeros(6), np.eye(6) * 100, u, z, mask


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    cases = {"chan_batch (100k fixes)": ("chan_batch", chan_case()),
             "kalman_sequence (20k steps)": ("kalman_sequence", kalman_case())}
    names = kernels.available_backends()
    print(f"{'kernel':30s}" + "".join(f"{n:>12s}" for n in names) + "     speedup")
    for label, (attr, case) in cases.items():
        t = {n: best_of(getattr(kernels.get_backend(n), attr), case, args.repeat) for n in names}
        speed = f"{t['python'] / t['compiled']:9.1f}x" if "compiled" in t else "        -"
        print(f"{label:30s}" + "".join(f"{t[n]:11.4f}s" for n in names) + "  " + speed)


if __name__ == "__main__":
    main()
