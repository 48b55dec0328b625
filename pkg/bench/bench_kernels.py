"""Time the compiled kernels against the numpy fallback.

    python bench/bench_kernels.py [--repeat 5]

Kernel-level timings call both implementations directly. The end-to-end row
runs a Peetre-flavor Triebel-Lizorkin norm on the 2D fixture in a subprocess
per backend (``FSL_PURE_PYTHON=1`` selects the fallback).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fsl import _kernels_py
from fsl.config import operator_from_config, space_from_config

try:
    from fsl import _kernels
except ImportError:
    _kernels = None

E2E = """
import time
from fsl.config import operator_from_config, space_from_config
from fsl.norms import NormParams, triebel_norm
from fsl.sampling import random_fields
import fsl.kernels as k
op = operator_from_config(space_from_config("grid2d"))
F = random_fields(op, 20, 7)
t0 = time.perf_counter()
triebel_norm(op, F, NormParams(alpha=0.3, flavor="peetre"))
print(k.BACKEND, time.perf_counter() - t0)
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    sp = space_from_config("grid2d")
    op = operator_from_config(sp)
    rng = np.random.default_rng(0)
    G = np.abs(rng.standard_normal((24, 20, sp.n_points)))
    ts = 2.0 ** -np.linspace(1, 6, 24)
    indptr, indices = sp.balls.csr
    avg = rng.random((20, indptr.size - 1))
    cases = {
        "peetre_max (24x20x256)": lambda m: m.peetre_max(G, sp.dist, ts, 3.5),
        "ball_sup (20 fields)": lambda m: m.ball_sup(avg, indptr, indices, sp.n_points),
    }
    print(f"{'kernel':28s} {'python [s]':>12s} {'cython [s]':>12s} {'speedup':>8s}")
    for name, call in cases.items():
        tp = best(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:28s} {tp:12.4f} {'n/a':>12s} {'n/a':>8s}")
            continue
        tc = best(lambda: call(_kernels), args.repeat)
        print(f"{name:28s} {tp:12.4f} {tc:12.4f} {tp / tc:8.1f}")
    rows = {}
    for pure in ("1", "0"):
        env = dict(os.environ, FSL_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        rows[backend] = float(secs)
    line = f"{'peetre TL norm, grid2d':28s} {rows.get('python', float('nan')):12.4f}"
    if "cython" in rows:
        line += f" {rows['cython']:12.4f} {rows['python'] / rows['cython']:8.1f}"
    print(line)


if __name__ == "__main__":
    main()
