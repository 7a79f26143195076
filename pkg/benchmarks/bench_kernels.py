"""Time the Gaussian Gram matrix and quadratic-form gradient on both backends.

Usage: python benchmarks/bench_kernels.py [--sizes 100 200 400] [--repeat 5] [--end-to-end]

With --end-to-end it also times a short dual-kernel alignment run in a fresh
interpreter per backend (the backend is chosen at import).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from dualalign import _core_py

try:
    from dualalign import _core
except ImportError:
    _core = None


def _best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench(n, dim, repeat, sigma=2.0):
    rng = np.random.default_rng(n)
    x = np.ascontiguousarray(rng.normal(size=(n, dim)))
    c = np.ascontiguousarray(rng.normal(size=n))
    rows = []
    backends = [("python", _core_py)] + ([("cython", _core)] if _core is not None else [])
    for name, mod in backends:
        k = mod.gaussian_gram(x, x, sigma)
        rows.append((name, n, "gram", _best(lambda: mod.gaussian_gram(x, x, sigma), repeat)))
        rows.append((name, n, "quad_grad", _best(lambda: mod.gaussian_quad_grad(x, c, k, sigma), repeat)))
    return rows


_E2E = """
import time
from dualalign import _backend
from dualalign.config import parse_config
from dualalign.experiments import synthetic_data
from dualalign.optimizers import run_alignment, identity_matcher
cfg = parse_config("experiment: synthetic_align\\nobjective: dual_kernel\\nkernel: {kind: gaussian, sigma: 4.0}\\n")
a, b = synthetic_data(cfg)
import dataclasses
opt = dataclasses.replace(cfg.optimizer_for("dual_kernel"), iterations=1000)
t = time.perf_counter()
run_alignment("dual_kernel", a, b, identity_matcher("free_points", b), opt,
              kernel=cfg.kernel_for("dual_kernel", a, b), penalties=cfg.penalties_for("dual_kernel"))
print(_backend.BACKEND, time.perf_counter() - t)
"""


def end_to_end():
    for name in ("python", "cython"):
        env = dict(os.environ, DUALALIGN_BACKEND=name)
        res = subprocess.run([sys.executable, "-c", _E2E], env=env, capture_output=True, text=True)
        if res.returncode != 0:
            print(f"{name}: failed\n{res.stderr}")
            continue
        got, secs = res.stdout.split()
        print(f"dual_kernel, 200 points, 1000 iterations: backend={got:<7} {float(secs):.2f} s")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400, 800])
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled backend not built; only the numpy fallback is timed")
    print(f"{'backend':<8} {'n':>6} {'kernel':<10} {'best ms':>10}")
    results = {}
    for n in args.sizes:
        for name, size, kern, t in bench(n, args.dim, args.repeat):
            results[(name, size, kern)] = t
            print(f"{name:<8} {size:>6} {kern:<10} {t * 1e3:>10.3f}")
    if _core is not None:
        print("\nspeedup (python / cython)")
        for n in args.sizes:
            for kern in ("gram", "quad_grad"):
                r = results[("python", n, kern)] / results[("cython", n, kern)]
                print(f"{n:>6} {kern:<10} {r:>6.2f}x")
    if args.end_to_end:
        print()
        end_to_end()


if __name__ == "__main__":
    main()
