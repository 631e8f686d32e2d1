#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Covers the two hot paths of a simulation run: neighbor scans over the
position array (every broadcast) and detector matching (training and
per-route classification). Also times an end-to-end desk run under each
backend via ASPUAVN_PURE so the whole-pipeline effect is visible.

Run: python3 benchmarks/bench_kernels.py
"""

import os
import subprocess
import sys
import time

import numpy as np

from aspuavn._kernels import _numpy as np_k

try:
    from aspuavn._kernels import _core as c_k
except ImportError:
    c_k = None


def bench(label, fn, repeat=5):
    best = min(_time_once(fn) for _ in range(repeat))
    print(f"  {label:<34} {best * 1e3:9.3f} ms")
    return best


def _time_once(fn):
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def kernel_benchmarks():
    rng = np.random.default_rng(0)
    pos = rng.uniform(0, 1000, size=(500, 3))
    centers = rng.random((350, 6))
    points = rng.random((1000, 6))
    self_set = rng.random((1000, 6))
    cands = rng.random((2048, 6))
    r2 = 0.45 * 0.45
    backends = [("numpy", np_k)] + ([("c", c_k)] if c_k else [])
    results = {}
    for name, mod in backends:
        print(f"backend: {name}")
        results[name, "neighbors"] = bench(
            "neighbor scan x1000 (500 nodes)",
            lambda m=mod: [m.in_range_mask(pos, 500.0, 500.0, 500.0, 150.0**2)
                           for _ in range(1000)])
        results[name, "classify"] = bench(
            "classify 1000 antigens vs 350 det",
            lambda m=mod: m.match_mask(points, centers, r2))
        results[name, "training"] = bench(
            "training filter 2048 cand vs 1000 self",
            lambda m=mod: m.nonself_mask(cands, self_set, r2))
    if c_k:
        for key in ("neighbors", "classify", "training"):
            speedup = results["numpy", key] / results["c", key]
            print(f"  speedup {key:<27} {speedup:6.2f}x")


def end_to_end():
    code = ("import time; t0=time.time();"
            "from aspuavn.scenario import PRESETS, run_scenario;"
            "from dataclasses import replace;"
            "cfg=replace(PRESETS['desk'], sim_time=40.0);"
            "run_scenario(cfg, 1);"
            "print(f'{time.time()-t0:.2f}')")
    print("end-to-end desk run (40 s simulated):")
    for label, pure in (("compiled", "0"), ("numpy fallback", "1")):
        env = dict(os.environ, ASPUAVN_PURE=pure)
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True)
        print(f"  {label:<20} {out.stdout.strip()} s")


if __name__ == "__main__":
    kernel_benchmarks()
    if c_k is None:
        print("compiled backend not built; numpy numbers only")
    end_to_end()
