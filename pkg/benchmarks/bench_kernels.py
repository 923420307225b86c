#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs both implementations on representative probing workloads, reports
wall-clock times and the maximum absolute disagreement. The numpy path is
what you get with HFTP_NO_NUMBA=1; here both are imported directly so one
process can time the pair.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import time

import numpy as np

from hftp import _kernels


def time_fn(fn, *args, repeats=3):
    best = np.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_bin_stats(n_units, n_perm, n_samples, rng):
    print(f"\npermuted bin statistics: {n_units} units x {n_perm} perms x {n_samples} samples")
    cosb, sinb = _kernels.bin_basis(n_samples, n_samples // 4)
    series = rng.normal(size=(n_units, n_samples))
    perms = _kernels.draw_permutations(rng, n_perm, n_samples)

    def run(impl):
        out = np.empty((n_units, n_perm))
        for i in range(n_units):
            out[i] = impl(series[i], perms, cosb, sinb, False)
        return out

    t_np, ref = time_fn(run, _kernels._perm_bin_stats_numpy)
    print(f"  numpy : {t_np * 1e3:9.1f} ms")
    if _kernels.NUMBA_ENABLED:
        _kernels._perm_bin_stats_numba(series[0], perms[:2], cosb, sinb, False)  # JIT warmup
        t_nb, got = time_fn(run, _kernels._perm_bin_stats_numba)
        diff = float(np.max(np.abs(got - ref)))
        print(f"  numba : {t_nb * 1e3:9.1f} ms   speedup x{t_np / t_nb:.1f}   max |diff| {diff:.2e}")


def bench_itpc(n_channels, n_perm, n_trials, n_samples, rng):
    print(
        f"\npermuted ITPC: {n_channels} channels x {n_perm} perms x "
        f"{n_trials} trials x {n_samples} samples"
    )
    cosb, sinb = _kernels.bin_basis(n_samples, 8)
    trials = rng.normal(size=(n_channels, n_trials, n_samples))

    def run(impl):
        out = np.empty((n_channels, n_perm))
        for c in range(n_channels):
            chunk_rng = np.random.default_rng([7, c])
            done = 0
            while done < n_perm:
                take = min(_kernels.PERM_CHUNK, n_perm - done)
                perms = np.argsort(chunk_rng.random((take, n_trials, n_samples)), axis=-1)
                out[c, done : done + take] = impl(trials[c], perms, cosb, sinb)
                done += take
        return out

    t_np, ref = time_fn(run, _kernels._perm_itpc_numpy, repeats=2)
    print(f"  numpy : {t_np * 1e3:9.1f} ms")
    if _kernels.NUMBA_ENABLED:
        warm = np.argsort(rng.random((2, n_trials, n_samples)), axis=-1)
        _kernels._perm_itpc_numba(trials[0], warm, cosb, sinb)  # JIT warmup
        t_nb, got = time_fn(run, _kernels._perm_itpc_numba, repeats=2)
        diff = float(np.max(np.abs(got - ref)))
        print(f"  numba : {t_nb * 1e3:9.1f} ms   speedup x{t_np / t_nb:.1f}   max |diff| {diff:.2e}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    print(f"default backend: {_kernels.active_backend()}")
    if not _kernels.NUMBA_ENABLED:
        print("numba unavailable or disabled; timing the numpy path only")

    rng = np.random.default_rng(0)
    if args.quick:
        bench_bin_stats(50, 500, 128, rng)
        bench_itpc(4, 200, 20, 512, rng)
    else:
        bench_bin_stats(200, 1000, 128, rng)
        bench_bin_stats(50, 1000, 1440, rng)
        bench_itpc(8, 1000, 40, 512, rng)
        bench_itpc(2, 500, 40, 4096, rng)


if __name__ == "__main__":
    main()
