"""Throughput comparison of the kernel lanes.

Times the three hot kernels on identical inputs for every importable lane,
checks the outputs agree byte for byte, and prints a speedup table.

    python3 benchmarks/bench_kernels.py [--pixels N] [--intervals N] [--repeats N]
"""

import argparse
import time

import numpy as np

from evsynth.kernels import NO_EVENT_T, available_lanes


def _ramp_logs(n_pixels: int, n_intervals: int, seed: int):
    rng = np.random.default_rng(seed)
    base = rng.uniform(-1.5, -0.2, n_pixels)
    step = rng.uniform(-0.08, 0.08, n_pixels)
    return [base + step * k for k in range(n_intervals + 1)]


def bench_fp_samples(mod, n_draws: int, repeats: int):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = mod.fp_samples(1.5, 0.8, 1.0, 1.5, 42, 3, 0, n_draws)
        best = min(best, time.perf_counter() - t0)
    return n_draws / best, ([out],)


def bench_ideal(mod, n_pixels: int, n_intervals: int, repeats: int):
    logs = _ramp_logs(n_pixels, n_intervals, 11)
    best = float("inf")
    out = None
    for _ in range(repeats):
        ref = logs[0].copy()
        last = np.full(n_pixels, NO_EVENT_T, dtype=np.int64)
        chunks = []
        t0 = time.perf_counter()
        for k in range(n_intervals):
            chunks.append(
                mod.ideal_interval(
                    logs[k], logs[k + 1], k * 416, (k + 1) * 416,
                    ref, last, n_pixels, 0.3, 0.3, 0, 0, n_pixels,
                )
            )
        best = min(best, time.perf_counter() - t0)
        out = (chunks, ref, last)
    return n_pixels * n_intervals / best, out


def bench_voltmeter(mod, n_pixels: int, n_intervals: int, repeats: int):
    logs = _ramp_logs(n_pixels, n_intervals, 12)
    lin = np.exp(logs[0])
    best = float("inf")
    out = None
    for _ in range(repeats):
        v = np.zeros(n_pixels)
        last = np.full(n_pixels, NO_EVENT_T, dtype=np.int64)
        chunks = []
        t0 = time.perf_counter()
        for k in range(n_intervals):
            chunks.append(
                mod.voltmeter_interval(
                    logs[k], logs[k + 1], lin, k * 416, (k + 1) * 416,
                    v, last, n_pixels,
                    0.5, 1e-3, 0.1, 0.01, 0.1, 1e-5, 1.0, 1.0,
                    9, k, 0, n_pixels,
                )
            )
        best = min(best, time.perf_counter() - t0)
        out = (chunks, v, last)
    return n_pixels * n_intervals / best, out


def _flatten(result):
    """(chunk_list, *state_arrays) -> flat list of arrays for comparison."""
    chunks, *state = result
    return [a for chunk in chunks for a in chunk] + state


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--pixels", type=int, default=320 * 240)
    ap.add_argument("--intervals", type=int, default=4)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    lanes = available_lanes()
    if len(lanes) < 2:
        print(f"only one lane importable: {sorted(lanes)}")
    benches = [
        ("fp_samples", lambda m: bench_fp_samples(m, args.draws, args.repeats), "draws/s"),
        ("ideal_interval", lambda m: bench_ideal(m, args.pixels, args.intervals, args.repeats), "px-int/s"),
        ("voltmeter_interval", lambda m: bench_voltmeter(m, args.pixels, args.intervals, args.repeats), "px-int/s"),
    ]

    names = sorted(lanes)
    header = f"{'kernel':<20}" + "".join(f"{n:>16}" for n in names)
    if len(names) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label, runner, unit in benches:
        rates = {}
        outputs = {}
        for name in names:
            rates[name], outputs[name] = runner(lanes[name])
        if len(names) == 2:
            a, b = (outputs[n] for n in names)
            for x, y in zip(_flatten(a), _flatten(b)):
                assert np.array_equal(x, y), f"{label}: lanes disagree"
        row = f"{label:<20}" + "".join(f"{rates[n] / 1e6:>12.2f} M" for n in names)
        if len(names) == 2:
            lo, hi = sorted(rates.values())
            row += f"{hi / lo:>9.1f}x"
        print(row + f"   ({unit})")


if __name__ == "__main__":
    main()
