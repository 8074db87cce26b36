#!/usr/bin/env python3
"""Benchmark the waveform synthesis kernel: numba @njit vs pure numpy.

The numpy path is what you get with CARDIOTEL_NUMBA=0; this script calls
both backends directly and checks they produce identical frames.

Usage: python benchmarks/bench_ecg.py [--frames 200] [--samples 20000]
"""
import argparse
import time

import numpy as np

from cardiotel._kernels import add_bumps, backend_name
from cardiotel.ecg import EcgMorphology, synth_ecg_frame


def bench(backend: str, morphology: EcgMorphology, frames: int, samples: int) -> float:
    # one warm-up frame so numba's JIT compile does not pollute the timing
    synth_ecg_frame(morphology, samples, interval_ms=1, seed=0, backend=backend)
    started = time.perf_counter()
    for seed in range(frames):
        synth_ecg_frame(morphology, samples, interval_ms=1, seed=seed, backend=backend)
    return time.perf_counter() - started


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=200)
    parser.add_argument("--samples", type=int, default=20_000)
    args = parser.parse_args()

    morphology = EcgMorphology(
        p=450, q=119, r=701, s=88, t=76, ecg_base=254,
        beat_period_ms=857, noise_amplitude=4,
    )

    backends = ["numpy"]
    try:
        add_bumps(np.zeros(1), np.array([0]), np.array([1.0]), np.array([0.0]), backend="numba")
        backends.insert(0, "numba")
    except ImportError:
        print("numba unavailable; benchmarking numpy only")

    a = synth_ecg_frame(morphology, args.samples, interval_ms=1, seed=7, backend=backends[0])
    b = synth_ecg_frame(morphology, args.samples, interval_ms=1, seed=7, backend=backends[-1])
    assert np.array_equal(a.samples, b.samples), "backends disagree"

    print(f"auto-selected backend: {backend_name()}")
    print(f"{args.frames} frames x {args.samples} samples each")
    results = {}
    for backend in backends:
        elapsed = bench(backend, morphology, args.frames, args.samples)
        results[backend] = elapsed
        per_frame = elapsed / args.frames * 1000
        print(f"  {backend:<6} {elapsed:8.3f}s total   {per_frame:7.3f} ms/frame")
    if len(results) == 2:
        print(f"  speedup: {results['numpy'] / results['numba']:.2f}x (numba over numpy)")


if __name__ == "__main__":
    main()
