"""Numeric kernels for waveform synthesis.

The hot loop (summing Gaussian bumps into a sample buffer) compiles with
numba when available. Set ``CARDIOTEL_NUMBA=0`` to force the pure-numpy
path; it computes the same sums in the same order, so results agree to
quantization. ``benchmarks/bench_ecg.py`` compares the two.
"""
from __future__ import annotations

import math
import os

import numpy as np

_backend_name: str | None = None
_numba_add_bumps = None


def _numba_disabled_by_env() -> bool:
    return os.environ.get("CARDIOTEL_NUMBA", "").strip().lower() in ("0", "false", "off", "no")


def _load_numba():
    """Import numba lazily; the CLI's validation paths never pay for it."""
    global _numba_add_bumps
    if _numba_add_bumps is not None:
        return _numba_add_bumps
    from numba import njit

    @njit(cache=True)
    def add_bumps_jit(buf, centers, sigmas, amps):  # pragma: no cover - compiled
        n = buf.shape[0]
        for b in range(centers.shape[0]):
            c = centers[b]
            sig = sigmas[b]
            amp = amps[b]
            h = int(math.ceil(5.0 * sig)) + 1
            lo = c - h
            if lo < 0:
                lo = 0
            hi = c + h + 1
            if hi > n:
                hi = n
            for i in range(lo, hi):
                d = (i - c) / sig
                buf[i] += amp * math.exp(-0.5 * d * d)
        return buf

    _numba_add_bumps = add_bumps_jit
    return add_bumps_jit


def _add_bumps_numpy(buf, centers, sigmas, amps):
    n = buf.shape[0]
    for b in range(centers.shape[0]):
        c = int(centers[b])
        sig = float(sigmas[b])
        amp = float(amps[b])
        h = int(math.ceil(5.0 * sig)) + 1
        lo = max(0, c - h)
        hi = min(n, c + h + 1)
        d = (np.arange(lo, hi, dtype=np.float64) - c) / sig
        buf[lo:hi] += amp * np.exp(-0.5 * d * d)
    return buf


def backend_name() -> str:
    """Which kernel implementation is active: 'numba' or 'numpy'."""
    global _backend_name
    if _backend_name is None:
        if _numba_disabled_by_env():
            _backend_name = "numpy"
        else:
            try:
                _load_numba()
                _backend_name = "numba"
            except ImportError:
                _backend_name = "numpy"
    return _backend_name


def add_bumps(
    buf: np.ndarray,
    centers: np.ndarray,
    sigmas: np.ndarray,
    amps: np.ndarray,
    backend: str | None = None,
) -> np.ndarray:
    """Accumulate Gaussian bumps into ``buf`` in place.

    Each bump b adds ``amps[b] * exp(-0.5 * ((i - centers[b]) / sigmas[b])**2)``
    over the samples within 5 sigma of its center. ``backend`` overrides the
    auto-selected implementation (used by the benchmark and equivalence tests).
    """
    if backend is None:
        backend = backend_name()
    if backend == "numba":
        return _load_numba()(buf, centers, sigmas, amps)
    if backend == "numpy":
        return _add_bumps_numpy(buf, centers, sigmas, amps)
    raise ValueError(f"unknown kernel backend {backend!r}")
