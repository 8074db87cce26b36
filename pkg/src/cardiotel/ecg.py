"""Synthetic single-lead ECG frames and fiducial-feature extraction.

One heartbeat is rendered as five Gaussian bumps (P, Q, R, S, T) placed
at fixed fractions of the beat period, P/R/T above the baseline and Q/S
below it, then quantized to a 10-bit converter range. Extraction inverts
that: locate R peaks, window the other four waves relative to them, and
report per-wave amplitudes against the median baseline.

Feature values are opaque integers matching the reference tables, not
calibrated millivolts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ExtractionError, ValidationError
from .model import EcgFeatures, round_half_up

ADC_MAX = 1023  # 10-bit analog input of the target microcontroller class

# Per-wave placement within one beat, as fractions of the beat period.
WAVE_ORDER = ("p", "q", "r", "s", "t")
WAVE_OFFSET = {"p": 0.15, "q": 0.36, "r": 0.40, "s": 0.44, "t": 0.70}
# Gaussian sigma per wave, also a period fraction. Kept narrow so bumps
# never bleed into each other's windows and most samples sit on the
# baseline (the extractor's median depends on that).
WAVE_SIGMA = {"p": 0.012, "q": 0.005, "r": 0.006, "s": 0.005, "t": 0.017}
# Q and S deflect below the baseline.
WAVE_SIGN = {"p": 1.0, "q": -1.0, "r": 1.0, "s": -1.0, "t": 1.0}

MIN_PERIOD_SAMPLES = 50  # coarser sampling cannot separate the five waves


@dataclass(frozen=True)
class EcgMorphology:
    """Beat shape parameters: fiducial amplitudes plus timing."""

    p: int
    q: int
    r: int
    s: int
    t: int
    ecg_base: int
    beat_period_ms: int
    noise_amplitude: int = 0

    def __post_init__(self):
        for name in ("p", "q", "r", "s", "t", "ecg_base", "noise_amplitude"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.r <= max(self.p, self.q, self.s, self.t):
            raise ValidationError("R amplitude must strictly dominate P/Q/S/T")
        if self.beat_period_ms <= 0:
            raise ValidationError("beat_period_ms must be positive")
        if self.ecg_base + self.r > ADC_MAX:
            raise ValidationError(
                f"baseline {self.ecg_base} + R {self.r} exceeds the converter range {ADC_MAX}"
            )
        if self.ecg_base - max(self.q, self.s) < 0:
            raise ValidationError("Q/S deflections would clip below zero")

    @classmethod
    def from_features(cls, features: EcgFeatures, hr: int, noise_amplitude: int = 0) -> "EcgMorphology":
        return cls(
            p=features.p, q=features.q, r=features.r, s=features.s, t=features.t,
            ecg_base=features.ecg_base,
            beat_period_ms=beat_period_from_hr(hr),
            noise_amplitude=noise_amplitude,
        )

    @property
    def amplitude(self) -> dict[str, int]:
        return {"p": self.p, "q": self.q, "r": self.r, "s": self.s, "t": self.t}


def beat_period_from_hr(hr: int) -> int:
    if hr <= 0:
        raise ValidationError("hr must be positive")
    return round_half_up(60_000 / hr)


@dataclass(frozen=True, eq=False)
class EcgFrame:
    """A fixed-length run of converter samples at a uniform interval."""

    interval_ms: int
    samples: np.ndarray

    def __post_init__(self):
        if self.interval_ms <= 0:
            raise ValidationError("interval_ms must be positive")
        samples = np.asarray(self.samples, dtype=np.int64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValidationError("samples must be a nonempty 1-d sequence")
        if samples.min() < 0 or samples.max() > ADC_MAX:
            raise ValidationError(f"samples outside converter range 0..{ADC_MAX}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)


def synth_ecg_frame(
    m: EcgMorphology,
    n_samples: int,
    interval_ms: int = 1,
    seed: int = 0,
    backend: str | None = None,
) -> EcgFrame:
    """Render ``n_samples`` of the given beat shape, deterministically per seed.

    Bump centers snap to the sample grid so the peak sample carries the
    exact fiducial amplitude; with ``noise_amplitude`` 0 this makes
    ``extract_fiducials`` a lossless inverse.
    """
    if n_samples <= 0:
        raise ValidationError("n_samples must be positive")
    if interval_ms <= 0:
        raise ValidationError("interval_ms must be positive")
    period_samples = m.beat_period_ms / interval_ms
    if period_samples < MIN_PERIOD_SAMPLES:
        raise ValidationError(
            f"interval {interval_ms} ms too coarse for a {m.beat_period_ms} ms beat "
            f"(need >= {MIN_PERIOD_SAMPLES} samples per beat)"
        )

    amplitude = m.amplitude
    centers, sigmas, amps = [], [], []
    n_beats = int(np.ceil(n_samples / period_samples)) + 1
    for k in range(n_beats):
        for wave in WAVE_ORDER:
            amp = amplitude[wave]
            if amp == 0:
                continue
            center = round((k + WAVE_OFFSET[wave]) * m.beat_period_ms / interval_ms)
            sigma = WAVE_SIGMA[wave] * period_samples
            support = int(np.ceil(5.0 * sigma)) + 1
            if center + support < 0 or center - support >= n_samples:
                continue
            centers.append(center)
            sigmas.append(sigma)
            amps.append(WAVE_SIGN[wave] * amp)

    buf = np.zeros(n_samples, dtype=np.float64)
    if centers:
        _kernels.add_bumps(
            buf,
            np.asarray(centers, dtype=np.int64),
            np.asarray(sigmas, dtype=np.float64),
            np.asarray(amps, dtype=np.float64),
            backend=backend,
        )
    quantized = np.floor(buf + m.ecg_base + 0.5).astype(np.int64)
    if m.noise_amplitude > 0:
        rng = np.random.default_rng(seed)
        quantized += rng.integers(
            -m.noise_amplitude, m.noise_amplitude + 1, size=n_samples, dtype=np.int64
        )
    return EcgFrame(interval_ms=interval_ms, samples=np.clip(quantized, 0, ADC_MAX))


def _window(x: np.ndarray, center: int, lo_frac: float, hi_frac: float, period: float) -> np.ndarray:
    lo = max(0, center + round(lo_frac * period))
    hi = min(x.size, center + round(hi_frac * period) + 1)
    return x[lo:hi]


def _r_positions(x: np.ndarray, base: int, peak: int) -> tuple[np.ndarray, float]:
    """Locate R-peak sample indices and the beat period in samples."""
    n = x.size
    mad = float(np.median(np.abs(x - base)))  # ~0 for noise-free frames

    if mad == 0:
        # noise-free: R centers are exactly the global-max samples, which
        # keeps detection correct even when P runs within a count of R.
        # A wide bump can quantize to a short plateau of equal samples, so
        # collapse adjacent hits to their middle before spacing checks.
        exact = np.flatnonzero(x == peak)
        runs = np.split(exact, np.flatnonzero(np.diff(exact) > 2) + 1)
        reps = np.array([int(run[run.size // 2]) for run in runs if run.size], dtype=np.int64)
        gaps = np.diff(reps)
        if reps.size >= 2 and gaps.min() >= MIN_PERIOD_SAMPLES and gaps.max() <= 1.1 * gaps.min():
            return reps, float(np.median(gaps))
        if reps.size == 1:
            # single-beat frame: assume the frame spans exactly one period
            return reps, float(n)

    # noisy: take local maxima within the noise band of the peak; needs R
    # to clear P/T by more than that band
    threshold = peak - (4.0 * mad + 3.0)
    above = np.flatnonzero(x >= threshold)
    if above.size == 0:
        raise ExtractionError("no detectable R peak")
    cuts = np.flatnonzero(np.diff(above) > max(8, n // 100))
    clusters = np.split(above, cuts + 1)
    positions = np.array(
        sorted(int(c[np.argmax(x[c])]) for c in clusters if c.size), dtype=np.int64
    )
    if positions.size >= 2:
        return positions, float(np.median(np.diff(positions)))
    return positions, float(n)


def extract_fiducials(frame: EcgFrame) -> EcgFeatures:
    """Recover per-wave amplitudes and the baseline from a frame.

    Amplitudes are averaged over all complete beats and rounded to
    integers. Reliable R detection in noisy frames needs the R amplitude
    to clear the P/T amplitudes by more than the noise band; frames
    violating that should carry at least two beats.
    """
    x = frame.samples
    base = round_half_up(float(np.median(x)))
    peak = int(x.max())
    if peak <= base:
        raise ExtractionError("frame is flat: no beat to extract")

    rpos, period = _r_positions(x, base, peak)
    collected: dict[str, list[float]] = {w: [] for w in WAVE_ORDER}
    for r_i in rpos:
        if r_i - round(0.32 * period) < 0 or r_i + round(0.41 * period) > x.size:
            continue  # incomplete beat at a frame edge
        collected["r"].append(float(x[r_i] - base))
        collected["p"].append(float(_window(x, r_i, -0.32, -0.18, period).max() - base))
        collected["q"].append(float(base - _window(x, r_i, -0.07, -0.01, period).min()))
        collected["s"].append(float(base - _window(x, r_i, 0.01, 0.07, period).min()))
        collected["t"].append(float(_window(x, r_i, 0.20, 0.40, period).max() - base))
    if not collected["r"]:
        raise ExtractionError("no complete beat inside the frame")

    means = {w: round_half_up(float(np.mean(v))) for w, v in collected.items()}
    r = max(0, means["r"])
    clamp = lambda v: min(max(0, v), r)  # noqa: E731 - keep the feature record valid
    return EcgFeatures(
        ecg_base=base, p=clamp(means["p"]), q=clamp(means["q"]),
        r=r, s=clamp(means["s"]), t=clamp(means["t"]),
    )
