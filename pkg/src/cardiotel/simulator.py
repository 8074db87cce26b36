"""Deterministic stand-in for the three-sensor hardware kit.

A scenario script fixes a per-metric baseline, optional uniform jitter,
and a timeline of ramped excursion events. Every emitted sample is a pure
function of (script, scenario time): re-running a scenario replays the
identical stream byte for byte, and a reconnecting device resumes the
same timeline rather than replaying wall-clock accidents.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AuthError, ConfigError, ValidationError
from .model import EcgFeatures, VitalSample, round_half_up
from .wire import encode_message

METRIC_KEYS = ("spo2", "temp", "sbp", "dbp", "hr", "ecg_base", "p", "q", "r", "s", "t")

# hard physical clamps applied after jitter so any script stays in-domain
_CLAMPS = {
    "spo2": (0, 100),
    "hr": (1, 300),
    "sbp": (30, 300),
    "dbp": (1, 299),
}


@dataclass(frozen=True)
class ScenarioEvent:
    """One scripted excursion: ramp a metric toward a target, hold, release."""

    onset_ms: int
    duration_ms: int
    metric: str
    target: float
    ramp_ms: int = 0

    def __post_init__(self):
        if self.metric not in METRIC_KEYS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if self.onset_ms < 0 or self.duration_ms <= 0 or self.ramp_ms < 0:
            raise ConfigError("event timing fields must be non-negative (duration positive)")

    @property
    def end_ms(self) -> int:
        return self.onset_ms + self.duration_ms


@dataclass(frozen=True)
class ScenarioScript:
    patient_id: str
    seed: int
    baseline: dict[str, float]
    jitter: dict[str, float] = field(default_factory=dict)
    events: tuple[ScenarioEvent, ...] = ()

    def __post_init__(self):
        missing = set(METRIC_KEYS) - set(self.baseline)
        if missing:
            raise ConfigError(f"baseline missing metrics: {sorted(missing)}")
        unknown = set(self.baseline) - set(METRIC_KEYS)
        if unknown:
            raise ConfigError(f"baseline has unknown metrics: {sorted(unknown)}")
        for k, v in self.jitter.items():
            if k not in METRIC_KEYS:
                raise ConfigError(f"jitter for unknown metric {k!r}")
            if v < 0:
                raise ConfigError(f"jitter amplitude for {k} must be >= 0")
        object.__setattr__(self, "events", tuple(self.events))
        onsets = [e.onset_ms for e in self.events]
        if onsets != sorted(onsets):
            raise ConfigError("events must be ordered by onset_ms")
        per_metric: dict[str, int] = {}
        for e in self.events:
            if e.onset_ms < per_metric.get(e.metric, 0):
                raise ConfigError(f"events for metric {e.metric} overlap")
            per_metric[e.metric] = e.end_ms
        try:
            # unclamped construction so invariant violations surface
            b = self.baseline
            VitalSample(
                patient_id=self.patient_id, ts=0,
                spo2=round_half_up(b["spo2"]), temp=round(float(b["temp"]), 1),
                sbp=round_half_up(b["sbp"]), dbp=round_half_up(b["dbp"]),
                hr=round_half_up(b["hr"]),
                ecg=EcgFeatures(
                    ecg_base=round_half_up(b["ecg_base"]), p=round_half_up(b["p"]),
                    q=round_half_up(b["q"]), r=round_half_up(b["r"]),
                    s=round_half_up(b["s"]), t=round_half_up(b["t"]),
                ),
            )
        except ValidationError as exc:
            raise ConfigError(f"baseline violates sample invariants: {exc}") from exc

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioScript":
        try:
            events = tuple(
                ScenarioEvent(
                    onset_ms=int(e["onset_ms"]),
                    duration_ms=int(e["duration_ms"]),
                    metric=str(e["metric"]),
                    target=float(e["target"]),
                    ramp_ms=int(e.get("ramp_ms", 0)),
                )
                for e in d.get("events", [])
            )
            return cls(
                patient_id=str(d["patient_id"]),
                seed=int(d["seed"]),
                baseline={str(k): float(v) for k, v in d["baseline"].items()},
                jitter={str(k): float(v) for k, v in d.get("jitter", {}).items()},
                events=events,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed scenario: {exc}") from exc

    @classmethod
    def from_file(cls, path: str | Path) -> "ScenarioScript":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _scripted_value(script: ScenarioScript, metric: str, t_ms: int) -> float:
    """Noise-free metric value at scenario time t: baseline plus event ramps."""
    value = float(script.baseline[metric])
    for ev in script.events:
        if ev.metric != metric or t_ms < ev.onset_ms:
            continue
        if t_ms < ev.end_ms:
            frac = 1.0 if ev.ramp_ms == 0 else min(1.0, (t_ms - ev.onset_ms) / ev.ramp_ms)
            return value + (ev.target - value) * frac
    return value


def _jitter_int(seed: int, metric_idx: int, t_ms: int, amplitude: int) -> int:
    if amplitude <= 0:
        return 0
    rng = np.random.default_rng(np.random.SeedSequence([seed, metric_idx, t_ms]))
    return int(rng.integers(-amplitude, amplitude + 1))


def _build_sample(patient_id: str, t_ms: int, values: dict[str, float]) -> VitalSample:
    clamp = lambda v, lo, hi: min(max(v, lo), hi)  # noqa: E731
    spo2 = clamp(round_half_up(values["spo2"]), *_CLAMPS["spo2"])
    temp = clamp(round(values["temp"], 1), -67.0, 257.0)
    hr = clamp(round_half_up(values["hr"]), *_CLAMPS["hr"])
    sbp = clamp(round_half_up(values["sbp"]), *_CLAMPS["sbp"])
    dbp = clamp(round_half_up(values["dbp"]), _CLAMPS["dbp"][0], sbp - 1)
    r = max(0, round_half_up(values["r"]))
    feat = lambda k: clamp(round_half_up(values[k]), 0, r)  # noqa: E731 - R stays dominant
    ecg = EcgFeatures(
        ecg_base=max(0, round_half_up(values["ecg_base"])),
        p=feat("p"), q=feat("q"), r=r, s=feat("s"), t=feat("t"),
    )
    return VitalSample(
        patient_id=patient_id, ts=t_ms, spo2=spo2, temp=temp, sbp=sbp, dbp=dbp, hr=hr, ecg=ecg
    )


def generate_sample(script: ScenarioScript, t_ms: int) -> VitalSample:
    """The sample the simulated kit reads at scenario time ``t_ms``.

    Fully determined by (script, t_ms): scripted value plus seeded uniform
    jitter, clamped into each metric's physical domain.
    """
    if t_ms < 0:
        raise ValidationError("t_ms must be non-negative")
    values = {}
    for idx, metric in enumerate(METRIC_KEYS):
        v = _scripted_value(script, metric, t_ms)
        amplitude = script.jitter.get(metric, 0)
        if metric == "temp":
            v += _jitter_int(script.seed, idx, t_ms, round_half_up(amplitude * 10)) / 10.0
        else:
            v += _jitter_int(script.seed, idx, t_ms, round_half_up(amplitude))
        values[metric] = v
    return _build_sample(script.patient_id, t_ms, values)


@dataclass
class RunStats:
    ticks_sent: int = 0
    retries: int = 0
    transcript: list[bytes] = field(default_factory=list)


class DeviceRunner:
    """Pushes one ingest batch per tick to a gateway transport.

    On transport failure the runner reconnects with exponential backoff and
    resends the pending batch, so the delivered sequence matches the
    scenario timeline exactly. An authentication rejection is terminal.
    """

    def __init__(
        self,
        script: ScenarioScript,
        transport_factory,
        token: str,
        tick_ms: int = 150,
        realtime: bool = True,
        backoff_initial_ms: int = 50,
        backoff_max_ms: int = 2000,
        max_attempts: int = 8,
        on_status=None,
    ):
        if tick_ms <= 0:
            raise ConfigError("tick_ms must be positive")
        self.script = script
        self.transport_factory = transport_factory
        self.token = token
        self.tick_ms = tick_ms
        self.realtime = realtime
        self.backoff_initial_ms = backoff_initial_ms
        self.backoff_max_ms = backoff_max_ms
        self.max_attempts = max_attempts
        self.on_status = on_status or (lambda kind, detail: None)
        self._transport = None

    def _connect(self):
        if self._transport is None:
            self._transport = self.transport_factory()
            self.on_status("connected", "")
        return self._transport

    def _drop_transport(self):
        if self._transport is not None:
            try:
                self._transport.close()
            except Exception:
                pass
            self._transport = None

    def _send_with_retry(self, line: bytes, stats: RunStats) -> dict:
        backoff = self.backoff_initial_ms
        for attempt in range(self.max_attempts):
            try:
                return self._connect().send_line(line)
            except (ConnectionError, OSError, EOFError) as exc:
                self._drop_transport()
                stats.retries += 1
                self.on_status("retry", str(exc))
                time.sleep(backoff / 1000.0)
                backoff = min(backoff * 2, self.backoff_max_ms)
        raise ConnectionError(f"gave up after {self.max_attempts} attempts")

    def run(self, ticks: int) -> RunStats:
        stats = RunStats()
        start = time.monotonic()
        for k in range(ticks):
            t_ms = k * self.tick_ms
            sample = generate_sample(self.script, t_ms)
            line = encode_message({"op": "ingest", "sample": sample.to_wire(), "token": self.token})
            reply = self._send_with_retry(line, stats)
            if not reply.get("ok"):
                code = reply.get("error", "error")
                if code == "auth":
                    self.on_status("auth_failed", code)
                    raise AuthError("device token rejected")
                raise ValidationError(f"ingest rejected: {code}")
            stats.ticks_sent += 1
            stats.transcript.append(line)
            self.on_status("tick", str(t_ms))
            if self.realtime and k + 1 < ticks:
                target = start + (k + 1) * self.tick_ms / 1000.0
                delay = target - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
        self._drop_transport()
        return stats
