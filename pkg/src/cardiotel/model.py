"""Domain types and agreement math shared by every other module.

Holds the vital-sample record, the oxygen-saturation status rules, the
per-metric threshold bounds, and the kit-vs-clinic difference/agreement
computations. Everything here is a pure value computation: no I/O, no
clocks, safe to call from any thread.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from enum import Enum

from .errors import PairingError, ValidationError

TEMP_F_MIN = -67.0   # DS18B20 lower limit (-55 C) in Fahrenheit
TEMP_F_MAX = 257.0   # DS18B20 upper limit (125 C) in Fahrenheit

DEFAULT_NEAR_TOLERANCE = 6


class Metric(str, Enum):
    """Monitored metrics that carry a threshold status."""

    SPO2 = "spo2"
    TEMP = "temp"
    SBP = "sbp"
    DBP = "dbp"
    HR = "hr"

    def __str__(self) -> str:
        return self.value


class VitalStatus(Enum):
    NORMAL = "Normal"
    ABNORMAL = "AB_Normal"
    FAULT = "Fault"


class AgreementClass(Enum):
    EXACT = "exact"
    NEAR = "near"
    INCORRECT = "incorrect"


def round_half_up(x: float) -> int:
    """Round to the nearest integer with .5 going up (not banker's)."""
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class EcgFeatures:
    """Six opaque integer ECG features as reported per patient.

    ``ecg_base`` is the signal baseline level; p/q/r/s/t are the per-wave
    amplitudes relative to it. The R amplitude dominates the other four.
    """

    ecg_base: int
    p: int
    q: int
    r: int
    s: int
    t: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ValidationError(f"ECG feature {f.name} must be an integer, got {v!r}")
            if v < 0:
                raise ValidationError(f"ECG feature {f.name} must be non-negative, got {v}")
        if self.r < max(self.p, self.q, self.s, self.t):
            raise ValidationError(
                f"R amplitude {self.r} must dominate P/Q/S/T "
                f"{(self.p, self.q, self.s, self.t)}"
            )

    def as_tuple(self) -> tuple[int, int, int, int, int, int]:
        return (self.ecg_base, self.p, self.q, self.r, self.s, self.t)


@dataclass(frozen=True)
class VitalSample:
    """One timestamped reading of all monitored metrics for one patient.

    temp is carried at tenths precision (degrees Fahrenheit); everything
    else is integral. Construction validates the physical domains so a
    sample that exists is always safe to ingest.
    """

    patient_id: str
    ts: int                 # milliseconds since epoch (or scenario origin)
    spo2: int               # percent
    temp: float             # degrees F, tenths precision
    sbp: int                # mmHg systolic
    dbp: int                # mmHg diastolic
    hr: int                 # beats per minute
    ecg: EcgFeatures

    def __post_init__(self):
        if not self.patient_id:
            raise ValidationError("patient_id must be nonempty")
        if not 0 <= self.spo2 <= 100:
            raise ValidationError(f"spo2 {self.spo2} outside 0..100")
        if not TEMP_F_MIN <= self.temp <= TEMP_F_MAX:
            raise ValidationError(
                f"temp {self.temp} outside sensor range [{TEMP_F_MIN}, {TEMP_F_MAX}]"
            )
        if self.dbp >= self.sbp:
            raise ValidationError(f"diastolic {self.dbp} must be below systolic {self.sbp}")
        if self.hr <= 0:
            raise ValidationError(f"hr must be positive, got {self.hr}")
        if self.dbp < 0:
            raise ValidationError(f"dbp must be non-negative, got {self.dbp}")
        # normalize temp to one decimal so equality and wire round-trips are stable
        object.__setattr__(self, "temp", round(float(self.temp), 1))

    def to_wire(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "ts": self.ts,
            "spo2": self.spo2,
            "temp": self.temp,
            "sbp": self.sbp,
            "dbp": self.dbp,
            "hr": self.hr,
            "ecg": {
                "ecg_base": self.ecg.ecg_base,
                "p": self.ecg.p,
                "q": self.ecg.q,
                "r": self.ecg.r,
                "s": self.ecg.s,
                "t": self.ecg.t,
            },
        }

    @classmethod
    def from_wire(cls, d: dict) -> "VitalSample":
        try:
            ecg = d["ecg"]
            return cls(
                patient_id=str(d["patient_id"]),
                ts=int(d["ts"]),
                spo2=int(d["spo2"]),
                temp=float(d["temp"]),
                sbp=int(d["sbp"]),
                dbp=int(d["dbp"]),
                hr=int(d["hr"]),
                ecg=EcgFeatures(
                    ecg_base=int(ecg["ecg_base"]),
                    p=int(ecg["p"]),
                    q=int(ecg["q"]),
                    r=int(ecg["r"]),
                    s=int(ecg["s"]),
                    t=int(ecg["t"]),
                ),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed sample: {exc}") from exc


@dataclass(frozen=True)
class ThresholdConfig:
    """Inclusive per-metric bounds separating Normal from AB_Normal.

    The SpO2 band mirrors the kit firmware's branch conditions. The
    temp/HR/BP bounds are common clinical screening defaults, not taken
    from any device; override them via a thresholds JSON file.
    """

    spo2_normal_min: int = 95
    spo2_normal_max: int = 100
    temp_max_f: float = 100.4
    hr_min: int = 60
    hr_max: int = 100
    sbp_max: int = 140
    dbp_max: int = 90

    def __post_init__(self):
        if self.spo2_normal_min > self.spo2_normal_max:
            raise ValidationError("spo2_normal_min above spo2_normal_max")
        if not (0 <= self.spo2_normal_min and self.spo2_normal_max <= 100):
            raise ValidationError("spo2 bounds outside 0..100")
        if self.hr_min > self.hr_max:
            raise ValidationError("hr_min above hr_max")
        if self.hr_min <= 0:
            raise ValidationError("hr_min must be positive")
        if not TEMP_F_MIN <= self.temp_max_f <= TEMP_F_MAX:
            raise ValidationError("temp_max_f outside sensor range")
        if self.sbp_max <= 0 or self.dbp_max <= 0:
            raise ValidationError("blood pressure bounds must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ThresholdConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class DifferenceRow:
    """Per-patient absolute differences between kit and clinic readings."""

    patient_id: str
    d_spo2: int
    d_temp: int
    d_sbp: int
    d_dbp: int
    d_hr: int
    d_ecg: int
    d_p: int
    d_q: int
    d_r: int
    d_s: int
    d_t: int

    def __post_init__(self):
        for f in fields(self):
            if f.name == "patient_id":
                continue
            if getattr(self, f.name) < 0:
                raise ValidationError(f"{f.name} must be non-negative")

    def metric_values(self) -> tuple[int, ...]:
        """The 11 difference columns in table order."""
        return (
            self.d_spo2, self.d_temp, self.d_sbp, self.d_dbp, self.d_hr,
            self.d_ecg, self.d_p, self.d_q, self.d_r, self.d_s, self.d_t,
        )

    def ecg_feature_values(self) -> tuple[int, ...]:
        return (self.d_ecg, self.d_p, self.d_q, self.d_r, self.d_s, self.d_t)


@dataclass(frozen=True)
class MetricCounts:
    total: int
    exact: int
    incorrect: int
    near: int

    def __post_init__(self):
        if self.exact + self.incorrect + self.near != self.total:
            raise ValidationError("exact + incorrect + near must equal total")


# summary rows keyed by their report label, in table order
SUMMARY_METRICS = (
    "Oxygen Saturation",
    "Body Temperature",
    "Systolic BP",
    "Diastolic BP",
    "Heart Rate",
    "ECG",
)


@dataclass(frozen=True)
class AgreementSummary:
    """Exact/Near/Incorrect counts per metric over a set of difference rows."""

    counts: dict[str, MetricCounts] = field(default_factory=dict)

    def __post_init__(self):
        if set(self.counts) != set(SUMMARY_METRICS):
            raise ValidationError("summary must cover exactly the six report metrics")

    def row(self, label: str) -> MetricCounts:
        return self.counts[label]


def classify_spo2(spo2: int, cfg: ThresholdConfig | None = None) -> VitalStatus:
    """Status of an oxygen-saturation percentage.

    Inside the configured normal band -> NORMAL; a positive reading below
    it -> ABNORMAL; zero reads as a detached probe -> FAULT, so a probe
    falling off never trips a clinical alarm.
    """
    cfg = cfg or ThresholdConfig()
    if not 0 <= spo2 <= 100:
        raise ValidationError(f"spo2 {spo2} outside 0..100")
    if spo2 == 0:
        return VitalStatus.FAULT
    if cfg.spo2_normal_min <= spo2 <= cfg.spo2_normal_max:
        return VitalStatus.NORMAL
    return VitalStatus.ABNORMAL


def classify_sample(sample: VitalSample, cfg: ThresholdConfig | None = None) -> dict[Metric, VitalStatus]:
    """Per-metric status map for one sample under the configured bounds."""
    cfg = cfg or ThresholdConfig()

    def flag(ok: bool) -> VitalStatus:
        return VitalStatus.NORMAL if ok else VitalStatus.ABNORMAL

    return {
        Metric.SPO2: classify_spo2(sample.spo2, cfg),
        Metric.TEMP: flag(sample.temp <= cfg.temp_max_f),
        Metric.SBP: flag(sample.sbp <= cfg.sbp_max),
        Metric.DBP: flag(sample.dbp <= cfg.dbp_max),
        Metric.HR: flag(cfg.hr_min <= sample.hr <= cfg.hr_max),
    }


def compare_reading(kit: VitalSample, reference: VitalSample) -> DifferenceRow:
    """Absolute per-metric differences between a kit and a clinic reading.

    Temperatures are rounded half-up to whole degrees before differencing
    so integer reference tables reproduce from tenths-precision samples.
    """
    if kit.patient_id != reference.patient_id:
        raise PairingError(
            f"cannot compare readings for different patients "
            f"({kit.patient_id!r} vs {reference.patient_id!r})"
        )
    return DifferenceRow(
        patient_id=kit.patient_id,
        d_spo2=abs(kit.spo2 - reference.spo2),
        d_temp=abs(round_half_up(kit.temp) - round_half_up(reference.temp)),
        d_sbp=abs(kit.sbp - reference.sbp),
        d_dbp=abs(kit.dbp - reference.dbp),
        d_hr=abs(kit.hr - reference.hr),
        d_ecg=abs(kit.ecg.ecg_base - reference.ecg.ecg_base),
        d_p=abs(kit.ecg.p - reference.ecg.p),
        d_q=abs(kit.ecg.q - reference.ecg.q),
        d_r=abs(kit.ecg.r - reference.ecg.r),
        d_s=abs(kit.ecg.s - reference.ecg.s),
        d_t=abs(kit.ecg.t - reference.ecg.t),
    )


def classify_difference(d: int, near_tolerance: int = DEFAULT_NEAR_TOLERANCE) -> AgreementClass:
    """Exact at zero, Near within the tolerance band, Incorrect beyond it."""
    if d < 0:
        raise ValidationError("difference must be non-negative")
    if near_tolerance < 0:
        raise ValidationError("near_tolerance must be non-negative")
    if d == 0:
        return AgreementClass.EXACT
    if d <= near_tolerance:
        return AgreementClass.NEAR
    return AgreementClass.INCORRECT


def _worst(classes: list[AgreementClass]) -> AgreementClass:
    order = (AgreementClass.EXACT, AgreementClass.NEAR, AgreementClass.INCORRECT)
    return max(classes, key=order.index)


def summarize_agreement(
    rows: list[DifferenceRow], near_tolerance: int = DEFAULT_NEAR_TOLERANCE
) -> AgreementSummary:
    """Count Exact/Near/Incorrect per metric over all difference rows.

    A row's single ECG verdict is the worst class among its six ECG
    feature differences, so one drifting feature marks the whole trace.
    """
    per_metric: dict[str, list[AgreementClass]] = {label: [] for label in SUMMARY_METRICS}
    for row in rows:
        per_metric["Oxygen Saturation"].append(classify_difference(row.d_spo2, near_tolerance))
        per_metric["Body Temperature"].append(classify_difference(row.d_temp, near_tolerance))
        per_metric["Systolic BP"].append(classify_difference(row.d_sbp, near_tolerance))
        per_metric["Diastolic BP"].append(classify_difference(row.d_dbp, near_tolerance))
        per_metric["Heart Rate"].append(classify_difference(row.d_hr, near_tolerance))
        per_metric["ECG"].append(
            _worst([classify_difference(d, near_tolerance) for d in row.ecg_feature_values()])
        )

    counts = {}
    for label, classes in per_metric.items():
        counts[label] = MetricCounts(
            total=len(classes),
            exact=sum(c is AgreementClass.EXACT for c in classes),
            incorrect=sum(c is AgreementClass.INCORRECT for c in classes),
            near=sum(c is AgreementClass.NEAR for c in classes),
        )
    return AgreementSummary(counts=counts)
