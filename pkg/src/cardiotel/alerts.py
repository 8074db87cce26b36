"""Threshold evaluation and the notification/alert state machine.

Every ingested sample produces one status write per monitored metric,
with the literal strings "Normal"/"AB_Normal" that downstream consumers
match on. Non-normal statuses feed an event table that deduplicates into
one open alert per (device, metric), re-emitting (advancing last_ts) while
the condition persists, and closing only on operator acknowledgement.
"""
from __future__ import annotations

import csv
import threading
from dataclasses import dataclass

from .errors import NotFoundError
from .model import Metric, ThresholdConfig, VitalSample, VitalStatus, classify_sample

# notification path leaf per metric; Oxygen_Level spelling is load-bearing
NOTIFICATION_LEAF = {
    Metric.SPO2: "Oxygen_Level",
    Metric.TEMP: "Temperature",
    Metric.SBP: "Systolic_BP",
    Metric.DBP: "Diastolic_BP",
    Metric.HR: "Heart_Rate",
}
FAULT_LEAF = "Fault"

STATUS_STRING = {
    VitalStatus.NORMAL: "Normal",
    VitalStatus.ABNORMAL: "AB_Normal",
    VitalStatus.FAULT: "AB_Normal",  # plus the separate fault flag path
}


def notification_path(device_id: str, leaf: str) -> str:
    return f"/deviceData/{device_id}/Notification/{leaf}"


def metric_reading(sample: VitalSample, metric: Metric):
    return {
        Metric.SPO2: sample.spo2,
        Metric.TEMP: sample.temp,
        Metric.SBP: sample.sbp,
        Metric.DBP: sample.dbp,
        Metric.HR: sample.hr,
    }[metric]


def evaluate(device_id: str, sample: VitalSample, cfg: ThresholdConfig | None = None):
    """Status writes for one sample: [(path, "Normal"/"AB_Normal"), ...].

    Every monitored metric is written every tick, normal or not. A FAULT
    SpO2 (probe off) additionally raises the fault flag path instead of
    masquerading as a clinical alarm.
    """
    statuses = classify_sample(sample, cfg)
    writes = [
        (notification_path(device_id, NOTIFICATION_LEAF[metric]), STATUS_STRING[status])
        for metric, status in statuses.items()
    ]
    fault = "1" if statuses[Metric.SPO2] is VitalStatus.FAULT else "0"
    writes.append((notification_path(device_id, FAULT_LEAF), fault))
    return writes, statuses


@dataclass
class AlertEvent:
    alert_id: int
    device_id: str
    metric: str          # notification leaf name
    status: VitalStatus  # ABNORMAL or FAULT
    value: object        # offending reading at open time
    first_ts: int
    last_ts: int
    recovered: bool = False
    ack_user: str | None = None
    ack_ts: int | None = None

    @property
    def open(self) -> bool:
        return self.ack_user is None

    def to_wire(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "device": self.device_id,
            "metric": self.metric,
            "status": self.status.name,
            "value": self.value,
            "first_ts": self.first_ts,
            "last_ts": self.last_ts,
            "recovered": self.recovered,
            "ack_user": self.ack_user,
            "ack_ts": self.ack_ts,
        }


class AlertEngine:
    """Single-writer alert table driven by the gateway's ingest path."""

    def __init__(self, cfg: ThresholdConfig | None = None):
        self._lock = threading.Lock()
        self.cfg = cfg or ThresholdConfig()
        self._events: list[AlertEvent] = []
        self._open: dict[tuple[str, str], AlertEvent] = {}
        self._next_id = 1

    def process(self, device_id: str, sample: VitalSample, ts: int):
        """Evaluate a sample and advance the event table; returns status writes."""
        writes, statuses = evaluate(device_id, sample, self.cfg)
        with self._lock:
            for metric, status in statuses.items():
                self._on_status(
                    device_id, NOTIFICATION_LEAF[metric], status,
                    metric_reading(sample, metric), ts,
                )
        return writes

    def _on_status(self, device_id: str, leaf: str, status: VitalStatus, value, ts: int):
        key = (device_id, leaf)
        event = self._open.get(key)
        if status is VitalStatus.NORMAL:
            if event is not None:
                event.recovered = True  # stays open until a human acknowledges
            return
        if event is not None:
            event.last_ts = max(event.last_ts, ts)
            event.status = status
            event.value = value
            event.recovered = False
        else:
            event = AlertEvent(
                alert_id=self._next_id, device_id=device_id, metric=leaf,
                status=status, value=value, first_ts=ts, last_ts=ts,
            )
            self._next_id += 1
            self._events.append(event)
            self._open[key] = event

    def acknowledge(self, alert_id: int, user_id: str, ts: int) -> AlertEvent:
        with self._lock:
            for event in self._events:
                if event.alert_id == alert_id:
                    if event.ack_user is None:
                        event.ack_user = user_id
                        event.ack_ts = ts
                        self._open.pop((event.device_id, event.metric), None)
                    return event  # double ack is an idempotent success
            raise NotFoundError(f"alert {alert_id} not found")

    def reload_thresholds(self, cfg: ThresholdConfig):
        with self._lock:
            self.cfg = cfg

    def events(self) -> list[AlertEvent]:
        with self._lock:
            return list(self._events)

    def open_events(self) -> list[AlertEvent]:
        with self._lock:
            return list(self._open.values())

    def export_csv(self, path) -> int:
        rows = self.events()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "alert_id", "device", "metric", "status", "value",
                "first_ts", "last_ts", "ack_user", "ack_ts",
            ])
            for e in rows:
                writer.writerow([
                    e.alert_id, e.device_id, e.metric, e.status.name, e.value,
                    e.first_ts, e.last_ts, e.ack_user or "", e.ack_ts if e.ack_ts is not None else "",
                ])
        return len(rows)
