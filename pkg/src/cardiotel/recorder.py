"""Fixed-geometry rolling recorder mirroring the kit's streaming workbook.

A workbook holds the most recent ``data_rows`` rows of ``data_channels``
numeric cells on a ``data_interval_ms`` grid, newest last. Rows journal to
``<name>.csv`` as they arrive (crash-safe append; a reopen resumes after
the last complete row) with settings and provenance in a
``<name>.manifest.json`` sidecar. Exports are byte-stable CSV.
"""
from __future__ import annotations

import csv
import io
import json
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

ORIENTATION = "newest_last"


@dataclass(frozen=True)
class WorkbookConfig:
    data_interval_ms: int = 150
    data_rows: int = 2000
    data_channels: int = 10
    orientation: str = ORIENTATION

    def __post_init__(self):
        if self.data_interval_ms <= 0:
            raise ValidationError("data_interval_ms must be positive")
        if self.data_rows <= 0:
            raise ValidationError("data_rows must be positive")
        if not 1 <= self.data_channels <= 64:
            raise ValidationError("data_channels must be in 1..64")
        if self.orientation != ORIENTATION:
            raise ValidationError(f"unsupported orientation {self.orientation!r}")

    def to_dict(self) -> dict:
        return {
            "data_interval_ms": self.data_interval_ms,
            "data_rows": self.data_rows,
            "data_channels": self.data_channels,
            "orientation": self.orientation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WorkbookConfig":
        try:
            return cls(
                data_interval_ms=int(d.get("data_interval_ms", 150)),
                data_rows=int(d.get("data_rows", 2000)),
                data_channels=int(d.get("data_channels", 10)),
                orientation=str(d.get("orientation", ORIENTATION)),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"malformed workbook config: {exc}") from exc


@dataclass(frozen=True)
class WorkbookRow:
    row_ts: int
    channels: tuple

    def __post_init__(self):
        if self.row_ts < 0:
            raise ValidationError("row_ts must be non-negative")
        for cell in self.channels:
            if cell is None:
                continue
            if isinstance(cell, bool) or not isinstance(cell, (int, float)):
                raise ValidationError("cells must be numeric or the empty marker")
        object.__setattr__(self, "channels", tuple(self.channels))


def _format_cell(cell) -> str:
    if cell is None:
        return ""
    if isinstance(cell, int):
        return str(cell)
    return repr(cell)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        return float(text)


def _header(channels: int) -> list[str]:
    return ["ts"] + [f"ch{i + 1}" for i in range(channels)]


class Workbook:
    """One open recording; a single writer, snapshot-consistent exports."""

    def __init__(self, cfg: WorkbookConfig, sink_path: str | Path, rotate: bool = False):
        self.cfg = cfg
        base = Path(sink_path)
        if base.suffix == ".csv":
            base = base.with_suffix("")
        self.base = base
        self.data_path = base.with_name(base.name + ".csv")
        self.manifest_path = base.with_name(base.name + ".manifest.json")
        self.rotate = rotate
        self._lock = threading.RLock()
        self._ring: list[WorkbookRow] = []
        self._appended = 0
        self._open_files()

    def _open_files(self):
        self.base.parent.mkdir(parents=True, exist_ok=True)
        if self.manifest_path.exists():
            with open(self.manifest_path, encoding="utf-8") as fh:
                manifest = json.load(fh)
            existing = WorkbookConfig.from_dict(manifest.get("settings", {}))
            if existing != self.cfg:
                raise ValidationError(
                    f"workbook at {self.base} was created with different settings"
                )
        else:
            # manifest lands before any data
            manifest = {
                "settings": self.cfg.to_dict(),
                "manifest": {"created_ts": int(time.time() * 1000), "format": "cardiotel-workbook-v1"},
            }
            tmp = self.manifest_path.with_suffix(".tmp")
            with open(tmp, "w", encoding="utf-8") as fh:
                json.dump(manifest, fh, indent=2, sort_keys=True)
            os.replace(tmp, self.manifest_path)

        if self.data_path.exists():
            self._recover()
        else:
            with open(self.data_path, "w", newline="", encoding="utf-8") as fh:
                csv.writer(fh).writerow(_header(self.cfg.data_channels))
        self._journal = open(self.data_path, "a", newline="", encoding="utf-8")
        self._writer = csv.writer(self._journal)

    def _recover(self):
        """Reload the ring from the journal tail, dropping any torn last line."""
        good_end = 0
        rows: list[WorkbookRow] = []
        expected = _header(self.cfg.data_channels)
        with open(self.data_path, "rb") as fh:
            raw = fh.read()
        text_end = 0
        lines = raw.splitlines(keepends=True)
        for i, line in enumerate(lines):
            if not line.endswith(b"\n"):
                break
            try:
                parsed = next(csv.reader(io.StringIO(line.decode("utf-8"))))
            except (csv.Error, UnicodeDecodeError, StopIteration):
                break
            if i == 0:
                if parsed != expected:
                    raise ValidationError(f"journal header mismatch in {self.data_path}")
                text_end += len(line)
                continue
            if len(parsed) != 1 + self.cfg.data_channels:
                break
            try:
                row = WorkbookRow(int(parsed[0]), tuple(_parse_cell(c) for c in parsed[1:]))
            except (ValueError, ValidationError):
                break
            rows.append(row)
            text_end += len(line)
        good_end = text_end
        if good_end < len(raw):
            with open(self.data_path, "r+b") as fh:
                fh.truncate(good_end)
        self._appended = len(rows)
        self._ring = rows[-self.cfg.data_rows:]

    def append_row(self, row: WorkbookRow) -> int:
        if len(row.channels) != self.cfg.data_channels:
            raise ValidationError(
                f"row has {len(row.channels)} channels, workbook wants {self.cfg.data_channels}"
            )
        with self._lock:
            if self.rotate and len(self._ring) >= self.cfg.data_rows:
                self._rotate_out()
            self._ring.append(row)
            if len(self._ring) > self.cfg.data_rows:
                self._ring.pop(0)  # evict oldest; the journal keeps history
            self._writer.writerow([row.row_ts] + [_format_cell(c) for c in row.channels])
            self._journal.flush()
            index = self._appended
            self._appended += 1
            return index

    def _rotate_out(self):
        archive = self.base.with_name(f"{self.base.name}-{self._ring[-1].row_ts}.csv")
        self._export_locked(archive)
        self._ring.clear()
        self._journal.close()
        with open(self.data_path, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerow(_header(self.cfg.data_channels))
        self._journal = open(self.data_path, "a", newline="", encoding="utf-8")
        self._writer = csv.writer(self._journal)

    def rows(self) -> list[WorkbookRow]:
        with self._lock:
            return list(self._ring)

    @property
    def appended(self) -> int:
        with self._lock:
            return self._appended

    def export_csv(self, out_path: str | Path) -> int:
        """Write the retained rows oldest-first; the newest row is the last line."""
        with self._lock:
            return self._export_locked(out_path)

    def _export_locked(self, out_path) -> int:
        with open(out_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_header(self.cfg.data_channels))
            for row in self._ring:
                writer.writerow([row.row_ts] + [_format_cell(c) for c in row.channels])
            return len(self._ring)

    def close(self):
        with self._lock:
            self._journal.close()


def open_workbook(cfg: WorkbookConfig, sink_path: str | Path, rotate: bool = False) -> Workbook:
    return Workbook(cfg, sink_path, rotate=rotate)


def parse_export(path: str | Path) -> tuple[list[str], list[WorkbookRow]]:
    """Read an exported workbook CSV back into rows (round-trip support)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [
            WorkbookRow(int(line[0]), tuple(_parse_cell(c) for c in line[1:]))
            for line in reader
        ]
    return header, rows


class RecordingSession:
    """Feeds a workbook from a live subscription.

    ``trigger="interval"`` snapshots the latest value per mapped path on
    the workbook's own clock grid. ``trigger="group"`` emits one row per
    ingest write group, which pins the row count to the sample count.
    Stopping flushes cleanly; a row is never half-written.
    """

    def __init__(self, workbook: Workbook, events, channel_map: dict[str, int],
                 trigger: str = "interval"):
        if trigger not in ("interval", "group"):
            raise ValidationError(f"unknown trigger {trigger!r}")
        indices = list(channel_map.values())
        if len(set(indices)) != len(indices):
            raise ValidationError("channel map indices must be unique")
        for idx in indices:
            if not 0 <= idx < workbook.cfg.data_channels:
                raise ValidationError(f"channel index {idx} outside 0..{workbook.cfg.data_channels - 1}")
        self.workbook = workbook
        self.events = events
        self.channel_map = dict(channel_map)
        self.trigger = trigger
        self._latest: dict[str, object] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self._pending_group: int | None = None
        self._pending_ts: int | None = None
        self.rows_emitted = 0

    # -- row assembly -------------------------------------------------------

    def _snapshot_channels(self) -> tuple:
        cells: list = [None] * self.workbook.cfg.data_channels
        for path, idx in self.channel_map.items():
            value = self._latest.get(path)
            if isinstance(value, bool) or value is None:
                continue
            if isinstance(value, (int, float)):
                cells[idx] = value
            else:
                try:
                    cells[idx] = _parse_cell(str(value))
                except ValueError:
                    cells[idx] = None
        return tuple(cells)

    def _emit_row(self, row_ts: int):
        row = WorkbookRow(row_ts, self._snapshot_channels())
        self.workbook.append_row(row)
        self.rows_emitted += 1

    # -- threads --------------------------------------------------------------

    def _consume(self):
        while not self._stop.is_set():
            event = self.events.get(timeout=0.05)
            if event is None:
                continue
            if event.get("event") == "overflow":
                self._stop.set()
                return
            path = event.get("path")
            if path is None:
                continue
            with self._lock:
                if self.trigger == "group" and not event.get("snapshot"):
                    group = event.get("group")
                    if self._pending_group is not None and group != self._pending_group:
                        self._emit_row(self._pending_ts)
                    if self._pending_group is None or group != self._pending_group:
                        self._pending_group = group
                        self._pending_ts = event["server_ts"]
                self._latest[path] = event.get("value")

    def _tick(self):
        origin = time.monotonic()
        k = 0
        interval_s = self.workbook.cfg.data_interval_ms / 1000.0
        origin_ms = int(time.time() * 1000)
        while not self._stop.is_set():
            target = origin + (k + 1) * interval_s
            delay = target - time.monotonic()
            if delay > 0 and self._stop.wait(timeout=delay):
                return
            with self._lock:
                self._emit_row(origin_ms + k * self.workbook.cfg.data_interval_ms)
            k += 1

    def start(self) -> "RecordingSession":
        consumer = threading.Thread(target=self._consume, daemon=True)
        self._threads.append(consumer)
        consumer.start()
        if self.trigger == "interval":
            ticker = threading.Thread(target=self._tick, daemon=True)
            self._threads.append(ticker)
            ticker.start()
        return self

    def stop(self):
        self._stop.set()
        for thread in self._threads:
            thread.join(timeout=5)
        with self._lock:
            if self.trigger == "group" and self._pending_group is not None:
                self._emit_row(self._pending_ts)
                self._pending_group = None
