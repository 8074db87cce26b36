"""The path-addressed realtime tree with durable write log and fan-out.

All mutations serialize through one lock that assigns the global sequence
number, appends to the write log, updates the tree, and enqueues events
to matching subscribers - so every subscriber observes the identical
total order, and a write group (one ingested sample) is contiguous.

Durability: every accepted write is flushed to an append-only
newline-delimited JSON log before the ack; a full-tree snapshot is taken
periodically so recovery replays snapshot + log tail. Recovery truncates
a torn trailing line left by a crash.
"""
from __future__ import annotations

import json
import os
import queue
import re
import threading
import time
from pathlib import Path

from ..errors import ValidationError
from ..wire import decode_line

PATH_RE = re.compile(r"^(/[A-Za-z0-9_]+)+$")
MAX_VALUE_BYTES = 4096

LOG_NAME = "writes.log"
SNAPSHOT_NAME = "snapshot.json"


def validate_path(path: str) -> str:
    if not isinstance(path, str) or not PATH_RE.match(path):
        raise ValidationError(f"malformed path {path!r}")
    return path


def validate_value(value):
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ValidationError("value must be a string, integer or decimal")
    if isinstance(value, str) and len(value.encode("utf-8")) > MAX_VALUE_BYTES:
        raise ValidationError(f"value exceeds {MAX_VALUE_BYTES} bytes")
    return value


def now_ms() -> int:
    return int(time.time() * 1000)


class Subscription:
    """One subscriber's event feed with a bounded backlog."""

    _OVERFLOW = object()
    _CLOSE = object()

    def __init__(self, sub_id: int, prefix: str, limit: int, unsubscribe):
        self.sub_id = sub_id
        self.prefix = prefix
        self.limit = limit
        self._queue: queue.Queue = queue.Queue()
        self._unsubscribe = unsubscribe
        self.overflowed = False
        self.closed = False

    def matches(self, path: str) -> bool:
        return path == self.prefix or path.startswith(self.prefix + "/")

    def _offer(self, event: dict):
        # called under the store lock; marking overflow stops all future
        # delivery so the subscriber sees a gap-free prefix then the marker
        if self.overflowed or self.closed:
            return
        if self._queue.qsize() >= self.limit:
            self.overflowed = True
            self._queue.put(self._OVERFLOW)
            return
        self._queue.put(event)

    def get(self, timeout: float | None = None):
        """Next event dict, or None when the stream closed; raises nothing.

        An overflow is surfaced as the dict {"event": "overflow"} before
        the stream ends.
        """
        if self.closed:
            return None
        try:
            item = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if item is self._OVERFLOW:
            self.closed = True
            return {"event": "overflow"}
        if item is self._CLOSE:
            self.closed = True
            return None
        return item

    def close(self):
        if not self.closed:
            self._unsubscribe(self.sub_id)
            self._queue.put(self._CLOSE)


class PathStore:
    def __init__(self, data_dir: str | Path, subscriber_buffer: int = 256,
                 snapshot_every: int = 1000):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.subscriber_buffer = subscriber_buffer
        self.snapshot_every = snapshot_every
        self._lock = threading.Lock()
        self._tree: dict[str, dict] = {}
        self._seq = 0
        self._writes_since_snapshot = 0
        self._subs: dict[int, Subscription] = {}
        self._next_sub_id = 1
        self._recover()
        self._log = open(self.data_dir / LOG_NAME, "a", encoding="utf-8")

    # -- recovery ---------------------------------------------------------

    def _recover(self):
        snap_path = self.data_dir / SNAPSHOT_NAME
        if snap_path.exists():
            with open(snap_path, encoding="utf-8") as fh:
                snap = json.load(fh)
            self._seq = int(snap["watermark"])
            self._tree = {p: dict(e) for p, e in snap["paths"].items()}
        log_path = self.data_dir / LOG_NAME
        if not log_path.exists():
            return
        good_end = 0
        with open(log_path, "rb") as fh:
            for raw in fh:
                if not raw.endswith(b"\n"):
                    break  # torn tail from a crash mid-append
                try:
                    entry = decode_line(raw)
                    seq = int(entry["seq"])
                    path = entry["path"]
                    value = entry["value"]
                    server_ts = int(entry["server_ts"])
                    writer = entry["writer"]
                except (ValidationError, KeyError, TypeError, ValueError):
                    break
                good_end += len(raw)
                if seq <= self._seq:
                    continue  # already covered by the snapshot
                self._tree[path] = {
                    "value": value, "server_ts": server_ts, "writer": writer,
                    "seq": seq, "group": seq,
                }
                self._seq = seq
        if good_end < log_path.stat().st_size:
            with open(log_path, "r+b") as fh:
                fh.truncate(good_end)

    def snapshot_now(self):
        with self._lock:
            self._snapshot_locked()

    def _snapshot_locked(self):
        snap = {"watermark": self._seq, "paths": self._tree}
        tmp = self.data_dir / (SNAPSHOT_NAME + ".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(snap, fh, separators=(",", ":"))
        os.replace(tmp, self.data_dir / SNAPSHOT_NAME)
        self._writes_since_snapshot = 0

    # -- writes -----------------------------------------------------------

    def write_group(self, items: list[tuple[str, object]], writer: str,
                    client_ts: int | None = None) -> dict:
        """Apply a batch of path writes atomically; returns the ack.

        The whole group takes consecutive sequence numbers and reaches
        every matching subscriber contiguously and in order.
        """
        if not items:
            raise ValidationError("empty write group")
        checked = [(validate_path(p), validate_value(v)) for p, v in items]
        with self._lock:
            server_ts = now_ms()
            group_seq = self._seq + 1
            events = []
            for path, value in checked:
                self._seq += 1
                entry = {
                    "value": value, "server_ts": server_ts, "writer": writer,
                    "seq": self._seq, "group": group_seq,
                }
                log_line = json.dumps(
                    {"seq": self._seq, "path": path, "value": value,
                     "server_ts": server_ts, "writer": writer},
                    sort_keys=True, separators=(",", ":"), ensure_ascii=False,
                )
                self._log.write(log_line + "\n")
                self._tree[path] = entry
                events.append({
                    "event": "put", "path": path, "value": value,
                    "server_ts": server_ts, "seq": self._seq, "group": group_seq,
                })
            # flushed to the OS before the ack; survives process death
            self._log.flush()
            for sub in self._subs.values():
                for event in events:
                    if sub.matches(event["path"]):
                        sub._offer(event)
            self._writes_since_snapshot += len(checked)
            if self._writes_since_snapshot >= self.snapshot_every:
                self._snapshot_locked()
            return {"seq": self._seq, "server_ts": server_ts, "group": group_seq}

    def set_path(self, path: str, value, writer: str, client_ts: int | None = None) -> dict:
        return self.write_group([(path, value)], writer, client_ts)

    # -- reads ------------------------------------------------------------

    def get(self, path: str) -> dict | None:
        validate_path(path)
        with self._lock:
            entry = self._tree.get(path)
            return dict(entry) if entry else None

    def subscribe(self, prefix: str, limit: int | None = None) -> Subscription:
        """Snapshot-then-live subscription registered atomically with writes."""
        validate_path(prefix)
        limit = limit or self.subscriber_buffer
        with self._lock:
            sub = Subscription(self._next_sub_id, prefix, limit, self._drop_sub)
            self._next_sub_id += 1
            snapshot = sorted(
                (p for p in self._tree if sub.matches(p))
            )
            for path in snapshot:
                entry = self._tree[path]
                sub._offer({
                    "event": "put", "path": path, "value": entry["value"],
                    "server_ts": entry["server_ts"], "seq": entry["seq"],
                    "group": entry["group"], "snapshot": True,
                })
            sub._offer({"event": "ready", "seq": self._seq})
            self._subs[sub.sub_id] = sub
            return sub

    def _drop_sub(self, sub_id: int):
        with self._lock:
            self._subs.pop(sub_id, None)

    @property
    def seq(self) -> int:
        with self._lock:
            return self._seq

    def close(self):
        with self._lock:
            for sub in list(self._subs.values()):
                sub._queue.put(Subscription._CLOSE)
                sub.closed = True
            self._subs.clear()
            self._snapshot_locked()
            self._log.close()
