"""Blocking NDJSON client used by devices, the CLI, and tests.

One connection carries request/reply traffic plus pushed subscription
events; a reader thread demultiplexes them. Keep one in-flight request
at a time per client (enforced with a lock), and one client per
long-lived subscription for clarity.
"""
from __future__ import annotations

import queue
import socket
import threading

from ..errors import (
    AuthError,
    CardiotelError,
    ConflictError,
    NotFoundError,
    OverflowClosed,
    ValidationError,
)
from ..model import VitalSample
from ..wire import decode_line, encode_message

_ERROR_TYPES = {
    "auth": AuthError,
    "validation": ValidationError,
    "conflict": ConflictError,
    "not_found": NotFoundError,
    "overflow": OverflowClosed,
}


def raise_for_error(reply: dict) -> dict:
    if reply.get("ok"):
        return reply
    code = reply.get("error", "error")
    exc_type = _ERROR_TYPES.get(code, CardiotelError)
    raise exc_type(reply.get("message") or code)


class EventStream:
    """Iterator over pushed subscription events for one client."""

    def __init__(self):
        self._queue: queue.Queue = queue.Queue()
        self.closed = False

    def _push(self, event: dict):
        self._queue.put(event)

    def _close(self):
        self.closed = True
        self._queue.put(None)

    def get(self, timeout: float | None = None) -> dict | None:
        """Next event, or None on timeout/stream end. Raises OverflowClosed
        when the gateway dropped this subscriber for falling behind."""
        try:
            event = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        if event is None:
            return None
        if event.get("event") == "overflow":
            raise OverflowClosed("subscription dropped: consumer too slow")
        return event

    def __iter__(self):
        while True:
            event = self.get(timeout=None)
            if event is None:
                return
            yield event


class GatewayClient:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.timeout = timeout
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._rfile = self._sock.makefile("rb")
        self._request_lock = threading.Lock()
        self._replies: queue.Queue = queue.Queue()
        self.events = EventStream()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self):
        try:
            for raw in iter(self._rfile.readline, b""):
                raw = raw.strip()
                if not raw:
                    continue
                msg = decode_line(raw)
                if "event" in msg:
                    self.events._push(msg)
                else:
                    self._replies.put(msg)
        except (OSError, ValueError, ValidationError):
            pass
        finally:
            self.events._close()
            self._replies.put(None)

    # -- transport ----------------------------------------------------------

    def send_line(self, line: bytes) -> dict:
        """Send one already-encoded message; wait for its reply."""
        with self._request_lock:
            self._sock.sendall(line)
            reply = self._replies.get(timeout=self.timeout)
        if reply is None:
            raise ConnectionError("gateway connection closed")
        return reply

    def request(self, msg: dict) -> dict:
        return self.send_line(encode_message(msg))

    def close(self):
        try:
            self._sock.close()
        except OSError:
            pass

    # -- convenience ops ------------------------------------------------------

    def register(self, name, email, contact, password, c_password) -> str:
        reply = raise_for_error(self.request({
            "op": "register", "name": name, "email": email, "contact": contact,
            "password": password, "c_password": c_password,
        }))
        return reply["user_id"]

    def login(self, email, password) -> dict:
        return raise_for_error(self.request({"op": "login", "email": email, "password": password}))

    def set(self, path: str, value, token: str, ts: int | None = None) -> dict:
        msg = {"op": "set", "path": path, "value": value, "token": token}
        if ts is not None:
            msg["ts"] = ts
        return raise_for_error(self.request(msg))

    def get(self, path: str, token: str) -> dict:
        return raise_for_error(self.request({"op": "get", "path": path, "token": token}))

    def subscribe(self, prefix: str, token: str) -> EventStream:
        raise_for_error(self.request({"op": "sub", "prefix": prefix, "token": token}))
        return self.events

    def ingest(self, sample: VitalSample, token: str) -> dict:
        return raise_for_error(self.request({
            "op": "ingest", "sample": sample.to_wire(), "token": token,
        }))

    def acknowledge(self, alert_id: int, token: str) -> dict:
        return raise_for_error(self.request({"op": "ack", "alert_id": alert_id, "token": token}))

    def alerts(self, token: str) -> list[dict]:
        return raise_for_error(self.request({"op": "alerts", "token": token}))["alerts"]

    def reload_thresholds(self, token: str) -> dict:
        return raise_for_error(self.request({"op": "reload_thresholds", "token": token}))
