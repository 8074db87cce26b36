"""The telemetry gateway: NDJSON-over-TCP service with a browser path.

One listening socket serves three kinds of clients, sniffed from the
first bytes of each connection:

* newline-delimited JSON (devices, CLI, tests): one request object per
  line, replies in order, subscription events pushed as they happen;
* the same payloads over a WebSocket upgrade (the dashboard);
* plain HTTP GET for the static dashboard bundle.

All tree writes funnel through the store's single writer. The alert
engine runs inside the ingest path so notification writes land in the
same atomic write group as the sample that caused them.
"""
from __future__ import annotations

import json
import socket
import socketserver
import threading
from pathlib import Path

from ..alerts import AlertEngine
from ..errors import (
    AuthError,
    CardiotelError,
    ConflictError,
    NotFoundError,
    ValidationError,
)
from ..model import ThresholdConfig, VitalSample
from ..wire import decode_line, encode_message, error_reply, ok_reply
from . import ws
from .auth import DeviceTokenStore, SessionTable, UserStore
from .config import GatewayConfig
from .store import PathStore, now_ms, validate_path

# tree layout under each device namespace
VITALS_ORDER = ("spo2", "temp", "sbp", "dbp", "hr", "ecg_base", "p", "q", "r", "s", "t")

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".svg": "image/svg+xml",
    ".map": "application/json",
    ".ico": "image/x-icon",
}


def vitals_path(device_id: str, metric: str) -> str:
    return f"/deviceData/{device_id}/vitals/{metric}"


def sample_vitals_writes(device_id: str, sample: VitalSample) -> list[tuple[str, object]]:
    values = {
        "spo2": sample.spo2, "temp": sample.temp, "sbp": sample.sbp,
        "dbp": sample.dbp, "hr": sample.hr, "ecg_base": sample.ecg.ecg_base,
        "p": sample.ecg.p, "q": sample.ecg.q, "r": sample.ecg.r,
        "s": sample.ecg.s, "t": sample.ecg.t,
    }
    return [(vitals_path(device_id, m), values[m]) for m in VITALS_ORDER]


class GatewayServer:
    def __init__(self, config: GatewayConfig, thresholds: ThresholdConfig | None = None):
        self.config = config
        config.data_dir.mkdir(parents=True, exist_ok=True)
        self.store = PathStore(config.data_dir, subscriber_buffer=config.subscriber_buffer)
        self.users = UserStore(config.data_dir / "users.json")
        self.sessions = SessionTable(config.session_ttl_ms)
        self.devices = DeviceTokenStore(config.token_store_path)
        if thresholds is None:
            thresholds = self._load_thresholds()
        self.engine = AlertEngine(thresholds)
        self._tcp: _TcpServer | None = None
        self._thread: threading.Thread | None = None

    def _load_thresholds(self) -> ThresholdConfig:
        path = self.config.thresholds_path
        if path is None or not Path(path).exists():
            return ThresholdConfig()
        with open(path, encoding="utf-8") as fh:
            return ThresholdConfig.from_dict(json.load(fh))

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        self._tcp = _TcpServer((self.config.host, self.config.port), _Handler, self)
        self._thread = threading.Thread(target=self._tcp.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        if self._tcp is not None:
            self._tcp.shutdown()
            self._tcp.server_close()
            self._tcp = None
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self.store.close()

    @property
    def address(self) -> tuple[str, int]:
        assert self._tcp is not None, "server not started"
        return self._tcp.server_address[:2]

    # -- auth --------------------------------------------------------------

    def resolve_token(self, token) -> tuple[str, str]:
        """('device', id) or ('user', id); anything else raises AuthError."""
        if not token or not isinstance(token, str):
            raise AuthError("missing token")
        device_id = self.devices.device_for(token)
        if device_id is not None:
            return "device", device_id
        return "user", self.sessions.check(token, now_ms())

    @staticmethod
    def _can_write(kind: str, principal: str, path: str) -> bool:
        if kind == "device":
            return path.startswith(f"/deviceData/{principal}/")
        return path.startswith(f"/users/{principal}/")

    @staticmethod
    def _can_read(kind: str, principal: str, path: str) -> bool:
        if kind == "device":
            return path == f"/deviceData/{principal}" or path.startswith(f"/deviceData/{principal}/")
        return True

    # -- operations ---------------------------------------------------------

    def dispatch(self, msg: dict, connection) -> dict:
        op = msg.get("op")
        try:
            if op == "register":
                user_id = self.users.register(
                    msg.get("name", ""), msg.get("email", ""), msg.get("contact", ""),
                    msg.get("password", ""), msg.get("c_password", ""),
                )
                return ok_reply(user_id=user_id)
            if op == "login":
                user_id = self.users.verify(msg.get("email", ""), msg.get("password", ""))
                token, expiry = self.sessions.mint(user_id, now_ms())
                return ok_reply(token=token, expiry_ts=expiry, user_id=user_id)
            if op == "set":
                return self._op_set(msg)
            if op == "get":
                return self._op_get(msg)
            if op == "sub":
                return self._op_sub(msg, connection)
            if op == "ingest":
                return self._op_ingest(msg)
            if op == "ack":
                return self._op_ack(msg)
            if op == "alerts":
                self.resolve_token(msg.get("token"))
                return ok_reply(alerts=[e.to_wire() for e in self.engine.events()])
            if op == "reload_thresholds":
                kind, _ = self.resolve_token(msg.get("token"))
                if kind != "user":
                    raise AuthError("threshold reload requires a user session")
                self.engine.reload_thresholds(self._load_thresholds())
                return ok_reply(thresholds=self.engine.cfg.to_dict())
            raise ValidationError(f"unknown op {op!r}")
        except AuthError as exc:
            return error_reply("auth", str(exc))
        except ConflictError as exc:
            return error_reply("conflict", str(exc))
        except NotFoundError as exc:
            return error_reply("not_found", str(exc))
        except ValidationError as exc:
            return error_reply("validation", str(exc))
        except CardiotelError as exc:
            return error_reply("validation", str(exc))

    def _op_set(self, msg: dict) -> dict:
        kind, principal = self.resolve_token(msg.get("token"))
        path = msg.get("path")
        value = msg.get("value")
        if not isinstance(path, str):
            raise ValidationError("path must be a string")
        validate_path(path)
        if not self._can_write(kind, principal, path):
            raise AuthError(f"token cannot write under {path}")
        ack = self.store.set_path(path, value, writer=f"{kind}:{principal}",
                                  client_ts=msg.get("ts"))
        return ok_reply(seq=ack["seq"], server_ts=ack["server_ts"])

    def _op_get(self, msg: dict) -> dict:
        kind, principal = self.resolve_token(msg.get("token"))
        path = msg.get("path")
        if not isinstance(path, str):
            raise ValidationError("path must be a string")
        validate_path(path)
        if not self._can_read(kind, principal, path):
            raise AuthError(f"token cannot read {path}")
        entry = self.store.get(path)
        if entry is None:
            return ok_reply(absent=True)
        return ok_reply(value=entry["value"], server_ts=entry["server_ts"], seq=entry["seq"])

    def _op_sub(self, msg: dict, connection) -> dict:
        kind, principal = self.resolve_token(msg.get("token"))
        prefix = msg.get("prefix")
        if not isinstance(prefix, str):
            raise ValidationError("prefix must be a string")
        validate_path(prefix)
        if not self._can_read(kind, principal, prefix):
            raise AuthError(f"token cannot subscribe to {prefix}")
        if connection is None:
            raise ValidationError("subscriptions need a streaming connection")
        sub = self.store.subscribe(prefix)
        connection.attach_subscription(sub)
        return ok_reply(prefix=prefix)

    def _op_ingest(self, msg: dict) -> dict:
        kind, principal = self.resolve_token(msg.get("token"))
        if kind != "device":
            raise AuthError("ingest requires a device token")
        sample = VitalSample.from_wire(msg.get("sample") or {})
        writes = sample_vitals_writes(principal, sample)
        writes += self.engine.process(principal, sample, ts=sample.ts)
        ack = self.store.write_group(writes, writer=f"device:{principal}", client_ts=sample.ts)
        return ok_reply(seq=ack["seq"], server_ts=ack["server_ts"], group=ack["group"])

    def _op_ack(self, msg: dict) -> dict:
        kind, principal = self.resolve_token(msg.get("token"))
        if kind != "user":
            raise AuthError("acknowledge requires a user session")
        alert_id = msg.get("alert_id")
        if not isinstance(alert_id, int):
            raise ValidationError("alert_id must be an integer")
        event = self.engine.acknowledge(alert_id, principal, now_ms())
        return ok_reply(alert=event.to_wire())


class _TcpServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, addr, handler, gateway: GatewayServer):
        self.gateway = gateway
        super().__init__(addr, handler)


class _Handler(socketserver.StreamRequestHandler):
    """One client connection: NDJSON, WebSocket, or static HTTP."""

    def setup(self):
        sndbuf = self.server.gateway.config.socket_sndbuf
        if sndbuf is not None:
            self.request.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, sndbuf)
        super().setup()
        self.out_lock = threading.Lock()
        self.subs: list = []
        self.pumps: list[threading.Thread] = []
        self._pending_pumps: list = []
        self.ws_mode = False

    def attach_subscription(self, sub):
        # pump starts only after the sub ack goes out, so the reply always
        # precedes the snapshot events on the wire
        self.subs.append(sub)
        self._pending_pumps.append(sub)

    def _start_pending_pumps(self):
        while self._pending_pumps:
            sub = self._pending_pumps.pop(0)
            pump = threading.Thread(target=self._pump_events, args=(sub,), daemon=True)
            self.pumps.append(pump)
            pump.start()

    def _send_json(self, payload: dict):
        data = encode_message(payload)
        with self.out_lock:
            if self.ws_mode:
                ws.write_frame(self.wfile, data.rstrip(b"\n"))
            else:
                self.wfile.write(data)
                self.wfile.flush()

    def _pump_events(self, sub):
        try:
            while True:
                event = sub.get(timeout=0.5)
                if event is None:
                    if sub.closed:
                        return
                    continue
                self._send_json(event)
                if event.get("event") == "overflow":
                    # explicit close marker; drop the connection afterwards
                    self.connection.shutdown(socket.SHUT_RDWR)
                    return
        except (OSError, ValueError):
            return

    def handle(self):
        try:
            first = self.connection.recv(4, socket.MSG_PEEK)
        except OSError:
            return
        if not first:
            return
        try:
            if first[:1] in (b"{", b"["):
                self._handle_ndjson()
            else:
                self._handle_http()
        except (OSError, ValueError, ConnectionError):
            pass
        finally:
            for sub in self.subs:
                sub.close()

    # -- NDJSON ------------------------------------------------------------

    def _handle_ndjson(self):
        gateway = self.server.gateway
        while True:
            line = self.rfile.readline(65536)
            if not line:
                return
            line = line.strip()
            if not line:
                continue
            try:
                msg = decode_line(line)
            except ValidationError as exc:
                self._send_json(error_reply("validation", str(exc)))
                continue
            self._send_json(gateway.dispatch(msg, self))
            self._start_pending_pumps()

    # -- HTTP / WebSocket ---------------------------------------------------

    def _handle_http(self):
        request_line = self.rfile.readline(8192).decode("latin-1").strip()
        parts = request_line.split()
        if len(parts) != 3:
            return
        method, target, _version = parts
        headers = {}
        while True:
            raw = self.rfile.readline(8192)
            if raw in (b"\r\n", b"\n", b""):
                break
            name, _, value = raw.decode("latin-1").partition(":")
            headers[name.strip().lower()] = value.strip()

        if headers.get("upgrade", "").lower() == "websocket":
            key = headers.get("sec-websocket-key", "")
            if not key:
                self._http_error(400, "missing websocket key")
                return
            with self.out_lock:
                self.wfile.write(ws.handshake_response(key))
                self.wfile.flush()
                self.ws_mode = True
            self._websocket_loop()
            return

        if method != "GET":
            self._http_error(405, "only GET is served here")
            return
        self._serve_static(target)

    def _websocket_loop(self):
        gateway = self.server.gateway
        while True:
            frame = ws.read_frame(self.rfile)
            if frame is None:
                return
            opcode, payload = frame
            if opcode == ws.OP_CLOSE:
                with self.out_lock:
                    ws.write_frame(self.wfile, payload, ws.OP_CLOSE)
                return
            if opcode == ws.OP_PING:
                with self.out_lock:
                    ws.write_frame(self.wfile, payload, ws.OP_PONG)
                continue
            if opcode != ws.OP_TEXT:
                continue
            try:
                msg = decode_line(payload)
            except ValidationError as exc:
                self._send_json(error_reply("validation", str(exc)))
                continue
            self._send_json(gateway.dispatch(msg, self))
            self._start_pending_pumps()

    def _serve_static(self, target: str):
        static_dir = self.server.gateway.config.static_dir
        if static_dir is None:
            self._http_error(404, "no static bundle configured")
            return
        name = target.split("?", 1)[0]
        if name in ("", "/"):
            name = "/index.html"
        candidate = (Path(static_dir) / name.lstrip("/")).resolve()
        root = Path(static_dir).resolve()
        if root not in candidate.parents and candidate != root:
            self._http_error(403, "forbidden")
            return
        if not candidate.is_file():
            self._http_error(404, "not found")
            return
        body = candidate.read_bytes()
        ctype = _CONTENT_TYPES.get(candidate.suffix, "application/octet-stream")
        head = (
            f"HTTP/1.1 200 OK\r\nContent-Type: {ctype}\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
        ).encode("latin-1")
        with self.out_lock:
            self.wfile.write(head + body)
            self.wfile.flush()

    def _http_error(self, code: int, text: str):
        body = text.encode("utf-8")
        head = (
            f"HTTP/1.1 {code} {text[:40]}\r\nContent-Type: text/plain\r\n"
            f"Content-Length: {len(body)}\r\nConnection: close\r\n\r\n"
        ).encode("latin-1")
        with self.out_lock:
            self.wfile.write(head + body)
            self.wfile.flush()
