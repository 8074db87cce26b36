"""Newline-delimited JSON wire format shared by clients and the gateway.

One JSON object per line, UTF-8, no embedded newlines. Encoding is
canonical (sorted keys, compact separators) so identical payloads are
byte-identical: the simulator's determinism contract rests on that.
"""
from __future__ import annotations

import json

from .errors import ValidationError

MAX_LINE_BYTES = 64 * 1024

ERROR_CODES = ("auth", "validation", "conflict", "overflow", "not_found")


def encode_message(msg: dict) -> bytes:
    line = json.dumps(msg, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    data = line.encode("utf-8") + b"\n"
    if len(data) > MAX_LINE_BYTES:
        raise ValidationError(f"message exceeds {MAX_LINE_BYTES} bytes")
    return data


def decode_line(line: bytes) -> dict:
    try:
        msg = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"unparseable message: {exc}") from exc
    if not isinstance(msg, dict):
        raise ValidationError("message must be a JSON object")
    return msg


def ok_reply(**fields) -> dict:
    return {"ok": True, **fields}


def error_reply(code: str, message: str = "") -> dict:
    reply = {"ok": False, "error": code}
    if message:
        reply["message"] = message
    return reply


def read_lines(sock_file):
    """Yield complete lines from a socket file object until EOF."""
    while True:
        line = sock_file.readline(MAX_LINE_BYTES + 2)
        if not line:
            return
        line = line.strip()
        if line:
            yield line
