"""Minimal RFC 6455 WebSocket support for browser clients.

Covers exactly what the dashboard needs: the upgrade handshake, masked
client text frames, server text frames, ping/pong and close. No
extensions, no fragmentation reassembly beyond contiguous continuation
frames, no permessage-deflate.
"""
from __future__ import annotations

import base64
import hashlib
import struct

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def handshake_response(client_key: str) -> bytes:
    return (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(client_key)}\r\n"
        "\r\n"
    ).encode("ascii")


def read_frame(rfile) -> tuple[int, bytes] | None:
    """One (opcode, payload) frame, or None at EOF. Reassembles continuations."""
    opcode = None
    payload = b""
    while True:
        header = rfile.read(2)
        if len(header) < 2:
            return None
        b0, b1 = header
        fin = b0 & 0x80
        op = b0 & 0x0F
        masked = b1 & 0x80
        length = b1 & 0x7F
        if length == 126:
            ext = rfile.read(2)
            if len(ext) < 2:
                return None
            (length,) = struct.unpack(">H", ext)
        elif length == 127:
            ext = rfile.read(8)
            if len(ext) < 8:
                return None
            (length,) = struct.unpack(">Q", ext)
        mask = rfile.read(4) if masked else b""
        data = rfile.read(length) if length else b""
        if len(data) < length:
            return None
        if masked:
            data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
        if op != OP_CONT:
            opcode = op
        payload += data
        if fin:
            return opcode if opcode is not None else OP_CONT, payload


def write_frame(wfile, payload: bytes, opcode: int = OP_TEXT, mask: bytes | None = None):
    """Emit one frame; pass a 4-byte ``mask`` to write as a client would."""
    header = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        header += bytes([mask_bit | n])
    elif n < 2**16:
        header += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        header += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        header += mask
        payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
    wfile.write(header + payload)
    wfile.flush()
