"""User accounts, login sessions, and static device tokens.

Passwords are stored as salted scrypt digests (memory-hard); raw
passwords never touch disk. Session tokens are 128-bit random values
with an expiry. Device tokens are provisioned ahead of time into a JSON
store shared with the CLI.
"""
from __future__ import annotations

import hashlib
import hmac
import json
import os
import re
import secrets
import threading
import uuid
from pathlib import Path

from ..errors import AuthError, ConflictError, ValidationError

_SCRYPT_N = 2**14
_SCRYPT_R = 8
_SCRYPT_P = 1

_EMAIL_RE = re.compile(r"^[^@\s]+@[^@\s]+$")


def digest_password(password: str, salt: bytes) -> str:
    raw = hashlib.scrypt(
        password.encode("utf-8"), salt=salt, n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P
    )
    return raw.hex()


def _atomic_write_json(path: Path, payload: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    os.replace(tmp, path)


class UserStore:
    """Registered users persisted as JSON keyed by email."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._users: dict[str, dict] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                self._users = json.load(fh)

    def register(self, name: str, email: str, contact: str, password: str, c_password: str) -> str:
        for label, value in (("name", name), ("email", email), ("contact", contact),
                             ("password", password), ("c_password", c_password)):
            if not value:
                raise ValidationError(f"{label} must be nonempty")
        if password != c_password:
            raise ValidationError("password and confirmation do not match")
        if len(password) < 8:
            raise ValidationError("password must be at least 8 characters")
        if not _EMAIL_RE.match(email):
            raise ValidationError("email is not syntactically valid")
        with self._lock:
            if email in self._users:
                raise ConflictError("email already registered")
            salt = secrets.token_bytes(16)
            user_id = uuid.uuid4().hex
            self._users[email] = {
                "user_id": user_id,
                "name": name,
                "contact": contact,
                "salt": salt.hex(),
                "digest": digest_password(password, salt),
                "created_ts": 0,
            }
            _atomic_write_json(self.path, self._users)
        return user_id

    def verify(self, email: str, password: str) -> str:
        """user_id on success; the same AuthError for unknown email and
        wrong password, with a dummy digest so timing does not leak which."""
        with self._lock:
            record = self._users.get(email)
        if record is None:
            digest_password(password, b"\x00" * 16)
            raise AuthError("invalid credentials")
        expected = record["digest"]
        got = digest_password(password, bytes.fromhex(record["salt"]))
        if not hmac.compare_digest(expected, got):
            raise AuthError("invalid credentials")
        return record["user_id"]

    def record_for_email(self, email: str) -> dict | None:
        with self._lock:
            rec = self._users.get(email)
            return dict(rec) if rec else None


class SessionTable:
    """In-memory login sessions; tokens expire and are never persisted."""

    def __init__(self, ttl_ms: int):
        self.ttl_ms = ttl_ms
        self._lock = threading.Lock()
        self._sessions: dict[str, tuple[str, int]] = {}

    def mint(self, user_id: str, now_ms: int) -> tuple[str, int]:
        token = secrets.token_hex(16)  # 128 bits
        expiry = now_ms + self.ttl_ms
        with self._lock:
            self._sessions[token] = (user_id, expiry)
        return token, expiry

    def check(self, token: str, now_ms: int) -> str:
        with self._lock:
            entry = self._sessions.get(token)
            if entry is None:
                raise AuthError("unknown session token")
            user_id, expiry = entry
            if now_ms >= expiry:
                del self._sessions[token]
                raise AuthError("session expired")
        return user_id

    def expire_now(self, token: str):
        """Force a token to be expired (test hook)."""
        with self._lock:
            if token in self._sessions:
                user_id, _ = self._sessions[token]
                self._sessions[token] = (user_id, 0)


class DeviceTokenStore:
    """Static per-device tokens in a JSON file, provisioned via the CLI.

    The gateway re-reads the file when its mtime changes so tokens minted
    while the server is running are honored without a restart.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._tokens: dict[str, str] = {}
        self._mtime = -1.0
        self._reload_if_changed()

    def _reload_if_changed(self):
        try:
            mtime = self.path.stat().st_mtime
        except FileNotFoundError:
            self._tokens = {}
            self._mtime = -1.0
            return
        if mtime != self._mtime:
            with open(self.path, encoding="utf-8") as fh:
                self._tokens = json.load(fh)
            self._mtime = mtime

    def provision(self, device_id: str) -> str:
        if not device_id or not re.fullmatch(r"[A-Za-z0-9_]+", device_id):
            raise ValidationError("device id must match [A-Za-z0-9_]+")
        with self._lock:
            self._reload_if_changed()
            token = secrets.token_hex(16)
            self._tokens[token] = device_id
            self.path.parent.mkdir(parents=True, exist_ok=True)
            _atomic_write_json(self.path, self._tokens)
            self._mtime = self.path.stat().st_mtime
        return token

    def device_for(self, token: str) -> str | None:
        with self._lock:
            found = self._tokens.get(token)
            if found is None:
                self._reload_if_changed()
                found = self._tokens.get(token)
            return found
