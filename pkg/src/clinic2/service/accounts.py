"""Accounts, authentication, sessions, and presence.

Credentials are stored as salted PBKDF2 hashes and compared in constant
time. Authentication failures are indistinguishable between unknown logins
and wrong passwords, and every failed attempt lands in the audit trail.
Presence means: a non-terminated session seen within the presence window.
"""
from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Callable

from .. import eho
from ..eho import AuditLog
from ..errors import BadCredentials, UnknownToken, ValidationError, VersionConflict
from ..policy import Role
from ..principals import Directory
from ..store import DocumentStore

ACCOUNTS = "accounts"
SESSIONS = "sessions"

_PBKDF2_ITERATIONS = 60_000

# Fixed per-session request cap; anything fancier is out of scope.
SESSION_REQUEST_CAP = 100_000


def _hash_credential(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode(), salt,
                               _PBKDF2_ITERATIONS)


@dataclass(frozen=True)
class Session:
    token: str
    principal: str
    created_at: str
    last_seen: str
    terminated: bool
    requests: int = 0


class AccountService:
    def __init__(self, store: DocumentStore, directory: Directory,
                 audit: AuditLog, presence_window_s: int = 90,
                 clock: Callable[[], datetime] = eho.utcnow,
                 request_cap: int = SESSION_REQUEST_CAP):
        self._store = store
        self._directory = directory
        self._audit = audit
        self._presence_window = presence_window_s
        self._clock = clock
        self._request_cap = request_cap

    # --- accounts -----------------------------------------------------------

    def create_account(self, login: str, password: str, role: Role,
                       display_name: str,
                       delegate_of: str | None = None) -> str:
        if not login.strip() or not password:
            raise ValidationError("login and password must be non-empty")
        if self._find_account(login) is not None:
            raise ValidationError(f"login {login!r} already taken")
        principal_id = eho.new_id()
        self._directory.register(principal_id, role, display_name,
                                 delegate_of=delegate_of)
        salt = secrets.token_bytes(16)
        doc = {
            "principal": principal_id,
            "login": login,
            "salt": salt.hex(),
            "credential": _hash_credential(password, salt).hex(),
        }
        self._store.put(ACCOUNTS, principal_id, doc)
        return principal_id

    def _find_account(self, login: str) -> dict | None:
        for _id, doc in self._store.scan(ACCOUNTS):
            if doc["login"] == login:
                return doc
        return None

    def login_of(self, principal_id: str) -> str | None:
        doc = self._store.get(ACCOUNTS, principal_id)
        return doc["login"] if doc else None

    # --- sessions ---------------------------------------------------------------

    def authenticate(self, login: str, password: str) -> Session:
        account = self._find_account(login)
        if account is None:
            # Burn the same work as a real comparison so timing does not
            # reveal whether the login exists.
            _hash_credential(password, b"\x00" * 16)
            self._audit.record(login, "-", "Login", "ID", "-", "failed",
                               kind="auth", now=self._clock())
            raise BadCredentials()
        expected = bytes.fromhex(account["credential"])
        provided = _hash_credential(password, bytes.fromhex(account["salt"]))
        if not hmac.compare_digest(expected, provided):
            self._audit.record(login, "-", "Login", "ID", "-", "failed",
                               kind="auth", now=self._clock())
            raise BadCredentials()
        now = eho.isoformat(self._clock())
        doc = {
            "token": secrets.token_urlsafe(24),
            "principal": account["principal"],
            "created_at": now,
            "last_seen": now,
            "terminated": False,
            "requests": 0,
        }
        self._store.put(SESSIONS, doc["token"], doc)
        self._audit.record(account["principal"],
                           self._directory.role_of(account["principal"]).value,
                           "Login", "ID", doc["token"], "ok", kind="auth",
                           now=self._clock())
        return Session(**doc)

    def session_for(self, token: str, touch: bool = True) -> Session:
        doc = self._store.get(SESSIONS, token)
        if doc is None or doc["terminated"]:
            raise UnknownToken("missing or terminated session")
        if doc.get("requests", 0) >= self._request_cap:
            raise UnknownToken("session request cap exceeded")
        if touch:
            doc["last_seen"] = eho.isoformat(self._clock())
            doc["requests"] = doc.get("requests", 0) + 1
            try:
                self._store.put(SESSIONS, token, doc,
                                expected_version=self._store.version(SESSIONS,
                                                                     token))
            except VersionConflict:
                # a concurrent request touched the same session; that touch
                # is at least as fresh, so losing the race is fine
                pass
        return Session(**{**doc, "requests": doc.get("requests", 0)})

    def logout(self, token: str) -> bool:
        """Single-call, no-confirmation logout. Idempotent: terminating an
        already-terminated session succeeds."""
        while True:
            doc = self._store.get(SESSIONS, token)
            if doc is None:
                raise UnknownToken(token)
            if doc["terminated"]:
                return True
            doc["terminated"] = True
            try:
                self._store.put(SESSIONS, token, doc,
                                expected_version=self._store.version(SESSIONS,
                                                                     token))
                return True
            except VersionConflict:
                continue  # a concurrent touch bumped the version; retry

    # --- presence ----------------------------------------------------------------

    def presence(self, principal_id: str, now: datetime | None = None) -> bool:
        now = now or self._clock()
        horizon = eho.isoformat(now - timedelta(seconds=self._presence_window))
        for _token, doc in self._store.scan(SESSIONS):
            if doc["principal"] != principal_id or doc["terminated"]:
                continue
            if doc["last_seen"] >= horizon:
                return True
        return False

    def online(self, principal_ids: set[str],
               now: datetime | None = None) -> list[str]:
        now = now or self._clock()
        return sorted(p for p in principal_ids if self.presence(p, now))
