"""Electronic health objects: the universal record envelope.

Every stored record on the platform is a ``HealthObject``: an object class,
a sub-module code, an owner, an author, and a sub-module-specific payload.
Identifiers are opaque, lexicographically time-ordered strings so that feed
and timeline ordering is deterministic.
"""
from __future__ import annotations

import secrets
import threading
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from typing import Any

from .errors import SchemaMismatch
from .policy import ObjectClass, SubModule

# --- identifiers -----------------------------------------------------------

_ALPHABET = "0123456789abcdefghijklmnopqrstuvwxyz"


def _base36(value: int, width: int) -> str:
    digits = []
    for _ in range(width):
        value, rem = divmod(value, 36)
        digits.append(_ALPHABET[rem])
    return "".join(reversed(digits))


class IdGenerator:
    """Issues opaque ids that sort lexicographically in issue order.

    Layout: 9 chars of milliseconds since epoch (base36), 4 chars of a
    per-millisecond counter, 4 random chars. Strict monotonicity is
    guaranteed even when the clock stalls or steps backwards.
    """

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._last_ms = 0
        self._counter = 0

    def new_id(self) -> str:
        with self._lock:
            now_ms = time.time_ns() // 1_000_000
            if now_ms <= self._last_ms:
                now_ms = self._last_ms
                self._counter += 1
            else:
                self._last_ms = now_ms
                self._counter = 0
            return (
                _base36(now_ms, 9)
                + _base36(self._counter, 4)
                + "".join(secrets.choice(_ALPHABET) for _ in range(4))
            )


_ids = IdGenerator()


def new_id() -> str:
    return _ids.new_id()


def utcnow() -> datetime:
    return datetime.now(timezone.utc)


def isoformat(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).isoformat()


def parse_ts(value: str) -> datetime:
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


# --- payload schemas ----------------------------------------------------------

def _is_number(v: Any) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


# field name -> accepted type predicate, per sub-module. Schemas are closed:
# unknown top-level fields are rejected. The nested "metrics" map stays
# open-keyed (per-key units live in personal.METRIC_UNITS).
_COMMON_DIARY = {
    "occurred_at": str,
    "note": str,
    "metrics": dict,
}

PAYLOAD_SCHEMAS: dict[SubModule, dict[str, Any]] = {
    SubModule.ID: {
        "name": str, "address": str, "phone": str, "email": str,
        "login_id": str, "birthday": str, "picture": str,
    },
    SubModule.HB: {**_COMMON_DIARY, "meal": str, "slept_hours": _is_number},
    SubModule.EX: {**_COMMON_DIARY, "activity": str, "duration_min": _is_number},
    SubModule.SE: {**_COMMON_DIARY, "mood": int},
    SubModule.HP: {"goals": list, "note": str},
    SubModule.AC: {"line_items": list, "balance": _is_number},
    SubModule.CS: {"kind": str, "body": str, "parent": str, "group": str},
    SubModule.KM: {"kind": str, "body": str, "parent": str, "topic": str},
    SubModule.XM: {"note": str, "diagnosis_codes": list, "corrects": str},
    SubModule.EA: {"slot": str, "reason": str},
    SubModule.EP: {"drug": str, "dose": str, "refills_remaining": int,
                   "instructions": str},
    SubModule.TM: {"plan": str},
    SubModule.RS: {"specialty": str, "reason": str},
}


def validate_payload(submodule: SubModule, payload: Any) -> None:
    """Check a payload document against the sub-module's schema.

    Raises SchemaMismatch for non-dict payloads, unknown fields, and
    type mismatches.
    """
    schema = PAYLOAD_SCHEMAS[submodule]
    if not isinstance(payload, dict):
        raise SchemaMismatch(submodule.value, "payload must be a document")
    for key, value in payload.items():
        if key not in schema:
            raise SchemaMismatch(submodule.value, f"unknown field {key!r}")
        expected = schema[key]
        ok = expected(value) if callable(expected) and not isinstance(expected, type) \
            else isinstance(value, expected)
        if not ok:
            raise SchemaMismatch(submodule.value, f"bad type for field {key!r}")


# --- the envelope ------------------------------------------------------------------

@dataclass(frozen=True)
class HealthObject:
    id: str
    object_class: ObjectClass
    submodule: SubModule
    owner: str
    author: str
    payload: dict[str, Any]
    created_at: str  # ISO-8601 UTC
    updated_at: str
    version: int = 1

    def to_doc(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "object_class": self.object_class.value,
            "submodule": self.submodule.value,
            "owner": self.owner,
            "author": self.author,
            "payload": self.payload,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "version": self.version,
        }

    @staticmethod
    def from_doc(doc: dict[str, Any]) -> "HealthObject":
        return HealthObject(
            id=doc["id"],
            object_class=ObjectClass(doc["object_class"]),
            submodule=SubModule(doc["submodule"]),
            owner=doc["owner"],
            author=doc["author"],
            payload=doc["payload"],
            created_at=doc["created_at"],
            updated_at=doc["updated_at"],
            version=doc["version"],
        )


def wrap_eho(submodule: SubModule, owner: str, author: str,
             payload: dict[str, Any], now: datetime | None = None) -> HealthObject:
    """Wrap a validated payload into a version-1 health object.

    The object class is derived from the sub-module registry; ids are issued
    strictly greater than any id issued before.
    """
    validate_payload(submodule, payload)
    ts = isoformat(now or utcnow())
    return HealthObject(
        id=new_id(),
        object_class=submodule.object_class,
        submodule=submodule,
        owner=owner,
        author=author,
        payload=dict(payload),
        created_at=ts,
        updated_at=ts,
        version=1,
    )


def revise(obj: HealthObject, payload: dict[str, Any], author: str,
           now: datetime | None = None) -> HealthObject:
    """Produce the next revision: version + 1, new author recorded."""
    validate_payload(obj.submodule, payload)
    return replace(
        obj,
        payload=dict(payload),
        author=author,
        updated_at=isoformat(now or utcnow()),
        version=obj.version + 1,
    )


# --- audit trail --------------------------------------------------------------------------

@dataclass(frozen=True)
class AuditEvent:
    actor: str
    role: str
    action: str
    submodule: str
    target: str
    decision: str
    timestamp: str
    kind: str = "op"  # "op" for state-mutating operations, "auth" for logins

    def to_doc(self) -> dict[str, Any]:
        return {
            "actor": self.actor, "role": self.role, "action": self.action,
            "submodule": self.submodule, "target": self.target,
            "decision": self.decision, "timestamp": self.timestamp,
            "kind": self.kind,
        }


class AuditLog:
    """Append-only audit trail. One event per executed state-mutating call."""

    def __init__(self, sink=None):
        # sink: callable(dict) for durable persistence; events are always
        # kept in memory for invariant checks.
        self._events: list[AuditEvent] = []
        self._sink = sink
        self._lock = threading.Lock()

    def record(self, actor: str, role: str, action: str, submodule: str,
               target: str, decision: str, kind: str = "op",
               now: datetime | None = None) -> AuditEvent:
        event = AuditEvent(
            actor=actor, role=role, action=action, submodule=submodule,
            target=target, decision=decision,
            timestamp=isoformat(now or utcnow()), kind=kind,
        )
        with self._lock:
            self._events.append(event)
            if self._sink is not None:
                self._sink(event.to_doc())
        return event

    def events(self, kind: str | None = None) -> list[AuditEvent]:
        with self._lock:
            if kind is None:
                return list(self._events)
            return [e for e in self._events if e.kind == kind]

    def __len__(self) -> int:
        return len(self._events)
