"""Per-user notifications fed by cross-module events.

Each triggering event emits exactly one notification: a friend request, an
accepted request (highlighted to the requester), a new message, a MOTD
update, a new medical record, and a decided care request.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Callable

from .. import eho
from ..errors import NotOwner
from ..store import DocumentStore

NOTIFICATIONS = "notifications"


class NotificationKind(str, Enum):
    FRIEND_REQUEST = "FriendRequest"
    NEW_MESSAGE = "NewMessage"
    MOTD_UPDATED = "MotdUpdated"
    EMR_ADDED = "EmrAdded"
    REQUEST_DECIDED = "RequestDecided"
    FEED_HIGHLIGHT = "FeedHighlight"


@dataclass(frozen=True)
class Notification:
    id: str
    recipient: str
    kind: NotificationKind
    ref: str
    read: bool
    created_at: str


class NotificationService:
    def __init__(self, store: DocumentStore,
                 clock: Callable[[], datetime] = eho.utcnow):
        self._store = store
        self._clock = clock

    def emit(self, recipient: str, kind: str, ref: str) -> Notification:
        doc = {
            "id": eho.new_id(),
            "recipient": recipient,
            "kind": NotificationKind(kind).value,
            "ref": ref,
            "read": False,
            "created_at": eho.isoformat(self._clock()),
        }
        self._store.put(NOTIFICATIONS, doc["id"], doc)
        return self._to_obj(doc)

    @staticmethod
    def _to_obj(doc: dict) -> Notification:
        return Notification(id=doc["id"], recipient=doc["recipient"],
                            kind=NotificationKind(doc["kind"]), ref=doc["ref"],
                            read=doc["read"], created_at=doc["created_at"])

    def list(self, user: str, unread_only: bool = False) -> list[Notification]:
        docs = [doc for _id, doc in self._store.scan(NOTIFICATIONS)
                if doc["recipient"] == user
                and (not unread_only or not doc["read"])]
        docs.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [self._to_obj(d) for d in docs]

    def unread_count(self, user: str) -> int:
        return len(self.list(user, unread_only=True))

    def mark_read(self, user: str, ids: list[str]) -> int:
        """Idempotent: read flags only ever flip false -> true."""
        changed = 0
        for nid in ids:
            doc = self._store.get(NOTIFICATIONS, nid)
            if doc is None:
                continue
            if doc["recipient"] != user:
                raise NotOwner(f"notification {nid}")
            if not doc["read"]:
                doc["read"] = True
                self._store.put(
                    NOTIFICATIONS, nid, doc,
                    expected_version=self._store.version(NOTIFICATIONS, nid))
                changed += 1
        return changed
