"""Composition root: wires the store, policy, directory, audit trail, and
every domain service into one platform object used by the HTTP app, the
CLI, and the tests."""
from __future__ import annotations

import os
from datetime import datetime
from pathlib import Path
from typing import Callable

from .. import eho
from ..care import CareCycleService
from ..eho import AuditLog
from ..errors import ValidationError
from ..medical import MedicalService
from ..personal import PersonalHealthService
from ..policy import (
    DEFAULT_POLICY_TEXT,
    EmpowermentPolicy,
    PolicyHandle,
    dump_policy,
    load_policy,
)
from ..principals import Directory
from ..social import SocialService
from ..store import DocumentStore
from .accounts import AccountService
from .notifications import NotificationService

CONFIG = "config"
POLICY_DOC = "policy"

ENV_BIND = "CLINIC2_BIND"
ENV_DATA_DIR = "CLINIC2_DATA_DIR"
ENV_PRESENCE_WINDOW = "CLINIC2_PRESENCE_WINDOW"


class Clinic:
    """One live platform instance over a data directory (or memory-only)."""

    def __init__(self, data_dir: str | os.PathLike | None = None,
                 presence_window_s: int | None = None,
                 policy_text: str | None = None,
                 clock: Callable[[], datetime] = eho.utcnow,
                 fsync: bool = True):
        if presence_window_s is None:
            presence_window_s = int(os.environ.get(ENV_PRESENCE_WINDOW, "90"))
        store_path = Path(data_dir) / "store.jsonl" if data_dir else None
        self.store = DocumentStore(store_path, fsync=fsync)
        self.audit = AuditLog(sink=self.store.append_audit)
        self.clock = clock

        stored = self.store.get(CONFIG, POLICY_DOC)
        if policy_text is not None:
            text = policy_text
        elif stored is not None:
            text = stored["text"]
        else:
            text = DEFAULT_POLICY_TEXT
        policy = load_policy(text)
        if stored is None or stored["text"] != text:
            self.store.put(CONFIG, POLICY_DOC, {"text": text},
                           expected_version=self.store.version(CONFIG, POLICY_DOC))
        self.policy = PolicyHandle(policy)

        self.directory = Directory(self.store)
        self.notifications = NotificationService(self.store, clock)
        notify = self.notifications.emit
        self.accounts = AccountService(self.store, self.directory, self.audit,
                                       presence_window_s, clock)
        self.personal = PersonalHealthService(self.store, self.policy,
                                              self.directory, self.audit, clock)
        self.medical = MedicalService(self.store, self.policy, self.directory,
                                      self.audit, notify, clock)
        self.social = SocialService(
            self.store, self.policy, self.directory, self.audit, notify,
            upcoming_provider=self.medical.upcoming_appointments, clock=clock)
        self.care = CareCycleService(self.store, self.directory, self.audit,
                                     clock)

    def replace_policy(self, text: str) -> EmpowermentPolicy:
        """Validate, persist, and atomically swap in a new policy."""
        replacement = load_policy(text)
        if replacement.version <= self.policy.current.version:
            raise ValidationError(
                f"policy version must exceed {self.policy.current.version}")
        self.store.put(CONFIG, POLICY_DOC, {"text": dump_policy(replacement)},
                       expected_version=self.store.version(CONFIG, POLICY_DOC))
        return self.policy.swap(replacement)

    def close(self) -> None:
        self.store.close()

    # --- search ------------------------------------------------------------

    def search(self, viewer: str, query: str) -> dict:
        """Case-insensitive substring search over user names, posts, and
        knowledge items. Post hits respect the viewer's visibility."""
        needle = query.lower()
        users = [
            {"id": p.id, "display_name": p.display_name, "role": p.role.value}
            for p in self.directory.all()
            if needle in p.display_name.lower()
            or needle in (self.accounts.login_of(p.id) or "").lower()
        ]
        posts = []
        from ..social import POSTS  # avoid module-level cycle
        for _id, doc in self.store.scan(POSTS):
            if needle not in doc["body"].lower():
                continue
            if not self.social.can_view(viewer, doc):
                continue
            posts.append({"id": doc["id"], "kind": doc["kind"],
                          "author": doc["author"], "body": doc["body"],
                          "verified": doc["verified"]})
        users.sort(key=lambda u: u["id"])
        posts.sort(key=lambda p: p["id"])
        return {"users": users, "posts": posts}
