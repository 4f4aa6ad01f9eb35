"""Embedded document store: append-only log, per-record optimistic versioning.

One JSON line per committed write; recovery replays the log and keeps the
highest version per record. A torn trailing line (crash mid-write) is
discarded on open. All mutations go through compare-and-set; concurrent
conflicting writers produce exactly one winner and one VersionConflict.
"""
from __future__ import annotations

import copy
import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

from .errors import UnknownRecord, VersionConflict


class DocumentStore:
    def __init__(self, path: str | os.PathLike | None = None, fsync: bool = True):
        self._path = Path(path) if path is not None else None
        self._fsync = fsync
        self._lock = threading.RLock()
        self._records: dict[tuple[str, str], tuple[int, dict[str, Any] | None]] = {}
        self._audit: list[dict[str, Any]] = []
        self._fh = None
        self._audit_fh = None
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._replay()
            self._fh = open(self._path, "ab")
            audit_path = self._audit_path()
            if audit_path.exists():
                with open(audit_path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        try:
                            self._audit.append(json.loads(line))
                        except json.JSONDecodeError:
                            break  # torn tail
            self._audit_fh = open(audit_path, "ab")

    def _audit_path(self) -> Path:
        assert self._path is not None
        return self._path.with_suffix(self._path.suffix + ".audit")

    def _replay(self) -> None:
        assert self._path is not None
        if not self._path.exists():
            return
        with open(self._path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    break  # torn tail from a crash: everything before it is committed
                key = (entry["c"], entry["id"])
                self._records[key] = (entry["v"], entry.get("d"))

    def _append(self, entry: dict[str, Any]) -> None:
        if self._fh is None:
            return
        data = (json.dumps(entry, separators=(",", ":"), sort_keys=True) + "\n").encode()
        self._fh.write(data)
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())

    # --- document API ---------------------------------------------------

    def put(self, collection: str, record_id: str, doc: dict[str, Any],
            expected_version: int = 0) -> int:
        """Compare-and-set write. ``expected_version=0`` inserts a new record;
        otherwise the stored version must match. Returns the new version."""
        with self._lock:
            current = self._records.get((collection, record_id))
            current_version = current[0] if current and current[1] is not None else 0
            if current_version != expected_version:
                raise VersionConflict(collection, record_id, expected_version)
            new_version = current_version + 1
            stored = copy.deepcopy(doc)
            self._records[(collection, record_id)] = (new_version, stored)
            self._append({"c": collection, "id": record_id, "v": new_version, "d": stored})
            return new_version

    def get(self, collection: str, record_id: str) -> dict[str, Any] | None:
        with self._lock:
            entry = self._records.get((collection, record_id))
            if entry is None or entry[1] is None:
                return None
            return copy.deepcopy(entry[1])

    def require(self, collection: str, record_id: str) -> dict[str, Any]:
        doc = self.get(collection, record_id)
        if doc is None:
            raise UnknownRecord(f"{collection}/{record_id}")
        return doc

    def version(self, collection: str, record_id: str) -> int:
        with self._lock:
            entry = self._records.get((collection, record_id))
            if entry is None or entry[1] is None:
                return 0
            return entry[0]

    def delete(self, collection: str, record_id: str, expected_version: int) -> None:
        with self._lock:
            current = self._records.get((collection, record_id))
            if current is None or current[1] is None or current[0] != expected_version:
                raise VersionConflict(collection, record_id, expected_version)
            new_version = current[0] + 1
            self._records[(collection, record_id)] = (new_version, None)
            self._append({"c": collection, "id": record_id, "v": new_version, "d": None})

    def scan(self, collection: str) -> Iterator[tuple[str, dict[str, Any]]]:
        """Snapshot iteration over live records of a collection, id order."""
        with self._lock:
            items = [
                (rid, copy.deepcopy(doc))
                for (coll, rid), (_v, doc) in self._records.items()
                if coll == collection and doc is not None
            ]
        return iter(sorted(items, key=lambda kv: kv[0]))

    # --- audit sink -------------------------------------------------------

    def append_audit(self, event_doc: dict[str, Any]) -> None:
        with self._lock:
            self._audit.append(copy.deepcopy(event_doc))
            if self._audit_fh is not None:
                data = (json.dumps(event_doc, separators=(",", ":"), sort_keys=True)
                        + "\n").encode()
                self._audit_fh.write(data)
                self._audit_fh.flush()
                if self._fsync:
                    os.fsync(self._audit_fh.fileno())

    def audit_entries(self) -> list[dict[str, Any]]:
        with self._lock:
            return copy.deepcopy(self._audit)

    # --- lifecycle -----------------------------------------------------------

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
            if self._audit_fh is not None:
                self._audit_fh.close()
                self._audit_fh = None
