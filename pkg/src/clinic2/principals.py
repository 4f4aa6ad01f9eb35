"""Principal directory: who exists, their role, and family-delegate links."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import UnknownRecord, ValidationError
from .policy import Role
from .store import DocumentStore

_COLLECTION = "principals"


@dataclass(frozen=True)
class Principal:
    id: str
    role: Role
    display_name: str
    delegate_of: str | None = None  # linked patient, FamilyDelegate only

    def to_doc(self) -> dict:
        return {"id": self.id, "role": self.role.value,
                "display_name": self.display_name,
                "delegate_of": self.delegate_of}

    @staticmethod
    def from_doc(doc: dict) -> "Principal":
        return Principal(id=doc["id"], role=Role(doc["role"]),
                         display_name=doc["display_name"],
                         delegate_of=doc.get("delegate_of"))


class Directory:
    def __init__(self, store: DocumentStore):
        self._store = store

    def register(self, principal_id: str, role: Role, display_name: str,
                 delegate_of: str | None = None) -> Principal:
        if delegate_of is not None and role is not Role.FAMILY_DELEGATE:
            raise ValidationError("only family delegates carry a patient link")
        if role is Role.FAMILY_DELEGATE:
            if delegate_of is None:
                raise ValidationError("a family delegate needs exactly one patient link")
            linked = self.get(delegate_of)
            if linked.role is not Role.PATIENT:
                raise ValidationError("delegate link must point at a patient")
        principal = Principal(principal_id, role, display_name, delegate_of)
        self._store.put(_COLLECTION, principal_id, principal.to_doc())
        return principal

    def get(self, principal_id: str) -> Principal:
        doc = self._store.get(_COLLECTION, principal_id)
        if doc is None:
            raise UnknownRecord(f"principal {principal_id}")
        return Principal.from_doc(doc)

    def exists(self, principal_id: str) -> bool:
        return self._store.get(_COLLECTION, principal_id) is not None

    def role_of(self, principal_id: str) -> Role:
        return self.get(principal_id).role

    def delegate_target(self, principal_id: str) -> str | None:
        return self.get(principal_id).delegate_of

    def is_owner_side(self, actor: str, owner: str) -> bool:
        """Owner, or the owner's linked family delegate."""
        if actor == owner:
            return True
        principal = self.get(actor)
        return (principal.role is Role.FAMILY_DELEGATE
                and principal.delegate_of == owner)

    def all(self) -> list[Principal]:
        return [Principal.from_doc(doc) for _, doc in self._store.scan(_COLLECTION)]
