"""Medical care: staff-authored EMR entries readable by their owning
patients, consent-based sharing grants, and the request/approve workflows
for appointments, prescription refills, and referrals.

EMR entries are never deleted or edited in place; corrections are new
entries referencing the corrected id. The single mutable field is a
prescription's remaining refill count, which only ever decreases.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Callable

from . import eho
from .eho import AuditLog, HealthObject, wrap_eho
from .errors import (
    AlreadyRevoked,
    IllegalTransition,
    ImmutableEntry,
    NoRefillsRemaining,
    PermissionDenied,
    UnknownGrant,
    UnknownPatient,
    UnknownRecord,
    ValidationError,
    VersionConflict,
)
from .policy import Action, Outcome, PolicyHandle, Relation, Role, SubModule, resolve
from .principals import Directory
from .store import DocumentStore

EHOS = "ehos"
GRANTS = "grants"
REQUESTS = "requests"
APPOINTMENTS = "appointments"

EMR_SUBMODULES = (SubModule.XM, SubModule.EP, SubModule.TM, SubModule.RS)


class RequestKind(str, Enum):
    APPOINTMENT = "Appointment"
    REFILL = "Refill"
    REFERRAL = "Referral"


class RequestState(str, Enum):
    PENDING = "Pending"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    RESCHEDULED = "Rescheduled"


_REQUEST_SUBMODULE = {
    RequestKind.APPOINTMENT: SubModule.EA,
    RequestKind.REFILL: SubModule.EP,
    RequestKind.REFERRAL: SubModule.RS,
}


@dataclass(frozen=True)
class AccessGrant:
    id: str
    patient: str
    grantee: str
    scope: frozenset[SubModule]
    granted_at: str
    revoked_at: str | None = None

    @property
    def active(self) -> bool:
        return self.revoked_at is None

    def to_doc(self) -> dict:
        return {"id": self.id, "patient": self.patient, "grantee": self.grantee,
                "scope": sorted(s.value for s in self.scope),
                "granted_at": self.granted_at, "revoked_at": self.revoked_at}

    @staticmethod
    def from_doc(doc: dict) -> "AccessGrant":
        return AccessGrant(id=doc["id"], patient=doc["patient"],
                           grantee=doc["grantee"],
                           scope=frozenset(SubModule(s) for s in doc["scope"]),
                           granted_at=doc["granted_at"],
                           revoked_at=doc.get("revoked_at"))


@dataclass(frozen=True)
class CareRequest:
    id: str
    patient: str
    kind: RequestKind
    detail: dict
    state: RequestState
    decided_by: str | None
    counter_offer: str | None
    created_at: str

    @staticmethod
    def from_doc(doc: dict) -> "CareRequest":
        return CareRequest(id=doc["id"], patient=doc["patient"],
                           kind=RequestKind(doc["kind"]), detail=doc["detail"],
                           state=RequestState(doc["state"]),
                           decided_by=doc.get("decided_by"),
                           counter_offer=doc.get("counter_offer"),
                           created_at=doc["created_at"])


def _validate_slot(slot: str) -> None:
    """Appointment slots are opaque ISO-8601 intervals: '<start>/<end>'."""
    parts = slot.split("/")
    if len(parts) != 2:
        raise ValidationError(f"slot {slot!r} is not an ISO-8601 interval")
    try:
        start, end = (eho.parse_ts(p) for p in parts)
    except ValueError:
        raise ValidationError(f"slot {slot!r} is not an ISO-8601 interval") from None
    if end <= start:
        raise ValidationError("slot must end after it starts")


class MedicalService:
    def __init__(self, store: DocumentStore, policy: PolicyHandle,
                 directory: Directory, audit: AuditLog,
                 notify: Callable[[str, str, str], None] | None = None,
                 clock: Callable[[], datetime] = eho.utcnow):
        self._store = store
        self._policy = policy
        self._directory = directory
        self._audit = audit
        self._notify = notify or (lambda recipient, kind, ref: None)
        self._clock = clock
        # Serializes decision + refill decrement so the two writes commit
        # together; the underlying CAS still decides cross-process races.
        self._decide_lock = threading.Lock()

    def _audit_op(self, actor: str, action: Action, submodule: SubModule,
                  target: str, decision: str) -> None:
        self._audit.record(actor, self._directory.role_of(actor).value,
                           action.value, submodule.value, target, decision,
                           now=self._clock())

    # --- authoring ---------------------------------------------------------

    def _record(self, clinician: str, patient: str, submodule: SubModule,
                payload: dict) -> HealthObject:
        role = self._directory.role_of(clinician)
        if role is not Role.CLINICIAN:
            raise PermissionDenied("medical entries are clinician-authored")
        if not self._directory.exists(patient) or \
                self._directory.role_of(patient) is not Role.PATIENT:
            raise UnknownPatient(patient)
        relation = (Relation.GRANTED_CLINICIAN
                    if self._covered_kinds(clinician, patient) else Relation.UNRELATED)
        decision = resolve(self._policy.current, role, relation, submodule,
                           Action.CREATE)
        if decision.outcome is not Outcome.ALLOW:
            raise PermissionDenied(decision.reason)
        obj = wrap_eho(submodule, patient, clinician, payload, now=self._clock())
        self._store.put(EHOS, obj.id, obj.to_doc())
        self._notify(patient, "EmrAdded", obj.id)
        self._audit_op(clinician, Action.CREATE, submodule, obj.id,
                       decision.reason)
        return obj

    def record_consultation(self, clinician: str, patient: str, note: str,
                            diagnosis_codes: list[str] | None = None,
                            corrects: str | None = None) -> HealthObject:
        payload = {"note": note, "diagnosis_codes": diagnosis_codes or []}
        if corrects is not None:
            if self._store.get(EHOS, corrects) is None:
                raise UnknownRecord(f"corrected entry {corrects}")
            payload["corrects"] = corrects
        return self._record(clinician, patient, SubModule.XM, payload)

    def record_prescription(self, clinician: str, patient: str, drug: str,
                            dose: str, refills: int,
                            instructions: str = "") -> HealthObject:
        if refills < 0:
            raise ValidationError("refills must be >= 0")
        return self._record(clinician, patient, SubModule.EP, {
            "drug": drug, "dose": dose, "refills_remaining": refills,
            "instructions": instructions})

    def record_treatment(self, clinician: str, patient: str,
                         plan: str) -> HealthObject:
        return self._record(clinician, patient, SubModule.TM, {"plan": plan})

    def record_referral(self, clinician: str, patient: str, specialty: str,
                        reason: str = "") -> HealthObject:
        return self._record(clinician, patient, SubModule.RS, {
            "specialty": specialty, "reason": reason})

    def update_entry(self, actor: str, entry_id: str, payload: dict) -> None:
        """Medical entries are immutable; this always refuses."""
        doc = self._store.get(EHOS, entry_id)
        if doc is None:
            raise UnknownRecord(f"entry {entry_id}")
        if SubModule(doc["submodule"]) in EMR_SUBMODULES:
            raise ImmutableEntry(
                "corrections are new entries referencing the corrected id")
        raise ImmutableEntry("not a medical entry")

    # --- reading ------------------------------------------------------------------

    def _covered_kinds(self, actor: str, patient: str) -> set[SubModule]:
        covered: set[SubModule] = set()
        for _id, doc in self._store.scan(GRANTS):
            if doc["patient"] == patient and doc["grantee"] == actor \
                    and doc.get("revoked_at") is None:
                covered |= {SubModule(s) for s in doc["scope"]}
        return covered

    def read_emr(self, actor: str, patient: str,
                 kinds: list[SubModule] | None = None) -> list[HealthObject]:
        requested = list(kinds) if kinds else list(EMR_SUBMODULES)
        for kind in requested:
            if kind not in EMR_SUBMODULES:
                raise ValidationError(f"{kind.value} is not a medical record kind")
        if self._directory.is_owner_side(actor, patient):
            relation = Relation.OWNER
        elif self._covered_kinds(actor, patient) >= set(requested):
            relation = Relation.GRANTED_CLINICIAN
        else:
            relation = Relation.UNRELATED
        role = self._directory.role_of(actor)
        for kind in requested:
            decision = resolve(self._policy.current, role, relation, kind,
                               Action.READ)
            if decision.outcome is not Outcome.ALLOW:
                raise PermissionDenied(decision.reason)
        wanted = {k.value for k in requested}
        docs = [doc for _id, doc in self._store.scan(EHOS)
                if doc["owner"] == patient and doc["submodule"] in wanted]
        docs.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [HealthObject.from_doc(d) for d in docs]

    # --- grants ------------------------------------------------------------------------

    def grant_access(self, actor: str, clinician: str,
                     scope: list[SubModule]) -> AccessGrant:
        if self._directory.role_of(actor) is not Role.PATIENT:
            raise PermissionDenied("only the patient grants access")
        if not scope:
            raise ValidationError("grant scope must be non-empty")
        if any(kind not in EMR_SUBMODULES for kind in scope):
            raise ValidationError("grant scope is limited to medical kinds")
        if not self._directory.exists(clinician) or \
                self._directory.role_of(clinician) is not Role.CLINICIAN:
            raise ValidationError("grantee must be a clinician")
        grant = AccessGrant(id=eho.new_id(), patient=actor, grantee=clinician,
                            scope=frozenset(scope),
                            granted_at=eho.isoformat(self._clock()))
        self._store.put(GRANTS, grant.id, grant.to_doc())
        self._audit_op(actor, Action.UPDATE, SubModule.XM, grant.id,
                       "grant-access")
        return grant

    def revoke_access(self, actor: str, grant_id: str) -> AccessGrant:
        doc = self._store.get(GRANTS, grant_id)
        if doc is None:
            raise UnknownGrant(grant_id)
        if doc["patient"] != actor:
            raise PermissionDenied("only the granting patient revokes")
        if doc.get("revoked_at") is not None:
            raise AlreadyRevoked(grant_id)
        doc["revoked_at"] = eho.isoformat(self._clock())
        self._store.put(GRANTS, grant_id, doc,
                        expected_version=self._store.version(GRANTS, grant_id))
        self._audit_op(actor, Action.UPDATE, SubModule.XM, grant_id,
                       "revoke-access")
        return AccessGrant.from_doc(doc)

    def grants_of(self, patient: str) -> list[AccessGrant]:
        return [AccessGrant.from_doc(doc) for _id, doc in self._store.scan(GRANTS)
                if doc["patient"] == patient]

    # --- requests ------------------------------------------------------------------------

    def submit_request(self, actor: str, kind: RequestKind,
                       detail: dict) -> CareRequest:
        patient = actor
        role = self._directory.role_of(actor)
        submodule = _REQUEST_SUBMODULE[kind]
        decision = resolve(self._policy.current, role, Relation.OWNER,
                           submodule, Action.REQUEST)
        if decision.outcome not in (Outcome.ALLOW, Outcome.ALLOW_AS_REQUEST):
            raise PermissionDenied(decision.reason)

        if kind is RequestKind.APPOINTMENT:
            slot = detail.get("slot")
            if not slot:
                raise ValidationError("appointment requests carry a slot preference")
            _validate_slot(slot)
        elif kind is RequestKind.REFILL:
            ep_id = detail.get("prescription")
            if not ep_id:
                raise ValidationError("refill requests reference a prescription")
            ep = self._store.get(EHOS, ep_id)
            if ep is None or ep["submodule"] != SubModule.EP.value \
                    or ep["owner"] != patient:
                raise UnknownRecord(f"prescription {ep_id}")
            if ep["payload"]["refills_remaining"] <= 0:
                raise NoRefillsRemaining(ep_id)
        elif kind is RequestKind.REFERRAL:
            if not detail.get("specialty", "").strip():
                raise ValidationError("referral requests name a specialty")

        doc = {"id": eho.new_id(), "patient": patient, "kind": kind.value,
               "detail": dict(detail), "state": RequestState.PENDING.value,
               "decided_by": None, "counter_offer": None,
               "created_at": eho.isoformat(self._clock())}
        self._store.put(REQUESTS, doc["id"], doc)
        self._audit_op(actor, Action.REQUEST, submodule, doc["id"],
                       decision.reason)
        return CareRequest.from_doc(doc)

    def decide_request(self, actor: str, request_id: str, outcome: RequestState,
                       counter_offer: str | None = None) -> CareRequest:
        role = self._directory.role_of(actor)
        if role not in (Role.CLINICIAN, Role.ADMIN):
            raise PermissionDenied("request decisions are staff-side")
        if outcome not in (RequestState.APPROVED, RequestState.REJECTED,
                           RequestState.RESCHEDULED):
            raise IllegalTransition(f"{outcome.value} is not a decision")
        with self._decide_lock:
            doc = self._store.get(REQUESTS, request_id)
            if doc is None:
                raise UnknownRecord(f"request {request_id}")
            version = self._store.version(REQUESTS, request_id)
            if doc["state"] != RequestState.PENDING.value:
                raise IllegalTransition(f"request already {doc['state']}")
            kind = RequestKind(doc["kind"])
            submodule = _REQUEST_SUBMODULE[kind]
            decision = resolve(self._policy.current, role, Relation.UNRELATED,
                               submodule, Action.APPROVE)
            if decision.outcome is not Outcome.ALLOW:
                raise PermissionDenied(decision.reason)
            if outcome is RequestState.RESCHEDULED:
                if not counter_offer:
                    raise ValidationError("a reschedule carries a counter-offer slot")
                _validate_slot(counter_offer)

            if outcome is RequestState.APPROVED and kind is RequestKind.REFILL:
                self._check_refillable(doc["detail"]["prescription"])
            doc["state"] = outcome.value
            doc["decided_by"] = actor
            doc["counter_offer"] = counter_offer
            try:
                self._store.put(REQUESTS, request_id, doc,
                                expected_version=version)
            except VersionConflict:
                raise IllegalTransition("lost the decision race") from None
            if outcome is RequestState.APPROVED and kind is RequestKind.REFILL:
                self._consume_refill(doc["detail"]["prescription"])

            if outcome is RequestState.APPROVED and kind is RequestKind.APPOINTMENT:
                appt = {"id": eho.new_id(), "patient": doc["patient"],
                        "slot": doc["detail"]["slot"], "request": request_id,
                        "confirmed_by": actor,
                        "created_at": eho.isoformat(self._clock())}
                self._store.put(APPOINTMENTS, appt["id"], appt)

        self._notify(doc["patient"], "RequestDecided", request_id)
        self._audit_op(actor, Action.APPROVE, submodule, request_id,
                       outcome.value)
        return CareRequest.from_doc(doc)

    def _check_refillable(self, ep_id: str) -> None:
        ep = self._store.get(EHOS, ep_id)
        if ep is None:
            raise UnknownRecord(f"prescription {ep_id}")
        if ep["payload"]["refills_remaining"] <= 0:
            raise NoRefillsRemaining(ep_id)

    def _consume_refill(self, ep_id: str) -> None:
        ep = self._store.get(EHOS, ep_id)
        if ep is None:
            raise UnknownRecord(f"prescription {ep_id}")
        remaining = ep["payload"]["refills_remaining"]
        if remaining <= 0:
            raise NoRefillsRemaining(ep_id)
        version = self._store.version(EHOS, ep_id)
        ep["payload"]["refills_remaining"] = remaining - 1
        ep["version"] += 1
        ep["updated_at"] = eho.isoformat(self._clock())
        self._store.put(EHOS, ep_id, ep, expected_version=version)

    def get_request(self, actor: str, request_id: str) -> CareRequest:
        doc = self._store.get(REQUESTS, request_id)
        if doc is None:
            raise UnknownRecord(f"request {request_id}")
        role = self._directory.role_of(actor)
        if not (self._directory.is_owner_side(actor, doc["patient"])
                or role in (Role.CLINICIAN, Role.ADMIN)):
            raise PermissionDenied("not your request")
        return CareRequest.from_doc(doc)

    def list_requests(self, actor: str, patient: str | None = None,
                      state: RequestState | None = None) -> list[CareRequest]:
        role = self._directory.role_of(actor)
        if patient is not None:
            if not (self._directory.is_owner_side(actor, patient)
                    or role in (Role.CLINICIAN, Role.ADMIN)):
                raise PermissionDenied("not your queue")
        elif role not in (Role.CLINICIAN, Role.ADMIN):
            patient = actor
        docs = [doc for _id, doc in self._store.scan(REQUESTS)
                if (patient is None or doc["patient"] == patient)
                and (state is None or doc["state"] == state.value)]
        docs.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [CareRequest.from_doc(d) for d in docs]

    def appointments_of(self, patient: str) -> list[dict]:
        docs = [doc for _id, doc in self._store.scan(APPOINTMENTS)
                if doc["patient"] == patient]
        docs.sort(key=lambda d: (d["created_at"], d["id"]))
        return docs

    def upcoming_appointments(self, viewer: str,
                              now: datetime) -> list[tuple[str, str]]:
        """Feed hook: (ref, created_at) for confirmed slots within 7 days."""
        out = []
        for doc in self.appointments_of(viewer):
            start = eho.parse_ts(doc["slot"].split("/")[0])
            lead = (start - now).total_seconds()
            if 0 <= lead <= 7 * 86400:
                out.append((f"appointment:{doc['id']}", doc["created_at"]))
        return out
