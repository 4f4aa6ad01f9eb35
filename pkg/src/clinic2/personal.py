"""Patient-authored personal records: diary entries (habits, exercise,
spiritual/emotional), the health plan, and account-statement viewing."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any, Callable

from . import eho
from .eho import AuditLog, HealthObject, revise, wrap_eho
from .errors import (
    FutureTimestamp,
    NotSupported,
    PermissionDenied,
    SchemaMismatch,
    TwoActivePlans,
    UnknownRecord,
    ValidationError,
)
from .policy import Action, Outcome, PolicyHandle, Relation, Role, SubModule, resolve
from .principals import Directory
from .store import DocumentStore

DIARY_SUBMODULES = (SubModule.HB, SubModule.EX, SubModule.SE)

# Units for the well-known metric keys; the map itself stays open-keyed.
METRIC_UNITS: dict[str, str] = {
    "slept_hours": "hours",
    "duration_min": "minutes",
    "mood": "scale-1-5",
    "weight_kg": "kilograms",
    "steps": "count",
    "water_l": "litres",
}

EHOS = "ehos"
EHO_HISTORY = "eho_history"
PLAN_REVISIONS = "plan_revisions"


@dataclass(frozen=True)
class DiaryEntry:
    submodule: SubModule
    occurred_at: datetime
    metrics: dict[str, float] = field(default_factory=dict)
    note: str = ""
    details: dict[str, str] = field(default_factory=dict)  # e.g. meal, activity

    def payload(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "occurred_at": eho.isoformat(self.occurred_at),
            "note": self.note,
            "metrics": dict(self.metrics),
        }
        doc.update(self.details)
        return doc


@dataclass(frozen=True)
class PlanGoal:
    title: str
    target_metric: str
    due_date: str  # ISO date
    status: str = "Active"  # Active | Met | Abandoned


@dataclass(frozen=True)
class HealthPlan:
    goals: tuple[PlanGoal, ...]
    note: str = ""

    def payload(self) -> dict[str, Any]:
        return {
            "goals": [
                {"title": g.title, "target_metric": g.target_metric,
                 "due_date": g.due_date, "status": g.status}
                for g in self.goals
            ],
            "note": self.note,
        }


GOAL_STATUSES = {"Active", "Met", "Abandoned"}


class PersonalHealthService:
    def __init__(self, store: DocumentStore, policy: PolicyHandle,
                 directory: Directory, audit: AuditLog,
                 clock: Callable[[], datetime] = eho.utcnow):
        self._store = store
        self._policy = policy
        self._directory = directory
        self._audit = audit
        self._clock = clock

    # --- helpers -----------------------------------------------------------

    def _relation(self, actor: str, owner: str) -> Relation:
        if self._directory.is_owner_side(actor, owner):
            return Relation.OWNER
        return Relation.UNRELATED

    def _resolve(self, actor: str, owner: str, submodule: SubModule,
                 action: Action):
        role = self._directory.role_of(actor)
        relation = self._relation(actor, owner)
        return role, relation, resolve(self._policy.current, role, relation,
                                       submodule, action)

    def _audit_op(self, actor: str, role: Role, action: Action,
                  submodule: SubModule, target: str, decision: str) -> None:
        self._audit.record(actor, role.value, action.value, submodule.value,
                           target, decision, now=self._clock())

    def _store_eho(self, obj: HealthObject) -> None:
        self._store.put(EHOS, obj.id, obj.to_doc())

    # --- diary ---------------------------------------------------------------

    def record_entry(self, actor: str, owner: str, entry: DiaryEntry) -> HealthObject:
        if entry.submodule not in DIARY_SUBMODULES:
            raise SchemaMismatch(entry.submodule.value, "not a diary sub-module")
        role, _relation, decision = self._resolve(actor, owner, entry.submodule,
                                                  Action.CREATE)
        if decision.outcome is not Outcome.ALLOW:
            raise PermissionDenied(decision.reason)
        now = self._clock()
        if entry.occurred_at > now + timedelta(hours=24):
            raise FutureTimestamp(f"occurred_at {entry.occurred_at.isoformat()}")
        for key, value in entry.metrics.items():
            if not isinstance(value, (int, float)) or isinstance(value, bool) \
                    or not math.isfinite(value) or value < 0:
                raise SchemaMismatch(entry.submodule.value,
                                     f"metric {key!r} must be finite and >= 0")
        if entry.submodule is SubModule.SE and "mood" in entry.metrics:
            if not 1 <= entry.metrics["mood"] <= 5:
                raise SchemaMismatch("SE", "mood is a 1-5 scale")
        obj = wrap_eho(entry.submodule, owner, actor, entry.payload(), now=now)
        self._store_eho(obj)
        self._audit_op(actor, role, Action.CREATE, entry.submodule, obj.id,
                       decision.reason)
        return obj

    def view_timeline(self, actor: str, owner: str,
                      start: datetime | None = None,
                      end: datetime | None = None) -> list[HealthObject]:
        if not self._directory.is_owner_side(actor, owner):
            raise PermissionDenied("timeline is owner-side only")
        entries = []
        for _id, doc in self._store.scan(EHOS):
            if doc["owner"] != owner or doc["submodule"] not in \
                    {s.value for s in DIARY_SUBMODULES}:
                continue
            occurred = eho.parse_ts(doc["payload"]["occurred_at"])
            if start is not None and occurred < start:
                continue
            if end is not None and occurred > end:
                continue
            entries.append((occurred, doc["id"], HealthObject.from_doc(doc)))
        entries.sort(key=lambda t: (t[0], t[1]), reverse=True)
        return [obj for _, _, obj in entries]

    # --- health plan ------------------------------------------------------------

    def _find_docs(self, owner: str, submodule: SubModule) -> list[dict]:
        return [doc for _id, doc in self._store.scan(EHOS)
                if doc["submodule"] == submodule.value and doc["owner"] == owner]

    @staticmethod
    def _validate_plan(plan: HealthPlan) -> None:
        for goal in plan.goals:
            if not goal.title.strip():
                raise ValidationError("goal title must be non-empty")
            if goal.status not in GOAL_STATUSES:
                raise ValidationError(f"unknown goal status {goal.status!r}")
            try:
                datetime.strptime(goal.due_date, "%Y-%m-%d")
            except ValueError:
                raise ValidationError(
                    f"bad due date {goal.due_date!r}") from None

    def upsert_health_plan(self, actor: str, owner: str,
                           plan: HealthPlan) -> HealthObject | dict:
        """Replace the owner's plan. Under partial empowerment an owner-side
        upsert lands as a pending revision awaiting staff approval; the
        return value is the pending-revision document in that case."""
        self._validate_plan(plan)
        role, _relation, decision = self._resolve(actor, owner, SubModule.HP,
                                                  Action.UPDATE)
        create_decision = None
        if decision.outcome is not Outcome.ALLOW:
            _, _, create_decision = self._resolve(actor, owner, SubModule.HP,
                                                  Action.CREATE)
        effective = decision if decision.outcome is Outcome.ALLOW else create_decision
        if effective.outcome is Outcome.ALLOW_AS_REQUEST:
            revision = {
                "id": eho.new_id(),
                "owner": owner,
                "proposed_by": actor,
                "payload": plan.payload(),
                "state": "Pending",
                "created_at": eho.isoformat(self._clock()),
            }
            self._store.put(PLAN_REVISIONS, revision["id"], revision)
            self._audit_op(actor, role, Action.REQUEST, SubModule.HP,
                           revision["id"], effective.reason)
            return revision
        if effective.outcome is not Outcome.ALLOW:
            raise PermissionDenied(effective.reason)
        return self._apply_plan(actor, role, owner, plan.payload(),
                                effective.reason)

    def _apply_plan(self, actor: str, role: Role, owner: str,
                    payload: dict, reason: str) -> HealthObject:
        stored = self._find_docs(owner, SubModule.HP)
        if len(stored) > 1:
            raise TwoActivePlans(f"{len(stored)} active plans for {owner}")
        now = self._clock()
        if not stored:
            obj = wrap_eho(SubModule.HP, owner, actor, payload, now=now)
            self._store.put(EHOS, obj.id, obj.to_doc())
        else:
            current = HealthObject.from_doc(stored[0])
            self._store.put(EHO_HISTORY, f"{current.id}:v{current.version}",
                            current.to_doc())
            obj = revise(current, payload, actor, now=now)
            self._store.put(EHOS, obj.id, obj.to_doc(),
                            expected_version=self._store.version(EHOS, obj.id))
        self._audit_op(actor, role, Action.UPDATE, SubModule.HP, obj.id, reason)
        return obj

    def approve_plan_revision(self, actor: str, revision_id: str) -> HealthObject:
        doc = self._store.get(PLAN_REVISIONS, revision_id)
        if doc is None:
            raise UnknownRecord(f"plan revision {revision_id}")
        role, _relation, decision = self._resolve(actor, doc["owner"],
                                                  SubModule.HP, Action.APPROVE)
        if decision.outcome is not Outcome.ALLOW:
            raise PermissionDenied(decision.reason)
        if doc["state"] != "Pending":
            raise ValidationError("revision already settled")
        applied = self._apply_plan(doc["proposed_by"],
                                   self._directory.role_of(doc["proposed_by"]),
                                   doc["owner"], doc["payload"],
                                   "approved-revision")
        doc["state"] = "Applied"
        self._store.put(PLAN_REVISIONS, revision_id, doc,
                        expected_version=self._store.version(PLAN_REVISIONS,
                                                             revision_id))
        self._audit_op(actor, role, Action.APPROVE, SubModule.HP, revision_id,
                       decision.reason)
        return applied

    def get_plan(self, actor: str, owner: str) -> HealthObject | None:
        _role, _relation, decision = self._resolve(actor, owner, SubModule.HP,
                                                   Action.READ)
        if decision.outcome is not Outcome.ALLOW:
            raise PermissionDenied(decision.reason)
        stored = self._find_docs(owner, SubModule.HP)
        if len(stored) > 1:
            raise TwoActivePlans(f"{len(stored)} active plans for {owner}")
        return HealthObject.from_doc(stored[0]) if stored else None

    def plan_history(self, actor: str, owner: str) -> list[HealthObject]:
        current = self.get_plan(actor, owner)
        if current is None:
            return []
        prefix = f"{current.id}:v"
        prior = [HealthObject.from_doc(doc)
                 for rid, doc in self._store.scan(EHO_HISTORY)
                 if rid.startswith(prefix)]
        return sorted(prior, key=lambda o: o.version)

    # --- account statement -------------------------------------------------------

    def post_statement_line(self, actor: str, owner: str, service: str,
                            date: str, amount: float, covered: bool) -> HealthObject:
        role = self._directory.role_of(actor)
        if role not in (Role.ADMIN, Role.CLINICIAN):
            raise PermissionDenied("statement lines are billing-side records")
        if amount < 0 or not math.isfinite(amount):
            raise ValidationError("amount must be finite and >= 0")
        stored = self._find_docs(owner, SubModule.AC)
        line = {"service": service, "date": date, "amount": amount,
                "covered": covered}
        now = self._clock()
        if not stored:
            payload = {"line_items": [line],
                       "balance": 0.0 if covered else float(amount)}
            obj = wrap_eho(SubModule.AC, owner, actor, payload, now=now)
            self._store.put(EHOS, obj.id, obj.to_doc())
        else:
            current = HealthObject.from_doc(stored[0])
            items = current.payload["line_items"] + [line]
            balance = float(sum(i["amount"] for i in items if not i["covered"]))
            obj = revise(current, {"line_items": items, "balance": balance},
                         actor, now=now)
            self._store.put(EHOS, obj.id, obj.to_doc(),
                            expected_version=self._store.version(EHOS, obj.id))
        self._audit_op(actor, role, Action.UPDATE, SubModule.AC, obj.id,
                       "billing-write")
        return obj

    def get_statement(self, actor: str, owner: str) -> HealthObject | None:
        _role, _relation, decision = self._resolve(actor, owner, SubModule.AC,
                                                   Action.READ)
        if decision.outcome is not Outcome.ALLOW:
            raise PermissionDenied(decision.reason)
        stored = self._find_docs(owner, SubModule.AC)
        return HealthObject.from_doc(stored[0]) if stored else None

    def pay(self, actor: str, owner: str, amount: float):
        raise NotSupported("online payment is view-only in this deployment")
