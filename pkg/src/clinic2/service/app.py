"""HTTP API over the platform. Field names are stable and documented in
docs/api.md; every endpoint except login and health requires a bearer token.
"""
from __future__ import annotations

import json
from typing import Any

from fastapi import Depends, FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .. import eho
from ..care import Stage
from ..errors import (
    AlreadyRevoked,
    BadCredentials,
    ClinicError,
    EmptyBody,
    EmptyStatement,
    ForbiddenOverride,
    FutureTimestamp,
    IllegalTransition,
    MissingParent,
    MissingPayload,
    MissingSubModule,
    NoRefillsRemaining,
    NotOwner,
    NotSupported,
    NotVisible,
    PermissionDenied,
    PolicyParseError,
    SchemaMismatch,
    SelfConnection,
    TwoActivePlans,
    UnknownAlternative,
    UnknownCode,
    UnknownGrant,
    UnknownPatient,
    UnknownRecipient,
    UnknownRecord,
    UnknownToken,
    ValidationError,
    VersionConflict,
)
from ..medical import RequestKind, RequestState
from ..personal import DiaryEntry, HealthPlan, PlanGoal
from ..policy import Role, SubModule, dump_policy
from ..social import ConnectionVerb, PostKind
from .core import Clinic

_STATUS = [
    ((BadCredentials, UnknownToken), 401),
    ((PermissionDenied, NotVisible, NotOwner, ForbiddenOverride), 403),
    ((UnknownRecord, UnknownPatient, UnknownGrant, UnknownRecipient,
      MissingSubModule, UnknownCode), 404),
    ((IllegalTransition, AlreadyRevoked, VersionConflict, TwoActivePlans,
      SelfConnection), 409),
    ((NotSupported,), 501),
    ((SchemaMismatch, ValidationError, EmptyBody, EmptyStatement,
      MissingPayload, MissingParent, UnknownAlternative, FutureTimestamp,
      NoRefillsRemaining, PolicyParseError), 422),
]


def _status_for(exc: ClinicError) -> int:
    for types, code in _STATUS:
        if isinstance(exc, types):
            return code
    return 400


class LoginBody(BaseModel):
    login: str
    password: str


class EntryBody(BaseModel):
    submodule: str
    occurred_at: str
    metrics: dict[str, float] = {}
    note: str = ""
    details: dict[str, str] = {}


class GoalBody(BaseModel):
    title: str
    target_metric: str = ""
    due_date: str
    status: str = "Active"


class PlanBody(BaseModel):
    goals: list[GoalBody]
    note: str = ""


class StatementLineBody(BaseModel):
    service: str
    date: str
    amount: float
    covered: bool


class ConnectionBody(BaseModel):
    target: str
    verb: str


class PostBody(BaseModel):
    kind: str
    body: str
    parent: str | None = None
    group: str | None = None


class MotdBody(BaseModel):
    user: str
    message: str
    effective_at: str


class MessageBody(BaseModel):
    to: str
    body: str


class GroupBody(BaseModel):
    name: str


class ProfileBody(BaseModel):
    fields: dict[str, Any]


class EmrBody(BaseModel):
    kind: str
    note: str = ""
    diagnosis_codes: list[str] = []
    corrects: str | None = None
    drug: str = ""
    dose: str = ""
    refills: int = 0
    instructions: str = ""
    plan: str = ""
    specialty: str = ""
    reason: str = ""


class GrantBody(BaseModel):
    clinician: str
    scope: list[str]


class RequestBody(BaseModel):
    kind: str
    detail: dict[str, Any]


class DecisionBody(BaseModel):
    outcome: str
    counter_offer: str | None = None


class EpisodeBody(BaseModel):
    problem_statement: str
    patient: str | None = None
    parent_episode: str | None = None


class AdvanceBody(BaseModel):
    to_stage: str
    payload: Any = None


class ReadBody(BaseModel):
    ids: list[str]


class PolicyBody(BaseModel):
    text: str


class PayBody(BaseModel):
    amount: float = 0.0


def _notification_doc(n) -> dict:
    return {"id": n.id, "kind": n.kind.value, "ref": n.ref, "read": n.read,
            "created_at": n.created_at}


def _post_doc(p) -> dict:
    return {"id": p.id, "author": p.author, "kind": p.kind.value,
            "body": p.body, "parent": p.parent, "group": p.group,
            "verified": p.verified, "likes": len(p.likes),
            "created_at": p.created_at}


def _request_doc(r) -> dict:
    return {"id": r.id, "patient": r.patient, "kind": r.kind.value,
            "detail": r.detail, "state": r.state.value,
            "decided_by": r.decided_by, "counter_offer": r.counter_offer,
            "created_at": r.created_at}


def _grant_doc(g) -> dict:
    return {"id": g.id, "patient": g.patient, "grantee": g.grantee,
            "scope": sorted(s.value for s in g.scope),
            "granted_at": g.granted_at, "revoked_at": g.revoked_at,
            "active": g.active}


def _episode_doc(e) -> dict:
    return {"id": e.id, "patient": e.patient, "stage": e.stage.value,
            "problem_statement": e.problem_statement,
            "alternatives": e.alternatives, "chosen": e.chosen,
            "executions": e.executions, "evaluations": e.evaluations,
            "cycle_count": e.cycle_count, "parent_episode": e.parent_episode,
            "created_at": e.created_at}


def create_app(clinic: Clinic) -> FastAPI:
    app = FastAPI(title="clinic2", version="0.1.0")
    app.state.clinic = clinic

    @app.exception_handler(ClinicError)
    async def clinic_error_handler(_request: Request, exc: ClinicError):
        return JSONResponse(status_code=_status_for(exc),
                            content={"error": type(exc).__name__,
                                     "detail": str(exc)})

    def current_user(authorization: str | None = Header(default=None)) -> str:
        if not authorization or not authorization.startswith("Bearer "):
            raise UnknownToken("missing bearer token")
        session = clinic.accounts.session_for(authorization.removeprefix("Bearer "))
        return session.principal

    # --- auth ------------------------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/auth/login")
    def login(body: LoginBody):
        session = clinic.accounts.authenticate(body.login, body.password)
        principal = clinic.directory.get(session.principal)
        return {"token": session.token, "principal": principal.id,
                "role": principal.role.value,
                "display_name": principal.display_name}

    @app.post("/auth/logout")
    def logout(authorization: str | None = Header(default=None)):
        if not authorization or not authorization.startswith("Bearer "):
            raise UnknownToken("missing bearer token")
        clinic.accounts.logout(authorization.removeprefix("Bearer "))
        return {"ok": True}

    # --- me / personal ------------------------------------------------------

    @app.get("/me")
    def me(user: str = Depends(current_user)):
        principal = clinic.directory.get(user)
        return {"principal": principal.id, "role": principal.role.value,
                "display_name": principal.display_name,
                "unread_notifications": clinic.notifications.unread_count(user)}

    @app.post("/me/entries", status_code=201)
    def record_entry(body: EntryBody, user: str = Depends(current_user)):
        entry = DiaryEntry(
            submodule=SubModule(body.submodule),
            occurred_at=eho.parse_ts(body.occurred_at),
            metrics=body.metrics, note=body.note, details=body.details)
        return clinic.personal.record_entry(user, user, entry).to_doc()

    @app.get("/me/timeline")
    def timeline(user: str = Depends(current_user),
                 start: str | None = Query(default=None, alias="from"),
                 end: str | None = Query(default=None, alias="to"),
                 owner: str | None = None):
        target = owner or user
        objs = clinic.personal.view_timeline(
            user, target,
            start=eho.parse_ts(start) if start else None,
            end=eho.parse_ts(end) if end else None)
        return [o.to_doc() for o in objs]

    @app.put("/me/plan")
    def upsert_plan(body: PlanBody, user: str = Depends(current_user)):
        plan = HealthPlan(goals=tuple(
            PlanGoal(title=g.title, target_metric=g.target_metric,
                     due_date=g.due_date, status=g.status)
            for g in body.goals), note=body.note)
        result = clinic.personal.upsert_health_plan(user, user, plan)
        if isinstance(result, dict):
            return {"pending_revision": result}
        return result.to_doc()

    @app.get("/me/plan")
    def get_plan(user: str = Depends(current_user)):
        obj = clinic.personal.get_plan(user, user)
        return obj.to_doc() if obj else None

    @app.get("/me/account")
    def account_statement(user: str = Depends(current_user)):
        obj = clinic.personal.get_statement(user, user)
        if obj is None:
            return {"line_items": [], "balance": 0.0}
        return obj.payload

    @app.post("/me/account/pay")
    def pay(body: PayBody, user: str = Depends(current_user)):
        clinic.personal.pay(user, user, body.amount)

    @app.post("/patients/{patient}/account/lines", status_code=201)
    def post_statement_line(patient: str, body: StatementLineBody,
                            user: str = Depends(current_user)):
        obj = clinic.personal.post_statement_line(
            user, patient, body.service, body.date, body.amount, body.covered)
        return obj.payload

    # --- profile and social ----------------------------------------------------

    @app.get("/profile/{target}")
    def get_profile(target: str, user: str = Depends(current_user)):
        principal = clinic.directory.get(target)
        return {"principal": principal.id, "role": principal.role.value,
                "display_name": principal.display_name,
                "profile": clinic.social.get_profile(target) or {}}

    @app.put("/me/profile")
    def update_profile(body: ProfileBody, user: str = Depends(current_user)):
        return clinic.social.update_profile(user, body.fields)

    @app.post("/connections")
    def manage_connection(body: ConnectionBody,
                          user: str = Depends(current_user)):
        conn = clinic.social.manage_connection(user, body.target,
                                               ConnectionVerb(body.verb))
        return {"a": conn.a, "b": conn.b, "state": conn.state.value,
                "requested_by": conn.requested_by}

    @app.get("/connections")
    def list_connections(user: str = Depends(current_user)):
        return {"friends": sorted(clinic.social.friends(user))}

    @app.get("/friends/online")
    def online_friends(user: str = Depends(current_user)):
        return {"online": clinic.accounts.online(clinic.social.friends(user))}

    @app.post("/posts", status_code=201)
    def create_post(body: PostBody, user: str = Depends(current_user)):
        post = clinic.social.post(user, PostKind(body.kind), body.body,
                                  parent=body.parent, group=body.group)
        return _post_doc(post)

    @app.get("/posts/{post_id}")
    def get_post(post_id: str, user: str = Depends(current_user)):
        return _post_doc(clinic.social.get_post(user, post_id))

    @app.get("/posts/{post_id}/replies")
    def get_replies(post_id: str, user: str = Depends(current_user)):
        return [_post_doc(p) for p in clinic.social.replies(user, post_id)]

    @app.post("/posts/{post_id}/like")
    def like_post(post_id: str, user: str = Depends(current_user)):
        return {"likes": clinic.social.react(user, post_id)}

    @app.get("/feed")
    def feed(user: str = Depends(current_user), limit: int = 20):
        items = clinic.social.build_feed(user, limit=limit)
        return [{"subject": i.subject, "kind": i.kind.value, "ref": i.ref,
                 "created_at": i.created_at} for i in items]

    @app.get("/motd")
    def get_motd(user: str = Depends(current_user)):
        motd = clinic.social.get_motd(user)
        if motd is None:
            return None
        return {"user": motd.user, "message": motd.message,
                "set_by": motd.set_by, "effective_at": motd.effective_at}

    @app.post("/motd", status_code=201)
    def set_motd(body: MotdBody, user: str = Depends(current_user)):
        motd = clinic.social.set_motd(user, body.user, body.message,
                                      eho.parse_ts(body.effective_at))
        return {"user": motd.user, "message": motd.message,
                "set_by": motd.set_by, "effective_at": motd.effective_at}

    @app.post("/messages", status_code=201)
    def send_message(body: MessageBody, user: str = Depends(current_user)):
        msg = clinic.social.send_message(user, body.to, body.body)
        return {"id": msg.id, "from": msg.sender, "to": msg.recipient,
                "body": msg.body, "created_at": msg.created_at}

    @app.get("/messages")
    def inbox(user: str = Depends(current_user)):
        return [{"id": m.id, "from": m.sender, "to": m.recipient,
                 "body": m.body, "created_at": m.created_at}
                for m in clinic.social.list_inbox(user)]

    @app.get("/messages/thread")
    def thread(with_user: str = Query(alias="with"),
               user: str = Depends(current_user)):
        msgs = clinic.social.list_thread(user, user, with_user)
        return [{"id": m.id, "from": m.sender, "to": m.recipient,
                 "body": m.body, "created_at": m.created_at} for m in msgs]

    @app.get("/groups")
    def list_groups(user: str = Depends(current_user)):
        return clinic.social.list_groups()

    @app.post("/groups", status_code=201)
    def create_group(body: GroupBody, user: str = Depends(current_user)):
        return clinic.social.create_group(user, body.name)

    @app.post("/groups/{group_id}/join")
    def join_group(group_id: str, user: str = Depends(current_user)):
        return clinic.social.join_group(user, group_id)

    @app.post("/groups/{group_id}/leave")
    def leave_group(group_id: str, user: str = Depends(current_user)):
        return clinic.social.leave_group(user, group_id)

    @app.get("/suggestions")
    def suggestions(user: str = Depends(current_user), k: int = 5):
        return {"candidates": clinic.social.suggest_friends(user, k)}

    @app.get("/search")
    def search(q: str, user: str = Depends(current_user)):
        return clinic.search(user, q)

    # --- notifications -----------------------------------------------------------

    @app.get("/notifications")
    def notifications(user: str = Depends(current_user),
                      unread_only: bool = False):
        return [_notification_doc(n)
                for n in clinic.notifications.list(user, unread_only)]

    @app.post("/notifications/read")
    def mark_read(body: ReadBody, user: str = Depends(current_user)):
        return {"changed": clinic.notifications.mark_read(user, body.ids)}

    # --- medical --------------------------------------------------------------------

    @app.get("/patients/{patient}/emr")
    def read_emr(patient: str, user: str = Depends(current_user),
                 kinds: str | None = None):
        wanted = ([SubModule(k) for k in kinds.split(",")] if kinds else None)
        return [o.to_doc()
                for o in clinic.medical.read_emr(user, patient, wanted)]

    @app.get("/patients/{patient}/emr/export")
    def export_emr(patient: str, user: str = Depends(current_user)):
        entries = clinic.medical.read_emr(user, patient)
        lines = [json.dumps(o.to_doc(), separators=(",", ":"))
                 for o in entries]
        return PlainTextResponse("\n".join(lines) + ("\n" if lines else ""),
                                 media_type="application/x-ndjson")

    @app.post("/patients/{patient}/emr", status_code=201)
    def record_emr(patient: str, body: EmrBody,
                   user: str = Depends(current_user)):
        kind = SubModule(body.kind)
        if kind is SubModule.XM:
            obj = clinic.medical.record_consultation(
                user, patient, body.note, body.diagnosis_codes,
                corrects=body.corrects)
        elif kind is SubModule.EP:
            obj = clinic.medical.record_prescription(
                user, patient, body.drug, body.dose, body.refills,
                body.instructions)
        elif kind is SubModule.TM:
            obj = clinic.medical.record_treatment(user, patient, body.plan)
        elif kind is SubModule.RS:
            obj = clinic.medical.record_referral(user, patient,
                                                 body.specialty, body.reason)
        else:
            raise ValidationError(f"{kind.value} is not a medical record kind")
        return obj.to_doc()

    @app.get("/patients/{patient}/grants")
    def list_grants(patient: str, user: str = Depends(current_user)):
        if not (clinic.directory.is_owner_side(user, patient)
                or clinic.directory.role_of(user) in (Role.CLINICIAN, Role.ADMIN)):
            raise PermissionDenied("grants are visible to the patient and staff")
        return [_grant_doc(g) for g in clinic.medical.grants_of(patient)]

    @app.post("/patients/{patient}/grants", status_code=201)
    def grant_access(patient: str, body: GrantBody,
                     user: str = Depends(current_user)):
        if user != patient:
            raise PermissionDenied("only the patient grants access")
        grant = clinic.medical.grant_access(
            user, body.clinician, [SubModule(s) for s in body.scope])
        return _grant_doc(grant)

    @app.post("/patients/{patient}/grants/{grant_id}/revoke")
    def revoke_access(patient: str, grant_id: str,
                      user: str = Depends(current_user)):
        return _grant_doc(clinic.medical.revoke_access(user, grant_id))

    @app.post("/requests", status_code=201)
    def submit_request(body: RequestBody, user: str = Depends(current_user)):
        req = clinic.medical.submit_request(user, RequestKind(body.kind),
                                            body.detail)
        return _request_doc(req)

    @app.get("/requests")
    def list_requests(user: str = Depends(current_user),
                      patient: str | None = None, state: str | None = None):
        reqs = clinic.medical.list_requests(
            user, patient=patient,
            state=RequestState(state) if state else None)
        return [_request_doc(r) for r in reqs]

    @app.get("/requests/{request_id}")
    def get_request(request_id: str, user: str = Depends(current_user)):
        return _request_doc(clinic.medical.get_request(user, request_id))

    @app.post("/requests/{request_id}/decision")
    def decide_request(request_id: str, body: DecisionBody,
                       user: str = Depends(current_user)):
        req = clinic.medical.decide_request(
            user, request_id, RequestState(body.outcome),
            counter_offer=body.counter_offer)
        return _request_doc(req)

    @app.get("/patients/{patient}/appointments")
    def appointments(patient: str, user: str = Depends(current_user)):
        if not (clinic.directory.is_owner_side(user, patient)
                or clinic.directory.role_of(user) in (Role.CLINICIAN, Role.ADMIN)):
            raise PermissionDenied("not your appointments")
        return clinic.medical.appointments_of(patient)

    # --- care episodes ------------------------------------------------------------------

    @app.post("/episodes", status_code=201)
    def open_episode(body: EpisodeBody, user: str = Depends(current_user)):
        episode = clinic.care.open_episode(user, body.patient or user,
                                           body.problem_statement,
                                           parent_episode=body.parent_episode)
        return _episode_doc(episode)

    @app.get("/episodes")
    def list_episodes(user: str = Depends(current_user),
                      patient: str | None = None):
        return [_episode_doc(e)
                for e in clinic.care.list_episodes(user, patient or user)]

    @app.get("/episodes/{episode_id}")
    def get_episode(episode_id: str, user: str = Depends(current_user)):
        return _episode_doc(clinic.care.get_episode(user, episode_id))

    @app.post("/episodes/{episode_id}/advance")
    def advance_episode(episode_id: str, body: AdvanceBody,
                        user: str = Depends(current_user)):
        episode = clinic.care.advance(user, episode_id, Stage(body.to_stage),
                                      payload=body.payload)
        return _episode_doc(episode)

    @app.get("/episodes/{episode_id}/report")
    def episode_report(episode_id: str, user: str = Depends(current_user)):
        return clinic.care.episode_report(user, episode_id)

    # --- policy administration --------------------------------------------------------------

    @app.get("/policy")
    def get_policy(user: str = Depends(current_user)):
        if clinic.directory.role_of(user) is not Role.ADMIN:
            raise PermissionDenied("policy is admin-only")
        return PlainTextResponse(dump_policy(clinic.policy.current))

    @app.put("/policy")
    def put_policy(body: PolicyBody, user: str = Depends(current_user)):
        if clinic.directory.role_of(user) is not Role.ADMIN:
            raise PermissionDenied("policy is admin-only")
        replaced = clinic.replace_policy(body.text)
        return {"version": replaced.version}

    return app
