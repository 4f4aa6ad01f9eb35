"""HTTP surface, sessions, presence, notifications, and the auth gate."""
from __future__ import annotations

from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from clinic2.policy import Role
from clinic2.service.app import create_app
from clinic2.service.core import Clinic

# Endpoints that must answer without a token.
OPEN_PATHS = {"/health", "/auth/login"}
# FastAPI plumbing, not part of the API contract.
FRAMEWORK_PATHS = {"/openapi.json", "/docs", "/docs/oauth2-redirect", "/redoc"}


@pytest.fixture
def api(clock):
    clinic = Clinic(data_dir=None, clock=clock)
    app = create_app(clinic)
    client = TestClient(app, raise_server_exceptions=False)
    yield client, clinic
    clinic.close()


def _register(clinic, login, role, name, delegate_of=None):
    return clinic.accounts.create_account(login, f"pw-{login}", role, name,
                                          delegate_of=delegate_of)


@pytest.fixture
def world(api):
    client, clinic = api
    ids = {
        "alice": _register(clinic, "alice", Role.PATIENT, "Alice"),
        "bob": _register(clinic, "bob", Role.PATIENT, "Bob"),
        "drh": _register(clinic, "drh", Role.CLINICIAN, "Dr. H"),
        "edu": _register(clinic, "edu", Role.HEALTH_EDUCATOR, "Edu"),
        "admin": _register(clinic, "admin", Role.ADMIN, "Admin"),
    }
    return client, clinic, ids


def _login(client, login):
    resp = client.post("/auth/login", json={"login": login,
                                            "password": f"pw-{login}"})
    assert resp.status_code == 200, resp.text
    return {"Authorization": f"Bearer {resp.json()['token']}"}


# --- authentication ----------------------------------------------------------

def test_login_and_me(world):
    client, clinic, ids = world
    headers = _login(client, "alice")
    me = client.get("/me", headers=headers)
    assert me.status_code == 200
    assert me.json()["principal"] == ids["alice"]
    assert me.json()["role"] == "Patient"


def test_bad_credentials_identical_shape(world):
    client, _clinic, _ids = world
    wrong_pw = client.post("/auth/login", json={"login": "alice",
                                                "password": "nope"})
    unknown = client.post("/auth/login", json={"login": "who",
                                               "password": "nope"})
    assert wrong_pw.status_code == unknown.status_code == 401
    assert wrong_pw.json() == unknown.json()


def test_logout_then_api_call_rejected(world):
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    assert client.post("/auth/logout", headers=headers).status_code == 200
    assert client.get("/me", headers=headers).status_code == 401


def test_double_logout_idempotent(world):
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    assert client.post("/auth/logout", headers=headers).status_code == 200
    assert client.post("/auth/logout", headers=headers).status_code == 200


def test_logout_removes_presence(world):
    client, clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    client.post("/connections", headers=ha,
                json={"target": ids["bob"], "verb": "Request"})
    client.post("/connections", headers=hb,
                json={"target": ids["alice"], "verb": "Accept"})
    online = client.get("/friends/online", headers=hb).json()["online"]
    assert ids["alice"] in online
    client.post("/auth/logout", headers=ha)
    online = client.get("/friends/online", headers=hb).json()["online"]
    assert ids["alice"] not in online


def test_presence_window_expiry(world, clock):
    client, clinic, ids = world
    _login(client, "alice")
    assert clinic.accounts.presence(ids["alice"]) is True
    clock.advance(91)
    assert clinic.accounts.presence(ids["alice"]) is False


def test_session_request_cap(clock):
    from clinic2.errors import UnknownToken
    from clinic2.service.accounts import AccountService
    clinic = Clinic(data_dir=None, clock=clock)
    clinic.accounts = AccountService(clinic.store, clinic.directory,
                                     clinic.audit, clock=clock, request_cap=3)
    clinic.accounts.create_account("capped", "pw", Role.PATIENT, "Capped")
    session = clinic.accounts.authenticate("capped", "pw")
    for _ in range(3):
        clinic.accounts.session_for(session.token)
    with pytest.raises(UnknownToken):
        clinic.accounts.session_for(session.token)
    clinic.close()


def test_credentials_never_stored_in_clear(world):
    _client, clinic, ids = world
    blobs = []
    for _id, doc in clinic.store.scan("accounts"):
        blobs.append(str(doc))
    for _id, doc in clinic.store.scan("sessions"):
        blobs.append(str(doc))
    blobs.extend(str(e.to_doc()) for e in clinic.audit.events())
    for blob in blobs:
        assert "pw-alice" not in blob
        assert "pw-admin" not in blob


def test_auth_gate_every_endpoint(world):
    """Exhaustive: every route rejects a missing token and a terminated one,
    except the open endpoints."""
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    client.post("/auth/logout", headers=headers)  # now terminated
    app = client.app
    checked = 0
    for route in app.routes:
        path = getattr(route, "path", None)
        methods = getattr(route, "methods", None)
        if path is None or methods is None:
            continue
        if path in FRAMEWORK_PATHS or path in OPEN_PATHS:
            continue
        concrete = path
        for param in ("patient", "post_id", "group_id", "grant_id",
                      "request_id", "episode_id", "target"):
            concrete = concrete.replace("{" + param + "}", "x")
        for method in methods:
            if method == "HEAD":
                continue
            no_token = client.request(method, concrete)
            assert no_token.status_code == 401, (method, concrete,
                                                 no_token.status_code)
            if path != "/auth/logout":  # logout is idempotent by contract
                dead = client.request(method, concrete, headers=headers)
                assert dead.status_code == 401, (method, concrete)
            checked += 1
    assert checked >= 40


# --- personal over HTTP ---------------------------------------------------------

def test_entry_and_timeline_roundtrip(world, clock):
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    resp = client.post("/me/entries", headers=headers, json={
        "submodule": "HB", "occurred_at": clock.now.isoformat(),
        "metrics": {"slept_hours": 8}, "note": "slept well",
        "details": {"meal": "soup"}})
    assert resp.status_code == 201, resp.text
    got = client.get("/me/timeline", headers=headers)
    assert len(got.json()) == 1
    assert got.json()[0]["payload"]["metrics"]["slept_hours"] == 8


def test_plan_roundtrip(world):
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    resp = client.put("/me/plan", headers=headers, json={
        "goals": [{"title": "walk", "target_metric": "steps",
                   "due_date": "2026-09-01"}]})
    assert resp.status_code == 200
    assert resp.json()["version"] == 1
    assert client.get("/me/plan", headers=headers).json()["version"] == 1


def test_pay_stub_501(world):
    client, _clinic, _ids = world
    headers = _login(client, "alice")
    resp = client.post("/me/account/pay", headers=headers,
                       json={"amount": 5.0})
    assert resp.status_code == 501
    assert resp.json()["error"] == "NotSupported"


def test_statement_over_http(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hadm = _login(client, "admin")
    resp = client.post(f"/patients/{ids['alice']}/account/lines",
                       headers=hadm, json={"service": "Lab",
                                           "date": "2026-01-02",
                                           "amount": 12.5, "covered": False})
    assert resp.status_code == 201
    statement = client.get("/me/account", headers=ha).json()
    assert statement["balance"] == 12.5


# --- social over HTTP --------------------------------------------------------------

def test_motd_flow(world, clock):
    client, _clinic, ids = world
    he = _login(client, "edu")
    ha = _login(client, "alice")
    assert client.get("/motd", headers=ha).json() is None
    resp = client.post("/motd", headers=he, json={
        "user": ids["alice"], "message": "hydrate!",
        "effective_at": (clock.now - timedelta(minutes=1)).isoformat()})
    assert resp.status_code == 201
    motd = client.get("/motd", headers=ha).json()
    assert motd["message"] == "hydrate!"


def test_knowledge_vs_forum_verified_flag(world):
    client, _clinic, _ids = world
    he = _login(client, "edu")
    ha = _login(client, "alice")
    item = client.post("/posts", headers=he,
                       json={"kind": "KnowledgeItem", "body": "eat greens"})
    assert item.json()["verified"] is True
    thread = client.post("/posts", headers=ha,
                         json={"kind": "ForumThread", "body": "my story"})
    assert thread.json()["verified"] is False
    denied = client.post("/posts", headers=ha,
                         json={"kind": "KnowledgeItem", "body": "hax"})
    assert denied.status_code == 403


def test_feed_and_likes_over_http(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    client.post("/connections", headers=ha,
                json={"target": ids["bob"], "verb": "Request"})
    client.post("/connections", headers=hb,
                json={"target": ids["alice"], "verb": "Accept"})
    post = client.post("/posts", headers=ha,
                       json={"kind": "Status", "body": "hello world"})
    feed = client.get("/feed", headers=hb).json()
    assert feed[0]["ref"] == post.json()["id"]
    likes = client.post(f"/posts/{post.json()['id']}/like", headers=hb)
    assert likes.json()["likes"] == 1
    again = client.post(f"/posts/{post.json()['id']}/like", headers=hb)
    assert again.json()["likes"] == 1


def test_messages_over_http(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    sent = client.post("/messages", headers=ha,
                       json={"to": ids["bob"], "body": "hi bob"})
    assert sent.status_code == 201
    inbox = client.get("/messages", headers=hb).json()
    assert len(inbox) == 1 and inbox[0]["body"] == "hi bob"


def test_search_respects_visibility(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    client.post("/posts", headers=ha,
                json={"kind": "Status", "body": "secret garden"})
    hits_self = client.get("/search", headers=ha,
                           params={"q": "secret"}).json()
    hits_other = client.get("/search", headers=hb,
                            params={"q": "secret"}).json()
    assert len(hits_self["posts"]) == 1
    assert len(hits_other["posts"]) == 0
    users = client.get("/search", headers=hb, params={"q": "ali"}).json()
    assert any(u["id"] == ids["alice"] for u in users["users"])


# --- notifications ------------------------------------------------------------------

def test_notification_conservation_per_kind(world, clock):
    client, clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    hd = _login(client, "drh")
    he = _login(client, "edu")

    client.post("/connections", headers=ha,
                json={"target": ids["bob"], "verb": "Request"})      # FriendRequest -> bob
    client.post("/connections", headers=hb,
                json={"target": ids["alice"], "verb": "Accept"})     # FeedHighlight -> alice
    client.post("/messages", headers=hb,
                json={"to": ids["alice"], "body": "yo"})             # NewMessage -> alice
    client.post("/motd", headers=he, json={
        "user": ids["alice"], "message": "walk",
        "effective_at": clock.now.isoformat()})                      # MotdUpdated -> alice
    client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                json={"kind": "XM", "note": "checkup"})              # EmrAdded -> alice
    slot_start = clock.now + timedelta(days=1)
    req = client.post("/requests", headers=ha, json={
        "kind": "Appointment",
        "detail": {"slot": f"{slot_start.isoformat()}/"
                           f"{(slot_start + timedelta(hours=1)).isoformat()}"}})
    client.post(f"/requests/{req.json()['id']}/decision", headers=hd,
                json={"outcome": "Approved"})                        # RequestDecided -> alice

    alice_notes = client.get("/notifications", headers=ha).json()
    kinds = sorted(n["kind"] for n in alice_notes)
    assert kinds == ["EmrAdded", "FeedHighlight", "MotdUpdated",
                     "NewMessage", "RequestDecided"]
    bob_notes = client.get("/notifications", headers=hb).json()
    assert [n["kind"] for n in bob_notes] == ["FriendRequest"]

    # one consultation + one decision = exactly two notifications of
    # those kinds, already counted above; emit one more consultation
    client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                json={"kind": "XM", "note": "second"})
    after = client.get("/notifications", headers=ha).json()
    assert len(after) == len(alice_notes) + 1


def test_mark_read_idempotent(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    client.post("/connections", headers=ha,
                json={"target": ids["bob"], "verb": "Request"})
    notes = client.get("/notifications", headers=hb).json()
    note_ids = [n["id"] for n in notes]
    first = client.post("/notifications/read", headers=hb,
                        json={"ids": note_ids})
    assert first.json()["changed"] == 1
    second = client.post("/notifications/read", headers=hb,
                         json={"ids": note_ids})
    assert second.json()["changed"] == 0
    unread = client.get("/notifications", headers=hb,
                        params={"unread_only": True}).json()
    assert unread == []


def test_cannot_mark_foreign_notifications(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hb = _login(client, "bob")
    client.post("/connections", headers=ha,
                json={"target": ids["bob"], "verb": "Request"})
    note_ids = [n["id"] for n in
                client.get("/notifications", headers=hb).json()]
    resp = client.post("/notifications/read", headers=ha,
                       json={"ids": note_ids})
    assert resp.status_code == 403


# --- medical over HTTP -----------------------------------------------------------------

def test_grant_revoke_roundtrip_over_http(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hd = _login(client, "drh")
    client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                json={"kind": "XM", "note": "note 1"})
    denied = client.get(f"/patients/{ids['alice']}/emr", headers=hd)
    assert denied.status_code == 403
    grant = client.post(f"/patients/{ids['alice']}/grants", headers=ha,
                        json={"clinician": ids["drh"],
                              "scope": ["XM", "EP", "TM", "RS"]})
    assert grant.status_code == 201
    allowed = client.get(f"/patients/{ids['alice']}/emr", headers=hd)
    assert allowed.status_code == 200 and len(allowed.json()) == 1
    gid = grant.json()["id"]
    revoke = client.post(
        f"/patients/{ids['alice']}/grants/{gid}/revoke", headers=ha)
    assert revoke.status_code == 200
    assert client.get(f"/patients/{ids['alice']}/emr",
                      headers=hd).status_code == 403


def test_emr_export_ndjson(world):
    import json as jsonlib
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hd = _login(client, "drh")
    client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                json={"kind": "XM", "note": "one"})
    client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                json={"kind": "TM", "plan": "rest"})
    resp = client.get(f"/patients/{ids['alice']}/emr/export", headers=ha)
    lines = resp.text.strip().splitlines()
    assert len(lines) == 2
    docs = [jsonlib.loads(line) for line in lines]
    assert all(list(d.keys()) == list(docs[0].keys()) for d in docs)


def test_refill_request_boundaries_over_http(world):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    hd = _login(client, "drh")
    rx = client.post(f"/patients/{ids['alice']}/emr", headers=hd,
                     json={"kind": "EP", "drug": "X", "dose": "1x",
                           "refills": 1})
    rx_id = rx.json()["id"]
    req = client.post("/requests", headers=ha,
                      json={"kind": "Refill",
                            "detail": {"prescription": rx_id}})
    assert req.status_code == 201
    decided = client.post(f"/requests/{req.json()['id']}/decision",
                          headers=hd, json={"outcome": "Approved"})
    assert decided.status_code == 200
    empty = client.post("/requests", headers=ha,
                        json={"kind": "Refill",
                              "detail": {"prescription": rx_id}})
    assert empty.status_code == 422
    assert empty.json()["error"] == "NoRefillsRemaining"


# --- episodes over HTTP -------------------------------------------------------------------

def test_episode_flow_over_http(world, clock):
    client, _clinic, ids = world
    ha = _login(client, "alice")
    ep = client.post("/episodes", headers=ha,
                     json={"problem_statement": "migraines"})
    assert ep.status_code == 201
    eid = ep.json()["id"]
    r = client.post(f"/episodes/{eid}/advance", headers=ha, json={
        "to_stage": "ProblemSolving",
        "payload": [{"description": "sleep more", "proposed_by": ids["alice"]}]})
    assert r.status_code == 200
    r = client.post(f"/episodes/{eid}/advance", headers=ha,
                    json={"to_stage": "Choice", "payload": 0})
    assert r.status_code == 200
    entry = client.post("/me/entries", headers=ha, json={
        "submodule": "HB", "occurred_at": clock.now.isoformat(),
        "metrics": {"slept_hours": 9}})
    r = client.post(f"/episodes/{eid}/advance", headers=ha,
                    json={"to_stage": "Execution",
                          "payload": entry.json()["id"]})
    assert r.status_code == 200
    r = client.post(f"/episodes/{eid}/advance", headers=ha, json={
        "to_stage": "Evaluation",
        "payload": {"outcome_note": "better", "resolved": True}})
    assert r.status_code == 200
    r = client.post(f"/episodes/{eid}/advance", headers=ha,
                    json={"to_stage": "Closed"})
    assert r.json()["stage"] == "Closed"
    report = client.get(f"/episodes/{eid}/report", headers=ha).json()
    assert len(report["stage_events"]) == 5
    illegal = client.post(f"/episodes/{eid}/advance", headers=ha,
                          json={"to_stage": "ProblemSolving",
                                "payload": [{"description": "x"}]})
    assert illegal.status_code == 409


# --- policy admin -----------------------------------------------------------------------------

def test_policy_admin_endpoints(world):
    client, _clinic, _ids = world
    hadm = _login(client, "admin")
    ha = _login(client, "alice")
    text = client.get("/policy", headers=hadm).text
    assert "HB = full" in text
    assert client.get("/policy", headers=ha).status_code == 403
    updated = text.replace("version = 1", "version = 2") \
                  .replace("CS = full", "CS = partial")
    resp = client.put("/policy", headers=hadm, json={"text": updated})
    assert resp.json()["version"] == 2
    bad = client.put("/policy", headers=hadm,
                     json={"text": "HB = full\n"})
    assert bad.status_code == 404  # MissingSubModule
