"""Social care: connections, posts and reactions, groups, per-user MOTD,
messaging, the activity feed, and friend suggestions.

Content splits into a verified knowledge base (educator/clinician-authored)
and an unverified forum (patient-authored); the ``verified`` flag is derived,
never caller-supplied. The feed is computed at read time from stored events
plus synthesized birthday/upcoming items, so repeated queries over unchanged
state are byte-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from typing import Any, Callable

from . import eho
from .eho import AuditLog
from .errors import (
    EmptyBody,
    IllegalTransition,
    MissingParent,
    NotVisible,
    PermissionDenied,
    SelfConnection,
    UnknownRecipient,
    UnknownRecord,
    ValidationError,
)
from .policy import Action, Outcome, PolicyHandle, Relation, Role, SubModule, resolve
from .principals import Directory
from .store import DocumentStore

CONNECTIONS = "connections"
POSTS = "posts"
MOTDS = "motds"
MESSAGES = "messages"
GROUPS = "groups"
PROFILES = "profiles"
FEED_EVENTS = "feed_events"


class ConnectionState(str, Enum):
    PENDING = "Pending"
    ACCEPTED = "Accepted"
    DECLINED = "Declined"
    REMOVED = "Removed"


class ConnectionVerb(str, Enum):
    REQUEST = "Request"
    ACCEPT = "Accept"
    DECLINE = "Decline"
    UNFRIEND = "Unfriend"


class PostKind(str, Enum):
    STATUS = "Status"
    FORUM_THREAD = "ForumThread"
    FORUM_REPLY = "ForumReply"
    COMMENT = "Comment"
    KNOWLEDGE_ITEM = "KnowledgeItem"
    KNOWLEDGE_QUESTION = "KnowledgeQuestion"


class FeedKind(str, Enum):
    STATUS_POSTED = "StatusPosted"
    PROFILE_CHANGED = "ProfileChanged"
    UPCOMING_EVENT = "UpcomingEvent"
    BIRTHDAY = "Birthday"
    GROUP_POST = "GroupPost"


@dataclass(frozen=True)
class Connection:
    a: str
    b: str
    state: ConnectionState
    requested_by: str


@dataclass(frozen=True)
class Post:
    id: str
    author: str
    kind: PostKind
    body: str
    parent: str | None
    group: str | None
    verified: bool
    likes: tuple[str, ...]
    created_at: str

    @staticmethod
    def from_doc(doc: dict) -> "Post":
        return Post(id=doc["id"], author=doc["author"],
                    kind=PostKind(doc["kind"]), body=doc["body"],
                    parent=doc.get("parent"), group=doc.get("group"),
                    verified=doc["verified"], likes=tuple(doc["likes"]),
                    created_at=doc["created_at"])


@dataclass(frozen=True)
class Motd:
    user: str
    message: str
    set_by: str
    effective_at: str


@dataclass(frozen=True)
class FeedItem:
    subject: str
    kind: FeedKind
    ref: str
    created_at: str
    id: str


@dataclass(frozen=True)
class Message:
    id: str
    sender: str
    recipient: str
    body: str
    created_at: str


def _pair_key(a: str, b: str) -> str:
    return "|".join(sorted((a, b)))


# Which knowledge-base kinds belong to KM rather than CS.
_KM_KINDS = {PostKind.KNOWLEDGE_ITEM, PostKind.KNOWLEDGE_QUESTION}
_CHILD_KINDS = {PostKind.FORUM_REPLY, PostKind.COMMENT, PostKind.KNOWLEDGE_QUESTION}


class SocialService:
    def __init__(self, store: DocumentStore, policy: PolicyHandle,
                 directory: Directory, audit: AuditLog,
                 notify: Callable[[str, str, str], None] | None = None,
                 upcoming_provider: Callable[[str, datetime], list[tuple[str, str]]] | None = None,
                 clock: Callable[[], datetime] = eho.utcnow):
        self._store = store
        self._policy = policy
        self._directory = directory
        self._audit = audit
        self._notify = notify or (lambda recipient, kind, ref: None)
        self._upcoming = upcoming_provider or (lambda viewer, now: [])
        self._clock = clock

    def _audit_op(self, actor: str, action: Action, submodule: SubModule,
                  target: str, decision: str) -> None:
        self._audit.record(actor, self._directory.role_of(actor).value,
                           action.value, submodule.value, target, decision,
                           now=self._clock())

    # --- connections ------------------------------------------------------

    def manage_connection(self, actor: str, target: str,
                          verb: ConnectionVerb) -> Connection:
        if actor == target:
            raise SelfConnection("cannot connect to yourself")
        if not self._directory.exists(target):
            raise UnknownRecipient(target)
        key = _pair_key(actor, target)
        doc = self._store.get(CONNECTIONS, key)
        state = ConnectionState(doc["state"]) if doc else None

        if verb is ConnectionVerb.REQUEST:
            if doc is not None:
                raise IllegalTransition(f"connection already {state.value}")
            doc = {"a": min(actor, target), "b": max(actor, target),
                   "state": ConnectionState.PENDING.value,
                   "requested_by": actor}
            self._store.put(CONNECTIONS, key, doc)
            self._notify(target, "FriendRequest", key)
        elif verb in (ConnectionVerb.ACCEPT, ConnectionVerb.DECLINE):
            if doc is None or state is not ConnectionState.PENDING:
                raise IllegalTransition("no pending request for this pair")
            if actor == doc["requested_by"]:
                raise IllegalTransition("only the invited party can settle a request")
            doc["state"] = (ConnectionState.ACCEPTED if verb is ConnectionVerb.ACCEPT
                            else ConnectionState.DECLINED).value
            self._store.put(CONNECTIONS, key, doc,
                            expected_version=self._store.version(CONNECTIONS, key))
            if verb is ConnectionVerb.ACCEPT:
                self._notify(doc["requested_by"], "FeedHighlight", key)
        elif verb is ConnectionVerb.UNFRIEND:
            if doc is None or state is not ConnectionState.ACCEPTED:
                raise IllegalTransition("can only unfriend an accepted connection")
            doc["state"] = ConnectionState.REMOVED.value
            self._store.put(CONNECTIONS, key, doc,
                            expected_version=self._store.version(CONNECTIONS, key))
        else:  # pragma: no cover
            raise IllegalTransition(f"unknown verb {verb}")

        self._audit_op(actor, Action.UPDATE, SubModule.CS, key, verb.value)
        return Connection(a=doc["a"], b=doc["b"],
                          state=ConnectionState(doc["state"]),
                          requested_by=doc["requested_by"])

    def friends(self, user: str) -> set[str]:
        out = set()
        for _key, doc in self._store.scan(CONNECTIONS):
            if doc["state"] != ConnectionState.ACCEPTED.value:
                continue
            if doc["a"] == user:
                out.add(doc["b"])
            elif doc["b"] == user:
                out.add(doc["a"])
        return out

    def connection_between(self, a: str, b: str) -> Connection | None:
        doc = self._store.get(CONNECTIONS, _pair_key(a, b))
        if doc is None:
            return None
        return Connection(a=doc["a"], b=doc["b"],
                          state=ConnectionState(doc["state"]),
                          requested_by=doc["requested_by"])

    # --- groups --------------------------------------------------------------

    def create_group(self, actor: str, name: str) -> dict:
        role = self._directory.role_of(actor)
        if role not in (Role.ADMIN, Role.HEALTH_EDUCATOR, Role.CLINICIAN):
            raise PermissionDenied("groups are opened by staff")
        if not name.strip():
            raise ValidationError("group name must be non-empty")
        gid = name.strip().lower().replace(" ", "-")
        if self._store.get(GROUPS, gid) is not None:
            raise ValidationError(f"group name {name!r} already taken")
        doc = {"id": gid, "name": name.strip(), "members": [actor],
               "moderators": [actor]}
        self._store.put(GROUPS, gid, doc)
        self._audit_op(actor, Action.CREATE, SubModule.CS, gid, "group-create")
        return doc

    def join_group(self, actor: str, group_id: str) -> dict:
        doc = self._store.get(GROUPS, group_id)
        if doc is None:
            raise UnknownRecord(f"group {group_id}")
        if actor not in doc["members"]:
            doc["members"].append(actor)
            self._store.put(GROUPS, group_id, doc,
                            expected_version=self._store.version(GROUPS, group_id))
            self._audit_op(actor, Action.UPDATE, SubModule.CS, group_id,
                           "group-join")
        return doc

    def leave_group(self, actor: str, group_id: str) -> dict:
        doc = self._store.get(GROUPS, group_id)
        if doc is None:
            raise UnknownRecord(f"group {group_id}")
        if actor in doc["members"]:
            doc["members"].remove(actor)
            if actor in doc["moderators"]:
                doc["moderators"].remove(actor)
            self._store.put(GROUPS, group_id, doc,
                            expected_version=self._store.version(GROUPS, group_id))
            self._audit_op(actor, Action.UPDATE, SubModule.CS, group_id,
                           "group-leave")
        return doc

    def groups_of(self, user: str) -> set[str]:
        return {gid for gid, doc in self._store.scan(GROUPS)
                if user in doc["members"]}

    def list_groups(self) -> list[dict]:
        return [doc for _gid, doc in self._store.scan(GROUPS)]

    # --- posts -----------------------------------------------------------------

    def post(self, actor: str, kind: PostKind, body: str,
             parent: str | None = None, group: str | None = None) -> Post:
        if not body.strip():
            raise EmptyBody("post body must be non-empty")
        role = self._directory.role_of(actor)
        submodule = SubModule.KM if kind in _KM_KINDS else SubModule.CS

        if kind is PostKind.KNOWLEDGE_ITEM:
            if role not in (Role.HEALTH_EDUCATOR, Role.CLINICIAN):
                raise PermissionDenied("knowledge items are staff-authored")
        decision = resolve(self._policy.current, role, Relation.OWNER,
                           submodule, Action.CREATE)
        if decision.outcome is Outcome.DENY:
            raise PermissionDenied(decision.reason)
        if (decision.outcome is Outcome.ALLOW_AS_REQUEST
                and kind is not PostKind.KNOWLEDGE_QUESTION):
            # Partial empowerment on content means: you may only ask.
            raise PermissionDenied("partial empowerment allows questions only")

        parent_doc = None
        if kind in _CHILD_KINDS:
            if parent is None:
                raise MissingParent(f"{kind.value} needs a parent post")
            parent_doc = self._store.get(POSTS, parent)
            if parent_doc is None:
                raise MissingParent(f"parent {parent} does not exist")
            if kind is PostKind.KNOWLEDGE_QUESTION and \
                    parent_doc["kind"] != PostKind.KNOWLEDGE_ITEM.value:
                raise MissingParent("questions attach to knowledge items")
            if kind is PostKind.FORUM_REPLY and \
                    parent_doc["kind"] != PostKind.FORUM_THREAD.value:
                raise MissingParent("forum replies attach to forum threads")
            if not self._can_view_doc(actor, parent_doc):
                raise NotVisible("parent post is not visible to you")
        elif parent is not None:
            raise ValidationError(f"{kind.value} does not take a parent")

        if group is not None:
            group_doc = self._store.get(GROUPS, group)
            if group_doc is None:
                raise UnknownRecord(f"group {group}")
            if actor not in group_doc["members"]:
                raise PermissionDenied("join the group before posting to it")

        now_iso = eho.isoformat(self._clock())
        verified = (kind is PostKind.KNOWLEDGE_ITEM
                    and role in (Role.HEALTH_EDUCATOR, Role.CLINICIAN))
        doc = {
            "id": eho.new_id(), "author": actor, "kind": kind.value,
            "body": body, "parent": parent, "group": group,
            "verified": verified, "likes": [], "created_at": now_iso,
        }
        self._store.put(POSTS, doc["id"], doc)

        if group is not None:
            self._emit_feed_event(actor, FeedKind.GROUP_POST, doc["id"],
                                  now_iso, group=group)
        elif kind is PostKind.STATUS:
            self._emit_feed_event(actor, FeedKind.STATUS_POSTED, doc["id"],
                                  now_iso)
        self._audit_op(actor, Action.CREATE, submodule, doc["id"],
                       decision.reason)
        return Post.from_doc(doc)

    def get_post(self, viewer: str, post_id: str) -> Post:
        doc = self._store.get(POSTS, post_id)
        if doc is None:
            raise UnknownRecord(f"post {post_id}")
        if not self._can_view_doc(viewer, doc):
            raise NotVisible(f"post {post_id}")
        return Post.from_doc(doc)

    def replies(self, viewer: str, post_id: str) -> list[Post]:
        self.get_post(viewer, post_id)  # visibility gate
        docs = [doc for _id, doc in self._store.scan(POSTS)
                if doc.get("parent") == post_id]
        docs.sort(key=lambda d: (d["created_at"], d["id"]))
        return [Post.from_doc(d) for d in docs]

    def can_view(self, viewer: str, doc: dict) -> bool:
        return self._can_view_doc(viewer, doc)

    def _can_view_doc(self, viewer: str, doc: dict) -> bool:
        if doc["author"] == viewer:
            return True
        # Knowledge content is a resource centre for all users.
        if doc["kind"] in (PostKind.KNOWLEDGE_ITEM.value,
                           PostKind.KNOWLEDGE_QUESTION.value):
            return True
        if doc.get("group"):
            return viewer in self._store.require(GROUPS, doc["group"])["members"]
        if doc["author"] in self.friends(viewer):
            return True
        # Replies and comments inherit the parent thread's audience.
        if doc.get("parent"):
            parent = self._store.get(POSTS, doc["parent"])
            if parent is not None:
                return self._can_view_doc(viewer, parent)
        return False

    def react(self, actor: str, post_id: str) -> int:
        doc = self._store.get(POSTS, post_id)
        if doc is None or not self._can_view_doc(actor, doc):
            raise NotVisible(f"post {post_id}")
        if actor in doc["likes"]:
            return len(doc["likes"])
        version = self._store.version(POSTS, post_id)
        doc["likes"].append(actor)
        self._store.put(POSTS, post_id, doc, expected_version=version)
        self._audit_op(actor, Action.UPDATE, SubModule.CS, post_id, "like")
        return len(doc["likes"])

    # --- feed -------------------------------------------------------------------

    def _emit_feed_event(self, subject: str, kind: FeedKind, ref: str,
                         created_at: str, group: str | None = None) -> None:
        event = {"id": eho.new_id(), "subject": subject, "kind": kind.value,
                 "ref": ref, "created_at": created_at, "group": group}
        self._store.put(FEED_EVENTS, event["id"], event)

    def build_feed(self, viewer: str, limit: int = 20,
                   now: datetime | None = None) -> list[FeedItem]:
        now = now or self._clock()
        friend_set = self.friends(viewer)
        group_set = self.groups_of(viewer)
        audience = friend_set | {viewer}

        candidates: list[FeedItem] = []
        for _id, ev in self._store.scan(FEED_EVENTS):
            in_audience = ev["subject"] in audience
            via_group = (ev["kind"] == FeedKind.GROUP_POST.value
                         and ev.get("group") in group_set)
            if not (in_audience or via_group):
                continue
            candidates.append(FeedItem(subject=ev["subject"],
                                       kind=FeedKind(ev["kind"]),
                                       ref=ev["ref"],
                                       created_at=ev["created_at"],
                                       id=ev["id"]))

        # Birthdays today, for the viewer and their friends.
        today = now.strftime("%m-%d")
        for user in sorted(audience):
            profile = self._store.get(PROFILES, user)
            birthday = (profile or {}).get("birthday")
            if birthday and birthday[5:] == today:
                midnight = now.strftime("%Y-%m-%dT00:00:00+00:00")
                candidates.append(FeedItem(
                    subject=user, kind=FeedKind.BIRTHDAY,
                    ref=f"birthday:{user}:{now.date().isoformat()}",
                    created_at=midnight,
                    id=f"bday:{user}:{now.date().isoformat()}"))

        # The viewer's own upcoming confirmed appointments.
        for ref, when in self._upcoming(viewer, now):
            candidates.append(FeedItem(subject=viewer,
                                       kind=FeedKind.UPCOMING_EVENT,
                                       ref=ref, created_at=when,
                                       id=f"upcoming:{ref}"))

        candidates.sort(key=lambda item: (item.created_at, item.id),
                        reverse=True)
        seen: set[str] = set()
        out: list[FeedItem] = []
        for item in candidates:
            if item.ref in seen:
                continue
            seen.add(item.ref)
            out.append(item)
            if len(out) >= limit:
                break
        return out

    # --- profile --------------------------------------------------------------------

    def update_profile(self, actor: str, fields: dict[str, Any]) -> dict:
        allowed = {"basic_info", "picture", "friends_and_family", "education",
                   "employment", "interests", "contact", "birthday"}
        unknown = set(fields) - allowed
        if unknown:
            raise ValidationError(f"unknown profile fields {sorted(unknown)}")
        if "birthday" in fields:
            try:
                datetime.strptime(fields["birthday"], "%Y-%m-%d")
            except (TypeError, ValueError):
                raise ValidationError("birthday must be YYYY-MM-DD") from None
        doc = self._store.get(PROFILES, actor) or {"user": actor}
        doc.update(fields)
        version = self._store.version(PROFILES, actor)
        self._store.put(PROFILES, actor, doc, expected_version=version)
        self._emit_feed_event(actor, FeedKind.PROFILE_CHANGED, f"profile:{actor}",
                              eho.isoformat(self._clock()))
        self._audit_op(actor, Action.UPDATE, SubModule.ID, actor,
                       "profile-update")
        return doc

    def get_profile(self, user: str) -> dict | None:
        return self._store.get(PROFILES, user)

    # --- MOTD ------------------------------------------------------------------------

    def set_motd(self, actor: str, user: str, message: str,
                 effective_at: datetime) -> Motd:
        if self._directory.role_of(actor) is not Role.HEALTH_EDUCATOR:
            raise PermissionDenied("the message of the day is educator-managed")
        if not message.strip():
            raise EmptyBody("MOTD message must be non-empty")
        if not self._directory.exists(user):
            raise UnknownRecipient(user)
        doc = {"id": eho.new_id(), "user": user, "message": message,
               "set_by": actor, "effective_at": eho.isoformat(effective_at)}
        self._store.put(MOTDS, doc["id"], doc)
        self._notify(user, "MotdUpdated", doc["id"])
        self._audit_op(actor, Action.CREATE, SubModule.CS, doc["id"],
                       "motd-set")
        return Motd(user=user, message=message, set_by=actor,
                    effective_at=doc["effective_at"])

    def get_motd(self, user: str, now: datetime | None = None) -> Motd | None:
        now_iso = eho.isoformat(now or self._clock())
        best: dict | None = None
        for _id, doc in self._store.scan(MOTDS):
            if doc["user"] != user or doc["effective_at"] > now_iso:
                continue
            if best is None or (doc["effective_at"], doc["id"]) > \
                    (best["effective_at"], best["id"]):
                best = doc
        if best is None:
            return None
        return Motd(user=best["user"], message=best["message"],
                    set_by=best["set_by"], effective_at=best["effective_at"])

    # --- messaging -----------------------------------------------------------------------

    def send_message(self, sender: str, recipient: str, body: str) -> Message:
        if not body.strip():
            raise EmptyBody("message body must be non-empty")
        if not self._directory.exists(recipient):
            raise UnknownRecipient(recipient)
        doc = {"id": eho.new_id(), "sender": sender, "recipient": recipient,
               "body": body, "created_at": eho.isoformat(self._clock())}
        self._store.put(MESSAGES, doc["id"], doc)
        self._notify(recipient, "NewMessage", doc["id"])
        self._audit_op(sender, Action.CREATE, SubModule.CS, doc["id"],
                       "message-send")
        return Message(id=doc["id"], sender=sender, recipient=recipient,
                       body=body, created_at=doc["created_at"])

    def list_inbox(self, user: str) -> list[Message]:
        docs = [doc for _id, doc in self._store.scan(MESSAGES)
                if doc["recipient"] == user]
        docs.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [Message(id=d["id"], sender=d["sender"],
                        recipient=d["recipient"], body=d["body"],
                        created_at=d["created_at"]) for d in docs]

    def list_thread(self, actor: str, a: str, b: str) -> list[Message]:
        if actor not in (a, b):
            raise NotVisible("messages are private to their two parties")
        docs = [doc for _id, doc in self._store.scan(MESSAGES)
                if {doc["sender"], doc["recipient"]} == {a, b}]
        docs.sort(key=lambda d: (d["created_at"], d["id"]), reverse=True)
        return [Message(id=d["id"], sender=d["sender"],
                        recipient=d["recipient"], body=d["body"],
                        created_at=d["created_at"]) for d in docs]

    # --- friend suggestions ------------------------------------------------------------------

    def suggest_friends(self, user: str, k: int = 5) -> list[str]:
        my_friends = self.friends(user)
        my_groups = self.groups_of(user)
        scored = []
        for principal in self._directory.all():
            candidate = principal.id
            if candidate == user:
                continue
            if self.connection_between(user, candidate) is not None:
                continue
            shared_groups = len(my_groups & self.groups_of(candidate))
            mutual = len(my_friends & self.friends(candidate))
            scored.append((-shared_groups, -mutual, candidate))
        scored.sort()
        return [cand for _g, _m, cand in scored[:k]]
