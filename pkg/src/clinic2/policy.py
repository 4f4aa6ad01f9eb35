"""Empowerment policy: sub-module registry, level configuration, and the
total permission-resolution function every other module consults.

The policy is loaded from a declarative text document (grammar in
docs/policy-format.md) and compiled into an immutable ``EmpowermentPolicy``.
``resolve`` is a pure, total function over
(role x relation x sub-module x action); it never raises.

Level semantics, fixed here once for the whole platform:

* ``full``    - the record owner controls the sub-module: create, read,
                update, delete, and direct requests all allowed.
* ``partial`` - the owner reads and requests; staff approve and write.
                Owner-side create/request come back as ``ALLOW_AS_REQUEST``
                and must go through a pending-approval path.
* ``none``    - the owner may still read their own records, but all writes
                and requests are staff-only.

Family delegates inherit the owner relation of their linked patient but are
read-only at every level.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from enum import Enum

from .errors import (
    ForbiddenOverride,
    MissingSubModule,
    PolicyParseError,
    UnknownCode,
)


class ObjectClass(str, Enum):
    PERSONAL = "Personal"
    SOCIAL = "Social"
    MEDICAL = "Medical"


class SubModule(str, Enum):
    """The thirteen sub-module codes of the platform, closed registry."""

    ID = "ID"  # personal identity
    HB = "HB"  # daily habits diary
    EX = "EX"  # exercise diary
    SE = "SE"  # spiritual / emotional diary
    HP = "HP"  # health plan
    AC = "AC"  # account statement
    CS = "CS"  # conversation: status, forum, comments
    KM = "KM"  # knowledge management (verified content)
    XM = "XM"  # examination / consultation records
    EA = "EA"  # e-appointment
    EP = "EP"  # e-prescription
    TM = "TM"  # e-treatment
    RS = "RS"  # referral / service request

    @property
    def object_class(self) -> ObjectClass:
        return _REGISTRY[self]


# Closed registry. RS is filed under Medical: referral requests ride the
# same request/approve machinery as appointments and prescriptions.
_REGISTRY: dict[SubModule, ObjectClass] = {
    SubModule.ID: ObjectClass.PERSONAL,
    SubModule.HB: ObjectClass.PERSONAL,
    SubModule.EX: ObjectClass.PERSONAL,
    SubModule.SE: ObjectClass.PERSONAL,
    SubModule.HP: ObjectClass.PERSONAL,
    SubModule.AC: ObjectClass.PERSONAL,
    SubModule.CS: ObjectClass.SOCIAL,
    SubModule.KM: ObjectClass.SOCIAL,
    SubModule.XM: ObjectClass.MEDICAL,
    SubModule.EA: ObjectClass.MEDICAL,
    SubModule.EP: ObjectClass.MEDICAL,
    SubModule.TM: ObjectClass.MEDICAL,
    SubModule.RS: ObjectClass.MEDICAL,
}

ALL_SUBMODULES: tuple[SubModule, ...] = tuple(SubModule)


class Level(str, Enum):
    FULL = "full"
    PARTIAL = "partial"
    NONE = "none"

    @property
    def rank(self) -> int:
        return {"none": 0, "partial": 1, "full": 2}[self.value]

    def __lt__(self, other: "Level") -> bool:  # type: ignore[override]
        return self.rank < other.rank


class Role(str, Enum):
    PATIENT = "Patient"
    FAMILY_DELEGATE = "FamilyDelegate"
    CLINICIAN = "Clinician"
    HEALTH_EDUCATOR = "HealthEducator"
    ADMIN = "Admin"


STAFF_ROLES = frozenset({Role.CLINICIAN, Role.HEALTH_EDUCATOR, Role.ADMIN})


class Relation(str, Enum):
    OWNER = "Owner"
    FRIEND = "Friend"
    GRANTED_CLINICIAN = "GrantedClinician"
    UNRELATED = "Unrelated"


class Action(str, Enum):
    CREATE = "Create"
    READ = "Read"
    UPDATE = "Update"
    DELETE = "Delete"
    REQUEST = "Request"
    APPROVE = "Approve"


WRITE_ACTIONS = frozenset({Action.CREATE, Action.UPDATE, Action.DELETE})


class Outcome(str, Enum):
    ALLOW = "Allow"
    DENY = "Deny"
    ALLOW_AS_REQUEST = "AllowAsRequest"


@dataclass(frozen=True)
class Decision:
    outcome: Outcome
    reason: str

    def __post_init__(self) -> None:
        if not self.reason:
            raise ValueError("Decision.reason must be non-empty")

    @property
    def allowed(self) -> bool:
        return self.outcome is Outcome.ALLOW


@dataclass(frozen=True)
class Override:
    """One override stanza. ``None`` in a field means wildcard (``*``)."""

    effect: Outcome  # ALLOW or DENY only
    submodule: SubModule | None
    action: Action | None
    role: Role | None
    relation: Relation | None

    def matches(self, role: Role, relation: Relation, submodule: SubModule,
                action: Action) -> bool:
        return (
            (self.submodule is None or self.submodule is submodule)
            and (self.action is None or self.action is action)
            and (self.role is None or self.role is role)
            and (self.relation is None or self.relation is relation)
        )


@dataclass(frozen=True)
class EmpowermentPolicy:
    levels: dict[SubModule, Level]
    overrides: tuple[Override, ...] = ()
    version: int = 1

    def level_of(self, submodule: SubModule) -> Level:
        return self.levels[submodule]


# --- parsing -----------------------------------------------------------------

_WILDCARD = "*"


def _parse_enum(enum_cls, token: str, line_no: int, line: str):
    if token == _WILDCARD:
        return None
    for member in enum_cls:
        if member.value.lower() == token.lower():
            return member
    raise PolicyParseError(line_no, line, f"unknown {enum_cls.__name__} {token!r}")


def load_policy(text: str) -> EmpowermentPolicy:
    """Parse and validate a policy document.

    The load is atomic: any parse error, missing or unknown code, duplicate
    assignment, or forbidden override rejects the whole document.
    """
    levels: dict[SubModule, Level] = {}
    overrides: list[Override] = []
    version = 1
    seen_version = False

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "override":
            if len(tokens) != 6:
                raise PolicyParseError(
                    line_no, raw,
                    "override needs: override <allow|deny> <code|*> <action|*> <role|*> <relation|*>",
                )
            effect_tok = tokens[1].lower()
            if effect_tok not in ("allow", "deny"):
                raise PolicyParseError(line_no, raw, f"bad override effect {tokens[1]!r}")
            effect = Outcome.ALLOW if effect_tok == "allow" else Outcome.DENY
            sub = tokens[2]
            if sub != _WILDCARD and sub not in SubModule.__members__:
                raise UnknownCode(sub)
            overrides.append(Override(
                effect=effect,
                submodule=None if sub == _WILDCARD else SubModule[sub],
                action=_parse_enum(Action, tokens[3], line_no, raw),
                role=_parse_enum(Role, tokens[4], line_no, raw),
                relation=_parse_enum(Relation, tokens[5], line_no, raw),
            ))
            continue

        if "=" not in line:
            raise PolicyParseError(line_no, raw, "expected '<code> = <level>'")
        key, _, value = (part.strip() for part in line.partition("="))
        if key == "version":
            if seen_version:
                raise PolicyParseError(line_no, raw, "duplicate version line")
            try:
                version = int(value)
            except ValueError:
                raise PolicyParseError(line_no, raw, f"bad version {value!r}") from None
            if version < 1:
                raise PolicyParseError(line_no, raw, "version must be >= 1")
            seen_version = True
            continue
        if key not in SubModule.__members__:
            raise UnknownCode(key)
        code = SubModule[key]
        if code in levels:
            raise PolicyParseError(line_no, raw, f"duplicate assignment for {key}")
        level_lc = value.lower()
        if level_lc not in Level._value2member_map_:
            raise PolicyParseError(line_no, raw, f"unknown level {value!r}")
        levels[code] = Level(level_lc)

    for code in ALL_SUBMODULES:
        if code not in levels:
            raise MissingSubModule(code.value)

    policy = EmpowermentPolicy(levels=levels, overrides=tuple(overrides), version=version)
    _validate_overrides(policy)
    return policy


def _validate_overrides(policy: EmpowermentPolicy) -> None:
    """Reject any override that would hand a non-owner patient write access
    to another patient's records."""
    non_owner = [r for r in Relation if r is not Relation.OWNER]
    for idx, ov in enumerate(policy.overrides):
        if ov.effect is not Outcome.ALLOW:
            continue
        roles = [ov.role] if ov.role is not None else list(Role)
        relations = [ov.relation] if ov.relation is not None else list(Relation)
        actions = [ov.action] if ov.action is not None else list(Action)
        if (Role.PATIENT in roles
                and any(rel in non_owner for rel in relations)
                and any(act in WRITE_ACTIONS for act in actions)):
            raise ForbiddenOverride(
                f"override #{idx + 1} grants Patient write access outside Owner relation"
            )


def dump_policy(policy: EmpowermentPolicy) -> str:
    """Serialize to canonical form.

    Canonical documents round-trip byte-identically through
    ``dump_policy(load_policy(text)) == text``; non-canonical input (extra
    whitespace, comments) is normalized.
    """
    lines = [f"version = {policy.version}"]
    for code in ALL_SUBMODULES:
        lines.append(f"{code.value} = {policy.levels[code].value}")
    for ov in policy.overrides:
        lines.append("override {} {} {} {} {}".format(
            "allow" if ov.effect is Outcome.ALLOW else "deny",
            ov.submodule.value if ov.submodule else _WILDCARD,
            ov.action.value if ov.action else _WILDCARD,
            ov.role.value if ov.role else _WILDCARD,
            ov.relation.value if ov.relation else _WILDCARD,
        ))
    return "\n".join(lines) + "\n"


DEFAULT_POLICY_TEXT = dump_policy(EmpowermentPolicy(levels={
    SubModule.ID: Level.FULL,
    SubModule.HB: Level.FULL,
    SubModule.EX: Level.FULL,
    SubModule.SE: Level.FULL,
    SubModule.HP: Level.FULL,
    SubModule.AC: Level.FULL,
    SubModule.CS: Level.FULL,
    SubModule.KM: Level.PARTIAL,
    SubModule.XM: Level.PARTIAL,
    SubModule.EA: Level.PARTIAL,
    SubModule.EP: Level.PARTIAL,
    SubModule.TM: Level.NONE,
    SubModule.RS: Level.PARTIAL,
}))


def default_policy() -> EmpowermentPolicy:
    return load_policy(DEFAULT_POLICY_TEXT)


# --- resolution -----------------------------------------------------------------

def resolve(policy: EmpowermentPolicy, actor_role: Role, relation: Relation,
            submodule: SubModule, action: Action) -> Decision:
    """Total permission resolution. Never raises; always returns a Decision."""
    for idx, ov in enumerate(policy.overrides):
        if ov.matches(actor_role, relation, submodule, action):
            return Decision(ov.effect, f"override:{idx + 1}")

    level = policy.level_of(submodule)
    owner_side = relation is Relation.OWNER
    staff = actor_role in STAFF_ROLES

    # Owners (and their delegates) read their own records at every level.
    if owner_side and action is Action.READ:
        return Decision(Outcome.ALLOW, "owner-read")

    # Full empowerment: the owner controls the sub-module outright.
    # Delegates stay read-only.
    if (level is Level.FULL and owner_side
            and actor_role is not Role.FAMILY_DELEGATE
            and action in (Action.CREATE, Action.UPDATE, Action.DELETE, Action.REQUEST)):
        return Decision(Outcome.ALLOW, "full-owner-control")

    # Partial / none: staff write and approve.
    if staff and level in (Level.PARTIAL, Level.NONE):
        if action in (Action.CREATE, Action.UPDATE):
            return Decision(Outcome.ALLOW, "staff-write")
        if action is Action.APPROVE:
            return Decision(Outcome.ALLOW, "staff-approve")

    # Partial: the owner's create/request goes to the approval queue.
    if (level is Level.PARTIAL and owner_side and actor_role is Role.PATIENT
            and action in (Action.CREATE, Action.REQUEST)):
        return Decision(Outcome.ALLOW_AS_REQUEST, "partial-owner-request")

    # Consent-based medical reads for granted clinicians.
    if (relation is Relation.GRANTED_CLINICIAN and staff
            and action is Action.READ
            and submodule.object_class is ObjectClass.MEDICAL):
        return Decision(Outcome.ALLOW, "granted-read")

    if action is Action.READ:
        # The knowledge base is a resource centre readable by all users.
        if submodule is SubModule.KM:
            return Decision(Outcome.ALLOW, "knowledge-public-read")
        if submodule.object_class is ObjectClass.SOCIAL and relation is Relation.FRIEND:
            return Decision(Outcome.ALLOW, "friend-social-read")

    return Decision(Outcome.DENY, "default-deny")


# --- atomic replacement --------------------------------------------------------------

class PolicyHandle:
    """Holds the current policy; replacement is an atomic swap keyed by version.

    Reads are lock-free attribute reads; in-flight callers keep whatever
    policy object they already resolved against.
    """

    def __init__(self, policy: EmpowermentPolicy):
        self._policy = policy
        self._lock = threading.Lock()

    @property
    def current(self) -> EmpowermentPolicy:
        return self._policy

    def swap(self, replacement: EmpowermentPolicy) -> EmpowermentPolicy:
        with self._lock:
            if replacement.version <= self._policy.version:
                raise ValueError(
                    f"replacement version {replacement.version} not greater "
                    f"than current {self._policy.version}"
                )
            self._policy = replacement
            return replacement
