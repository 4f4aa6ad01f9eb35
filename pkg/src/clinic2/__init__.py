"""clinic2: a patient-empowerment e-health platform.

Core pieces: an empowerment policy compiled from a declarative config and
resolved as a total permission function; a universal health-object record
envelope over an embedded document store; personal, social, and medical
care services; a cyclic care-episode engine; and an assessment library for
instrument scoring, descriptive statistics, and reliability analysis.
"""
from .assessment import (
    HEALTH_LITERACY,
    SATISFACTION,
    InstrumentKind,
    InstrumentSpec,
    ItemMatrix,
    Phase,
    PrePostReport,
    ResponseSheet,
    StatsSummary,
    cronbach_alpha,
    descriptive_stats,
    pre_post_report,
    score_response,
)
from .care import Alternative, CareCycleService, CareEpisode, Evaluation, Stage
from .eho import AuditEvent, AuditLog, HealthObject, wrap_eho
from .medical import AccessGrant, CareRequest, MedicalService, RequestKind, RequestState
from .personal import DiaryEntry, HealthPlan, PersonalHealthService, PlanGoal
from .policy import (
    Action,
    Decision,
    EmpowermentPolicy,
    Level,
    ObjectClass,
    Outcome,
    PolicyHandle,
    Relation,
    Role,
    SubModule,
    default_policy,
    dump_policy,
    load_policy,
    resolve,
)
from .principals import Directory, Principal
from .social import (
    Connection,
    ConnectionVerb,
    FeedItem,
    FeedKind,
    Motd,
    Post,
    PostKind,
    SocialService,
)
from .store import DocumentStore

__version__ = "0.1.0"

__all__ = [
    "Action", "AccessGrant", "Alternative", "AuditEvent", "AuditLog",
    "CareCycleService", "CareEpisode", "CareRequest", "Connection",
    "ConnectionVerb", "Decision", "DiaryEntry", "Directory", "DocumentStore",
    "EmpowermentPolicy", "Evaluation", "FeedItem", "FeedKind",
    "HEALTH_LITERACY", "HealthObject", "HealthPlan", "InstrumentKind",
    "InstrumentSpec", "ItemMatrix", "Level", "MedicalService", "Motd",
    "ObjectClass", "Outcome", "PersonalHealthService", "Phase", "PlanGoal",
    "PolicyHandle", "Post", "PostKind", "PrePostReport", "Principal",
    "Relation", "RequestKind", "RequestState", "ResponseSheet", "Role",
    "SATISFACTION", "SocialService", "Stage", "StatsSummary", "SubModule",
    "cronbach_alpha", "default_policy", "descriptive_stats", "dump_policy",
    "load_policy", "pre_post_report", "resolve", "score_response",
    "wrap_eho",
]
