"""Care episodes: one patient problem advancing through five cyclic stages.

The stage graph is fixed: ProblemFinding -> ProblemSolving -> Choice ->
Execution -> Evaluation, then either Closed (resolved) or back to
ProblemFinding for another cycle (unresolved). Six legal edges, nothing
else. Closed episodes reject every mutation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable

from . import eho
from .eho import AuditLog
from .errors import (
    EmptyStatement,
    IllegalTransition,
    MissingPayload,
    PermissionDenied,
    UnknownAlternative,
    UnknownRecord,
    ValidationError,
)
from .policy import Action, Role, SubModule
from .principals import Directory
from .store import DocumentStore

EPISODES = "episodes"
EHOS = "ehos"
REQUESTS = "requests"


class Stage(str, Enum):
    PROBLEM_FINDING = "ProblemFinding"
    PROBLEM_SOLVING = "ProblemSolving"
    CHOICE = "Choice"
    EXECUTION = "Execution"
    EVALUATION = "Evaluation"
    CLOSED = "Closed"


# Forward edges; the two exits from Evaluation depend on the recorded
# resolution and are handled explicitly in advance().
_NEXT: dict[Stage, Stage] = {
    Stage.PROBLEM_FINDING: Stage.PROBLEM_SOLVING,
    Stage.PROBLEM_SOLVING: Stage.CHOICE,
    Stage.CHOICE: Stage.EXECUTION,
    Stage.EXECUTION: Stage.EVALUATION,
}


@dataclass(frozen=True)
class Alternative:
    description: str
    proposed_by: str
    supporting_refs: tuple[str, ...] = ()


@dataclass(frozen=True)
class Evaluation:
    outcome_note: str
    resolved: bool
    evaluated_by: str
    timestamp: str = ""


@dataclass
class CareEpisode:
    id: str
    patient: str
    stage: Stage
    problem_statement: str
    alternatives: list[dict] = field(default_factory=list)
    chosen: int | None = None
    executions: list[str] = field(default_factory=list)
    evaluations: list[dict] = field(default_factory=list)
    cycle_count: int = 1
    parent_episode: str | None = None
    history: list[dict] = field(default_factory=list)
    created_at: str = ""
    version: int = 1

    def to_doc(self) -> dict:
        return {
            "id": self.id, "patient": self.patient, "stage": self.stage.value,
            "problem_statement": self.problem_statement,
            "alternatives": self.alternatives, "chosen": self.chosen,
            "executions": self.executions, "evaluations": self.evaluations,
            "cycle_count": self.cycle_count,
            "parent_episode": self.parent_episode, "history": self.history,
            "created_at": self.created_at, "version": self.version,
        }

    @staticmethod
    def from_doc(doc: dict) -> "CareEpisode":
        data = dict(doc)
        data["stage"] = Stage(data["stage"])
        return CareEpisode(**data)


class CareCycleService:
    def __init__(self, store: DocumentStore, directory: Directory,
                 audit: AuditLog, clock: Callable[[], datetime] = eho.utcnow):
        self._store = store
        self._directory = directory
        self._audit = audit
        self._clock = clock

    def _audit_op(self, actor: str, action: Action, target: str,
                  detail: str) -> None:
        self._audit.record(actor, self._directory.role_of(actor).value,
                           action.value, SubModule.XM.value, target, detail,
                           now=self._clock())

    def _may_write(self, actor: str, patient: str) -> bool:
        if actor == patient and self._directory.role_of(actor) is Role.PATIENT:
            return True
        return self._directory.role_of(actor) is Role.CLINICIAN

    def _may_view(self, actor: str, patient: str) -> bool:
        if self._directory.is_owner_side(actor, patient):
            return True
        return self._directory.role_of(actor) in (Role.CLINICIAN, Role.ADMIN)

    # --- operations ----------------------------------------------------------

    def open_episode(self, actor: str, patient: str, problem_statement: str,
                     parent_episode: str | None = None) -> CareEpisode:
        if not problem_statement.strip():
            raise EmptyStatement("an episode opens on a problem statement")
        role = self._directory.role_of(actor)
        allowed = ((actor == patient and role is Role.PATIENT)
                   or self._directory.delegate_target(actor) == patient
                   or role is Role.CLINICIAN)
        if not allowed:
            raise PermissionDenied("episodes open for the patient, their "
                                   "delegate, or a clinician")
        if parent_episode is not None and \
                self._store.get(EPISODES, parent_episode) is None:
            raise UnknownRecord(f"parent episode {parent_episode}")
        now = eho.isoformat(self._clock())
        # history records stage transitions; the opening ProblemFinding
        # state is carried by created_at and the stage field itself.
        episode = CareEpisode(
            id=eho.new_id(), patient=patient, stage=Stage.PROBLEM_FINDING,
            problem_statement=problem_statement, parent_episode=parent_episode,
            created_at=now,
        )
        self._store.put(EPISODES, episode.id, episode.to_doc())
        self._audit_op(actor, Action.CREATE, episode.id, "episode-open")
        return episode

    def get_episode(self, actor: str, episode_id: str) -> CareEpisode:
        doc = self._store.get(EPISODES, episode_id)
        if doc is None:
            raise UnknownRecord(f"episode {episode_id}")
        if not self._may_view(actor, doc["patient"]):
            raise PermissionDenied("not a party to this episode")
        return CareEpisode.from_doc(doc)

    def advance(self, actor: str, episode_id: str, to_stage: Stage,
                payload: Any = None) -> CareEpisode:
        doc = self._store.get(EPISODES, episode_id)
        if doc is None:
            raise UnknownRecord(f"episode {episode_id}")
        if not self._may_write(actor, doc["patient"]):
            raise PermissionDenied("only the patient or a clinician advances "
                                   "an episode")
        episode = CareEpisode.from_doc(doc)
        version = self._store.version(EPISODES, episode_id)
        if episode.stage is Stage.CLOSED:
            raise IllegalTransition("closed episodes reject every mutation")

        cycle_before = episode.cycle_count
        if episode.stage is Stage.EVALUATION:
            self._apply_resolution_exit(episode, to_stage)
        else:
            expected = _NEXT[episode.stage]
            if to_stage is not expected:
                raise IllegalTransition(
                    f"{episode.stage.value} -> {to_stage.value} is not an edge")
            self._apply_forward(actor, episode, to_stage, payload)

        # An unresolved evaluation bumps cycle_count on entry; the event
        # itself still belongs to the cycle being evaluated.
        event_cycle = (cycle_before if episode.stage is Stage.EVALUATION
                       else episode.cycle_count)
        now = eho.isoformat(self._clock())
        episode.history.append({"stage": episode.stage.value,
                                "cycle": event_cycle, "at": now,
                                "by": actor})
        episode.version += 1
        self._store.put(EPISODES, episode_id, episode.to_doc(),
                        expected_version=version)
        self._audit_op(actor, Action.UPDATE, episode_id,
                       f"advance:{episode.stage.value}")
        return episode

    def _apply_forward(self, actor: str, episode: CareEpisode, to_stage: Stage,
                       payload: Any) -> None:
        if to_stage is Stage.PROBLEM_SOLVING:
            if not payload:
                raise MissingPayload("problem solving needs alternatives")
            alternatives = []
            for alt in payload:
                if isinstance(alt, Alternative):
                    alt_doc = {"description": alt.description,
                               "proposed_by": alt.proposed_by,
                               "supporting_refs": list(alt.supporting_refs)}
                else:
                    alt_doc = {"description": alt.get("description", ""),
                               "proposed_by": alt.get("proposed_by", actor),
                               "supporting_refs": list(alt.get("supporting_refs", []))}
                if not alt_doc["description"].strip():
                    raise ValidationError("alternative needs a description")
                proposer_role = self._directory.role_of(alt_doc["proposed_by"])
                if proposer_role not in (Role.PATIENT, Role.CLINICIAN):
                    raise ValidationError(
                        "alternatives come from the patient or a clinician")
                alternatives.append(alt_doc)
            episode.alternatives.extend(alternatives)
            episode.stage = Stage.PROBLEM_SOLVING
        elif to_stage is Stage.CHOICE:
            if payload is None:
                raise MissingPayload("choice needs the chosen alternative index")
            if not isinstance(payload, int) or isinstance(payload, bool) \
                    or not 0 <= payload < len(episode.alternatives):
                raise UnknownAlternative(
                    f"index {payload!r} of {len(episode.alternatives)}")
            episode.chosen = payload
            episode.stage = Stage.CHOICE
        elif to_stage is Stage.EXECUTION:
            if not payload:
                raise MissingPayload("execution needs a record reference")
            ref = str(payload)
            self._check_execution_ref(ref, episode.patient)
            episode.executions.append(ref)
            episode.stage = Stage.EXECUTION
        elif to_stage is Stage.EVALUATION:
            if payload is None:
                raise MissingPayload("evaluation needs an outcome record")
            if isinstance(payload, Evaluation):
                record = {"outcome_note": payload.outcome_note,
                          "resolved": payload.resolved,
                          "evaluated_by": payload.evaluated_by}
            else:
                try:
                    record = {"outcome_note": payload["outcome_note"],
                              "resolved": bool(payload["resolved"]),
                              "evaluated_by": payload.get("evaluated_by", actor)}
                except (TypeError, KeyError):
                    raise MissingPayload(
                        "evaluation needs outcome_note and resolved") from None
            record["timestamp"] = eho.isoformat(self._clock())
            episode.evaluations.append(record)
            if not record["resolved"]:
                # The invariant cycle_count = 1 + unresolved evaluations
                # holds from the moment the evaluation is recorded.
                episode.cycle_count += 1
            episode.stage = Stage.EVALUATION
        else:
            raise IllegalTransition(f"-> {to_stage.value} is not an edge")

    def _apply_resolution_exit(self, episode: CareEpisode,
                               to_stage: Stage) -> None:
        last = episode.evaluations[-1]
        if to_stage is Stage.CLOSED:
            if not last["resolved"]:
                raise IllegalTransition("an unresolved evaluation loops back")
            episode.stage = Stage.CLOSED
        elif to_stage is Stage.PROBLEM_FINDING:
            if last["resolved"]:
                raise IllegalTransition("a resolved evaluation closes the episode")
            episode.stage = Stage.PROBLEM_FINDING
        else:
            raise IllegalTransition(
                f"Evaluation -> {to_stage.value} is not an edge")

    def _check_execution_ref(self, ref: str, patient: str) -> None:
        obj = self._store.get(EHOS, ref)
        if obj is not None:
            if obj["owner"] != patient:
                raise ValidationError("execution record belongs to another patient")
            return
        request = self._store.get(REQUESTS, ref)
        if request is not None:
            if request["patient"] != patient:
                raise ValidationError("care request belongs to another patient")
            return
        raise UnknownRecord(f"execution reference {ref}")

    def episode_report(self, actor: str, episode_id: str) -> dict:
        episode = self.get_episode(actor, episode_id)
        return {
            "episode": episode.id,
            "patient": episode.patient,
            "problem_statement": episode.problem_statement,
            "opened_at": episode.created_at,
            "stage": episode.stage.value,
            "cycle_count": episode.cycle_count,
            "stage_events": [dict(ev) for ev in episode.history],
            "alternatives": [dict(a) for a in episode.alternatives],
            "chosen": episode.chosen,
            "executions": list(episode.executions),
            "evaluations": [dict(ev) for ev in episode.evaluations],
            "parent_episode": episode.parent_episode,
        }

    def list_episodes(self, actor: str, patient: str) -> list[CareEpisode]:
        if not self._may_view(actor, patient):
            raise PermissionDenied("not a party to these episodes")
        docs = [doc for _id, doc in self._store.scan(EPISODES)
                if doc["patient"] == patient]
        docs.sort(key=lambda d: (d["created_at"], d["id"]))
        return [CareEpisode.from_doc(d) for d in docs]
