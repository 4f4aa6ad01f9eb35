"""Policy loading, dumping, and the total resolve() function."""
from __future__ import annotations

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clinic2.errors import (
    ForbiddenOverride,
    MissingSubModule,
    PolicyParseError,
    UnknownCode,
)
from clinic2.policy import (
    ALL_SUBMODULES,
    DEFAULT_POLICY_TEXT,
    Action,
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

from oracles import expected_outcome


def _policy_with(levels: dict[str, str]):
    base = {code.value: "full" for code in ALL_SUBMODULES}
    base.update(levels)
    lines = ["version = 1"] + [f"{k} = {v}" for k, v in base.items()]
    return load_policy("\n".join(lines))


# --- registry and types -------------------------------------------------------

def test_registry_is_total_and_closed():
    assert len(ALL_SUBMODULES) == 13
    for code in ALL_SUBMODULES:
        assert code.object_class in ObjectClass
    personal = [c for c in ALL_SUBMODULES if c.object_class is ObjectClass.PERSONAL]
    social = [c for c in ALL_SUBMODULES if c.object_class is ObjectClass.SOCIAL]
    medical = [c for c in ALL_SUBMODULES if c.object_class is ObjectClass.MEDICAL]
    assert {c.value for c in personal} == {"ID", "HB", "EX", "SE", "HP", "AC"}
    assert {c.value for c in social} == {"CS", "KM"}
    assert {c.value for c in medical} == {"XM", "EA", "EP", "TM", "RS"}


def test_levels_totally_ordered():
    assert Level.NONE < Level.PARTIAL < Level.FULL


# --- load_policy ------------------------------------------------------------------

def test_default_config_levels():
    policy = default_policy()
    assert policy.level_of(SubModule.HB) is Level.FULL
    assert policy.level_of(SubModule.XM) is Level.PARTIAL
    assert policy.level_of(SubModule.TM) is Level.NONE
    assert policy.level_of(SubModule.KM) is Level.PARTIAL
    # re-check totality with a second pass over the enum
    for code in SubModule:
        assert policy.level_of(code) in Level


def test_missing_submodule_rejected():
    text = "\n".join(f"{c.value} = full" for c in ALL_SUBMODULES
                     if c is not SubModule.TM)
    with pytest.raises(MissingSubModule) as exc:
        load_policy(text)
    assert "TM" in str(exc.value)


def test_unknown_code_rejected():
    with pytest.raises(UnknownCode):
        load_policy(DEFAULT_POLICY_TEXT + "ZZ = full\n")


def test_duplicate_assignment_rejected():
    with pytest.raises(PolicyParseError):
        load_policy(DEFAULT_POLICY_TEXT + "HB = none\n")


def test_bad_level_rejected():
    text = DEFAULT_POLICY_TEXT.replace("HB = full", "HB = sometimes")
    with pytest.raises(PolicyParseError):
        load_policy(text)


def test_forbidden_override_cross_patient_write():
    text = DEFAULT_POLICY_TEXT + "override allow XM Update Patient Unrelated\n"
    with pytest.raises(ForbiddenOverride):
        load_policy(text)


def test_forbidden_override_wildcards_count():
    text = DEFAULT_POLICY_TEXT + "override allow * * * *\n"
    with pytest.raises(ForbiddenOverride):
        load_policy(text)


def test_override_deny_is_fine():
    text = DEFAULT_POLICY_TEXT + "override deny CS Create Patient Owner\n"
    policy = load_policy(text)
    decision = resolve(policy, Role.PATIENT, Relation.OWNER, SubModule.CS,
                       Action.CREATE)
    assert decision.outcome is Outcome.DENY
    assert decision.reason.startswith("override:")


def test_owner_scoped_allow_override_is_fine():
    text = DEFAULT_POLICY_TEXT + "override allow HP Update Patient Owner\n"
    policy = load_policy(text)
    assert len(policy.overrides) == 1


def test_comments_and_whitespace_tolerated():
    text = "# config\n\nversion = 3\n" + "\n".join(
        f"  {c.value} = full  # full control" for c in ALL_SUBMODULES)
    policy = load_policy(text)
    assert policy.version == 3


def test_dump_roundtrip_byte_identical_for_canonical_docs():
    assert dump_policy(load_policy(DEFAULT_POLICY_TEXT)) == DEFAULT_POLICY_TEXT
    with_override = DEFAULT_POLICY_TEXT + "override deny CS Create Patient Owner\n"
    assert dump_policy(load_policy(with_override)) == with_override


def test_dump_normalizes_noncanonical_input():
    messy = "# hi\n" + DEFAULT_POLICY_TEXT.replace("full", "FULL")
    assert dump_policy(load_policy(messy)) == DEFAULT_POLICY_TEXT


# --- resolve(): spec examples ---------------------------------------------------------

def test_full_owner_create_allowed():
    d = resolve(default_policy(), Role.PATIENT, Relation.OWNER, SubModule.HB,
                Action.CREATE)
    assert d.outcome is Outcome.ALLOW


def test_partial_owner_update_denied():
    d = resolve(default_policy(), Role.PATIENT, Relation.OWNER, SubModule.XM,
                Action.UPDATE)
    assert d.outcome is Outcome.DENY


def test_unrelated_patient_read_denied():
    d = resolve(default_policy(), Role.PATIENT, Relation.UNRELATED,
                SubModule.XM, Action.READ)
    assert d.outcome is Outcome.DENY


def test_partial_owner_create_is_request():
    d = resolve(default_policy(), Role.PATIENT, Relation.OWNER, SubModule.EA,
                Action.CREATE)
    assert d.outcome is Outcome.ALLOW_AS_REQUEST


def test_clinician_cannot_write_full_personal_submodule():
    d = resolve(default_policy(), Role.CLINICIAN, Relation.UNRELATED,
                SubModule.HB, Action.CREATE)
    assert d.outcome is Outcome.DENY


def test_clinician_writes_partial_medical():
    d = resolve(default_policy(), Role.CLINICIAN, Relation.UNRELATED,
                SubModule.XM, Action.CREATE)
    assert d.outcome is Outcome.ALLOW


def test_owner_reads_none_level():
    d = resolve(default_policy(), Role.PATIENT, Relation.OWNER, SubModule.TM,
                Action.READ)
    assert d.outcome is Outcome.ALLOW


def test_approve_denied_on_full():
    d = resolve(default_policy(), Role.CLINICIAN, Relation.UNRELATED,
                SubModule.HB, Action.APPROVE)
    assert d.outcome is Outcome.DENY


# --- totality, isolation, monotonicity -------------------------------------------------

def _all_cells():
    return itertools.product(Role, Relation, SubModule, Action)


def test_totality_every_cell_returns_a_decision():
    policy = default_policy()
    count = 0
    for role, relation, code, action in _all_cells():
        decision = resolve(policy, role, relation, code, action)
        assert decision.outcome in Outcome
        assert decision.reason
        count += 1
    assert count == 5 * 4 * 13 * 6


def test_matches_independent_mapping_oracle_on_default_policy():
    policy = default_policy()
    for role, relation, code, action in _all_cells():
        got = resolve(policy, role, relation, code, action).outcome.value
        want = expected_outcome(policy.level_of(code).value, role.value,
                                relation.value, code.value, action.value)
        assert got == want, (role, relation, code, action, got, want)


@pytest.mark.parametrize("level", ["full", "partial", "none"])
def test_matches_oracle_at_uniform_levels(level):
    policy = _policy_with({c.value: level for c in ALL_SUBMODULES})
    for role, relation, code, action in _all_cells():
        got = resolve(policy, role, relation, code, action).outcome.value
        want = expected_outcome(level, role.value, relation.value, code.value,
                                action.value)
        assert got == want, (role, relation, code, action, got, want)


def test_isolation_no_unrelated_patient_writes():
    for level in ("full", "partial", "none"):
        policy = _policy_with({c.value: level for c in ALL_SUBMODULES})
        for code, action in itertools.product(SubModule,
                                              (Action.CREATE, Action.UPDATE,
                                               Action.DELETE)):
            d = resolve(policy, Role.PATIENT, Relation.UNRELATED, code, action)
            assert d.outcome is not Outcome.ALLOW


def test_monotonicity_owner_allow_cells_grow_with_level():
    def owner_allow_set(policy, code):
        cells = set()
        for role in (Role.PATIENT, Role.FAMILY_DELEGATE):
            for action in Action:
                d = resolve(policy, role, Relation.OWNER, code, action)
                if d.outcome is Outcome.ALLOW:
                    cells.add((role, action))
        return cells

    for code in SubModule:
        per_level = {}
        for level in ("none", "partial", "full"):
            policy = _policy_with({code.value: level})
            per_level[level] = owner_allow_set(policy, code)
        assert per_level["none"] <= per_level["partial"] <= per_level["full"]


def test_monotonicity_holds_with_deny_overrides_active():
    suffix = "override deny HP Update Patient Owner\n"
    def owner_allow_set(level):
        text = dump_policy(_policy_with({"HP": level})) + suffix
        policy = load_policy(text)
        return {a for a in Action
                if resolve(policy, Role.PATIENT, Relation.OWNER, SubModule.HP,
                           a).outcome is Outcome.ALLOW}
    assert owner_allow_set("none") <= owner_allow_set("partial") <= \
        owner_allow_set("full")


def test_allow_as_request_only_partial_owner_side():
    for level in ("full", "partial", "none"):
        policy = _policy_with({c.value: level for c in ALL_SUBMODULES})
        for role, relation, code, action in _all_cells():
            d = resolve(policy, role, relation, code, action)
            if d.outcome is Outcome.ALLOW_AS_REQUEST:
                assert level == "partial"
                assert relation is Relation.OWNER


# --- properties over arbitrary level assignments ------------------------------------------

_levels_strategy = st.fixed_dictionaries(
    {code.value: st.sampled_from(["full", "partial", "none"])
     for code in ALL_SUBMODULES})


@given(_levels_strategy)
@settings(max_examples=60, deadline=None)
def test_isolation_holds_for_arbitrary_level_maps(levels):
    policy = _policy_with(levels)
    for code, action in itertools.product(SubModule, (Action.CREATE,
                                                      Action.UPDATE,
                                                      Action.DELETE)):
        d = resolve(policy, Role.PATIENT, Relation.UNRELATED, code, action)
        assert d.outcome is not Outcome.ALLOW


@given(_levels_strategy)
@settings(max_examples=30, deadline=None)
def test_oracle_agreement_for_arbitrary_level_maps(levels):
    policy = _policy_with(levels)
    for role, relation, code, action in _all_cells():
        got = resolve(policy, role, relation, code, action).outcome.value
        want = expected_outcome(levels[code.value], role.value, relation.value,
                                code.value, action.value)
        assert got == want


# --- atomic replacement -----------------------------------------------------------------

def test_policy_handle_swap_requires_newer_version():
    handle = PolicyHandle(default_policy())
    same_version = load_policy(DEFAULT_POLICY_TEXT)
    with pytest.raises(ValueError):
        handle.swap(same_version)
    newer = load_policy(DEFAULT_POLICY_TEXT.replace("version = 1",
                                                    "version = 2"))
    handle.swap(newer)
    assert handle.current.version == 2
