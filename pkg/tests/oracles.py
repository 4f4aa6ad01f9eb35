"""Independent oracles, deliberately written with plain loops and literal
tables so they share no code paths with the library they check."""
from __future__ import annotations

import math


# --- statistics ---------------------------------------------------------------

def mean_oracle(xs) -> float:
    total = 0.0
    for x in xs:
        total += x
    return total / len(xs)


def sample_sd_oracle(xs) -> float:
    m = mean_oracle(xs)
    acc = 0.0
    for x in xs:
        acc += (x - m) * (x - m)
    return math.sqrt(acc / (len(xs) - 1))


def sample_var_oracle(xs) -> float:
    m = mean_oracle(xs)
    acc = 0.0
    for x in xs:
        acc += (x - m) * (x - m)
    return acc / (len(xs) - 1)


def alpha_oracle(rows) -> float:
    """Brute-force reliability: item variances and total variance computed
    with explicit loops."""
    n = len(rows)
    k = len(rows[0])
    item_var_sum = 0.0
    for j in range(k):
        column = [rows[i][j] for i in range(n)]
        item_var_sum += sample_var_oracle(column)
    totals = [sum(rows[i]) for i in range(n)]
    total_var = sample_var_oracle(totals)
    return (k / (k - 1)) * (1.0 - item_var_sum / total_var)


# --- permission mapping table ----------------------------------------------------

# A second, independent encoding of the level/rights algebra. Written from
# the documented semantics:
#   full    - owner controls: create/read/update/delete/request
#   partial - owner reads and requests (as approval requests); staff
#             approve and write
#   none    - owner still reads; staff-only writes and approvals
# plus: delegates are read-only owners; granted clinicians read medical
# records; friends read social content; the knowledge base is public-read;
# everything else is denied.
STAFF = {"Clinician", "HealthEducator", "Admin"}
WRITES = {"Create", "Update", "Delete"}

MEDICAL_CODES = {"XM", "EA", "EP", "TM", "RS"}
SOCIAL_CODES = {"CS", "KM"}


def expected_outcome(level: str, role: str, relation: str, code: str,
                     action: str) -> str:
    owner = relation == "Owner"
    if owner and action == "Read":
        return "Allow"
    if level == "full" and owner and role != "FamilyDelegate" and \
            action in {"Create", "Update", "Delete", "Request"}:
        return "Allow"
    if role in STAFF and level in {"partial", "none"}:
        if action in {"Create", "Update"}:
            return "Allow"
        if action == "Approve":
            return "Allow"
    if level == "partial" and owner and role == "Patient" and \
            action in {"Create", "Request"}:
        return "AllowAsRequest"
    if relation == "GrantedClinician" and role in STAFF and \
            action == "Read" and code in MEDICAL_CODES:
        return "Allow"
    if action == "Read":
        if code == "KM":
            return "Allow"
        if code in SOCIAL_CODES and relation == "Friend":
            return "Allow"
    return "Deny"


# --- connection state machine ---------------------------------------------------------

# (state-before, verb, actor-is-requester) -> state-after, or None when
# illegal. state-before None means "no record yet".
CONNECTION_EDGES = {
    (None, "Request"): "Pending",
    ("Pending", "Accept"): "Accepted",   # non-requester only
    ("Pending", "Decline"): "Declined",  # non-requester only
    ("Accepted", "Unfriend"): "Removed",
}


def connection_transition(state: str | None, verb: str,
                          actor_is_requester: bool) -> str | None:
    after = CONNECTION_EDGES.get((state, verb))
    if after is None:
        return None
    if verb in ("Accept", "Decline") and actor_is_requester:
        return None
    return after


# --- care-cycle stage graph --------------------------------------------------------------

# Every legal edge; the two Evaluation exits depend on the last recorded
# resolution.
STAGE_EDGES = {
    ("ProblemFinding", "ProblemSolving"),
    ("ProblemSolving", "Choice"),
    ("Choice", "Execution"),
    ("Execution", "Evaluation"),
    ("Evaluation", "Closed"),         # resolved only
    ("Evaluation", "ProblemFinding"),  # unresolved only
}

ALL_STAGES = ["ProblemFinding", "ProblemSolving", "Choice", "Execution",
              "Evaluation", "Closed"]


# --- feed / visibility -------------------------------------------------------------------

def feed_oracle(events, viewer, friends, viewer_groups, limit):
    """Brute-force filter + sort + dedup over (subject, kind, ref,
    created_at, id, group) tuples."""
    audience = set(friends) | {viewer}
    visible = []
    for ev in events:
        if ev["subject"] in audience:
            visible.append(ev)
        elif ev["kind"] == "GroupPost" and ev.get("group") in viewer_groups:
            visible.append(ev)
    visible.sort(key=lambda e: (e["created_at"], e["id"]), reverse=True)
    seen, out = set(), []
    for ev in visible:
        if ev["ref"] in seen:
            continue
        seen.add(ev["ref"])
        out.append(ev)
        if len(out) >= limit:
            break
    return out


def post_visible_oracle(viewer, post, friends_of, group_members, posts_by_id):
    """Friend-graph / group reachability for one post document."""
    if post["author"] == viewer:
        return True
    if post["kind"] in ("KnowledgeItem", "KnowledgeQuestion"):
        return True
    if post.get("group"):
        return viewer in group_members.get(post["group"], set())
    if viewer in friends_of.get(post["author"], set()):
        return True
    if post.get("parent"):
        parent = posts_by_id.get(post["parent"])
        if parent is not None:
            return post_visible_oracle(viewer, parent, friends_of,
                                       group_members, posts_by_id)
    return False


def suggestion_oracle(user, principals, friends_of, groups_of, connected_pairs, k):
    """Ranking: shared groups desc, mutual friends desc, id asc."""
    rows = []
    for candidate in principals:
        if candidate == user:
            continue
        if tuple(sorted((user, candidate))) in connected_pairs:
            continue
        shared = len(groups_of.get(user, set()) & groups_of.get(candidate, set()))
        mutual = len(friends_of.get(user, set()) & friends_of.get(candidate, set()))
        rows.append((-shared, -mutual, candidate))
    rows.sort()
    return [c for _s, _m, c in rows[:k]]
