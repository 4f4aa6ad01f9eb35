"""Admin command line: config validation, fixture seeding, survey-fixture
reports, pre/post assessment reports, and serving the HTTP API.

Exit status is 0 on success and 1 on any validation failure; diagnostics
carry line/field detail where the input format allows it.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import timedelta
from importlib import resources
from pathlib import Path

from .. import assessment, eho
from ..errors import ClinicError, PolicyError
from ..policy import Role, dump_policy, load_policy
from ..social import PostKind
from .core import ENV_BIND, ENV_DATA_DIR, Clinic

FIXTURES = resources.files("clinic2.service") / "fixtures"

SEEDS = "seeds"


def _read_scores(path: str) -> list[float]:
    text = Path(path).read_text(encoding="utf-8").strip()
    if not text:
        raise ClinicError(f"{path}: empty score file")
    try:
        return [float(tok) for tok in text.replace("\n", ",").split(",") if tok.strip()]
    except ValueError as exc:
        raise ClinicError(f"{path}: {exc}") from None


def cmd_validate_config(args: argparse.Namespace) -> int:
    try:
        text = Path(args.path).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        policy = load_policy(text)
    except PolicyError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.dump:
        sys.stdout.write(dump_policy(policy))
    else:
        print(f"ok: version {policy.version}, 13 sub-modules, "
              f"{len(policy.overrides)} overrides")
    return 0


def cmd_report_survey(args: argparse.Namespace) -> int:
    name = {2: "table2_demographics.txt", 3: "table3_agreement.txt"}[args.table]
    sys.stdout.write((FIXTURES / name).read_text(encoding="utf-8"))
    return 0


_INSTRUMENTS = {
    "literacy": assessment.HEALTH_LITERACY,
    "satisfaction": assessment.SATISFACTION,
}


def cmd_report_prepost(args: argparse.Namespace) -> int:
    instrument = _INSTRUMENTS[args.instrument]
    try:
        pre = _read_scores(args.pre)
        post = _read_scores(args.post)
        report = assessment.pre_post_report(pre, post, instrument)
    except ClinicError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    if args.json:
        json.dump(report.to_dict(), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    else:
        print(report.render_text())
    return 0


# --- seeding ------------------------------------------------------------------

def _seed_record(clinic: Clinic, logins: dict[str, str], refs: dict[str, str],
                 kind: str, data: dict) -> str:
    if kind == "account":
        principal = clinic.accounts.create_account(
            data["login"], data["password"], Role(data["role"]),
            data["display_name"],
            delegate_of=logins.get(data["delegate_of"]) if data.get("delegate_of") else None)
        logins[data["login"]] = principal
        return principal
    if kind == "group":
        doc = clinic.social.create_group(logins[data["creator"]], data["name"])
        return doc["id"]
    if kind == "join":
        gid = data["group"].strip().lower().replace(" ", "-")
        clinic.social.join_group(logins[data["login"]], gid)
        return gid
    if kind == "connection":
        a, b = logins[data["a"]], logins[data["b"]]
        from ..social import ConnectionVerb
        clinic.social.manage_connection(a, b, ConnectionVerb.REQUEST)
        clinic.social.manage_connection(b, a, ConnectionVerb.ACCEPT)
        return f"{a}|{b}"
    if kind == "motd":
        effective = (eho.parse_ts(data["effective_at"])
                     if data.get("effective_at")
                     else clinic.clock() - timedelta(seconds=1))
        clinic.social.set_motd(logins[data["educator"]], logins[data["user"]],
                               data["message"], effective)
        return data["user"]
    if kind == "post":
        parent = refs.get(data["parent"]) if data.get("parent") else None
        post = clinic.social.post(logins[data["author"]],
                                  PostKind(data["kind"]), data["body"],
                                  parent=parent, group=data.get("group"))
        return post.id
    if kind == "statement":
        actor = logins[data.get("actor", "admin")]
        obj = clinic.personal.post_statement_line(
            actor, logins[data["patient"]], data["service"],
            data["date"], data["amount"], data["covered"])
        return obj.id
    if kind == "prescription":
        obj = clinic.medical.record_prescription(
            logins[data["clinician"]], logins[data["patient"]],
            data["drug"], data["dose"], data["refills"],
            data.get("instructions", ""))
        return obj.id
    raise ClinicError(f"unknown fixture type {kind!r}")


def seed_fixtures(clinic: Clinic, path: str | os.PathLike) -> tuple[int, int]:
    """Idempotent seed: each fixture id is applied at most once per store."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != "type|id|data":
        raise ClinicError(f"{path}: first line must be the header 'type|id|data'")
    # Rebuild the login -> principal map from prior seeding runs.
    logins: dict[str, str] = {}
    for principal in clinic.directory.all():
        login = clinic.accounts.login_of(principal.id)
        if login:
            logins[login] = principal.id
    refs: dict[str, str] = {
        rid: doc["ref"] for rid, doc in clinic.store.scan(SEEDS)}
    applied = skipped = 0
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip() or raw.startswith("#"):
            continue
        parts = raw.split("|", 2)
        if len(parts) != 3:
            raise ClinicError(f"{path}:{line_no}: expected 'type|id|data'")
        kind, fixture_id, blob = parts
        if clinic.store.get(SEEDS, fixture_id) is not None:
            skipped += 1
            continue
        try:
            data = json.loads(blob)
        except json.JSONDecodeError as exc:
            raise ClinicError(f"{path}:{line_no}: bad JSON in data field: {exc}")
        ref = _seed_record(clinic, logins, refs, kind, data)
        refs[fixture_id] = ref
        clinic.store.put(SEEDS, fixture_id, {"ref": ref})
        applied += 1
    return applied, skipped


def cmd_seed(args: argparse.Namespace) -> int:
    if not args.data_dir:
        print("error: --data-dir (or CLINIC2_DATA_DIR) is required",
              file=sys.stderr)
        return 1
    clinic = Clinic(data_dir=args.data_dir)
    try:
        applied, skipped = seed_fixtures(clinic, args.fixtures)
    except ClinicError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    finally:
        clinic.close()
    print(f"seeded {applied} fixtures, {skipped} already present")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .app import create_app

    host, _, port = args.bind.rpartition(":")
    clinic = Clinic(data_dir=args.data_dir)
    app = create_app(clinic)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port),
                log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clinic2")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-config",
                       help="validate an empowerment policy document")
    p.add_argument("path")
    p.add_argument("--dump", action="store_true",
                   help="print the canonical form on success")
    p.set_defaults(func=cmd_validate_config)

    p = sub.add_parser("seed", help="load fixtures into a data directory")
    p.add_argument("--fixtures", required=True)
    p.add_argument("--data-dir", default=os.environ.get(ENV_DATA_DIR))
    p.set_defaults(func=cmd_seed)

    report = sub.add_parser("report", help="emit fixture-backed reports")
    report_sub = report.add_subparsers(dest="report_kind", required=True)

    p = report_sub.add_parser("survey",
                              help="re-emit the shipped survey fixture tables")
    p.add_argument("--table", type=int, choices=(2, 3), default=3)
    p.set_defaults(func=cmd_report_survey)

    p = report_sub.add_parser("prepost",
                              help="pre/post assessment comparison")
    p.add_argument("--pre", required=True)
    p.add_argument("--post", required=True)
    p.add_argument("--instrument", choices=sorted(_INSTRUMENTS),
                   default="literacy")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_report_prepost)

    p = sub.add_parser("serve", help="run the HTTP API")
    p.add_argument("--bind", default=os.environ.get(ENV_BIND, "127.0.0.1:8470"))
    p.add_argument("--data-dir", default=os.environ.get(ENV_DATA_DIR))
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
