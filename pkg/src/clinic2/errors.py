"""Exception hierarchy shared by every clinic2 module.

All domain errors derive from ClinicError so the HTTP layer can map them
to status codes in one place. Error names follow the operation contracts
they belong to; the message carries the offending value where one exists.
"""
from __future__ import annotations


class ClinicError(Exception):
    """Base class for all domain errors."""


# --- policy / configuration ------------------------------------------------

class PolicyError(ClinicError):
    """Base class for empowerment-policy configuration errors."""


class PolicyParseError(PolicyError):
    def __init__(self, line_no: int, line: str, detail: str):
        self.line_no = line_no
        self.line = line
        self.detail = detail
        super().__init__(f"line {line_no}: {detail}: {line!r}")


class MissingSubModule(PolicyError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"MissingSubModule({code})")


class UnknownCode(PolicyError):
    def __init__(self, code: str):
        self.code = code
        super().__init__(f"UnknownCode({code})")


class ForbiddenOverride(PolicyError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"ForbiddenOverride: {detail}")


# --- records / envelopes ----------------------------------------------------

class SchemaMismatch(ClinicError):
    def __init__(self, submodule: str, detail: str):
        self.submodule = submodule
        self.detail = detail
        super().__init__(f"SchemaMismatch({submodule}): {detail}")


class PermissionDenied(ClinicError):
    def __init__(self, reason: str = "denied"):
        self.reason = reason
        super().__init__(f"PermissionDenied: {reason}")


class FutureTimestamp(ClinicError):
    pass


class UnknownRecord(ClinicError):
    """Referenced record id does not exist."""


class VersionConflict(ClinicError):
    """Compare-and-set lost against a concurrent writer."""

    def __init__(self, collection: str, record_id: str, expected: int):
        self.collection = collection
        self.record_id = record_id
        self.expected = expected
        super().__init__(
            f"version conflict on {collection}/{record_id} (expected v{expected})"
        )


# --- personal health ---------------------------------------------------------

class TwoActivePlans(ClinicError):
    """Internal consistency failure: must be unreachable."""


class NotSupported(ClinicError):
    """Stubbed operation, intentionally unimplemented."""


# --- social -------------------------------------------------------------------

class IllegalTransition(ClinicError):
    pass


class SelfConnection(ClinicError):
    pass


class MissingParent(ClinicError):
    pass


class EmptyBody(ClinicError):
    pass


class NotVisible(ClinicError):
    pass


class UnknownRecipient(ClinicError):
    pass


# --- medical -------------------------------------------------------------------

class UnknownPatient(ClinicError):
    pass


class ImmutableEntry(ClinicError):
    pass


class UnknownGrant(ClinicError):
    pass


class AlreadyRevoked(ClinicError):
    pass


class ValidationError(ClinicError):
    pass


class NoRefillsRemaining(ClinicError):
    pass


# --- care cycle ------------------------------------------------------------------

class EmptyStatement(ClinicError):
    pass


class MissingPayload(ClinicError):
    pass


class UnknownAlternative(ClinicError):
    pass


# --- assessment --------------------------------------------------------------------

class AssessmentError(ClinicError):
    pass


class OutOfRangeAnswer(AssessmentError):
    def __init__(self, index: int, value: int):
        self.index = index
        self.value = value
        super().__init__(f"OutOfRangeAnswer(index={index}, value={value})")


class LengthMismatch(AssessmentError):
    pass


class TooFewScores(AssessmentError):
    pass


class ZeroTotalVariance(AssessmentError):
    pass


class DegenerateMatrix(AssessmentError):
    pass


# --- service ---------------------------------------------------------------------------

class BadCredentials(ClinicError):
    """Deliberately identical for unknown login and wrong password."""

    def __init__(self) -> None:
        super().__init__("invalid login or password")


class UnknownToken(ClinicError):
    pass


class NotOwner(ClinicError):
    pass
