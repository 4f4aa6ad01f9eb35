from __future__ import annotations

import sys
import time
from datetime import datetime, timedelta
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

SESSION_T0 = time.monotonic()

from clinic2.policy import Role
from clinic2.service.core import Clinic


class FakeClock:
    """Deterministic, manually advanced clock."""

    def __init__(self, start: str = "2026-01-05T09:00:00+00:00"):
        self.now = datetime.fromisoformat(start)

    def __call__(self) -> datetime:
        return self.now

    def advance(self, seconds: float = 1.0) -> datetime:
        self.now = self.now + timedelta(seconds=seconds)
        return self.now


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def clinic(clock) -> Clinic:
    """Memory-backed platform with a deterministic clock."""
    c = Clinic(data_dir=None, clock=clock)
    yield c
    c.close()


@pytest.fixture
def users(clinic) -> dict[str, str]:
    """The standing cast: three patients, two clinicians, an educator,
    an admin, and a family delegate linked to p1."""
    reg = clinic.directory.register
    reg("p1", Role.PATIENT, "Paula One")
    reg("p2", Role.PATIENT, "Pete Two")
    reg("p3", Role.PATIENT, "Prue Three")
    reg("dr9", Role.CLINICIAN, "Dr. Nine")
    reg("dr2", Role.CLINICIAN, "Dr. Two")
    reg("edu", Role.HEALTH_EDUCATOR, "Ed Ucator")
    reg("admin", Role.ADMIN, "Ada Min")
    reg("fam1", Role.FAMILY_DELEGATE, "Fam One", delegate_of="p1")
    return {"p1": "p1", "p2": "p2", "p3": "p3", "dr9": "dr9", "dr2": "dr2",
            "edu": "edu", "admin": "admin", "fam1": "fam1"}
