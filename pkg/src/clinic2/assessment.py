"""Instrument definition, response scoring, descriptive statistics,
internal-consistency reliability, and pre/post comparison reports.

Everything here is pure and safe for unrestricted parallel evaluation.
Computation runs in full precision; values are reduced to two decimals only
at presentation, truncated toward zero so the report prints the same digits
as the source score tables it reproduces.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_DOWN, Decimal
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateMatrix,
    LengthMismatch,
    OutOfRangeAnswer,
    TooFewScores,
    ZeroTotalVariance,
)


class InstrumentKind(str, Enum):
    HEALTH_LITERACY = "HealthLiteracy"
    SATISFACTION = "Satisfaction"
    CUSTOM = "Custom"


class Phase(str, Enum):
    PRE = "Pre"
    POST = "Post"


@dataclass(frozen=True)
class InstrumentSpec:
    """A scored instrument. ``item_bounds`` holds one inclusive (min, max)
    per item; totals are always derived, never stored independently."""

    name: str
    kind: InstrumentKind
    item_bounds: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.item_bounds) < 2:
            raise ValueError("an instrument needs more than one item")
        for lo, hi in self.item_bounds:
            if lo >= hi:
                raise ValueError(f"item bounds ({lo}, {hi}) need min < max")

    @staticmethod
    def uniform(name: str, kind: InstrumentKind, item_count: int,
                item_min: int, item_max: int) -> "InstrumentSpec":
        return InstrumentSpec(name, kind, ((item_min, item_max),) * item_count)

    @property
    def item_count(self) -> int:
        return len(self.item_bounds)

    @property
    def item_min(self) -> int | None:
        """The per-item minimum for uniform instruments, else None."""
        mins = {lo for lo, _ in self.item_bounds}
        return mins.pop() if len(mins) == 1 else None

    @property
    def item_max(self) -> int | None:
        """The per-item maximum for uniform instruments, else None."""
        maxs = {hi for _, hi in self.item_bounds}
        return maxs.pop() if len(maxs) == 1 else None

    @property
    def total_min(self) -> int:
        return sum(lo for lo, _ in self.item_bounds)

    @property
    def total_max(self) -> int:
        return sum(hi for _, hi in self.item_bounds)

    def band(self, total: float) -> str:
        """Quarter-range interpretation label for a total score."""
        labels = _BAND_LABELS[self.kind]
        span = self.total_max - self.total_min
        position = (total - self.total_min) / span
        idx = min(3, max(0, int(position * 4)))
        return labels[idx]


_BAND_LABELS = {
    InstrumentKind.HEALTH_LITERACY: ("very low", "low", "high", "very high"),
    InstrumentKind.SATISFACTION: (
        "very unsatisfied", "unsatisfied", "satisfied", "very satisfied"),
    InstrumentKind.CUSTOM: ("very low", "low", "high", "very high"),
}

# 30 questions, each scored 1-4: totals span 30 (floor) to 120 (ceiling).
HEALTH_LITERACY = InstrumentSpec.uniform(
    "health-literacy", InstrumentKind.HEALTH_LITERACY, 30, 1, 4)

# Satisfaction ships with declared total bounds [32, 81]; the per-item
# ranges below realize those bounds (fifteen 2-5 items plus one 2-6 item).
SATISFACTION = InstrumentSpec(
    "customer-satisfaction", InstrumentKind.SATISFACTION,
    tuple([(2, 5)] * 15 + [(2, 6)]))


@dataclass(frozen=True)
class ResponseSheet:
    respondent: str
    instrument: InstrumentSpec
    answers: tuple[int, ...]
    phase: Phase
    completed_at: str = ""


def score_response(sheet: ResponseSheet) -> int:
    """Total score of one sheet: the sum of its answers.

    Validates length against the instrument and every answer against its
    item bounds before summing.
    """
    spec = sheet.instrument
    if len(sheet.answers) != spec.item_count:
        raise LengthMismatch(
            f"expected {spec.item_count} answers, got {len(sheet.answers)}")
    for idx, (answer, (lo, hi)) in enumerate(zip(sheet.answers, spec.item_bounds)):
        if not (lo <= answer <= hi):
            raise OutOfRangeAnswer(idx, answer)
    return int(sum(sheet.answers))


# --- descriptive statistics ----------------------------------------------------

@dataclass(frozen=True)
class StatsSummary:
    n: int
    mean: float
    sd: float  # sample standard deviation, n-1 denominator
    alpha: float | None = None


def descriptive_stats(scores: Sequence[float]) -> StatsSummary:
    if len(scores) < 2:
        raise TooFewScores(f"need at least 2 scores, got {len(scores)}")
    arr = np.asarray(scores, dtype=float)
    return StatsSummary(n=arr.size, mean=float(arr.mean()),
                        sd=float(arr.std(ddof=1)))


def present(value: float, decimals: int = 2) -> float:
    """Presentation reduction: truncate toward zero at ``decimals`` places.

    Computation stays in full precision everywhere; this is applied only
    when a number is printed into a report.
    """
    quantum = Decimal(1).scaleb(-decimals)
    return float(Decimal(repr(value)).quantize(quantum, rounding=ROUND_DOWN))


# --- reliability -------------------------------------------------------------------

@dataclass(frozen=True)
class ItemMatrix:
    """Respondents-by-items integer matrix for reliability analysis."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if len(self.rows) < 2:
            raise DegenerateMatrix("need at least 2 respondents")
        widths = {len(r) for r in self.rows}
        if len(widths) != 1:
            raise DegenerateMatrix("ragged rows")
        if widths.pop() < 2:
            raise DegenerateMatrix("need at least 2 items")

    def to_array(self) -> np.ndarray:
        return np.asarray(self.rows, dtype=float)


def cronbach_alpha(matrix: ItemMatrix | Sequence[Sequence[float]] | np.ndarray) -> float:
    """Internal-consistency reliability:
    alpha = k/(k-1) * (1 - sum of item variances / total-score variance),
    with sample (n-1) variances throughout.
    """
    if isinstance(matrix, ItemMatrix):
        arr = matrix.to_array()
    else:
        arr = np.asarray(matrix, dtype=float)
        if arr.ndim != 2:
            raise DegenerateMatrix("matrix must be two-dimensional")
        if arr.shape[0] < 2 or arr.shape[1] < 2:
            raise DegenerateMatrix(f"shape {arr.shape} too small for reliability")
    k = arr.shape[1]
    item_variances = arr.var(axis=0, ddof=1)
    total_variance = arr.sum(axis=1).var(ddof=1)
    if total_variance == 0:
        raise ZeroTotalVariance("total-score variance is zero")
    return float(k / (k - 1) * (1.0 - item_variances.sum() / total_variance))


# --- pre/post comparison --------------------------------------------------------------

@dataclass(frozen=True)
class PrePostReport:
    instrument: InstrumentSpec
    pre: StatsSummary
    post: StatsSummary
    mean_delta: float  # difference of the two presented means
    per_respondent_deltas: tuple[float, ...] | None
    pre_band: str
    post_band: str

    def to_dict(self) -> dict:
        return {
            "instrument": self.instrument.name,
            "kind": self.instrument.kind.value,
            "range": [self.instrument.total_min, self.instrument.total_max],
            "pre": {"n": self.pre.n, "mean": present(self.pre.mean),
                    "sd": present(self.pre.sd), "band": self.pre_band},
            "post": {"n": self.post.n, "mean": present(self.post.mean),
                     "sd": present(self.post.sd), "band": self.post_band},
            "mean_delta": self.mean_delta,
            "per_respondent_deltas": (
                list(self.per_respondent_deltas)
                if self.per_respondent_deltas is not None else None),
        }

    def render_text(self) -> str:
        lines = [
            f"instrument: {self.instrument.name} "
            f"[{self.instrument.total_min}, {self.instrument.total_max}]",
            f"pre : n={self.pre.n} mean={present(self.pre.mean):.2f} "
            f"sd={present(self.pre.sd):.2f} ({self.pre_band})",
            f"post: n={self.post.n} mean={present(self.post.mean):.2f} "
            f"sd={present(self.post.sd):.2f} ({self.post_band})",
            f"mean delta: {self.mean_delta:+.2f}",
        ]
        return "\n".join(lines)


def pre_post_report(pre_scores: Sequence[float], post_scores: Sequence[float],
                    instrument: InstrumentSpec) -> PrePostReport:
    """Compare two score vectors taken before and after an intervention.

    The delta is the difference of the two presented (two-decimal) means, so
    it prints exactly what a reader computes from the report's own lines.
    Per-respondent deltas are emitted when the vectors align positionally.
    """
    pre = descriptive_stats(pre_scores)
    post = descriptive_stats(post_scores)
    delta = float(
        (Decimal(repr(present(post.mean))) - Decimal(repr(present(pre.mean)))))
    deltas = None
    if len(pre_scores) == len(post_scores):
        deltas = tuple(float(b - a) for a, b in zip(pre_scores, post_scores))
    return PrePostReport(
        instrument=instrument,
        pre=pre,
        post=post,
        mean_delta=delta,
        per_respondent_deltas=deltas,
        pre_band=instrument.band(pre.mean),
        post_band=instrument.band(post.mean),
    )
