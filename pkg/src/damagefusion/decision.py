"""Expected-loss decisions with a no-decision (reject) option.

Correct decisions cost 0 and mistakes cost 1. Declining to decide costs
``alpha1`` when the truth is positive and ``alpha2`` when it is negative.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping


class DecisionValue(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NO_DECISION = "no_decision"


# Earlier entries win ties.
TIE_BREAK_ORDER = (DecisionValue.NO_DECISION, DecisionValue.NEGATIVE, DecisionValue.POSITIVE)


@dataclass(frozen=True)
class LossTable:
    alpha1: float = 0.3
    alpha2: float = 0.3

    def __post_init__(self) -> None:
        for name in ("alpha1", "alpha2"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v!r}")

    def warnings(self) -> list[str]:
        """Flags legal but degenerate settings."""
        out = []
        for name in ("alpha1", "alpha2"):
            if getattr(self, name) > 1.0:
                out.append(f"{name} > 1: declining costs more than a mistake")
        return out

    def loss(self, d: DecisionValue, truth_positive: bool) -> float:
        if d is DecisionValue.NO_DECISION:
            return self.alpha1 if truth_positive else self.alpha2
        correct = (d is DecisionValue.POSITIVE) == truth_positive
        return 0.0 if correct else 1.0


@dataclass(frozen=True)
class Decision:
    value: DecisionValue
    expected_losses: Mapping[DecisionValue, float]
    fused_p: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "expected_losses", MappingProxyType(dict(self.expected_losses)))


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p!r}")


def expected_loss(d: DecisionValue, p: float, loss: LossTable) -> float:
    _check_p(p)
    if d is DecisionValue.POSITIVE:
        return 1.0 - p
    if d is DecisionValue.NEGATIVE:
        return p
    # Same as alpha1*p + alpha2*(1-p); this form is exact when alpha1 == alpha2.
    return loss.alpha2 + (loss.alpha1 - loss.alpha2) * p


def decide(p: float, loss: LossTable) -> Decision:
    losses = {d: expected_loss(d, p, loss) for d in TIE_BREAK_ORDER}
    # min() keeps the first minimum, so iteration order is the tie-break.
    best = min(TIE_BREAK_ORDER, key=losses.__getitem__)
    return Decision(best, losses, p)


@dataclass(frozen=True)
class RejectRegion:
    """Closed interval ``[lo, hi]``; empty when ``lo > hi``."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi

    @property
    def width(self) -> float:
        return max(0.0, self.hi - self.lo)

    def __contains__(self, p: float) -> bool:
        return self.lo <= p <= self.hi


def _solve_le(a: float, b: float) -> tuple[float, float]:
    """Solution set of ``a * p <= b`` intersected with [0, 1], as ``(lo, hi)``."""
    if a > 0:
        return 0.0, min(1.0, b / a)
    if a < 0:
        return max(0.0, b / a), 1.0
    return (0.0, 1.0) if b >= 0 else (1.0, 0.0)


def reject_region(loss: LossTable) -> RejectRegion:
    """Probabilities for which declining is (weakly) optimal.

    No-decision beats positive iff ``(1 + a1 - a2) p <= 1 - a2`` and beats
    negative iff ``(a1 - a2 - 1) p <= -a2``. For ``a1 == a2 == a`` this gives
    ``[a, 1 - a]``.
    """
    a1, a2 = loss.alpha1, loss.alpha2
    # Difference first, so equal alphas give coefficients of exactly +-1.
    d = a1 - a2
    lo1, hi1 = _solve_le(1.0 + d, 1.0 - a2)
    lo2, hi2 = _solve_le(d - 1.0, -a2)
    return RejectRegion(max(lo1, lo2), min(hi1, hi2))
