"""Building-level fusion of per-image positive-class probabilities.

Each image's label is treated as an independent Bernoulli draw with success
probability equal to its classifier score. A fusion rule maps a vector of
image labels to the probability that the building itself is positive; the
building-level probability is the expectation of that rule over all label
vectors. ``fuse_by_enumeration`` evaluates the expectation literally and is
kept as the reference for the closed forms ``fuse_pre_event`` and
``fuse_post_event``.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

ENUMERATION_CAP = 20


class FusionError(ValueError):
    pass


def _check_scores(scores: Sequence[float]) -> None:
    if len(scores) == 0:
        raise FusionError("cannot fuse an empty score list")
    for p in scores:
        if not 0.0 <= p <= 1.0:
            raise FusionError(f"score out of range: {p!r}")


def _tail_lookup(values: tuple[float, ...], tail: float, n: int) -> float:
    return values[n - 1] if n <= len(values) else tail


@dataclass(frozen=True)
class CoverageModel:
    """Coverage probabilities q_n and hidden-damage probabilities theta_n.

    ``q[n-1]`` is the probability that ``n`` images cover the whole building;
    any ``n`` past the end of ``q`` uses ``q_tail``. ``theta`` follows the same
    convention and gives the probability that an uncovered building is damaged
    although none of its images show it.
    """

    q: tuple[float, ...] = ()
    q_tail: float = 1.0
    theta: tuple[float, ...] = ()
    theta_tail: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", tuple(float(v) for v in self.q))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        for name, seq in (("q", self.q + (self.q_tail,)), ("theta", self.theta + (self.theta_tail,))):
            if any(not 0.0 <= v <= 1.0 for v in seq):
                raise ValueError(f"{name} entries must lie in [0, 1]: {seq}")
            if any(a > b for a, b in zip(seq, seq[1:])):
                raise ValueError(f"{name} must be non-decreasing in n: {seq}")

    @classmethod
    def from_sequence(cls, q: Sequence[float], theta: Sequence[float] = (0.5,)) -> "CoverageModel":
        """Build from ``q1, ..., tail`` style lists where the last entry is the tail value."""
        if not q or not theta:
            raise ValueError("coverage and theta sequences need at least a tail value")
        return cls(tuple(q[:-1]), q[-1], tuple(theta[:-1]), theta[-1])

    def q_at(self, n: int) -> float:
        return coverage_probability(self, n)

    def theta_at(self, n: int) -> float:
        if n < 1:
            raise ValueError(f"image count must be >= 1, got {n}")
        return _tail_lookup(self.theta, self.theta_tail, n)


FULL_COVERAGE = CoverageModel()
# Schedule used for the coverage what-if: q1=0.2, q2=0.5, q3=0.9, q_n=1 beyond.
GRADED_COVERAGE = CoverageModel(q=(0.2, 0.5, 0.9), q_tail=1.0)


def coverage_probability(coverage: CoverageModel, n: int) -> float:
    if n < 1:
        raise ValueError(f"image count must be >= 1, got {n}")
    return _tail_lookup(coverage.q, coverage.q_tail, n)


class FusionRule(abc.ABC):
    """Probability that the building is positive given image labels.

    ``evaluate`` receives a 2-D 0/1 integer array, one label vector per row,
    and returns one probability per row.
    """

    @abc.abstractmethod
    def evaluate(self, labels: np.ndarray) -> np.ndarray: ...

    def __call__(self, labels: Sequence[int]) -> float:
        return float(self.evaluate(np.asarray([labels], dtype=np.int64))[0])


class PreEventAverage(FusionRule):
    """Fraction of images labelled positive."""

    def evaluate(self, labels: np.ndarray) -> np.ndarray:
        return labels.sum(axis=1) / labels.shape[1]


@dataclass(frozen=True)
class PostEventCoverage(FusionRule):
    """Coverage-weighted rule for the damage task.

    A covered building is positive iff some image is positive (the ceiling of
    the label mean). An uncovered building with no positive image is still
    positive with probability theta_n.
    """

    coverage: CoverageModel

    def evaluate(self, labels: np.ndarray) -> np.ndarray:
        n = labels.shape[1]
        q = coverage_probability(self.coverage, n)
        theta = self.coverage.theta_at(n)
        any_positive = np.ceil(labels.sum(axis=1) / n)
        return q * any_positive + (1.0 - q) * np.maximum(any_positive, theta)


class CustomRule(FusionRule):
    """Wrap a plain function of one label tuple."""

    def __init__(self, fn: Callable[[tuple[int, ...]], float]):
        self.fn = fn

    def evaluate(self, labels: np.ndarray) -> np.ndarray:
        out = np.array([self.fn(tuple(int(c) for c in row)) for row in labels], dtype=float)
        if np.any((out < 0.0) | (out > 1.0)):
            raise FusionError("custom fusion rule returned a value outside [0, 1]")
        return out


def _label_vectors(n: int) -> np.ndarray:
    codes = np.arange(2**n, dtype=np.int64)[:, None]
    return (codes >> np.arange(n, dtype=np.int64)) & 1


def fuse_by_enumeration(
    scores: Sequence[float], rule: FusionRule, cap: int = ENUMERATION_CAP
) -> float:
    """Sum ``rule(c) * prod p_i^c_i (1-p_i)^(1-c_i)`` over all 2**n label vectors."""
    _check_scores(scores)
    n = len(scores)
    if n > cap:
        raise FusionError(f"{n} images exceeds the enumeration cap of {cap}; use the closed form")
    p = np.asarray(scores, dtype=float)
    labels = _label_vectors(n)
    weights = np.where(labels == 1, p, 1.0 - p).prod(axis=1)
    return float(math.fsum(rule.evaluate(labels) * weights))


def fuse_pre_event(scores: Sequence[float]) -> float:
    """Mean of the image scores."""
    _check_scores(scores)
    return math.fsum(scores) / len(scores)


def fuse_post_event(scores: Sequence[float], coverage: CoverageModel) -> float:
    """Closed form ``1 - P0 * (1 - (1 - q_n) * theta_n)`` with ``P0 = prod(1 - p_i)``."""
    _check_scores(scores)
    n = len(scores)
    p_none = math.prod(1.0 - p for p in scores)
    q = coverage_probability(coverage, n)
    theta = coverage.theta_at(n)
    return 1.0 - p_none * (1.0 - (1.0 - q) * theta)


@dataclass(frozen=True)
class FusionResult:
    building_id: str
    task_id: str
    n_images: int
    p_positive: float
