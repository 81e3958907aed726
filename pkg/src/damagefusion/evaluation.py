"""Confusion matrices, accuracy / no-decision rates, loss sweeps and histograms."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .decision import LossTable
from .evidence import DAMAGE, BuildingCase, Label
from .fusion import CoverageModel
from .pipeline import BuildingOutcome, Outcome, redecide, run_post_event_stream


class EvaluationError(ValueError):
    pass


class Row(str, enum.Enum):
    NO_LABEL = "no_label"
    POSITIVE = "positive"
    NEGATIVE = "negative"
    OTHER = "other"


class Column(str, enum.Enum):
    # No overview image (post-event) or no scored image (pre-event).
    UNAVAILABLE = "unavailable"
    NO_DECISION = "no_decision"
    POSITIVE = "positive"
    NEGATIVE = "negative"


ROWS = tuple(Row)
COLUMNS = tuple(Column)
LABELED_ROWS = (Row.POSITIVE, Row.NEGATIVE)

_ROW_OF_LABEL = {
    Label.POSITIVE: Row.POSITIVE,
    Label.NEGATIVE: Row.NEGATIVE,
    Label.UNLABELED: Row.NO_LABEL,
    Label.OTHER: Row.OTHER,
}
_COLUMN_OF_OUTCOME = {
    Outcome.NO_OVERVIEW: Column.UNAVAILABLE,
    Outcome.NO_EVIDENCE: Column.UNAVAILABLE,
    Outcome.NO_DECISION: Column.NO_DECISION,
    Outcome.POSITIVE: Column.POSITIVE,
    Outcome.NEGATIVE: Column.NEGATIVE,
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """Truth rows by decision columns.

    Rows and columns are always iterated in the fixed ``ROWS``/``COLUMNS``
    order; absent cells are zero.
    """

    counts: Mapping[tuple[Row, Column], int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        full = {(r, c): int(self.counts.get((r, c), 0)) for r in ROWS for c in COLUMNS}
        if any(v < 0 for v in full.values()):
            raise ValueError("confusion counts must be nonnegative")
        object.__setattr__(self, "counts", MappingProxyType(full))

    @classmethod
    def from_table(cls, table: Mapping[Row, Mapping[Column, int]]) -> "ConfusionMatrix":
        return cls({(r, c): n for r, cols in table.items() for c, n in cols.items()})

    def cell(self, row: Row, col: Column) -> int:
        return self.counts[row, col]

    def row_total(self, row: Row) -> int:
        return sum(self.counts[row, c] for c in COLUMNS)

    def column_total(self, col: Column) -> int:
        return sum(self.counts[r, col] for r in ROWS)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    @property
    def correct(self) -> int:
        return self.counts[Row.POSITIVE, Column.POSITIVE] + self.counts[Row.NEGATIVE, Column.NEGATIVE]

    @property
    def incorrect(self) -> int:
        return self.counts[Row.POSITIVE, Column.NEGATIVE] + self.counts[Row.NEGATIVE, Column.POSITIVE]

    @property
    def no_decision(self) -> int:
        return sum(self.counts[r, Column.NO_DECISION] for r in LABELED_ROWS)

    @property
    def permissible(self) -> int:
        """Labeled cases that reached the decision step."""
        return self.correct + self.incorrect + self.no_decision

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix({k: v + other.counts[k] for k, v in self.counts.items()})


TruthSource = Union[Mapping[str, Label], Iterable[BuildingCase]]


def truth_map(truths: TruthSource, task_id: str) -> dict[str, Label]:
    if isinstance(truths, Mapping):
        return dict(truths)
    return {case.building_id: case.truth_for(task_id) for case in truths}


def build_confusion(
    outcomes: Iterable[BuildingOutcome], truths: TruthSource, task_id: str = DAMAGE
) -> ConfusionMatrix:
    """Tally the outcomes for ``task_id``; buildings without a truth entry count as no-label."""
    labels = truth_map(truths, task_id)
    counts: dict[tuple[Row, Column], int] = {}
    for o in outcomes:
        if o.task_id != task_id:
            continue
        key = (_ROW_OF_LABEL[labels.get(o.building_id, Label.UNLABELED)], _COLUMN_OF_OUTCOME[o.outcome])
        counts[key] = counts.get(key, 0) + 1
    return ConfusionMatrix(counts)


class AccuracyMode(str, enum.Enum):
    OVER_DECIDED = "over_decided"
    OVER_PERMISSIBLE = "over_permissible"


def accuracy(matrix: ConfusionMatrix, mode: AccuracyMode | str = AccuracyMode.OVER_DECIDED) -> float:
    """Correct fraction of labeled decisions, with or without no-decision cases in the denominator."""
    mode = AccuracyMode(mode)
    denom = matrix.correct + matrix.incorrect
    if mode is AccuracyMode.OVER_PERMISSIBLE:
        denom += matrix.no_decision
    if denom == 0:
        raise EvaluationError(f"accuracy ({mode.value}) undefined: zero denominator")
    return matrix.correct / denom


def nd_rate(matrix: ConfusionMatrix) -> float:
    if matrix.permissible == 0:
        raise EvaluationError("no-decision rate undefined: no permissible predictions")
    return matrix.no_decision / matrix.permissible


@dataclass(frozen=True)
class SweepCell:
    accuracy_decided: float
    accuracy_permissible: float
    nd_rate: float
    matrix: ConfusionMatrix


@dataclass(frozen=True)
class SweepGrid:
    alpha1_values: tuple[float, ...]
    alpha2_values: tuple[float, ...]
    cells: Mapping[tuple[float, float], SweepCell]

    def __getitem__(self, key: tuple[float, float]) -> SweepCell:
        return self.cells[key]

    def diagonal(self) -> list[tuple[float, SweepCell]]:
        return [(a, self.cells[a, a]) for a in self.alpha1_values if (a, a) in self.cells]


def _metric(fn, matrix: ConfusionMatrix, *args) -> float:
    try:
        return fn(matrix, *args)
    except EvaluationError:
        return math.nan


def default_alpha_grid() -> tuple[float, ...]:
    return tuple(round(0.1 * k, 1) for k in range(1, 11))


def sweep_loss_params(
    cases: Sequence[BuildingCase],
    coverage: CoverageModel,
    gate_threshold: float = 0.5,
    alpha1_values: Sequence[float] | None = None,
    alpha2_values: Sequence[float] | None = None,
    task_id: str = DAMAGE,
) -> SweepGrid:
    """Evaluate the post-event stream on every (alpha1, alpha2) pair.

    Undefined metrics (empty denominators) are reported as NaN.
    """
    a1s = tuple(alpha1_values) if alpha1_values is not None else default_alpha_grid()
    a2s = tuple(alpha2_values) if alpha2_values is not None else default_alpha_grid()
    if not a1s or not a2s:
        raise EvaluationError("sweep grid must be non-empty")
    for grid in (a1s, a2s):
        if any(not 0.0 < a <= 1.0 for a in grid):
            raise EvaluationError(f"sweep values must lie in (0, 1]: {grid}")
        if list(grid) != sorted(set(grid)):
            raise EvaluationError(f"sweep values must be strictly ascending: {grid}")
    cases = list(cases)
    fused = run_post_event_stream(cases, coverage, LossTable(), gate_threshold)
    labels = truth_map(cases, task_id)
    cells = {}
    for a1 in a1s:
        for a2 in a2s:
            m = build_confusion(redecide(fused, LossTable(a1, a2)), labels, task_id)
            cells[a1, a2] = SweepCell(
                _metric(accuracy, m, AccuracyMode.OVER_DECIDED),
                _metric(accuracy, m, AccuracyMode.OVER_PERMISSIBLE),
                _metric(nd_rate, m),
                m,
            )
    return SweepGrid(a1s, a2s, MappingProxyType(cells))


@dataclass(frozen=True)
class Histograms:
    edges: tuple[float, ...]
    counts: Mapping[tuple[Row, Outcome], tuple[int, ...]]

    @property
    def bins(self) -> int:
        return len(self.edges) - 1


def probability_histogram(
    outcomes: Iterable[BuildingOutcome],
    truths: TruthSource = (),
    bins: int = 10,
    task_id: str | None = None,
) -> Histograms:
    """Bin fused probabilities over [0, 1] per (truth row, decision) pair.

    Bins are half-open ``[lo, hi)`` except the last, which includes 1.0.
    Only outcomes that reached the decision step are counted.
    """
    if bins < 1:
        raise EvaluationError(f"bins must be >= 1, got {bins}")
    edges = np.linspace(0.0, 1.0, bins + 1)
    grouped: dict[tuple[Row, Outcome], list[float]] = {}
    label_cache: dict[str, dict[str, Label]] = {}
    cases = truths if isinstance(truths, Mapping) else list(truths)
    for o in outcomes:
        if not o.outcome.decided or (task_id is not None and o.task_id != task_id):
            continue
        if o.task_id not in label_cache:
            label_cache[o.task_id] = truth_map(cases, o.task_id)
        row = _ROW_OF_LABEL[label_cache[o.task_id].get(o.building_id, Label.UNLABELED)]
        grouped.setdefault((row, o.outcome), []).append(o.fused_p)
    counts = {
        key: tuple(int(c) for c in np.histogram(ps, bins=edges)[0])
        for key, ps in sorted(grouped.items(), key=lambda kv: (ROWS.index(kv[0][0]), kv[0][1].value))
    }
    return Histograms(tuple(float(e) for e in edges), MappingProxyType(counts))
