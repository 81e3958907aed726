"""Post-event and pre-event analysis streams.

The post-event stream gates images on the overview score, fuses the damage
scores of the surviving images under a coverage model and decides. The
pre-event stream averages each attribute's scores and decides. The two
streams read disjoint tasks and never share state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from .decision import DecisionValue, LossTable, decide
from .evidence import (
    DAMAGE,
    PRE_EVENT_TASKS,
    BuildingCase,
    GateOutcome,
    apply_overview_gate,
    validate_case,
)
from .fusion import CoverageModel, fuse_post_event, fuse_pre_event


class Outcome(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    NO_DECISION = "no_decision"
    NO_OVERVIEW = "no_overview"
    NO_EVIDENCE = "no_evidence"

    @property
    def decided(self) -> bool:
        return self in (Outcome.POSITIVE, Outcome.NEGATIVE, Outcome.NO_DECISION)


_FROM_DECISION = {
    DecisionValue.POSITIVE: Outcome.POSITIVE,
    DecisionValue.NEGATIVE: Outcome.NEGATIVE,
    DecisionValue.NO_DECISION: Outcome.NO_DECISION,
}


@dataclass(frozen=True)
class BuildingOutcome:
    building_id: str
    task_id: str
    outcome: Outcome
    fused_p: Optional[float] = None
    n_images_used: int = 0

    def __post_init__(self) -> None:
        if self.outcome.decided != (self.fused_p is not None):
            raise ValueError(f"{self.building_id}/{self.task_id}: fused_p must be set iff a decision was made")


class InvalidCaseError(ValueError):
    pass


def _validated(cases: Iterable[BuildingCase]) -> list[BuildingCase]:
    cases = list(cases)
    for case in cases:
        problems = validate_case(case)
        if problems:
            raise InvalidCaseError(f"building {case.building_id}: " + "; ".join(problems))
    return cases


def _sort(outcomes: list[BuildingOutcome]) -> list[BuildingOutcome]:
    return sorted(outcomes, key=lambda o: (o.building_id, o.task_id))


def _decided(building_id: str, task_id: str, p: float, n: int, loss: LossTable) -> BuildingOutcome:
    return BuildingOutcome(building_id, task_id, _FROM_DECISION[decide(p, loss).value], p, n)


def post_event_outcome(
    case: BuildingCase, coverage: CoverageModel, loss: LossTable, gate_threshold: float = 0.5
) -> BuildingOutcome:
    gated, gate = apply_overview_gate(case, gate_threshold)
    if gate is GateOutcome.NO_OVERVIEW:
        return BuildingOutcome(case.building_id, DAMAGE, Outcome.NO_OVERVIEW)
    scores = gated.scores_for(DAMAGE)
    if not scores:
        return BuildingOutcome(case.building_id, DAMAGE, Outcome.NO_EVIDENCE)
    return _decided(case.building_id, DAMAGE, fuse_post_event(scores, coverage), len(scores), loss)


def run_post_event_stream(
    cases: Iterable[BuildingCase],
    coverage: CoverageModel,
    loss: LossTable,
    gate_threshold: float = 0.5,
) -> list[BuildingOutcome]:
    return _sort([post_event_outcome(c, coverage, loss, gate_threshold) for c in _validated(cases)])


def run_pre_event_stream(
    cases: Iterable[BuildingCase],
    losses: Mapping[str, LossTable] | LossTable | None = None,
    tasks: Iterable[str] = PRE_EVENT_TASKS,
) -> list[BuildingOutcome]:
    """Average each pre-event attribute's scores and decide.

    ``losses`` may be one table shared by every task or a per-task mapping;
    tasks missing from the mapping use the default ``LossTable()``.
    """
    if losses is None or isinstance(losses, LossTable):
        shared = losses or LossTable()
        losses = {t: shared for t in PRE_EVENT_TASKS}
    tasks = tuple(tasks)
    out = []
    for case in _validated(cases):
        for task_id in tasks:
            scores = case.scores_for(task_id)
            if not scores:
                out.append(BuildingOutcome(case.building_id, task_id, Outcome.NO_EVIDENCE))
                continue
            loss = losses.get(task_id, LossTable())
            out.append(_decided(case.building_id, task_id, fuse_pre_event(scores), len(scores), loss))
    return _sort(out)


def redecide(outcomes: Iterable[BuildingOutcome], loss: LossTable) -> list[BuildingOutcome]:
    """Re-run the decision step on already fused outcomes under another loss table.

    Fusion does not depend on the loss, so this matches re-running a stream
    with ``loss`` at a fraction of the cost.
    """
    return [
        _decided(o.building_id, o.task_id, o.fused_p, o.n_images_used, loss) if o.outcome.decided else o
        for o in outcomes
    ]
