"""Task taxonomy, per-image evidence and building-level case records.

An image carries positive-class probabilities for any subset of the five
classification tasks. Missing tasks are absent from ``scores``; they are
never encoded as zero.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional


class Stream(str, enum.Enum):
    PRE_EVENT = "pre_event"
    POST_EVENT = "post_event"
    GATE = "gate"


class Label(str, enum.Enum):
    """Building-level ground truth for one task."""

    POSITIVE = "positive"
    NEGATIVE = "negative"
    UNLABELED = "unlabeled"
    OTHER = "other"


@dataclass(frozen=True)
class TaskSchema:
    task_id: str
    positive_label: str
    negative_label: str
    stream: Stream

    def __post_init__(self) -> None:
        if self.positive_label == self.negative_label:
            raise ValueError(f"task {self.task_id!r}: positive and negative labels must differ")

    def parse_label(self, text: str) -> Label:
        """Map a wire-form label (``MD``, ``NMD``, ``unlabeled``, ``other``) to a :class:`Label`."""
        if text == self.positive_label:
            return Label.POSITIVE
        if text == self.negative_label:
            return Label.NEGATIVE
        if text in (Label.UNLABELED.value, Label.OTHER.value):
            return Label(text)
        raise ValueError(
            f"label {text!r} not in vocabulary of task {self.task_id!r} "
            f"({self.positive_label}, {self.negative_label}, unlabeled, other)"
        )

    def render_label(self, label: Label) -> str:
        if label is Label.POSITIVE:
            return self.positive_label
        if label is Label.NEGATIVE:
            return self.negative_label
        return label.value


OVERVIEW = "overview"
DAMAGE = "damage"
ELEVATION = "elevation"
STORIES = "stories"
MATERIAL = "material"

TASKS: Mapping[str, TaskSchema] = MappingProxyType(
    {
        OVERVIEW: TaskSchema(OVERVIEW, "OV", "NOV", Stream.GATE),
        DAMAGE: TaskSchema(DAMAGE, "MD", "NMD", Stream.POST_EVENT),
        ELEVATION: TaskSchema(ELEVATION, "EL", "NEL", Stream.PRE_EVENT),
        STORIES: TaskSchema(STORIES, "2S", "1S", Stream.PRE_EVENT),
        MATERIAL: TaskSchema(MATERIAL, "MA", "WO", Stream.PRE_EVENT),
    }
)

PRE_EVENT_TASKS = tuple(t for t, s in TASKS.items() if s.stream is Stream.PRE_EVENT)
POST_EVENT_TASKS = tuple(t for t, s in TASKS.items() if s.stream is Stream.POST_EVENT)


@dataclass(frozen=True)
class ImageEvidence:
    image_id: str
    building_id: str
    scores: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))

    def score(self, task_id: str) -> Optional[float]:
        return self.scores.get(task_id)


@dataclass(frozen=True)
class BuildingCase:
    building_id: str
    images: tuple[ImageEvidence, ...] = ()
    truth: Mapping[str, Label] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "images", tuple(self.images))
        object.__setattr__(self, "truth", MappingProxyType(dict(self.truth)))

    def truth_for(self, task_id: str) -> Label:
        return self.truth.get(task_id, Label.UNLABELED)

    def scores_for(self, task_id: str) -> list[float]:
        """Scores of the images that carry ``task_id``, in image order."""
        return [img.scores[task_id] for img in self.images if task_id in img.scores]


def validate_case(case: BuildingCase) -> list[str]:
    """Return one message per invariant violation; empty when the case is well formed."""
    problems = []
    seen: set[str] = set()
    for img in case.images:
        if img.building_id != case.building_id:
            problems.append(
                f"image {img.image_id}: building mismatch ({img.building_id} != {case.building_id})"
            )
        if img.image_id in seen:
            problems.append(f"image {img.image_id}: duplicate image")
        seen.add(img.image_id)
        for task_id, p in img.scores.items():
            if task_id not in TASKS:
                problems.append(f"image {img.image_id}, task {task_id}: unknown task")
            if not 0.0 <= p <= 1.0:
                problems.append(f"image {img.image_id}, task {task_id}: score out of range ({p!r})")
    for task_id, label in case.truth.items():
        if task_id not in TASKS:
            problems.append(f"truth, task {task_id}: unknown task")
        if not isinstance(label, Label):
            problems.append(f"truth, task {task_id}: invalid label {label!r}")
    return problems


class TruthConflictError(ValueError):
    pass


def group_evidence(
    records: Iterable[ImageEvidence],
    truths: Iterable[tuple[str, str, Label]] = (),
) -> list[BuildingCase]:
    """Group image evidence and ``(building_id, task_id, label)`` truth rows into cases.

    Rows sharing ``(building_id, image_id)`` are merged, keeping the last-seen
    score per task. Buildings are returned in first-seen order, evidence first;
    buildings that only appear in ``truths`` get an empty image list.
    """
    images: dict[str, dict[str, dict[str, float]]] = {}
    for rec in records:
        per_building = images.setdefault(rec.building_id, {})
        per_building.setdefault(rec.image_id, {}).update(rec.scores)

    labels: dict[str, dict[str, Label]] = {}
    for building_id, task_id, label in truths:
        per_building = labels.setdefault(building_id, {})
        if task_id in per_building and per_building[task_id] != label:
            raise TruthConflictError(
                f"building {building_id}: conflicting truth for task {task_id} "
                f"({per_building[task_id].value} vs {label.value})"
            )
        per_building[task_id] = label

    order = list(images)
    order.extend(b for b in labels if b not in images)
    return [
        BuildingCase(
            building_id=b,
            images=tuple(
                ImageEvidence(image_id, b, scores)
                for image_id, scores in images.get(b, {}).items()
            ),
            truth=labels.get(b, {}),
        )
        for b in order
    ]


class GateOutcome(str, enum.Enum):
    HAS_OVERVIEW = "has_overview"
    NO_OVERVIEW = "no_overview"


def apply_overview_gate(
    case: BuildingCase, threshold: float = 0.5
) -> tuple[BuildingCase, GateOutcome]:
    """Keep the images whose overview score is at least ``threshold``.

    Images with no overview score are dropped.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"gate threshold must lie in [0, 1], got {threshold!r}")
    kept = tuple(
        img for img in case.images if OVERVIEW in img.scores and img.scores[OVERVIEW] >= threshold
    )
    outcome = GateOutcome.HAS_OVERVIEW if kept else GateOutcome.NO_OVERVIEW
    return BuildingCase(case.building_id, kept, case.truth), outcome
