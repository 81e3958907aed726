"""Seeded synthetic reconnaissance missions with known ground truth.

Randomness comes from a single ``numpy.random.Generator`` over the PCG64
bit generator seeded with ``SynthConfig.seed``; draws are consumed in a fixed
per-building order so a seed fully determines the mission. Scores are
rounded to 6 decimals so missions survive a trip through the evidence file
format unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Optional

import numpy as np

from .evidence import (
    DAMAGE,
    OVERVIEW,
    PRE_EVENT_TASKS,
    BuildingCase,
    ImageEvidence,
    Label,
)

SCORE_DECIMALS = 6


class SynthConfigError(ValueError):
    pass


def _check_prob(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise SynthConfigError(f"{name} must lie in [0, 1], got {v!r}")


@dataclass(frozen=True)
class BetaScore:
    """Beta distribution parameterised by mean and concentration (a + b)."""

    mean: float
    concentration: float

    def validate(self, name: str) -> None:
        _check_prob(f"{name}.mean", self.mean)
        if not self.concentration > 0:
            raise SynthConfigError(f"{name}.concentration must be > 0, got {self.concentration!r}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.mean in (0.0, 1.0):
            return self.mean
        a = self.mean * self.concentration
        return float(rng.beta(a, self.concentration - a))


@dataclass(frozen=True)
class PreEventConfig:
    """Street-view style attribute evidence, one independent attribute per task."""

    images_min: int = 2
    images_max: int = 4
    prevalence: Mapping[str, float] = field(default_factory=lambda: {t: 0.5 for t in PRE_EVENT_TASKS})
    positive_score: BetaScore = BetaScore(0.75, 6.0)
    negative_score: BetaScore = BetaScore(0.25, 6.0)
    unlabeled_rate: float = 0.0


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_buildings: int = 1000
    md_prevalence: float = 0.3
    images_min: int = 1
    images_max: int = 6
    # Collector bias: cap on post-event images for NMD buildings (None = unbiased).
    nmd_images_max: Optional[int] = None
    damage_visibility: float = 0.9
    damage_shown: BetaScore = BetaScore(0.8, 4.0)
    damage_not_shown: BetaScore = BetaScore(0.15, 6.0)
    overview_score: BetaScore = BetaScore(0.85, 8.0)
    non_overview_score: BetaScore = BetaScore(0.15, 8.0)
    nov_rate: float = 0.2
    pre_event: Optional[PreEventConfig] = field(default_factory=PreEventConfig)

    def validate(self) -> None:
        if self.n_buildings < 0:
            raise SynthConfigError("n_buildings must be >= 0")
        for name in ("md_prevalence", "damage_visibility", "nov_rate"):
            _check_prob(name, getattr(self, name))
        if not 1 <= self.images_min <= self.images_max:
            raise SynthConfigError(f"need 1 <= images_min <= images_max, got {self.images_min}, {self.images_max}")
        if self.nmd_images_max is not None and not self.images_min <= self.nmd_images_max:
            raise SynthConfigError("nmd_images_max must be >= images_min")
        for name in ("damage_shown", "damage_not_shown", "overview_score", "non_overview_score"):
            getattr(self, name).validate(name)
        pre = self.pre_event
        if pre is not None:
            if not 1 <= pre.images_min <= pre.images_max:
                raise SynthConfigError("pre_event image counts need 1 <= min <= max")
            for task, v in pre.prevalence.items():
                if task not in PRE_EVENT_TASKS:
                    raise SynthConfigError(f"unknown pre-event task {task!r}")
                _check_prob(f"pre_event.prevalence[{task}]", v)
            _check_prob("pre_event.unlabeled_rate", pre.unlabeled_rate)
            pre.positive_score.validate("pre_event.positive_score")
            pre.negative_score.validate("pre_event.negative_score")


@dataclass(frozen=True)
class Mission:
    cases: tuple[BuildingCase, ...]
    # image_id -> whether the image truly shows damage (post-event images only)
    damage_visible: Mapping[str, bool]


def _score(dist: BetaScore, rng: np.random.Generator) -> float:
    return round(dist.draw(rng), SCORE_DECIMALS)


def generate_mission(config: SynthConfig) -> Mission:
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    pre = config.pre_event
    cases = []
    visible: dict[str, bool] = {}
    width = max(5, len(str(config.n_buildings)))
    for i in range(config.n_buildings):
        bid = f"b{i:0{width}d}"
        is_md = bool(rng.random() < config.md_prevalence)
        hi = config.images_max
        if not is_md and config.nmd_images_max is not None:
            hi = min(hi, config.nmd_images_max)
        n_post = int(rng.integers(config.images_min, hi + 1))
        images = []
        for j in range(n_post):
            image_id = f"{bid}-post-{j:02d}"
            is_ov = bool(rng.random() >= config.nov_rate)
            shows = is_md and bool(rng.random() < config.damage_visibility)
            ov = _score(config.overview_score if is_ov else config.non_overview_score, rng)
            dmg = _score(config.damage_shown if shows else config.damage_not_shown, rng)
            visible[image_id] = shows
            images.append(ImageEvidence(image_id, bid, {OVERVIEW: ov, DAMAGE: dmg}))
        truth = {DAMAGE: Label.POSITIVE if is_md else Label.NEGATIVE}
        if pre is not None:
            attrs = {}
            for task in PRE_EVENT_TASKS:
                positive = bool(rng.random() < pre.prevalence.get(task, 0.5))
                attrs[task] = positive
                unlabeled = bool(rng.random() < pre.unlabeled_rate)
                truth[task] = Label.UNLABELED if unlabeled else (Label.POSITIVE if positive else Label.NEGATIVE)
            n_pre = int(rng.integers(pre.images_min, pre.images_max + 1))
            for j in range(n_pre):
                scores = {
                    task: _score(pre.positive_score if attrs[task] else pre.negative_score, rng)
                    for task in PRE_EVENT_TASKS
                }
                images.append(ImageEvidence(f"{bid}-pre-{j:02d}", bid, scores))
        cases.append(BuildingCase(bid, tuple(images), truth))
    return Mission(tuple(cases), MappingProxyType(visible))


@dataclass(frozen=True)
class ImageCountSummary:
    n_buildings: int
    mean: float
    min: int
    max: int


def bias_report(cases: Iterable[BuildingCase], task_id: str = DAMAGE) -> dict[Label, ImageCountSummary]:
    """Image counts per truth class, counting images scored for ``task_id``."""
    counts: dict[Label, list[int]] = {}
    for case in cases:
        counts.setdefault(case.truth_for(task_id), []).append(len(case.scores_for(task_id)))
    return {
        label: ImageCountSummary(len(ns), float(np.mean(ns)), min(ns), max(ns))
        for label, ns in sorted(counts.items(), key=lambda kv: list(Label).index(kv[0]))
    }
