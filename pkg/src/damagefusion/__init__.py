"""Fuse per-image classifier scores into building-level damage and attribute decisions."""

from .decision import Decision, DecisionValue, LossTable, RejectRegion, decide, expected_loss, reject_region
from .evaluation import (
    AccuracyMode,
    ConfusionMatrix,
    SweepGrid,
    accuracy,
    build_confusion,
    nd_rate,
    probability_histogram,
    sweep_loss_params,
)
from .evidence import (
    TASKS,
    BuildingCase,
    GateOutcome,
    ImageEvidence,
    Label,
    TaskSchema,
    apply_overview_gate,
    group_evidence,
    validate_case,
)
from .fusion import (
    FULL_COVERAGE,
    GRADED_COVERAGE,
    CoverageModel,
    CustomRule,
    FusionResult,
    PostEventCoverage,
    PreEventAverage,
    coverage_probability,
    fuse_by_enumeration,
    fuse_post_event,
    fuse_pre_event,
)
from .pipeline import BuildingOutcome, Outcome, run_post_event_stream, run_pre_event_stream
from .synth import SynthConfig, bias_report, generate_mission

__version__ = "0.1.0"
