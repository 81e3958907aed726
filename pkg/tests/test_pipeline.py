import pytest

from damagefusion.decision import LossTable
from damagefusion.evidence import (
    DAMAGE,
    ELEVATION,
    MATERIAL,
    STORIES,
    BuildingCase,
    ImageEvidence,
)
from damagefusion.fusion import FULL_COVERAGE, GRADED_COVERAGE, CoverageModel, fuse_post_event
from damagefusion.pipeline import (
    BuildingOutcome,
    InvalidCaseError,
    Outcome,
    redecide,
    run_post_event_stream,
    run_pre_event_stream,
)

LOSS = LossTable(0.3, 0.3)


def img(i, b="b1", **scores):
    return ImageEvidence(i, b, scores)


def test_post_single_overview_image():
    case = BuildingCase("b1", [img("a", overview=0.9, damage=0.95), img("b", overview=0.1)])
    (o,) = run_post_event_stream([case], FULL_COVERAGE, LOSS)
    assert o.outcome is Outcome.POSITIVE
    assert o.fused_p == pytest.approx(0.95, abs=1e-12)
    assert o.n_images_used == 1


def test_post_no_overview():
    case = BuildingCase("b1", [img("a", overview=0.4, damage=0.99), img("b", overview=0.2, damage=0.99)])
    (o,) = run_post_event_stream([case], FULL_COVERAGE, LOSS)
    assert o.outcome is Outcome.NO_OVERVIEW and o.fused_p is None and o.n_images_used == 0


def test_post_four_clean_images_graded_coverage():
    case = BuildingCase("b1", [img(f"i{k}", overview=0.9, damage=0.0) for k in range(4)])
    (o,) = run_post_event_stream([case], GRADED_COVERAGE, LOSS)
    # q_4 = 1 removes the hidden-damage floor: 1 - 1 * (1 - 0 * 0.5) = 0
    assert o.fused_p == 0.0 and o.outcome is Outcome.NEGATIVE and o.n_images_used == 4


def test_post_single_clean_image_is_undecided_under_graded_coverage():
    case = BuildingCase("b1", [img("a", overview=0.9, damage=0.0)])
    (o,) = run_post_event_stream([case], GRADED_COVERAGE, LOSS)
    # 1 - 1 * (1 - 0.8 * 0.5) = 0.4, inside [0.3, 0.7]
    assert o.fused_p == pytest.approx(0.4) and o.outcome is Outcome.NO_DECISION


def test_post_overview_without_damage_scores():
    (o,) = run_post_event_stream([BuildingCase("b1", [img("a", overview=0.9)])], FULL_COVERAGE, LOSS)
    assert o.outcome is Outcome.NO_EVIDENCE


def test_post_gate_threshold_is_respected():
    case = BuildingCase("b1", [img("a", overview=0.6, damage=0.9), img("b", overview=0.8, damage=0.0)])
    (o,) = run_post_event_stream([case], FULL_COVERAGE, LOSS, gate_threshold=0.7)
    assert o.n_images_used == 1 and o.outcome is Outcome.NEGATIVE


def test_pre_event_examples():
    cases = [
        BuildingCase("b1", [img("a", elevation=1.0, stories=0.6), img("b", elevation=1.0, stories=0.4)]),
    ]
    out = {o.task_id: o for o in run_pre_event_stream(cases, LOSS)}
    assert out[ELEVATION].outcome is Outcome.POSITIVE and out[ELEVATION].fused_p == 1.0
    assert out[STORIES].outcome is Outcome.NO_DECISION and out[STORIES].fused_p == pytest.approx(0.5)
    assert out[MATERIAL].outcome is Outcome.NO_EVIDENCE and out[MATERIAL].fused_p is None


def test_pre_event_per_task_losses():
    case = BuildingCase("b1", [img("a", elevation=0.25, stories=0.25, material=0.25)])
    out = {o.task_id: o.outcome for o in run_pre_event_stream([case], {ELEVATION: LossTable(0.1, 0.1)})}
    assert out[ELEVATION] is Outcome.NO_DECISION
    assert out[STORIES] is Outcome.NEGATIVE  # default 0.3 table


def test_outputs_sorted_by_building_then_task():
    cases = [BuildingCase(b, [img("a", b, overview=0.9, damage=0.5, elevation=0.5)]) for b in ("b2", "b1")]
    post = run_post_event_stream(cases, FULL_COVERAGE, LOSS)
    pre = run_pre_event_stream(cases, LOSS)
    assert [o.building_id for o in post] == ["b1", "b2"]
    assert [(o.building_id, o.task_id) for o in pre] == sorted((o.building_id, o.task_id) for o in pre)


def test_invalid_case_propagates():
    with pytest.raises(InvalidCaseError, match="out of range"):
        run_post_event_stream([BuildingCase("b1", [img("a", overview=1.5)])], FULL_COVERAGE, LOSS)


def test_outcome_record_invariant():
    with pytest.raises(ValueError):
        BuildingOutcome("b", DAMAGE, Outcome.POSITIVE)
    with pytest.raises(ValueError):
        BuildingOutcome("b", DAMAGE, Outcome.NO_OVERVIEW, 0.3)


def test_redecide_matches_rerun():
    cases = [
        BuildingCase(f"b{k}", [img("a", f"b{k}", overview=0.9, damage=k / 10)]) for k in range(11)
    ] + [BuildingCase("z", [img("a", "z", overview=0.1)])]
    cov = CoverageModel(q=(0.2,), q_tail=1.0)
    base = run_post_event_stream(cases, cov, LOSS)
    for a1, a2 in [(0.1, 0.1), (0.2, 0.6), (0.9, 0.4)]:
        assert redecide(base, LossTable(a1, a2)) == run_post_event_stream(cases, cov, LossTable(a1, a2))


def test_post_fused_value_uses_closed_form():
    case = BuildingCase("b1", [img(f"i{k}", overview=0.9, damage=d) for k, d in enumerate((0.1, 0.2))])
    (o,) = run_post_event_stream([case], GRADED_COVERAGE, LOSS)
    assert o.fused_p == fuse_post_event([0.1, 0.2], GRADED_COVERAGE)
