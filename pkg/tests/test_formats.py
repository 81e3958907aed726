import json

import pytest
from hypothesis import given, strategies as st

from damagefusion.evaluation import ConfusionMatrix, probability_histogram, sweep_loss_params
from damagefusion.evidence import DAMAGE, TASKS, TruthConflictError
from damagefusion.formats import (
    EvidenceRecord,
    ParseError,
    TruthRecord,
    cases_from_records,
    confusion_table,
    emit_reports,
    format_evidence,
    format_outcomes,
    format_truths,
    parse_evidence,
    parse_outcomes,
    parse_truths,
    records_from_cases,
)
from damagefusion.fusion import FULL_COVERAGE
from damagefusion.pipeline import BuildingOutcome, Outcome
from damagefusion.synth import SynthConfig, generate_mission

from published_counts import POST_EVENT_FULL_COVERAGE, expand


def test_parse_evidence_line():
    (r,) = parse_evidence('{"building_id": "b1", "image_id": "i1", "task": "damage", "p_positive": "0.94"}\n')
    assert r == EvidenceRecord("b1", "i1", "damage", 0.94)
    (r,) = parse_evidence('{"building_id": "b1", "image_id": "i1", "task": "damage", "p_positive": 0.94}')
    assert r.p_positive == 0.94


def test_parse_evidence_out_of_range_reports_line():
    text = "\n".join(
        [
            '{"building_id": "b1", "image_id": "i1", "task": "damage", "p_positive": 0.5}',
            '{"building_id": "b1", "image_id": "i2", "task": "damage", "p_positive": "1.2"}',
        ]
    )
    with pytest.raises(ParseError, match=r"probability out of range.*\(line 2\)") as err:
        parse_evidence(text)
    assert err.value.line_no == 2


@pytest.mark.parametrize(
    "line, reason",
    [
        ("{not json", "malformed"),
        ("[1, 2]", "JSON object"),
        ('{"building_id": "b1", "task": "damage", "p_positive": 0.5}', "image_id"),
        ('{"building_id": "b1", "image_id": "i", "task": "roof", "p_positive": 0.5}', "unknown task"),
        ('{"building_id": 3, "image_id": "i", "task": "damage", "p_positive": 0.5}', "must be a string"),
        ('{"building_id": "b", "image_id": "i", "task": "damage", "p_positive": "high"}', "not a number"),
        ('{"building_id": "b", "image_id": "i", "task": "damage", "p_positive": true}', "must be a number"),
    ],
)
def test_parse_evidence_diagnostics(line, reason):
    with pytest.raises(ParseError, match=reason):
        parse_evidence(line)


def test_empty_inputs():
    assert parse_evidence("") == []
    assert parse_evidence("\n\n") == []
    assert parse_truths([]) == []


def test_parse_truths_vocabulary():
    ok = parse_truths('{"building_id": "b1", "task": "damage", "label": "MD"}')
    assert ok == [TruthRecord("b1", "damage", "MD")]
    with pytest.raises(ParseError, match="vocabulary"):
        parse_truths('{"building_id": "b1", "task": "damage", "label": "EL"}')


def test_conflicting_truth_rows():
    truths = [TruthRecord("b1", "damage", "MD"), TruthRecord("b1", "damage", "NMD")]
    with pytest.raises(TruthConflictError):
        cases_from_records([], truths)


records_st = st.lists(
    st.builds(
        EvidenceRecord,
        st.text("abc123-_", min_size=1, max_size=6),
        st.text("xyz9", min_size=1, max_size=4),
        st.sampled_from(sorted(TASKS)),
        st.integers(0, 10**6).map(lambda k: round(k / 10**6, 6)),
    ),
    max_size=30,
)


@given(records_st)
def test_evidence_round_trip(records):
    assert parse_evidence(format_evidence(records)) == records


def test_truth_and_case_round_trip():
    m = generate_mission(SynthConfig(seed=9, n_buildings=25))
    evidence, truths = records_from_cases(m.cases)
    ev2 = parse_evidence(format_evidence(evidence))
    tr2 = parse_truths(format_truths(truths))
    assert tuple(cases_from_records(ev2, tr2)) == m.cases


def test_outcome_round_trip():
    outcomes = [
        BuildingOutcome("b1", DAMAGE, Outcome.POSITIVE, 0.940000, 2),
        BuildingOutcome("b2", DAMAGE, Outcome.NO_OVERVIEW, None, 0),
        BuildingOutcome("b3", "elevation", Outcome.NO_DECISION, 0.5, 3),
    ]
    text = format_outcomes(outcomes)
    assert '"fused_p": 0.940000' in text and '"fused_p": null' in text
    assert parse_outcomes(text) == outcomes
    with pytest.raises(ParseError, match="fused_p must be set"):
        parse_outcomes('{"building_id": "b", "task": "damage", "outcome": "positive", "fused_p": null, "n_images_used": 1}')


def test_confusion_table_round_trips_counts():
    m = ConfusionMatrix.from_table(POST_EVENT_FULL_COVERAGE)
    lines = [l.split("\t") for l in confusion_table(m, DAMAGE).splitlines()]
    assert lines[0] == ["truth", "No OV", "ND", "MD", "NMD", "All"]
    assert lines[1] == ["No label", "26", "6", "5", "17", "54"]
    assert lines[2] == ["MD", "44", "16", "151", "39", "250"]
    assert lines[3] == ["NMD", "109", "71", "71", "566", "817"]
    assert lines[5] == ["All", "179", "93", "227", "622", "1121"]


def _full_reports(tmp_path, fmt):
    outcomes, truths = expand(POST_EVENT_FULL_COVERAGE, DAMAGE)
    m = ConfusionMatrix.from_table(POST_EVENT_FULL_COVERAGE)
    mission = generate_mission(SynthConfig(seed=1, n_buildings=50, pre_event=None))
    sweep = sweep_loss_params(mission.cases, FULL_COVERAGE, 0.5, [0.1, 0.3], [0.3])
    hist = probability_histogram(outcomes, truths, bins=10)
    return emit_reports(tmp_path, {DAMAGE: m}, sweep, hist, outcomes[:50], fmt)


@pytest.mark.parametrize("fmt", ["delimited_table", "structured"])
def test_reports_are_byte_deterministic(tmp_path, fmt):
    first = {p.name: p.read_bytes() for p in _full_reports(tmp_path / "a", fmt)}
    second = {p.name: p.read_bytes() for p in _full_reports(tmp_path / "b", fmt)}
    assert first == second and first


def test_structured_report_contents(tmp_path):
    (outcomes_path, report) = _full_reports(tmp_path, "structured")
    doc = json.loads(report.read_text())
    conf = doc["confusion"]["damage"]
    assert conf["counts"][1] == [44, 16, 151, 39]
    assert conf["summary"]["correct"] == 717
    assert "0.100000" in report.read_text()
    assert len(doc["sweep"]) == 2 and doc["sweep"][0]["alpha1"] == 0.1


def test_empty_sweep_is_header_only(tmp_path):
    paths = emit_reports(tmp_path, sweep=None, include_histograms=False)
    assert [p.name for p in paths] == ["sweep.tsv"]
    assert paths[0].read_text() == "alpha1\talpha2\taccuracy_over_decided\taccuracy_over_permissible\tnd_rate\n"


def test_fixed_precision_in_tables(tmp_path):
    mission = generate_mission(SynthConfig(seed=1, n_buildings=30, pre_event=None))
    sweep = sweep_loss_params(mission.cases, FULL_COVERAGE, 0.5, [0.3], [0.3])
    (path,) = emit_reports(tmp_path, sweep=sweep, include_histograms=False)
    row = path.read_text().splitlines()[1].split("\t")
    assert row[:2] == ["0.300000", "0.300000"]
    assert all(len(v.split(".")[1]) == 6 for v in row if v != "NA")


def test_unwritable_destination(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="not a directory"):
        emit_reports(blocker, sweep=None)
