"""Line-delimited record formats and deterministic report emission.

Evidence, truth and outcome files are JSON Lines, one object per line.
Reports are either tab-separated tables or JSON documents. Every probability
is written with exactly six decimals, so identical inputs give identical
bytes.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence, Union

from .evidence import TASKS, BuildingCase, ImageEvidence, group_evidence
from .evaluation import (
    COLUMNS,
    ROWS,
    AccuracyMode,
    Column,
    ConfusionMatrix,
    EvaluationError,
    Histograms,
    Row,
    SweepGrid,
    accuracy,
    nd_rate,
)
from .pipeline import BuildingOutcome, Outcome

DECIMALS = 6


class ParseError(ValueError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"{reason} (line {line_no})")
        self.line_no = line_no
        self.reason = reason


def fmt_float(x: Optional[float]) -> str:
    if x is None or math.isnan(x):
        return "NA"
    return f"{x:.{DECIMALS}f}"


@dataclass(frozen=True)
class EvidenceRecord:
    building_id: str
    image_id: str
    task: str
    p_positive: float


@dataclass(frozen=True)
class TruthRecord:
    building_id: str
    task: str
    label: str


Lines = Union[str, Iterable[str]]


_STRING_FIELDS = frozenset({"building_id", "image_id", "task", "label", "outcome"})


def _iter_objects(lines: Lines, fields: Sequence[str]):
    if isinstance(lines, str):
        lines = lines.splitlines()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(line_no, f"malformed record: {exc.msg}") from None
        if not isinstance(obj, dict):
            raise ParseError(line_no, "record must be a JSON object")
        missing = [f for f in fields if f not in obj]
        if missing:
            raise ParseError(line_no, f"missing field(s): {', '.join(missing)}")
        for f in fields:
            if f in _STRING_FIELDS and not isinstance(obj[f], str):
                raise ParseError(line_no, f"field {f!r} must be a string")
        yield line_no, obj


def _probability(line_no: int, raw: Any, field_name: str = "p_positive") -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float, str)):
        raise ParseError(line_no, f"field {field_name!r} must be a number")
    try:
        p = float(raw)
    except ValueError:
        raise ParseError(line_no, f"field {field_name!r} is not a number: {raw!r}") from None
    if not 0.0 <= p <= 1.0:
        raise ParseError(line_no, f"probability out of range: {raw!r}")
    return p


def _task(line_no: int, task: str) -> str:
    if task not in TASKS:
        raise ParseError(line_no, f"unknown task {task!r}")
    return task


def parse_evidence(lines: Lines) -> list[EvidenceRecord]:
    fields = ("building_id", "image_id", "task", "p_positive")
    return [
        EvidenceRecord(obj["building_id"], obj["image_id"], _task(n, obj["task"]), _probability(n, obj["p_positive"]))
        for n, obj in _iter_objects(lines, fields)
    ]


def parse_truths(lines: Lines) -> list[TruthRecord]:
    out = []
    for n, obj in _iter_objects(lines, ("building_id", "task", "label")):
        schema = TASKS[_task(n, obj["task"])]
        try:
            schema.parse_label(obj["label"])
        except ValueError as exc:
            raise ParseError(n, str(exc)) from None
        out.append(TruthRecord(obj["building_id"], obj["task"], obj["label"]))
    return out


def _line(pairs: Sequence[tuple[str, Any]]) -> str:
    parts = []
    for key, value in pairs:
        if isinstance(value, float) or value is None:
            rendered = "null" if value is None else fmt_float(value)
        else:
            rendered = json.dumps(value)
        parts.append(f"{json.dumps(key)}: {rendered}")
    return "{" + ", ".join(parts) + "}\n"


def format_evidence(records: Iterable[EvidenceRecord]) -> str:
    return "".join(
        _line([("building_id", r.building_id), ("image_id", r.image_id), ("task", r.task), ("p_positive", float(r.p_positive))])
        for r in records
    )


def format_truths(records: Iterable[TruthRecord]) -> str:
    return "".join(_line([("building_id", r.building_id), ("task", r.task), ("label", r.label)]) for r in records)


def records_from_cases(cases: Iterable[BuildingCase]) -> tuple[list[EvidenceRecord], list[TruthRecord]]:
    evidence, truths = [], []
    for case in cases:
        for img in case.images:
            for task, p in img.scores.items():
                evidence.append(EvidenceRecord(case.building_id, img.image_id, task, p))
        for task, label in case.truth.items():
            truths.append(TruthRecord(case.building_id, task, TASKS[task].render_label(label)))
    return evidence, truths


def cases_from_records(
    evidence: Iterable[EvidenceRecord], truths: Iterable[TruthRecord] = ()
) -> list[BuildingCase]:
    return group_evidence(
        (ImageEvidence(r.image_id, r.building_id, {r.task: r.p_positive}) for r in evidence),
        ((t.building_id, t.task, TASKS[t.task].parse_label(t.label)) for t in truths),
    )


def format_outcomes(outcomes: Iterable[BuildingOutcome]) -> str:
    return "".join(
        _line(
            [
                ("building_id", o.building_id),
                ("task", o.task_id),
                ("outcome", o.outcome.value),
                ("fused_p", o.fused_p),
                ("n_images_used", o.n_images_used),
            ]
        )
        for o in outcomes
    )


def parse_outcomes(lines: Lines) -> list[BuildingOutcome]:
    out = []
    for n, obj in _iter_objects(lines, ("building_id", "task", "outcome", "fused_p", "n_images_used")):
        try:
            outcome = Outcome(obj["outcome"])
        except ValueError:
            raise ParseError(n, f"unknown outcome {obj['outcome']!r}") from None
        p = None if obj["fused_p"] is None else _probability(n, obj["fused_p"], "fused_p")
        count = obj["n_images_used"]
        if isinstance(count, bool) or not isinstance(count, int) or count < 0:
            raise ParseError(n, "field 'n_images_used' must be a nonnegative integer")
        try:
            out.append(BuildingOutcome(obj["building_id"], _task(n, obj["task"]), outcome, p, count))
        except ValueError as exc:
            raise ParseError(n, str(exc)) from None
    return out


# ---------------------------------------------------------------- reports


class ReportFormat(str, enum.Enum):
    DELIMITED_TABLE = "delimited_table"
    STRUCTURED = "structured"


def _row_name(task_id: str, row: Row) -> str:
    schema = TASKS[task_id]
    return {
        Row.NO_LABEL: "No label",
        Row.POSITIVE: schema.positive_label,
        Row.NEGATIVE: schema.negative_label,
        Row.OTHER: "Other",
    }[row]


def _column_name(task_id: str, col: Column) -> str:
    schema = TASKS[task_id]
    return {
        Column.UNAVAILABLE: "No OV" if task_id == "damage" else "No evidence",
        Column.NO_DECISION: "ND",
        Column.POSITIVE: schema.positive_label,
        Column.NEGATIVE: schema.negative_label,
    }[col]


def _tsv(rows: Iterable[Sequence[Any]]) -> str:
    return "".join("\t".join(str(v) for v in row) + "\n" for row in rows)


def confusion_table(matrix: ConfusionMatrix, task_id: str) -> str:
    header = ["truth"] + [_column_name(task_id, c) for c in COLUMNS] + ["All"]
    body = [
        [_row_name(task_id, r)] + [matrix.cell(r, c) for c in COLUMNS] + [matrix.row_total(r)] for r in ROWS
    ]
    footer = ["All"] + [matrix.column_total(c) for c in COLUMNS] + [matrix.total]
    return _tsv([header, *body, footer])


def _safe(fn, *args) -> float:
    try:
        return fn(*args)
    except EvaluationError:
        return math.nan


def summary_dict(matrix: ConfusionMatrix) -> dict[str, Any]:
    return {
        "correct": matrix.correct,
        "incorrect": matrix.incorrect,
        "no_decision": matrix.no_decision,
        "permissible": matrix.permissible,
        "accuracy_over_decided": _safe(accuracy, matrix, AccuracyMode.OVER_DECIDED),
        "accuracy_over_permissible": _safe(accuracy, matrix, AccuracyMode.OVER_PERMISSIBLE),
        "nd_rate": _safe(nd_rate, matrix),
    }


def summary_table(matrices: Mapping[str, ConfusionMatrix]) -> str:
    keys = list(summary_dict(ConfusionMatrix()))
    rows = [["task", *keys]]
    for task_id in sorted(matrices):
        s = summary_dict(matrices[task_id])
        rows.append([task_id, *(fmt_float(v) if isinstance(v, float) else v for v in s.values())])
    return _tsv(rows)


SWEEP_HEADER = ("alpha1", "alpha2", "accuracy_over_decided", "accuracy_over_permissible", "nd_rate")


def sweep_table(sweep: Optional[SweepGrid]) -> str:
    rows: list[Sequence[Any]] = [SWEEP_HEADER]
    if sweep is not None:
        for a1 in sweep.alpha1_values:
            for a2 in sweep.alpha2_values:
                c = sweep[a1, a2]
                rows.append([fmt_float(a1), fmt_float(a2), *map(fmt_float, (c.accuracy_decided, c.accuracy_permissible, c.nd_rate))])
    return _tsv(rows)


def histogram_table(hist: Optional[Histograms]) -> str:
    rows: list[Sequence[Any]] = [("truth", "decision", "bin_lo", "bin_hi", "count")]
    if hist is not None:
        for (row, outcome), counts in hist.counts.items():
            for k, n in enumerate(counts):
                rows.append([row.value, outcome.value, fmt_float(hist.edges[k]), fmt_float(hist.edges[k + 1]), n])
    return _tsv(rows)


def _json(value: Any, indent: int = 0) -> str:
    """Deterministic JSON with fixed-precision floats (NaN becomes null)."""
    pad = "  " * (indent + 1)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_json(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[\n" + ",\n".join(pad + _json(v, indent + 1) for v in value) + "\n" + "  " * indent + "]"
    if isinstance(value, float):
        return "null" if math.isnan(value) else fmt_float(value)
    return json.dumps(value)


def _confusion_doc(matrix: ConfusionMatrix) -> dict[str, Any]:
    return {
        "rows": [r.value for r in ROWS],
        "columns": [c.value for c in COLUMNS],
        "counts": [[matrix.cell(r, c) for c in COLUMNS] for r in ROWS],
        "summary": summary_dict(matrix),
    }


def _sweep_doc(sweep: Optional[SweepGrid]) -> list[dict[str, Any]]:
    if sweep is None:
        return []
    return [
        dict(zip(SWEEP_HEADER, (a1, a2, sweep[a1, a2].accuracy_decided, sweep[a1, a2].accuracy_permissible, sweep[a1, a2].nd_rate)))
        for a1 in sweep.alpha1_values
        for a2 in sweep.alpha2_values
    ]


def _histogram_doc(hist: Optional[Histograms]) -> dict[str, Any]:
    if hist is None:
        return {"edges": [], "counts": []}
    return {
        "edges": list(hist.edges),
        "counts": [
            {"truth": row.value, "decision": outcome.value, "counts": list(counts)}
            for (row, outcome), counts in hist.counts.items()
        ],
    }


def _write(path: Path, text: str) -> Path:
    try:
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def emit_reports(
    out_dir: Union[str, Path],
    matrices: Optional[Mapping[str, ConfusionMatrix]] = None,
    sweep: Optional[SweepGrid] = None,
    histograms: Optional[Histograms] = None,
    outcomes: Optional[Sequence[BuildingOutcome]] = None,
    fmt: Union[ReportFormat, str] = ReportFormat.DELIMITED_TABLE,
    *,
    include_sweep: bool = True,
    include_histograms: bool = True,
) -> list[Path]:
    """Write the given reports into ``out_dir`` and return the paths written.

    Confusion matrices get one file per task. The sweep and histogram files
    are written even when empty (header only) unless excluded.
    """
    fmt = ReportFormat(fmt)
    out = Path(out_dir)
    if out.exists() and not out.is_dir():
        raise OSError(f"cannot write reports: {out} is not a directory")
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    matrices = dict(matrices or {})
    written = []
    if outcomes is not None:
        written.append(_write(out / "outcomes.jsonl", format_outcomes(outcomes)))
    if fmt is ReportFormat.DELIMITED_TABLE:
        for task_id in sorted(matrices):
            written.append(_write(out / f"confusion_{task_id}.tsv", confusion_table(matrices[task_id], task_id)))
        if matrices:
            written.append(_write(out / "summary.tsv", summary_table(matrices)))
        if include_sweep:
            written.append(_write(out / "sweep.tsv", sweep_table(sweep)))
        if include_histograms:
            written.append(_write(out / "histograms.tsv", histogram_table(histograms)))
    else:
        doc: dict[str, Any] = {"confusion": {t: _confusion_doc(matrices[t]) for t in sorted(matrices)}}
        if include_sweep:
            doc["sweep"] = _sweep_doc(sweep)
        if include_histograms:
            doc["histograms"] = _histogram_doc(histograms)
        written.append(_write(out / "report.json", _json(doc) + "\n"))
    return written
