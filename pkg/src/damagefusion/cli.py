"""Command-line entry point: ``damagefusion {fuse,run,sweep,simulate,report}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import evaluation, formats, pipeline, synth
from .decision import LossTable, decide
from .evidence import DAMAGE, PRE_EVENT_TASKS, TruthConflictError
from .fusion import CoverageModel, FusionError, fuse_post_event, fuse_pre_event

log = logging.getLogger("damagefusion")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_loss_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha1", type=float, default=0.3, help="loss of declining when the truth is positive")
    p.add_argument("--alpha2", type=float, default=0.3, help="loss of declining when the truth is negative")


def _add_coverage_args(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--coverage",
        type=_floats,
        default=[1.0],
        metavar="Q1,...,TAIL",
        help="coverage probabilities per image count; the last value applies to all larger counts",
    )
    p.add_argument("--theta", type=_floats, default=[0.5], metavar="T1,...,TAIL", help="hidden-damage probabilities")
    p.add_argument("--gate-threshold", type=float, default=0.5)


def _coverage(args: argparse.Namespace) -> CoverageModel:
    return CoverageModel.from_sequence(args.coverage, args.theta)


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_cases(args: argparse.Namespace):
    evidence = formats.parse_evidence(_read(args.evidence))
    truths = formats.parse_truths(_read(args.truth)) if args.truth else []
    return formats.cases_from_records(evidence, truths)


def cmd_fuse(args: argparse.Namespace) -> int:
    if args.stream == "pre":
        p = fuse_pre_event(args.scores)
    else:
        p = fuse_post_event(args.scores, _coverage(args))
    d = decide(p, LossTable(args.alpha1, args.alpha2))
    print(f"{formats.fmt_float(p)}\t{d.value.value}")
    return 0


def _matrices(outcomes, cases, tasks) -> dict:
    return {t: evaluation.build_confusion(outcomes, cases, t) for t in tasks}


def _log_summary(matrices, mode: str) -> None:
    for task_id, m in sorted(matrices.items()):
        s = formats.summary_dict(m)
        log.info(
            "%s: correct=%d incorrect=%d nd=%d accuracy(%s)=%s nd_rate=%s",
            task_id, s["correct"], s["incorrect"], s["no_decision"], mode,
            formats.fmt_float(s[f"accuracy_{mode}"]), formats.fmt_float(s["nd_rate"]),
        )


def cmd_run(args: argparse.Namespace) -> int:
    cases = _load_cases(args)
    loss = LossTable(args.alpha1, args.alpha2)
    for w in loss.warnings():
        log.warning(w)
    outcomes: list = []
    tasks: list[str] = []
    if args.stream in ("post", "both"):
        outcomes += pipeline.run_post_event_stream(cases, _coverage(args), loss, args.gate_threshold)
        tasks.append(DAMAGE)
    if args.stream in ("pre", "both"):
        outcomes += pipeline.run_pre_event_stream(cases, loss)
        tasks.extend(PRE_EVENT_TASKS)
    outcomes.sort(key=lambda o: (o.building_id, o.task_id))
    matrices = _matrices(outcomes, cases, tasks)
    hist = evaluation.probability_histogram(outcomes, cases, args.bins, task_id=DAMAGE if tasks == [DAMAGE] else None)
    written = formats.emit_reports(
        args.out, matrices, None, hist, outcomes, args.format, include_sweep=False,
        include_histograms=args.stream == "post",
    )
    _log_summary(matrices, args.accuracy_mode)
    for path in written:
        log.info("wrote %s", path)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    cases = _load_cases(args)
    grid = evaluation.sweep_loss_params(
        cases, _coverage(args), args.gate_threshold, args.alpha1_grid, args.alpha2_grid
    )
    written = formats.emit_reports(args.out, sweep=grid, fmt=args.format, include_histograms=False)
    for path in written:
        log.info("wrote %s", path)
    return 0


def _synth_config(args: argparse.Namespace) -> synth.SynthConfig:
    base = {}
    if args.config:
        raw = json.loads(_read(args.config))
        fields = {f.name: f for f in dataclasses.fields(synth.SynthConfig)}
        unknown = set(raw) - set(fields)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        for key, value in raw.items():
            if key in ("damage_shown", "damage_not_shown", "overview_score", "non_overview_score"):
                value = synth.BetaScore(**value)
            elif key == "pre_event" and value is not None:
                value = dict(value)
                for k in ("positive_score", "negative_score"):
                    if k in value:
                        value[k] = synth.BetaScore(**value[k])
                value = synth.PreEventConfig(**value)
            base[key] = value
    for key in ("n_buildings", "md_prevalence", "damage_visibility", "images_min", "images_max", "nmd_images_max", "nov_rate"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    base["seed"] = args.seed
    return synth.SynthConfig(**base)


def cmd_simulate(args: argparse.Namespace) -> int:
    mission = synth.generate_mission(_synth_config(args))
    evidence, truths = formats.records_from_cases(mission.cases)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "evidence.jsonl").write_text(formats.format_evidence(evidence), encoding="utf-8", newline="\n")
    (out / "truth.jsonl").write_text(formats.format_truths(truths), encoding="utf-8", newline="\n")
    ledger = "".join(
        json.dumps({"image_id": k, "damage_visible": v}) + "\n" for k, v in mission.damage_visible.items()
    )
    (out / "visibility.jsonl").write_text(ledger, encoding="utf-8", newline="\n")
    for label, s in synth.bias_report(mission.cases).items():
        log.info("%s: %d buildings, images mean=%.3f min=%d max=%d", label.value, s.n_buildings, s.mean, s.min, s.max)
    log.info("wrote %d evidence rows to %s", len(evidence), out)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    outcomes = formats.parse_outcomes(_read(args.outcomes))
    truths = formats.parse_truths(_read(args.truth)) if args.truth else []
    cases = formats.cases_from_records([], truths)
    tasks = sorted({o.task_id for o in outcomes})
    matrices = _matrices(outcomes, cases, tasks)
    hist = evaluation.probability_histogram(outcomes, cases, args.bins, task_id=args.task)
    written = formats.emit_reports(args.out, matrices, None, hist, None, args.format, include_sweep=False)
    _log_summary(matrices, args.accuracy_mode)
    for path in written:
        log.info("wrote %s", path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="damagefusion", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse one building's scores and print the fused probability and decision")
    p.add_argument("scores", type=float, nargs="+")
    p.add_argument("--stream", choices=("post", "pre"), default="post")
    _add_loss_args(p)
    _add_coverage_args(p)
    p.set_defaults(func=cmd_fuse)

    def add_report_args(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=[f.value for f in formats.ReportFormat], default="delimited_table")
        p.add_argument("--accuracy-mode", choices=[m.value for m in evaluation.AccuracyMode], default="over_decided")
        p.add_argument("--bins", type=int, default=10)

    p = sub.add_parser("run", help="run the analysis streams and write outcomes and confusion matrices")
    p.add_argument("--evidence", required=True)
    p.add_argument("--truth")
    p.add_argument("--stream", choices=("post", "pre", "both"), default="both")
    _add_loss_args(p)
    _add_coverage_args(p)
    add_report_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="evaluate the post-event stream over a grid of loss parameters")
    p.add_argument("--evidence", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--alpha1-grid", type=_floats, default=None, metavar="A,B,...")
    p.add_argument("--alpha2-grid", type=_floats, default=None, metavar="A,B,...")
    _add_coverage_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=[f.value for f in formats.ReportFormat], default="delimited_table")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="generate a seeded synthetic mission")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file with SynthConfig fields")
    p.add_argument("--n-buildings", type=int)
    p.add_argument("--md-prevalence", type=float)
    p.add_argument("--damage-visibility", type=float)
    p.add_argument("--images-min", type=int)
    p.add_argument("--images-max", type=int)
    p.add_argument("--nmd-images-max", type=int)
    p.add_argument("--nov-rate", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="build confusion matrices and histograms from an outcomes file")
    p.add_argument("--outcomes", required=True)
    p.add_argument("--truth")
    p.add_argument("--task", help="restrict histograms to one task")
    add_report_args(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (ValueError, OSError, FusionError, TruthConflictError) as exc:
        print(f"damagefusion: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
