"""Dataset building, batch evaluation, metrics, and report emission."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

from .model import OutcomeKind
from .generate import (
    GenConfig,
    MotionInstance,
    TaskInstance,
    generate_instance,
    generate_motion_instance,
    instance_from_doc,
    instance_to_doc,
    motion_from_doc,
    motion_to_doc,
)
from .episodes import ProtocolError, PlannerTimeout, make_planner, run_episode
from .rewards import MotionPlanner, oracle_motion, straight_line_motion

_JSON_KW = dict(sort_keys=True, separators=(",", ":"))

MOTION_PLANNERS: dict[str, MotionPlanner] = {
    "oracle": oracle_motion,
    "straight": straight_line_motion,
}


def _dump_line(doc: dict) -> str:
    return json.dumps(doc, **_JSON_KW) + "\n"


def _count_complete_lines(path: Path) -> int:
    """Complete (newline-terminated) lines; truncates a partial tail in place."""
    if not path.exists():
        return 0
    data = path.read_bytes()
    if not data:
        return 0
    if not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        path.write_bytes(data[:cut])
        data = data[:cut]
    return data.count(b"\n")


def file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _gen_doc(args: tuple) -> str:
    config_doc, index, kind = args
    config = GenConfig(**config_doc)
    if kind == "motion":
        return _dump_line(motion_to_doc(generate_motion_instance(config, index)))
    return _dump_line(instance_to_doc(generate_instance(config, index)))


def build_dataset(
    config: GenConfig, out_path: str | os.PathLike, resume: bool = True, jobs: int = 1
) -> dict:
    """Stream instances to JSON-Lines with a manifest sidecar; resumable by index."""
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    kind = "motion" if config.variant == "motion_2x2" else "task"
    start = _count_complete_lines(path) if resume else 0
    if not resume and path.exists():
        path.unlink()
    if start > config.count:
        raise ValueError(f"{path} already has {start} lines for a {config.count}-line dataset")

    todo = list(range(start, config.count))
    mode = "a" if start else "w"
    with open(path, mode, encoding="utf-8") as fh:
        if jobs > 1 and todo:
            args = [(asdict(config), i, kind) for i in todo]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for line in pool.map(_gen_doc, args, chunksize=4):
                    fh.write(line)
        else:
            for i in todo:
                fh.write(_gen_doc((asdict(config), i, kind)))

    manifest = {
        "kind": kind,
        "config": asdict(config),
        "count": config.count,
        "content_hash": file_sha256(path),
    }
    manifest_path = path.with_name(path.name + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def load_instances(path: str | os.PathLike) -> list[TaskInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(instance_from_doc(json.loads(line)))
    return out


def load_motion_instances(path: str | os.PathLike) -> list[MotionInstance]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(motion_from_doc(json.loads(line)))
    return out


@dataclass(frozen=True)
class TrialRecord:
    instance_index: int
    trial: int
    kind: str
    steps_executed: int
    reference_len: int
    replans: int
    format_errors: int
    protocol_error: bool
    solution_time_s: float
    simulation_time_s: float


@dataclass
class EvalReport:
    planner: str
    mode: str
    motion: str
    trials: int
    records: list[TrialRecord]
    success: float
    step_diff: float | None
    histogram: dict[str, float]
    mean_solution_s: float
    mean_simulation_s: float
    protocol_errors: int

    def to_doc(self) -> dict:
        return {
            "planner": self.planner,
            "mode": self.mode,
            "motion": self.motion,
            "trials": self.trials,
            "success": self.success,
            "step_diff": self.step_diff,
            "histogram": self.histogram,
            "mean_solution_s": self.mean_solution_s,
            "mean_simulation_s": self.mean_simulation_s,
            "protocol_errors": self.protocol_errors,
            "records": [asdict(r) for r in self.records],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "EvalReport":
        return cls(
            planner=doc["planner"],
            mode=doc["mode"],
            motion=doc["motion"],
            trials=doc["trials"],
            records=[TrialRecord(**r) for r in doc["records"]],
            success=doc["success"],
            step_diff=doc["step_diff"],
            histogram=doc["histogram"],
            mean_solution_s=doc["mean_solution_s"],
            mean_simulation_s=doc["mean_simulation_s"],
            protocol_errors=doc["protocol_errors"],
        )


def aggregate(records: list[TrialRecord]) -> dict:
    """Recompute every report metric from the raw trial log."""
    total = len(records)
    if total == 0:
        return {
            "success": 0.0,
            "step_diff": None,
            "histogram": {k.value: 0.0 for k in OutcomeKind if k is not OutcomeKind.Success},
            "mean_solution_s": 0.0,
            "mean_simulation_s": 0.0,
            "protocol_errors": 0,
        }
    successes = [r for r in records if r.kind == OutcomeKind.Success.value]
    diffs = [r.steps_executed - r.reference_len for r in successes]
    histogram = {}
    for kind in OutcomeKind:
        if kind is OutcomeKind.Success:
            continue
        histogram[kind.value] = sum(1 for r in records if r.kind == kind.value) / total
    return {
        "success": len(successes) / total,
        "step_diff": (sum(diffs) / len(diffs)) if diffs else None,
        "histogram": histogram,
        "mean_solution_s": sum(r.solution_time_s for r in records) / total,
        "mean_simulation_s": sum(r.simulation_time_s for r in records) / total,
        "protocol_errors": sum(1 for r in records if r.protocol_error),
    }


def _run_trial(
    instance: TaskInstance,
    planner,
    mode: str,
    motion: MotionPlanner,
    trial: int,
    max_replans: int,
    timeout: float,
) -> TrialRecord:
    try:
        report = run_episode(
            instance,
            planner,
            mode,
            motion_planner=motion,
            max_replans=max_replans,
            episode_id=f"i{instance.index}",
            trial=trial,
            request_timeout=timeout,
        )
        return TrialRecord(
            instance_index=instance.index,
            trial=trial,
            kind=report.outcome.kind.value,
            steps_executed=report.steps_executed,
            reference_len=instance.reference_len,
            replans=report.replans,
            format_errors=report.format_errors,
            protocol_error=False,
            solution_time_s=report.solution_time_s,
            simulation_time_s=report.simulation_time_s,
        )
    except (ProtocolError, PlannerTimeout) as err:
        return TrialRecord(
            instance_index=instance.index,
            trial=trial,
            kind=OutcomeKind.ExecutionErr.value,
            steps_executed=0,
            reference_len=instance.reference_len,
            replans=0,
            format_errors=0,
            protocol_error=True,
            solution_time_s=0.0,
            simulation_time_s=0.0,
        )


def _eval_chunk(args: tuple) -> list[dict]:
    docs, planner_spec, mode, motion_name, trials, max_replans, timeout = args
    planner = make_planner(planner_spec, timeout)
    motion = MOTION_PLANNERS[motion_name]
    records = []
    try:
        for doc in docs:
            instance = instance_from_doc(doc)
            for trial in range(trials):
                records.append(
                    asdict(_run_trial(instance, planner, mode, motion, trial, max_replans, timeout))
                )
    finally:
        planner.close()
    return records


def evaluate(
    instances: list[TaskInstance],
    planner,
    mode: str,
    motion: MotionPlanner | str = "oracle",
    trials: int = 4,
    max_replans: int = 6,
    timeout: float = 120.0,
    jobs: int = 1,
    planner_label: str | None = None,
) -> EvalReport:
    """Run `trials` independent episodes per instance and aggregate the metrics.

    `planner` is a handle or a spec string; parallel evaluation requires spec
    strings so each worker can own its planner process.
    """
    motion_name = motion if isinstance(motion, str) else getattr(motion, "__name__", "custom")
    motion_fn = MOTION_PLANNERS[motion] if isinstance(motion, str) else motion

    records: list[TrialRecord] = []
    if jobs > 1:
        if not isinstance(planner, str):
            raise ValueError("parallel evaluation needs a planner spec string")
        docs = [instance_to_doc(i) for i in instances]
        chunk = max(1, math.ceil(len(docs) / jobs))
        chunks = [docs[i : i + chunk] for i in range(0, len(docs), chunk)]
        args = [(c, planner, mode, motion_name, trials, max_replans, timeout) for c in chunks]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for part in pool.map(_eval_chunk, args):
                records.extend(TrialRecord(**r) for r in part)
        records.sort(key=lambda r: (r.instance_index, r.trial))
        label = planner_label or planner
    else:
        handle = make_planner(planner, timeout) if isinstance(planner, str) else planner
        label = planner_label or (planner if isinstance(planner, str) else type(handle).__name__)
        try:
            for instance in instances:
                for trial in range(trials):
                    records.append(
                        _run_trial(instance, handle, mode, motion_fn, trial, max_replans, timeout)
                    )
        finally:
            if isinstance(planner, str):
                handle.close()

    agg = aggregate(records)
    return EvalReport(
        planner=label,
        mode=mode,
        motion=motion_name,
        trials=trials,
        records=records,
        **agg,
    )


def _svg_bar_chart(histogram: dict[str, float], title: str) -> str:
    kinds = list(histogram)
    width, height, margin, bottom = 640, 320, 40, 90
    bar_w = (width - 2 * margin) / max(1, len(kinds))
    peak = max(0.0001, max(histogram.values(), default=0.0))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width/2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height-bottom}" x2="{width-margin}" y2="{height-bottom}" stroke="black"/>',
    ]
    for i, kind in enumerate(kinds):
        frac = histogram[kind]
        bar_h = (height - bottom - 40) * (frac / peak)
        x = margin + i * bar_w + bar_w * 0.15
        y = height - bottom - bar_h
        parts.append(
            f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w*0.7:.1f}" height="{bar_h:.1f}" fill="#4878b0"/>'
        )
        parts.append(
            f'<text x="{x + bar_w*0.35:.1f}" y="{y-4:.1f}" text-anchor="middle" font-size="11">{frac:.3f}</text>'
        )
        parts.append(
            f'<text x="{x + bar_w*0.35:.1f}" y="{height-bottom+14:.1f}" text-anchor="middle" '
            f'font-size="10" transform="rotate(30 {x + bar_w*0.35:.1f} {height-bottom+14:.1f})">{kind}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def write_report(report: EvalReport, out_dir: str | os.PathLike) -> list[Path]:
    """Markdown summary, CSV tables, and an SVG failure-breakdown chart."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    results_csv = out / "results.csv"
    step_diff = "" if report.step_diff is None else f"{report.step_diff:.4f}"
    results_csv.write_text(
        "planner,motion,mode,trials,Success,StepDiff\n"
        + (
            f"{report.planner},{report.motion},{report.mode},{report.trials},"
            f"{report.success:.4f},{step_diff}\n"
            if report.records
            else ""
        )
    )
    written.append(results_csv)

    breakdown_csv = out / "breakdown.csv"
    kinds = list(report.histogram)
    row = ",".join(f"{report.histogram[k]:.4f}" for k in kinds)
    breakdown_csv.write_text(
        ",".join(kinds) + "\n" + (row + "\n" if report.records else "")
    )
    written.append(breakdown_csv)

    svg = out / "breakdown.svg"
    svg.write_text(_svg_bar_chart(report.histogram, f"Failure breakdown: {report.planner} / {report.motion} / {report.mode}"))
    written.append(svg)

    md = out / "summary.md"
    lines = [
        "# Evaluation report",
        "",
        f"- planner: `{report.planner}`",
        f"- motion: `{report.motion}`",
        f"- mode: `{report.mode}`",
        f"- instances: {len(report.records) // max(1, report.trials)}, trials: {report.trials}",
        f"- Success: {report.success:.4f}",
        f"- StepDiff: {step_diff or 'n/a (no successful trials)'}",
        f"- mean solution time: {report.mean_solution_s:.3f}s",
        f"- mean simulation time: {report.mean_simulation_s:.3f}s",
        f"- protocol errors: {report.protocol_errors}",
        "",
        "| failure kind | fraction |",
        "|---|---|",
    ]
    for k, v in report.histogram.items():
        lines.append(f"| {k} | {v:.4f} |")
    md.write_text("\n".join(lines) + "\n")
    written.append(md)
    return written
