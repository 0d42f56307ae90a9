"""Command-line shell: gen, solve, motion, eval, rollout, serve, report.

Exit codes: 0 ok, 2 configuration error, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .generate import GenConfig
from .task_search import BudgetExhausted, SearchConfig, Unsolvable, plan
from .motion_search import INFEASIBLE, search as motion_search
from .harness import (
    EvalReport,
    build_dataset,
    evaluate,
    load_instances,
    load_motion_instances,
    write_report,
)
from .rewards import DEFAULT_BUFFER_CAP, oracle_motion, rollout
from .service import serve_rewards

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _load_config(args) -> GenConfig:
    fields = {}
    if args.config:
        fields.update(json.loads(Path(args.config).read_text()))
    for key in ("variant", "count", "seed"):
        value = getattr(args, key, None)
        if value is not None:
            fields[key] = value
    known = {f.name for f in dataclasses.fields(GenConfig)}
    unknown = set(fields) - known
    if unknown:
        raise ValueError(f"unknown config fields: {sorted(unknown)}")
    return GenConfig(**fields)


def _cmd_gen(args) -> int:
    config = _load_config(args)
    manifest = build_dataset(config, args.out, resume=not args.fresh, jobs=args.jobs)
    print(json.dumps(manifest, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_solve(args) -> int:
    instances = load_instances(args.dataset)
    instance = instances[args.index]
    config = SearchConfig(
        node_budget=args.budget_nodes,
        time_budget_s=args.budget_seconds,
        tie_break=args.tie_break,
    )
    try:
        result = plan(instance.world, instance.initial, config, keep_state_docs=bool(args.ledger))
    except Unsolvable:
        print(json.dumps({"solvable": False}))
        return EXIT_OK
    from .planner_io import render_plan

    print(
        json.dumps(
            {
                "solvable": True,
                "steps": len(result.plan),
                "reference_len": instance.reference_len,
                "expansions": result.expansions,
                "simulations": result.simulations,
                "elapsed_s": round(result.elapsed_s, 3),
                "plan": json.loads(render_plan(result.plan)),
            }
        )
    )
    if args.ledger:
        with open(args.ledger, "w", encoding="utf-8") as fh:
            for rec in result.ledger:
                fh.write(json.dumps(rec.to_doc(), sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_motion(args) -> int:
    instances = load_motion_instances(args.dataset)
    inst = instances[args.index]
    result = motion_search(inst.world, inst.query())
    if result == INFEASIBLE:
        print(json.dumps({"feasible": False}))
    else:
        from .motion_search import plan_to_wire

        print(json.dumps({"feasible": True, "plan": json.loads(plan_to_wire(result))}))
    return EXIT_OK


def _cmd_eval(args) -> int:
    instances = load_instances(args.dataset)
    if args.limit:
        instances = instances[: args.limit]
    report = evaluate(
        instances,
        args.planner,
        args.mode,
        motion=args.motion,
        trials=args.trials,
        max_replans=args.max_replans,
        timeout=args.timeout,
        jobs=args.jobs,
    )
    doc = report.to_doc()
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    summary = {k: doc[k] for k in ("planner", "mode", "motion", "success", "step_diff", "protocol_errors")}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _cmd_rollout(args) -> int:
    instances = load_instances(args.dataset)
    inst = instances[args.index]
    plans_doc = json.loads(Path(args.plans).read_text())
    plans = plans_doc["plans"] if isinstance(plans_doc, dict) else plans_doc
    records = rollout(inst, plans, oracle_motion, buffer_cap=args.n_cap)
    lines = [json.dumps(r.to_doc(), sort_keys=True) for r in records]
    output = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(output)
    else:
        sys.stdout.write(output)
    return EXIT_OK


def _cmd_serve(args) -> int:
    instances = load_instances(args.dataset)
    print(f"serving {len(instances)} instances on {args.host}:{args.port}", flush=True)
    serve_rewards(instances, args.port, args.host)
    return EXIT_OK


def _cmd_report(args) -> int:
    report = EvalReport.from_doc(json.loads(Path(args.report).read_text()))
    files = write_report(report, args.out_dir)
    print(json.dumps({"written": [str(f) for f in files]}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tampbench")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of generation config fields")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("gen", parents=[common], help="build a dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=("standard", "unseen_map", "unseen_layout", "motion_2x2"))
    p.add_argument("--count", type=int)
    p.add_argument("--fresh", action="store_true", help="ignore any partial file")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", parents=[common], help="run the task A* on one instance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--ledger", help="write the failure ledger JSONL here")
    p.add_argument("--tie-break", choices=("default", "reversed"), default="default")
    p.add_argument("--budget-nodes", type=int, default=20000)
    p.add_argument("--budget-seconds", type=float, default=60.0)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("motion", parents=[common], help="run the motion search on one instance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, default=0)
    p.set_defaults(func=_cmd_motion)

    p = sub.add_parser("eval", parents=[common], help="evaluate a planner over a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--planner", default="oracle", help="oracle | cmd:<argv> | http(s)://... | env")
    p.add_argument("--mode", choices=("FullPlan", "ICReplan", "NCReplan"), default="FullPlan")
    p.add_argument("--motion", choices=("oracle", "straight"), default="oracle")
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--max-replans", type=int, default=6)
    p.add_argument("--timeout", type=float, default=120.0)
    p.add_argument("--limit", type=int, default=0, help="evaluate only the first N instances")
    p.add_argument("--out", help="write the full report JSON here")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("rollout", parents=[common], help="score candidate plans on one instance")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--plans", required=True, help='JSON file: {"plans": ["...", ...]}')
    p.add_argument("--n-cap", type=int, default=DEFAULT_BUFFER_CAP)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_rollout)

    p = sub.add_parser("serve", parents=[common], help="run the reward HTTP service")
    p.add_argument("--dataset", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("report", parents=[common], help="render files from a report JSON")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BudgetExhausted as err:
        print(f"budget exhausted: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
