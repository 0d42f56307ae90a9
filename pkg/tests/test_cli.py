import json
import subprocess
import sys
from pathlib import Path

import pytest

CLI = [sys.executable, "-m", "tampbench"]


def run_cli(*args, check=True):
    proc = subprocess.run(
        CLI + list(args), capture_output=True, text=True, timeout=300
    )
    if check and proc.returncode != 0:
        raise AssertionError(f"cli failed ({proc.returncode}): {proc.stderr}")
    return proc


@pytest.fixture(scope="module")
def tiny_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "tiny.jsonl"
    cfg = tmp_path_factory.mktemp("cfg") / "cfg.json"
    cfg.write_text(json.dumps({"max_cols": 3, "max_rows": 3, "count": 4, "seed": 13}))
    proc = run_cli("gen", "--config", str(cfg), "--out", str(out))
    manifest = json.loads(proc.stdout)
    return out, manifest


class TestCli:
    def test_gen_manifest(self, tiny_dataset):
        out, manifest = tiny_dataset
        assert manifest["count"] == 4
        assert Path(str(out) + ".manifest.json").exists()

    def test_solve_and_ledger(self, tiny_dataset, tmp_path):
        out, _ = tiny_dataset
        ledger = tmp_path / "ledger.jsonl"
        proc = run_cli("solve", "--dataset", str(out), "--index", "0", "--ledger", str(ledger))
        doc = json.loads(proc.stdout)
        assert doc["solvable"] is True
        assert doc["steps"] >= 1
        assert ledger.exists()

    def test_eval_oracle(self, tiny_dataset, tmp_path):
        out, _ = tiny_dataset
        report = tmp_path / "report.json"
        proc = run_cli(
            "eval",
            "--dataset", str(out),
            "--planner", "oracle",
            "--mode", "FullPlan",
            "--trials", "1",
            "--out", str(report),
        )
        summary = json.loads(proc.stdout)
        assert summary["success"] == 1.0
        assert report.exists()

    def test_report_files(self, tiny_dataset, tmp_path):
        out, _ = tiny_dataset
        report = tmp_path / "report.json"
        run_cli(
            "eval", "--dataset", str(out), "--planner", "oracle",
            "--trials", "1", "--out", str(report),
        )
        outdir = tmp_path / "rendered"
        run_cli("report", "--report", str(report), "--out-dir", str(outdir))
        assert (outdir / "results.csv").exists()
        assert (outdir / "breakdown.svg").exists()

    def test_rollout(self, tiny_dataset, tmp_path):
        out, _ = tiny_dataset
        from tampbench.harness import load_instances
        from tampbench.planner_io import render_plan

        inst = load_instances(out)[0]
        plans = tmp_path / "plans.json"
        plans.write_text(json.dumps({"plans": [render_plan(inst.reference_plan)]}))
        proc = run_cli("rollout", "--dataset", str(out), "--index", "0", "--plans", str(plans))
        record = json.loads(proc.stdout.splitlines()[0])
        assert record["outcome"] == "Success"

    def test_motion_verb(self, tmp_path):
        mout = tmp_path / "motion.jsonl"
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"variant": "motion_2x2", "count": 2, "seed": 3}))
        run_cli("gen", "--config", str(cfg), "--out", str(mout))
        proc = run_cli("motion", "--dataset", str(mout), "--index", "0")
        doc = json.loads(proc.stdout)
        assert doc["feasible"] is True

    def test_config_error_exit_code(self, tmp_path):
        proc = run_cli("gen", "--out", str(tmp_path / "x.jsonl"), "--config", "/nonexistent.json", check=False)
        assert proc.returncode == 2
