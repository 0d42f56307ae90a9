import json
import threading
import urllib.request
from pathlib import Path

import pytest

from tampbench.model import OutcomeKind
from tampbench.generate import GenConfig
from tampbench.harness import (
    EvalReport,
    aggregate,
    build_dataset,
    evaluate,
    file_sha256,
    load_instances,
    load_motion_instances,
    write_report,
)
from tampbench.planner_io import render_plan
from tampbench.service import make_server

CFG = GenConfig(variant="standard", count=6, seed=21, max_cols=3, max_rows=3)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "tiny.jsonl"
    manifest = build_dataset(CFG, path)
    return path, manifest


class TestBuildDataset:
    def test_manifest_hash_stable(self, dataset, tmp_path):
        path, manifest = dataset
        again = tmp_path / "again.jsonl"
        manifest2 = build_dataset(CFG, again)
        assert manifest["content_hash"] == manifest2["content_hash"]
        assert path.read_bytes() == again.read_bytes()

    def test_resume_produces_identical_bytes(self, dataset, tmp_path):
        path, manifest = dataset
        partial = tmp_path / "partial.jsonl"
        lines = path.read_text().splitlines(keepends=True)
        partial.write_text("".join(lines[:3]) + lines[3][: len(lines[3]) // 2])  # torn tail
        manifest2 = build_dataset(CFG, partial, resume=True)
        assert partial.read_bytes() == path.read_bytes()
        assert manifest2["content_hash"] == manifest["content_hash"]

    def test_loaders(self, dataset, tmp_path):
        path, _ = dataset
        instances = load_instances(path)
        assert len(instances) == CFG.count
        assert all(i.reference_len >= 1 for i in instances)
        mpath = tmp_path / "motion.jsonl"
        mcfg = GenConfig(variant="motion_2x2", count=4, seed=2)
        build_dataset(mcfg, mpath)
        assert len(load_motion_instances(mpath)) == 4


class TestEvaluate:
    def test_oracle_full_marks(self, dataset):
        path, _ = dataset
        instances = load_instances(path)[:3]
        report = evaluate(instances, "oracle", "FullPlan", motion="oracle", trials=2)
        assert report.success == 1.0
        assert report.step_diff == pytest.approx(0.0)
        assert report.protocol_errors == 0
        assert abs(report.success + sum(report.histogram.values()) - 1.0) < 1e-3

    def test_aggregate_recomputes_report(self, dataset):
        path, _ = dataset
        instances = load_instances(path)[:3]
        report = evaluate(instances, "oracle", "FullPlan", trials=2)
        agg = aggregate(report.records)
        assert agg["success"] == report.success
        assert agg["step_diff"] == report.step_diff
        assert agg["histogram"] == report.histogram

    def test_instance_order_invariance(self, dataset):
        path, _ = dataset
        instances = load_instances(path)[:4]
        fwd = evaluate(instances, "oracle", "FullPlan", trials=1)
        rev = evaluate(list(reversed(instances)), "oracle", "FullPlan", trials=1)
        assert fwd.success == rev.success
        assert fwd.step_diff == rev.step_diff
        assert fwd.histogram == rev.histogram

    def test_crippled_motion_collides(self, dataset):
        path, _ = dataset
        instances = [i for i in load_instances(path) if i.world.obstacles][:4]
        report = evaluate(instances, "oracle", "FullPlan", motion="straight", trials=1)
        if report.success < 1.0:
            worst = max(report.histogram, key=report.histogram.get)
            assert worst in (
                OutcomeKind.RobObsCollision.value,
                OutcomeKind.RobRobCollision.value,
                OutcomeKind.FarFromTarget.value,
            )

    def test_empty_dataset(self):
        report = evaluate([], "oracle", "FullPlan")
        assert report.success == 0.0
        assert report.step_diff is None
        assert report.records == []


class TestReportFiles:
    def test_files_written(self, dataset, tmp_path):
        path, _ = dataset
        instances = load_instances(path)[:2]
        report = evaluate(instances, "oracle", "FullPlan", trials=1)
        files = write_report(report, tmp_path / "out")
        names = {f.name for f in files}
        assert names == {"results.csv", "breakdown.csv", "breakdown.svg", "summary.md"}
        results = (tmp_path / "out" / "results.csv").read_text().splitlines()
        assert results[0] == "planner,motion,mode,trials,Success,StepDiff"
        breakdown = (tmp_path / "out" / "breakdown.csv").read_text().splitlines()
        assert len(breakdown[0].split(",")) == 6  # six failure kinds
        svg = (tmp_path / "out" / "breakdown.svg").read_text()
        assert svg.startswith("<svg") and svg.count("<rect") == 6

    def test_empty_report_headers_only(self, tmp_path):
        report = evaluate([], "oracle", "FullPlan")
        write_report(report, tmp_path / "empty")
        lines = (tmp_path / "empty" / "results.csv").read_text().splitlines()
        assert len(lines) == 1

    def test_report_doc_round_trip(self, dataset):
        path, _ = dataset
        instances = load_instances(path)[:2]
        report = evaluate(instances, "oracle", "FullPlan", trials=1)
        doc = json.loads(json.dumps(report.to_doc()))
        back = EvalReport.from_doc(doc)
        assert back.success == report.success
        assert back.records == report.records


@pytest.fixture(scope="module")
def service(dataset):
    path, _ = dataset
    instances = load_instances(path)
    server = make_server(instances, 0)
    port = server.server_address[1]
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{port}", instances
    server.shutdown()


def _post(url, body):
    req = urllib.request.Request(
        url, data=json.dumps(body).encode(), headers={"Content-Type": "application/json"}
    )
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


def _get(url):
    try:
        with urllib.request.urlopen(url, timeout=30) as resp:
            return resp.status, json.loads(resp.read().decode())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read().decode())


import urllib.error


class TestService:
    def test_instance_lookup(self, service):
        base, instances = service
        status, doc = _get(f"{base}/instance/{instances[0].index}")
        assert status == 200
        assert doc["spec"]["map_cols"] == instances[0].world.map_cols

    def test_unknown_instance_404(self, service):
        base, _ = service
        status, doc = _get(f"{base}/instance/99999")
        assert status == 404

    def test_score_reference_plan(self, service):
        base, instances = service
        inst = instances[0]
        body = {
            "instance_id": inst.index,
            "plan_text": render_plan(inst.reference_plan),
            "stage": 3,
        }
        status, doc = _post(f"{base}/score", body)
        assert status == 200
        assert doc["reward"]["r_format"] == pytest.approx(0.1)
        assert doc["reward"]["r_success"] == pytest.approx(1.0)
        assert doc["n_infeasible"] == 0

    def test_score_garbage_returns_200_zero(self, service):
        base, instances = service
        body = {"instance_id": instances[0].index, "plan_text": "garbage", "stage": 2}
        status, doc = _post(f"{base}/score", body)
        assert status == 200
        assert doc["reward"]["total"] == pytest.approx(0.0)
        assert "format_error" in doc

    def test_score_idempotent(self, service):
        base, instances = service
        inst = instances[1]
        body = {
            "instance_id": inst.index,
            "plan_text": render_plan(inst.reference_plan),
            "stage": 3,
        }
        first = _post(f"{base}/score", body)
        second = _post(f"{base}/score", body)
        assert first == second

    def test_malformed_request_400(self, service):
        base, instances = service
        status, _ = _post(f"{base}/score", {"instance_id": instances[0].index, "plan_text": 42})
        assert status == 400

    def test_rollout_endpoint(self, service):
        base, instances = service
        inst = instances[0]
        body = {"instance_id": inst.index, "plans": [render_plan(inst.reference_plan)] * 2}
        status, doc = _post(f"{base}/rollout", body)
        assert status == 200
        assert len(doc["records"]) == 2
        assert all(r["outcome"] == "Success" for r in doc["records"])

    def test_oracle_plan_endpoint(self, service):
        base, instances = service
        from tampbench.planner_io import parse_plan, render_observation

        inst = instances[0]
        obs = render_observation(inst.world, inst.initial)
        status, doc = _post(f"{base}/oracle_plan", {"observation": obs, "mode": "FullPlan"})
        assert status == 200
        plan = parse_plan(doc["text"])
        assert len(plan) >= 1


class TestParallelJobs:
    def test_build_dataset_jobs_matches_serial(self, tmp_path):
        cfg = GenConfig(variant="standard", count=4, seed=31, max_cols=3, max_rows=3)
        serial = tmp_path / "serial.jsonl"
        parallel = tmp_path / "parallel.jsonl"
        m1 = build_dataset(cfg, serial, resume=False, jobs=1)
        m2 = build_dataset(cfg, parallel, resume=False, jobs=2)
        assert serial.read_bytes() == parallel.read_bytes()
        assert m1["content_hash"] == m2["content_hash"]

    def test_evaluate_jobs_matches_serial(self, dataset):
        path, _ = dataset
        instances = load_instances(path)[:4]
        serial = evaluate(instances, "oracle", "FullPlan", trials=1, jobs=1)
        parallel = evaluate(instances, "oracle", "FullPlan", trials=1, jobs=2)
        assert parallel.success == serial.success
        assert parallel.step_diff == serial.step_diff
        assert [r.kind for r in parallel.records] == [r.kind for r in serial.records]
