"""Smoke tests for the bsrl Python bindings."""

import json
import math
import pathlib

import pytest

import bsrl

ROOT = pathlib.Path(__file__).resolve().parents[2]
SAMPLE = ROOT / "configs" / "sample.yaml"
GOLDEN = ROOT / "tests" / "data" / "dataplane_golden.json"


def test_capacity_and_bounds():
    inputs = bsrl.PlannerInputs(t_train=10, t_bcast=3, rollouts_per_step=128)
    cap = bsrl.compute_mu_min(inputs)
    assert cap.feasible
    assert cap.mu_min == pytest.approx(2 * 128 / (2 * 10 - 3))
    assert cap.mu_target == pytest.approx(1.1 * cap.mu_min)
    bounds = bsrl.staleness_bounds(inputs, 22.0)
    assert bounds.baseline == 2 + math.ceil((3 + 128 / 22) / 10) - 1
    assert bounds.satisfies_budget
    assert bsrl.overlap_holds(inputs, cap.mu_min)
    assert bsrl.choose_kappa(5) == 4


def test_invalid_inputs_raise_with_code():
    with pytest.raises(bsrl.BsrlError) as info:
        bsrl.PlannerInputs(t_train=-1, t_bcast=0, rollouts_per_step=1)
    assert info.value.code == "config"
    with pytest.raises(bsrl.BsrlError) as info:
        bsrl.parse_config("planner: {t_train_seconds: 1, rollouts_per_step: 2, extra: 3}\n", "x.yaml")
    assert "x.yaml:1:" in str(info.value)


def test_greedy_counterexample_and_cost():
    trap = [bsrl.WorkerSpec("w1", 9, 1.0), bsrl.WorkerSpec("w2", 10, 1.2), bsrl.WorkerSpec("w3", 2, 1.0)]
    result = bsrl.greedy_provision(trap, 10)
    assert result.active == ["w1", "w2"]
    assert result.total_cost_per_hour == pytest.approx(2.2)
    assert bsrl.dollar_cost([("A100", 8.0)]) == 24.48
    assert bsrl.dollar_cost([("RTX5090", 10.0)]) == 3.5
    with pytest.raises(bsrl.BsrlError):
        bsrl.dollar_cost([("H100", 1.0)])


def test_dissemination_worked_example():
    fleet = [bsrl.WorkerSpec(f"w{i}", 1.0) for i in range(8)]
    mb = 1_000_000
    limited = bsrl.disseminate("star_limited", fleet, 100 * mb, 40 * mb, 10 * mb, q=0.9)
    assert limited["outcome"]["t_bcast_s"] == pytest.approx(20.0)
    tree = bsrl.disseminate("tree_pipelined", fleet, 100 * mb, 40 * mb, 10 * mb, chunk_bytes=mb, q=0.9)
    assert len(tree["plan"]["stripes"]) == 4
    assert tree["outcome"]["t_bcast_s"] == pytest.approx(2.6)
    relay = bsrl.disseminate(
        "tree_pipelined", fleet, 100 * mb, 40 * mb, 10 * mb, chunk_bytes=mb, q=0.9, event_driven=True
    )
    assert relay["outcome"]["t_bcast_s"] == pytest.approx(2.6)


def test_plan_simulate_sweep_from_config():
    cfg = bsrl.load_config(str(SAMPLE))
    assert len(cfg.workers) == 16
    plan = bsrl.plan(cfg)
    assert plan["capacity"]["feasible"]

    report, trace = bsrl.simulate(cfg)
    assert report["steps_completed"] == cfg.total_steps
    assert report["bubble_ratio"] <= 0.01
    assert report["delta_max"] <= cfg.planner.staleness_budget
    assert trace.startswith("# bsrl trace schema=1\ntime_s,kind,")
    assert bsrl.simulate(cfg) == (report, trace)

    cfg.worst_case = True
    worst, _ = bsrl.simulate(cfg)
    assert worst["delta_max"] == plan["staleness"]["baseline"]

    rows = bsrl.sweep(cfg, "pool_size", [8, 16]).strip().splitlines()
    assert rows[1] == "size,pool_mu,mu_min,bubble_ratio,delta_max"
    assert len(rows) == 4
    with pytest.raises(bsrl.BsrlError):
        bsrl.sweep(cfg, "pool_size", [])


def test_dataplane_kernels():
    masks = bsrl.compute_masks([1, 7, 1, 8, 1, 9, 9], score=1.5)
    assert masks["response_mask"] == [0, 0, 0, 0, 1, 1, 1]
    assert masks["loss_mask"] == [0, 0, 0, 0, 1, 1]  # response_mask[:-1]
    assert masks["score_vector"][-1] == 1.5
    adv = bsrl.normalize_group([10.0, 20.0, 30.0], ["a", "a", "a"])
    assert adv == pytest.approx([-1, 0, 1], abs=1e-6)
    assert bsrl.clipped_surrogate(1.5, 1.0, 0.2) == pytest.approx(1.2)
    assert bsrl.clipped_surrogate(0.5, -1.0, 0.2) == pytest.approx(-0.8)
    assert bsrl.trajectory_weight([math.log(3.0)], [0.0], [1], 2.0) == pytest.approx(2.0)
    results = bsrl.dataplane_check(str(GOLDEN))
    assert all(r["passed"] for r in results), results


def test_cli_in_process(tmp_path):
    code, out, _ = bsrl.run_cli(["plan", "--config", str(SAMPLE)])
    assert code == 0
    assert json.loads(out)["schema_version"] == 1
    code, _, err = bsrl.run_cli(["simulate", "--config", str(SAMPLE), "--out", str(tmp_path), "--no-timestamp"])
    assert code == 0, err
    assert (tmp_path / "trace.csv").exists()
    assert "bubble_ratio" in json.loads((tmp_path / "report.json").read_text())
    assert bsrl.run_cli(["sweep", "--config", str(SAMPLE), "--values", ""])[0] == 2
    assert bsrl.run_cli(["plan", "--config", str(tmp_path / "missing.yaml")])[0] == 3
