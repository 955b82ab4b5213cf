"""Coverage verification, report/CSV surfaces, and the CLI contract."""

import json
import subprocess
import sys

import pytest

from gridscout.engine import HAVE_KERNEL
from gridscout.explorers import run_algorithm
from gridscout.grid import BallSpec
from gridscout.metrics import covered_radius, verify_coverage
from gridscout.runtime import RunConfig, Stationary, Walker, World
from gridscout.scheduler import ActivationPolicy

ENG = "c" if HAVE_KERNEL else "py"


def test_verify_coverage_explore3d():
    rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=4,
                        max_ticks=10**7, engine=ENG)
    ok, missing = verify_coverage(rep, BallSpec(4, (0, 0, 0)))
    assert ok and missing == []
    assert covered_radius(rep) == 4


def test_verify_coverage_stationary_fails():
    w = World(RunConfig(n=3, controllers=[Stationary()],
                        policy=ActivationPolicy("synchronous"), max_ticks=3))
    rep = w.run()
    ok, missing = verify_coverage(rep, BallSpec(1, (0, 0, 0)))
    assert not ok and len(missing) == 6  # the 2n unit neighbours


def test_verify_coverage_fastdet_cube_contains_ball():
    rep = run_algorithm("fastdet", "semisync", 2, stop_marker_count=4,
                        max_ticks=10**8, max_moves=10**8, engine=ENG)
    # three full scales: cube side 8 spans [-4, 4]^2, containing ball(4)
    ok, missing = verify_coverage(rep, BallSpec(4, (0, 0)))
    assert ok, missing[:5]


def test_schedule_monotone_cost():
    # more activations never reduce the semi-sync move count
    costs = {}
    for kind in ("round-robin", "synchronous"):
        rep = run_algorithm("explore3d", "semisync", 3, stop_covered_radius=2,
                            policy=ActivationPolicy(kind), max_ticks=10**6,
                            engine=ENG)
        costs[kind] = rep.total_moves
    assert costs["synchronous"] >= costs["round-robin"]


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "gridscout.cli", *args],
                          capture_output=True, text=True, timeout=300)


def test_cli_run_found(tmp_path):
    rpt = tmp_path / "r.json"
    # a D=2 treasure: sphere 1 is complete by detection time
    res = run_cli("run", "--algo", "explore3d", "--n", "3",
                  "--treasure", "0,0,2", "--report", str(rpt))
    assert res.returncode == 0, res.stderr
    doc = json.loads(rpt.read_text())
    assert doc["treasure_found"] and doc["covered_radius"] >= 1


def test_cli_run_deterministic_reports(tmp_path):
    docs = []
    for i in (1, 2):
        rpt = tmp_path / f"r{i}.json"
        res = run_cli("run", "--algo", "random", "--n", "3", "--model", "sync",
                      "--treasure", "1,1,0", "--seed", "7",
                      "--budget-ticks", "2000000", "--report", str(rpt))
        assert res.returncode == 0, res.stderr
        docs.append(json.loads(rpt.read_text()))
    assert docs[0] == docs[1]


def test_cli_budget_exit_code():
    res = run_cli("run", "--algo", "det", "--n", "2", "--model", "sync",
                  "--treasure", "3,-2", "--budget-ticks", "10")
    assert res.returncode == 2


def test_cli_config_error_exit_code():
    res = run_cli("run", "--algo", "explore3d", "--n", "2")
    assert res.returncode == 1
    assert "n=3" in res.stderr


def test_cli_bad_treasure_dimension():
    res = run_cli("run", "--algo", "explore3d", "--n", "3", "--treasure", "1,2")
    assert res.returncode == 1


def test_cli_sweep_csv_and_slope(tmp_path):
    out = tmp_path / "sweep.csv"
    res = run_cli("sweep", "--algo", "explore3d", "--n", "3", "--model",
                  "semisync", "--D", "2,4,8", "--seeds", "0", "--out", str(out))
    assert res.returncode == 0, res.stderr
    lines = out.read_text().splitlines()
    assert lines[0].startswith("algorithm,model,n,D,seed,policy,cost,ticks,")
    assert len([x for x in lines if x.startswith("explore3d")]) == 3
    assert lines[-1].startswith("# loglog_slope,")


def test_cli_sweep_single_d_no_slope(tmp_path):
    out = tmp_path / "s.csv"
    res = run_cli("sweep", "--algo", "explore3d", "--n", "3", "--D", "2",
                  "--seeds", "0,1,2", "--out", str(out))
    assert res.returncode == 0
    lines = out.read_text().splitlines()
    assert not any(x.startswith("#") for x in lines)
    # deterministic under a fixed policy: identical costs across seeds
    costs = {x.split(",")[6] for x in lines[1:4]}
    assert len(costs) == 1


def test_cli_trace_roundtrip(tmp_path):
    tr = tmp_path / "t.jsonl"
    res = run_cli("run", "--algo", "explore3d", "--n", "3", "--treasure",
                  "0,1,0", "--engine", "py", "--trace", str(tr))
    assert res.returncode == 0
    events = [json.loads(line) for line in tr.read_text().splitlines()]
    assert events
    assert set(events[0]) == {"tick", "agent", "from", "to", "state_before",
                              "state_after", "collocated"}
    for ev in events:
        d = sum(abs(a - b) for a, b in zip(ev["from"], ev["to"]))
        assert d <= 1


def test_cli_verify_fairness():
    res = run_cli("verify", "fairness")
    assert res.returncode == 0
    assert "PASS" in res.stdout
