import json
from fractions import Fraction
from pathlib import Path

import pytest

from byzstab import builtin_metric
from byzstab.cli import main
from byzstab.io import (
    InputError,
    decode_value,
    dumps,
    load_metric,
    load_system,
    metric_from_dict,
    metric_to_dict,
    system_from_dict,
    system_to_dict,
)
from byzstab.metrics import non_monotonic_example
from byzstab.scenarios import example_system

GRAPHS = Path(__file__).resolve().parent.parent / "graphs"


def test_value_codec():
    r = builtin_metric("R")
    assert decode_value(r, "3/4") == Fraction(3, 4)
    assert json.loads(dumps({"x": Fraction(1, 2)})) == {"x": "1/2"}
    m = non_monotonic_example()
    assert decode_value(m, "a") == "a"


@pytest.mark.parametrize("metric", [builtin_metric("F", 7), builtin_metric("R", denominator=5), non_monotonic_example()])
def test_metric_round_trip(metric):
    back = metric_from_dict(json.loads(dumps(metric_to_dict(metric))))
    assert back.values == metric.values and back.mr == metric.mr
    assert all(back.met(m, w) == metric.met(m, w) for m in metric.values for w in metric.weights)


@pytest.mark.parametrize("name", ["sp-contained", "reliability-wide"])
def test_system_round_trip(name):
    s = example_system(name)
    back = system_from_dict(json.loads(dumps(system_to_dict(s))))
    assert back.names == s.names and back.edges == s.edges and back.weights == s.weights
    assert back.byzantine == s.byzantine


def test_load_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(InputError):
        load_system(bad)
    with pytest.raises(InputError):
        load_system(tmp_path / "missing.json")
    with pytest.raises(InputError):
        load_metric({"kind": "table", "values": [0]})
    with pytest.raises(InputError):
        load_metric("WAT")
    bad.write_text(json.dumps({"metric": "SP", "nodes": ["r", "a"], "edges": [["r", "a", -3]]}))
    with pytest.raises(InputError):
        load_system(bad)


def test_graph_may_reference_a_metric_file(tmp_path):
    (tmp_path / "g.json").write_text(json.dumps({
        "metric": str(GRAPHS / "metric-two-fixed-points.json"),
        "nodes": ["r", "a"],
        "edges": [["r", "a", 2]],
    }))
    s = load_system(tmp_path / "g.json")
    assert s.metric.name == "twofix"


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_check_metric(capsys):
    assert main(["check-metric", "--builtin", "MET"]) == 0
    out = _json_out(capsys)
    assert out["properties"]["strongly_maximizable"] is True
    assert out["manifest"]["command"] == "check-metric"
    assert main(["check-metric", "--file", str(GRAPHS / "metric-two-fixed-points.json"),
                 "--brute-force-trials", "300"]) == 0
    out = _json_out(capsys)
    assert out["properties"]["fixed_points"] == [0, 1]
    assert out["brute_force"]["maximizable"] is False
    assert out["brute_force"]["counterexample"]["nodes"]


def test_check_metric_input_error(capsys):
    assert main(["check-metric", "--builtin", "F"]) == 2
    assert "input error" in capsys.readouterr().err


def test_areas(tmp_path, capsys):
    dot = tmp_path / "g.dot"
    assert main(["areas", str(GRAPHS / "flow-nested-areas.json"), "--dot", str(dot)]) == 0
    out = _json_out(capsys)
    assert out["areas"] == {"S_B": ["B", "C", "D"], "S_B_star": ["C"]}
    assert out["mu"]["designated_roots"] == ["r", "b"]
    text = dot.read_text()
    assert text.startswith("graph system {") and "fillcolor=pink" in text and "penwidth=3" in text


def test_simulate(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    argv = ["simulate", str(GRAPHS / "gadget-sp.json"), "--byz-strategy", "random-writes",
            "--max-steps", "300", "--trace", str(trace), "--area", "radius:1"]
    assert main(argv) == 0
    out = _json_out(capsys)
    assert out["run"]["stop_reason"] == "max-steps" and out["run"]["steps"] == 300
    assert out["area"]["kind"] == "radius(1)"
    assert len(trace.read_text().splitlines()) == 1 + 300 + 3
    assert main(["simulate", str(GRAPHS / "sp-contained.json"), "--area", "custom:A,C"]) == 0
    assert _json_out(capsys)["area"]["members"] == ["A", "C"]


@pytest.mark.parametrize("area", ["nowhere", "radius:x", "custom:b", "custom:Z"])
def test_simulate_bad_area(area, capsys):
    assert main(["simulate", str(GRAPHS / "sp-contained.json"), "--area", area]) == 2


def test_scenario_outputs(tmp_path, capsys):
    out_dir = tmp_path / "run"
    assert main(["scenario", "theorem5-case1", "--metric", "MET", "--cycles", "2", "--out-dir", str(out_dir)]) == 0
    out = _json_out(capsys)
    assert out["t"] >= 2
    assert sorted(p.name for p in out_dir.iterdir()) == ["report.json", "rho1.dot", "rho2.dot", "rho3.dot", "trace.jsonl"]
    assert json.loads((out_dir / "report.json").read_text()) == out


def test_scenario_exit_codes(capsys):
    assert main(["scenario", "theorem5-case1", "--metric", "MET", "--c", "2"]) == 3
    assert main(["scenario", "theorem5-case1", "--metric", "MET", "--budget", "1"]) == 4
    assert main(["scenario", "theorem6", "--metric", "SP", "--area", "v,v'"]) == 2
    assert main(["scenario", "theorem6", "--metric", "nope.json"]) == 2
