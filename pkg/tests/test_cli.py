import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from qdarray.cli import main
from qdarray.io import FIELD_HEADER, read_field_map_csv

CONFIGS = Path(__file__).parent.parent / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_field_map_csv(capsys):
    code, out, err = run(capsys, "field-map", "--n", "5")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == FIELD_HEADER and len(lines) == 26
    pts, b = read_field_map_csv(out)
    assert np.all(np.isfinite(b))
    assert "25 points" in err


def test_field_map_empty_preset_is_zero(capsys):
    code, out, _ = run(capsys, "field-map", "--preset", "none", "--n", "3")
    assert code == 0
    _, b = read_field_map_csv(out)
    assert np.all(b == 0)


def test_outputs_are_byte_identical(capsys, tmp_path):
    for argv in (["field-map", "--n", "4"], ["report"], ["route"], ["grover", "--routed"]):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(argv + ["-o", str(a)]) == main(argv + ["-o", str(b)])
        assert a.read_bytes() == b.read_bytes()
    capsys.readouterr()


def test_report_check_mm3x3(capsys):
    code, out, err = run(capsys, "report", "--config", str(CONFIGS / "mm3x3.yaml"), "--check")
    assert code == 0
    doc = json.loads(out)
    assert doc["addressable"] is True and len(doc["dots"]) == 9
    assert err.count("check PASS") == 3


def test_report_csv_and_overrides(capsys):
    code, out, _ = run(capsys, "report", "--format", "csv", "--set", "standoff=200")
    assert code == 0
    rows = out.splitlines()
    assert len(rows) == 10
    code, base, _ = run(capsys, "report", "--format", "csv")
    assert base != out


def test_report_check_miss_exits_4(capsys):
    # pushing the magnet far away drops b_trans below the target band
    code, _, err = run(capsys, "report", "--set", "standoff=2000", "--check")
    assert code == 4 and "check FAIL" in err


def test_report_co_gates_and_large_co(capsys):
    assert run(capsys, "report", "--preset", "co-gates", "--check")[0] == 0
    assert run(capsys, "report", "--preset", "large-co", "--check")[0] == 0


def test_unknown_config_key_exits_2(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("preset: mm3x3\nstandof: 3\n")
    code, _, err = run(capsys, "report", "--config", str(cfg))
    assert code == 2 and "unknown keys" in err
    cfg.write_text("preset: mm3x3\noverrides: {standof: 3}\n")
    assert run(capsys, "report", "--config", str(cfg))[0] == 2
    cfg.write_text("- 1\n- 2\n")
    assert run(capsys, "report", "--config", str(cfg))[0] == 2


def test_flags_override_config(capsys, tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("marked: 5\n")
    code, out, _ = run(capsys, "grover", "--config", str(cfg), "--marked", "0")
    p = [float(line.split(",")[1]) for line in out.splitlines()[1:]]
    assert int(np.argmax(p)) == 0


def test_route_json(capsys):
    code, out, _ = run(capsys, "route", "--graph", "fig3c", "--check")
    assert code == 0
    doc = json.loads(out)
    assert doc["swap_count"] == 5 and doc["two_qubit_count"] == 18 and doc["verified"]
    assert doc["initial_mapping"] == [0, 1, 2, 3]


def test_route_fig3b_reports_miss(capsys):
    code, out, err = run(capsys, "route", "--graph", "fig3b", "--check")
    doc = json.loads(out)
    assert doc["verified"] and (doc["swap_count"], doc["two_qubit_count"]) == (3, 16)
    assert code == 4 and "swap_count 2 / two_qubit_count 15" in err


def test_route_all_edges_graph_needs_no_swaps(capsys, tmp_path):
    g = tmp_path / "k4.yaml"
    g.write_text(
        "name: k4\nnodes: [{id: 0, role: data}, {id: 1, role: data}, {id: 2, role: data}, {id: 3, role: data}]\n"
        "edges: [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]\n"
    )
    code, out, _ = run(capsys, "route", "--graph", str(g))
    assert code == 0 and json.loads(out)["swap_count"] == 0


def test_route_circuit_file_and_bad_mapping(capsys, tmp_path):
    c = tmp_path / "c.txt"
    c.write_text("cx 0 3\nh 1\n")
    code, out, _ = run(capsys, "route", "--circuit", str(c), "--graph", "fig3c")
    assert code == 0 and json.loads(out)["swap_count"] == 2
    assert run(capsys, "route", "--initial", "0,1,2", "--graph", "fig3c")[0] == 2
    c.write_text("cx 0 0\n")
    assert run(capsys, "route", "--circuit", str(c))[0] == 2


def test_grover_check(capsys):
    code, out, _ = run(capsys, "grover", "--check")
    assert code == 0
    p = np.array([float(line.split(",")[1]) for line in out.splitlines()[1:]])
    assert p[13] == pytest.approx(121 / 256, abs=1e-9)
    code, routed, _ = run(capsys, "grover", "--routed", "--check")
    assert code == 0 and routed == out


def test_grover_bad_marked(capsys):
    assert run(capsys, "grover", "--marked", "16")[0] == 2


def test_potential_check_and_csv(capsys, tmp_path):
    csv = tmp_path / "phi.csv"
    code, out, err = run(capsys, "potential", "--config", str(CONFIGS / "stack3x3.yaml"), "--check", "--csv", str(csv))
    assert code == 0
    doc = json.loads(out)
    assert doc["n_wells"] == 9 and doc["h_nm"] == 5.0
    lines = csv.read_text().splitlines()
    assert lines[0] == "x_nm,y_nm,phi_V"
    assert len(lines) == 1 + doc["grid_shape"][0] * doc["grid_shape"][1]


def test_potential_nonconvergence_exits_3(capsys):
    code, _, err = run(capsys, "potential", "--max-iter", "2", "--tol", "1e-14")
    assert code == 3 and "error" in err


def test_potential_rejects_coarse_grid(capsys):
    assert run(capsys, "potential", "--h", "10")[0] == 2


def test_potential_uniform_voltage_no_wells(capsys):
    code, out, _ = run(capsys, "potential", "--uniform-voltage", "0.5")
    assert code == 0 and json.loads(out)["n_wells"] == 0


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qdarray", "grover"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("index,probability")
    res = subprocess.run([sys.executable, "-m", "qdarray", "nope"], capture_output=True, text=True)
    assert res.returncode == 2
