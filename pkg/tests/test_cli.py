import csv
import json

import numpy as np
import pytest

from srbm.cli import EXIT_OK, EXIT_REFUSED, EXIT_STRUCTURAL, parse_model, run
from srbm.errors import StructuralError
from srbm.model import SrbmData

TANDEM3 = {"d": 3, "beta": [1.0, 1.5, 2.0, 2.5], "cv": [1.0, 1.0, 2.0, 3.0]}
TINY_SIM = ["--steps", "4000", "--reps", "2", "--batches", "4"]


def write(tmp_path, obj, name="model.json"):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(path)


def srbm_file(tmp_path, sigma, mu, r, name="model.json"):
    return write(tmp_path, {"d": len(mu), "sigma": sigma, "mu": mu, "r": r}, name)


def run_json(argv, capsys):
    code = run(argv)
    out = capsys.readouterr()
    return code, (json.loads(out.out) if code == EXIT_OK else None), out.err


def test_check_ok(tmp_path, capsys):
    path = srbm_file(tmp_path, [[1.0]], [-1.0], [[1.0]])
    code, rep, _ = run_json(["check", path], capsys)
    assert code == EXIT_OK
    assert rep["schema_version"] == "1" and rep["command"] == "check"
    assert len(rep["model_hash"]) > 0


def test_matrix_class_on_inverse_pair(tmp_path, capsys):
    r = np.linalg.inv([[1.0, 2.0], [1.0, 1.0]]).tolist()
    path = srbm_file(tmp_path, [[1.0, 0.0], [0.0, 1.0]], [-1.0, -1.0], r)
    code, rep, err = run_json(["check", path, "--matrix-class"], capsys)
    assert code == EXIT_OK
    mc = rep["matrix_class"]
    assert mc["completely_s"] is False and mc["completely_s_failing_subset"] == [1]
    assert run(["check", path, "--strict"]) == EXIT_REFUSED


def test_tandem_file(tmp_path, capsys):
    path = write(tmp_path, TANDEM3)
    code, rep, _ = run_json(["tandem", path], capsys)
    assert code == EXIT_OK
    assert [row["cv_equal"] for row in rep["by_k"]] == [True, False]
    assert [row["report"]["decomposable"] for row in rep["by_k"]] == [True, False]
    code, rep, _ = run_json(["tandem", path, "--k", "1"], capsys)
    assert [row["k"] for row in rep["by_k"]] == [1]


def test_tandem_needs_tandem_file(tmp_path, capsys):
    path = srbm_file(tmp_path, [[1.0]], [-1.0], [[1.0]])
    assert run(["tandem", path]) == EXIT_STRUCTURAL


def test_structural_errors(tmp_path, capsys):
    asym = srbm_file(tmp_path, [[1.0, 0.5], [0.0, 1.0]], [-1.0, -1.0], [[1.0, 0.0], [0.0, 1.0]])
    assert run(["check", asym]) == EXIT_STRUCTURAL
    assert "symmetric" in capsys.readouterr().err
    broken = write(tmp_path, '{"d": 1,\n "sigma": [[1.0]],,}', "broken.json")
    assert run(["check", broken]) == EXIT_STRUCTURAL
    assert "line 2" in capsys.readouterr().err
    assert run(["frobnicate", broken]) == EXIT_STRUCTURAL
    assert run(["check", str(tmp_path / "absent.json")]) == EXIT_STRUCTURAL
    with pytest.raises(StructuralError, match="missing"):
        parse_model(write(tmp_path, {"d": 1, "mu": [1.0]}, "partial.json"))


def test_decompose(tmp_path, capsys):
    path = write(tmp_path, {"d": 3, "beta": [1, 1.5, 2, 2.5], "cv": [1, 1, 1, 5]})
    code, rep, _ = run_json(["decompose", path, "--search"], capsys)
    assert code == EXIT_OK
    assert [(d["partition"]["k"], d["partition"]["l"]) for d in rep["decompositions"]] == [([1, 2], [3]), ([1], [2, 3])]
    code, rep, _ = run_json(["decompose", path, "--partition", "1/2,3"], capsys)
    assert rep["decompositions"][0]["decomposable"] is True
    assert run(["decompose", path, "--partition", "2/1,3"]) == EXIT_REFUSED


def test_decompose_csv(tmp_path, capsys):
    path = write(tmp_path, TANDEM3)
    assert run(["decompose", path, "--search", "--all", "--output", "csv"]) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0][:4] == ["k", "l", "feedforward", "decomposable"]
    assert len(rows) == 3


def test_reduce_and_product_form(tmp_path, capsys):
    path = write(tmp_path, {"d": 2, "beta": [1.0, 1.5, 2.0], "cv": [1.0, 1.0, 1.0]})
    code, rep, _ = run_json(["reduce", path, "--set", "2"], capsys)
    assert code == EXIT_OK and "reduced" in rep
    code, rep, _ = run_json(["product-form", path], capsys)
    assert code == EXIT_OK
    assert rep["product_form"]["alpha"] == pytest.approx([0.5, 1.0])
    assert run(["reduce", path, "--set", "3"]) != EXIT_OK


def test_simulate_refuses_unstable(tmp_path, capsys):
    path = srbm_file(tmp_path, [[1.0]], [1.0], [[1.0]])
    assert run(["simulate", path, *TINY_SIM]) == EXIT_REFUSED
    assert "stable" in capsys.readouterr().err


def test_simulate_is_reproducible(tmp_path, capsys):
    path = write(tmp_path, {"d": 2, "beta": [1.0, 1.5, 2.0], "cv": [1.0, 1.0, 1.0]})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for out in (a, b):
        assert run(["simulate", path, *TINY_SIM, "--seed", "7", "-o", str(out)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    rep = json.loads(a.read_text())
    assert rep["simulation"]["config"]["seed"] == 7


def test_simulate_csv_and_samples(tmp_path, capsys):
    path = srbm_file(tmp_path, [[2.0]], [-1.0], [[1.0]])
    samples = tmp_path / "path.csv"
    argv = ["simulate", path, *TINY_SIM, "--output", "csv", "--record-samples", str(samples), "--record-every", "100"]
    assert run(argv) == EXIT_OK
    rows = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert rows[0] == ["quantity", "index", "value", "se"]
    assert [r[0] for r in rows[1:]] == ["mean_z", "y_rate", "cov_z"]
    recorded = list(csv.DictReader(samples.open()))
    assert recorded[0].keys() == {"replication", "step", "time", "z1", "y1"}
    assert len(recorded) == 2 * 4000 // 100
    assert all(float(r["z1"]) >= 0 for r in recorded)


def test_bar_check(tmp_path, capsys):
    path = write(tmp_path, {"d": 2, "beta": [1.0, 1.5, 2.0], "cv": [1.0, 1.0, 1.0]})
    code, rep, _ = run_json(["bar-check", path, "--theta-grid", "3"], capsys)
    assert code == EXIT_OK
    points = rep["bar_check"]["points"]
    assert len(points) == 9 and rep["bar_check"]["source"] == "product-form"
    assert max(abs(p["residual"]) for p in points) < 1e-12
    skewless = write(tmp_path, {"d": 2, "beta": [1.0, 1.5, 2.0], "cv": [1.0, 2.0, 1.0]}, "coupled.json")
    assert run(["bar-check", skewless]) == EXIT_REFUSED
    assert run(["bar-check", path, "--theta-grid", "1"]) == EXIT_STRUCTURAL


def test_cross_validate(tmp_path, capsys):
    path = write(tmp_path, {"d": 2, "beta": [1.0, 1.5, 2.0], "cv": [1.0, 1.0, 1.0]})
    code, rep, _ = run_json(["cross-validate", path, "--partition", "1/2", *TINY_SIM], capsys)
    assert code == EXIT_OK
    assert len(rep["cross_validation"]["blocks"]) == 2
    assert "verdict" in rep["independence"]


def test_model_json_round_trip(tmp_path):
    data = SrbmData(np.array([[2.0, 0.3], [0.3, 1.0]]), np.array([-1.0, -0.5]), np.array([[1.0, 0.0], [-0.4, 1.0]]))
    path = write(tmp_path, data.to_dict())
    assert parse_model(path) == data
