import csv
import io
import json

import numpy as np
import pytest

from gibbs_tree.cli import main, resolve_config


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_verify_k2(capsys):
    code, out, _ = run(["verify", "--construction", "k2"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["passed"]
    assert all(s["final_residual_sup"] <= 1e-8 for s in report["solutions"].values())
    assert report["config"]["quadrature"]["kind"] == "singularity_split"


def test_verify_k3_impossible_tolerance(capsys):
    code, out, _ = run(["verify", "--construction", "k3", "--tol", "1e-15"], capsys)
    assert code == 1
    report = json.loads(out)
    assert not report["passed"] and report["max_residual"] > 1e-15


def test_verify_family(capsys):
    code, out, _ = run(["verify", "--k", "4", "--n", "6"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["record"]["admissible"]
    assert report["max_residual"] <= 1e-9


def test_verify_not_admissible(capsys):
    code, _, err = run(["verify", "--k", "2", "--n", "3"], capsys)
    assert code == 2 and ">= 4" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["verify"],
        ["sweep", "--k", "1"],
        ["sweep", "--k", "4", "--n-range", "3..9"],
        ["sweep", "--k", "4", "--n-range", "9..7"],
        ["sweep", "--k", "4", "--n-range", "oops"],
        ["verify", "--k", "4", "--n", "4"],
        ["verify", "--construction", "k2", "--tol", "-1"],
    ],
)
def test_precondition_failures(argv, capsys):
    assert run(argv, capsys)[0] == 2


def test_io_failure(tmp_path, capsys):
    target = tmp_path / "missing" / "out.csv"
    assert run(["plotdata", "--construction", "k2", "--out", str(target)], capsys)[0] == 3
    assert run(["verify", "--config", str(tmp_path / "nope.json")], capsys)[0] == 3


def test_config_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "samples": 77, "quad-order": 12, "k": 4}))
    r = resolve_config(["sample", "--config", str(cfg), "--seed", "9"])
    assert (r.seed, r.samples, r.quad_order, r.k) == (9, 77, 12, 4)
    assert r.quad_panels == 64 and r.tol == 1e-8
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(Exception):
        resolve_config(["sample", "--config", str(cfg)])


def test_sweep_csv(capsys):
    code, out, _ = run(["sweep", "--k", "4", "--n", "5..40"], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config: ") and lines[-1].startswith("# summary: ")
    rows = list(csv.DictReader(io.StringIO("\n".join(lines[1:-1]))))
    assert len(rows) == 36
    gammas = [float(r["gamma"]) for r in rows]
    assert abs(gammas[-1] - 3.0) < abs(gammas[0] - 3.0)
    summary = json.loads(lines[-1][len("# summary: "):])
    assert summary["limit"] == 3.0 and summary["last_n"] == 40
    assert summary["last_deviation"] == pytest.approx(abs(gammas[-1] - 3.0))


def test_sweep_json_threads(capsys, monkeypatch):
    monkeypatch.setenv("GIBBS_TREE_THREADS", "3")
    code, out, _ = run(["sweep", "--k", "12", "--n-range", "13..60", "--format", "json"], capsys)
    assert code == 0
    data = json.loads(out)
    assert [r["n"] for r in data["rows"]] == list(range(13, 61))
    assert abs(data["rows"][-1]["gamma"] - 1.0) < abs(data["rows"][0]["gamma"] - 1.0)


def test_sweep_k2_records_admissibility(capsys):
    code, out, _ = run(["sweep", "--k", "2", "--n", "3..40", "--format", "json"], capsys)
    rows = json.loads(out)["rows"]
    assert code == 0 and len(rows) == 38
    assert all(r["admissible"] == (abs(r["gamma"]) < 4) for r in rows)


def test_plotdata_curves(capsys, tmp_path):
    path = tmp_path / "curve.csv"
    assert run(["plotdata", "--construction", "k2", "--out", str(path)], capsys)[0] == 0
    data = np.genfromtxt(path, delimiter=",", names=True)
    assert len(data) == 1001
    np.testing.assert_allclose(data["t"], np.linspace(0, 1, 1001))
    assert data["K2_f2"][500] == pytest.approx(0.75)
    np.testing.assert_array_equal(data["K2_f1"], 1.0)


def test_plotdata_family_is_linear(capsys):
    code, out, _ = run(["plotdata", "--k", "4", "--n", "6"], capsys)
    data = np.genfromtxt(io.StringIO(out), delimiter=",", names=True)
    slope = np.diff(data["General_f1"]) / np.diff(data["t"])
    verify = json.loads(run(["verify", "--k", "4", "--n", "6"], capsys)[1])
    xi = verify["record"]["xi"]
    np.testing.assert_allclose(slope, xi**6, rtol=1e-9)


def test_plotdata_gamma_series(capsys):
    code, out, _ = run(["plotdata", "--k", "4", "--n-range", "5..10"], capsys)
    lines = out.splitlines()
    assert lines[0] == "n,gamma" and len(lines) == 7


def test_sample_separates_and_is_deterministic(capsys, tmp_path):
    argv = ["sample", "--construction", "k2", "--radius", "2", "--samples", "20000", "--seed", "7"]
    conf = tmp_path / "a.csv"
    code, first, _ = run(argv + ["--configuration-out", str(conf)], capsys)
    assert code == 0
    first_conf = conf.read_bytes()
    _, second, _ = run(argv + ["--configuration-out", str(conf)], capsys)
    assert first == second
    assert conf.read_bytes() == first_conf
    report = json.loads(first)
    assert report["comparison"]["separated"]
    mu1 = report["measures"]["K2_f1"]
    assert abs(mu1["root_mean"] - 0.5) <= 3 * mu1["root_mean_se"]
    assert report["config"]["seed"] == 7
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "vertex_id,parent_id,depth,spin"
