import json
import os

import numpy as np
import pytest

from srstab.cli import main


def _write_config(tmp_path, cfg):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    out = capsys.readouterr().out
    assert "heisenberg" in out and "martinet-modified" in out


def test_geodesic_job_euclidean(tmp_path, capsys):
    cfg = _write_config(tmp_path, {
        "job": "geodesic", "system": "euclidean-2", "p0": [3.0, 4.0],
        "out": str(tmp_path / "out"),
    })
    assert main(["run", "--config", cfg]) == 0
    out = tmp_path / "out"
    rows = (out / "trajectory.csv").read_text().strip().splitlines()
    last = [float(v) for v in rows[-1].split(",")]
    assert last[1] == pytest.approx(3.0) and last[2] == pytest.approx(4.0)
    report = json.loads((out / "report.json").read_text())
    length = [c for c in report["checks"] if c["name"] == "length identity"]
    assert length and length[0]["passed"]
    # rendered figure and gnuplot script sit next to the CSV
    assert (out / "trajectory.png").exists()
    assert (out / "trajectory.gp").exists()
    assert (out / "report.txt").exists()


def test_deterministic_artifacts(tmp_path):
    for sub in ("a", "b"):
        cfg = _write_config(tmp_path, {
            "job": "geodesic", "system": "heisenberg",
            "p0": [0.4, 0.3, 1.0], "out": str(tmp_path / sub),
        })
        assert main(["run", "--config", cfg, "--seed", "7"]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a == b


def test_feedback_job(tmp_path):
    cfg = _write_config(tmp_path, {
        "job": "feedback", "system": "euclidean-2",
        "seeds_x0": [[1.0, 0.0], [0.0, -1.0]], "T": 1.0,
        "tolerances": {"decay": 1e-4},
        "out": str(tmp_path / "out"),
    })
    assert main(["run", "--config", cfg]) == 0
    out = tmp_path / "out"
    assert (out / "closed_loop_0.csv").exists()
    assert (out / "closed_loop_1.csv").exists()
    assert (out / "closed_loop_0.png").exists()


def test_srstab_out_overrides(tmp_path, monkeypatch):
    override = tmp_path / "elsewhere"
    monkeypatch.setenv("SRSTAB_OUT", str(override))
    cfg = _write_config(tmp_path, {
        "job": "geodesic", "system": "euclidean-2", "p0": [1.0, 0.0],
        "out": str(tmp_path / "ignored"),
    })
    assert main(["run", "--config", cfg]) == 0
    assert (override / "trajectory.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_configuration_errors(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    assert main(["run", "--config", str(bad_json)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = _write_config(tmp_path, {"job": "frobnicate"})
    assert main(["run", "--config", cfg]) == 2
    cfg2 = _write_config(tmp_path, {"job": "geodesic", "system": "nope",
                                    "p0": [1.0, 0.0]})
    os.environ.pop("SRSTAB_OUT", None)
    assert main(["run", "--config", cfg2, "--out", str(tmp_path)]) == 2
    cfg3 = _write_config(tmp_path, {"job": "geodesic",
                                    "system": "euclidean-2",
                                    "p0": [1.0, 0.0],
                                    "tolerances": {"energy": -1.0}})
    assert main(["run", "--config", cfg3]) == 2


def test_plot_subcommand(tmp_path):
    cfg = _write_config(tmp_path, {
        "job": "geodesic", "system": "euclidean-2", "p0": [1.0, 1.0],
        "out": str(tmp_path / "out"),
    })
    assert main(["run", "--config", cfg]) == 0
    csv_path = str(tmp_path / "out" / "trajectory.csv")
    png = str(tmp_path / "replot.png")
    assert main(["plot", csv_path, "--kind", "trajectory", "--out", png]) == 0
    assert os.path.exists(png)
    gp = str(tmp_path / "replot.gp")
    assert main(["plot", csv_path, "--kind", "trajectory", "--gnuplot",
                 "--out", gp]) == 0
    assert "plot" in open(gp).read()
    with pytest.raises(SystemExit):
        main(["plot", csv_path, "--kind", "bogus", "--out", png])


def test_plot_missing_artifact(tmp_path):
    assert main(["plot", str(tmp_path / "nope.csv"), "--kind",
                 "trajectory"]) == 2
