import csv
import json
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from contact_caustic import cli, flow

ROOT = Path(__file__).resolve().parents[1]
SCEN = ROOT / "scenarios"


def run(*args, env=None):
    return subprocess.run([sys.executable, "-m", "contact_caustic.cli", *map(str, args)],
                          capture_output=True, text=True, env=env, cwd=ROOT)


def write_config(tmp_path, **data):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(data))
    return p


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def test_geodesic_csv_matches_closed_form(tmp_path):
    assert cli.main(["geodesic", "--config", str(SCEN / "heisenberg.json"), "--out",
                     str(tmp_path), "--phi", "0.4", "--r", "2"]) == 0
    header, data = read_csv(tmp_path / "geodesic.csv")
    assert header == ["t", "x", "y", "w", "p", "q", "r"]
    assert data[-1, 0] == pytest.approx(math.pi)
    exact = flow.heisenberg_geodesic(data[:, 0], 0.4, 2.0)
    assert np.abs(data[:, 1:4] - exact).max() < 1e-9


def test_conjugate_csv(tmp_path):
    assert cli.main(["conjugate", "--config", str(SCEN / "heisenberg.json"), "--out",
                     str(tmp_path), "--n-phi", "4", "--r-values", "1", "2"]) == 0
    header, data = read_csv(tmp_path / "conjugate.csv")
    assert header == ["phi", "r", "tau", "x", "y", "w"]
    assert data.shape == (8, 6)
    np.testing.assert_allclose(data[:, 2], 2 * math.pi / data[:, 1], rtol=1e-8)
    np.testing.assert_allclose(data[:, 5], math.pi / data[:, 1] ** 2, rtol=1e-7)


def test_slice_outputs_and_svg(tmp_path):
    assert cli.main(["slice", "--config", str(SCEN / "off_c.json"), "--out", str(tmp_path),
                     "--side", "plus", "--svg"]) == 0
    header, data = read_csv(tmp_path / "slice_plus.csv")
    assert header == ["phi", "x", "y"] and data.shape == (512, 3)
    side = json.loads((tmp_path / "slice_plus.json").read_text())
    assert len(side["cusp_angles"]) == 4 and side["side"] == "plus"
    svg = (tmp_path / "slice.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<path") == 4
    assert not (tmp_path / "slice_minus.csv").exists()


def test_classify_json(tmp_path):
    assert cli.main(["classify", "--config", str(SCEN / "s1_s2.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "classify.json").read_text())
    assert rep["predicted_family_plus"] == ["S1"] and rep["predicted_family_minus"] == ["S2", "S3"]


@pytest.mark.parametrize("data,extra", [
    ({"h": 0.5}, []),
    ({"coefficients": {"c99": 1.0}}, []),
    ({"n_grid": 100}, []),
    ({"checks": ["everything"]}, []),
    ({"bogus": 1}, []),
    ({}, ["--h", "-1"]),
])
def test_config_errors_exit_2(tmp_path, data, extra):
    cfg = write_config(tmp_path, **data)
    assert cli.main(["classify", "--config", str(cfg), "--out", str(tmp_path), *extra]) == 2


def test_unreadable_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["classify", "--config", str(bad)]) == 2
    assert cli.main(["classify", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["geodesic", "--config", str(SCEN / "heisenberg.json"), "--r", "0",
                     "--out", str(tmp_path)]) == 2


def test_symbol_on_four_cusp_slice_exit_3(tmp_path, capsys):
    code = cli.main(["symbol", "--config", str(SCEN / "off_c.json"), "--out", str(tmp_path),
                     "--side", "plus"])
    assert code == 3
    assert "CuspCountUnexpected" in capsys.readouterr().err


def test_validation_mismatch_exit_4(tmp_path):
    data = json.loads((SCEN / "s1_s2.json").read_text())
    data.update(side="plus", n_grid=512, checks=["symbols"], expected={"plus": "S3"})
    cfg = write_config(tmp_path, **data)
    assert cli.main(["validate", "--config", str(cfg), "--out", str(tmp_path)]) == 4
    res = json.loads((tmp_path / "validate.json").read_text())
    assert res["passed"] is False


def test_validate_heisenberg_subprocess(tmp_path):
    proc = run("validate", "--config", SCEN / "heisenberg.json", "--out", tmp_path, "--h", "0.1")
    assert proc.returncode == 0, proc.stderr
    res = json.loads((tmp_path / "validate.json").read_text())
    assert res["passed"] and {c["name"] for c in res["checks"]} >= {
        "heisenberg_conjugate_time", "heisenberg_geodesic_closed_form", "point_slice_plus"}


def test_validate_is_deterministic_across_threads(tmp_path):
    outs = []
    for threads in ("1", "3"):
        env = dict(os.environ, NUMBA_NUM_THREADS=threads, OMP_NUM_THREADS=threads,
                   OPENBLAS_NUM_THREADS=threads, MKL_NUM_THREADS=threads)
        out = tmp_path / threads
        proc = run("validate", "--config", SCEN / "off_c.json", "--out", out, env=env)
        assert proc.returncode == 0, proc.stderr
        outs.append((out / "validate.json").read_bytes())
    assert outs[0] == outs[1]
