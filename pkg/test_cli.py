import json
import logging
import logging.handlers
import os
from dataclasses import replace

import pytest
from numpy.testing import assert_allclose

import conducta_ctl
from conftest import config_path
from conducta.runio import read_farfield_csv, read_manifest
from conducta.settings import Settings, setup_logging


@pytest.fixture(autouse=True)
def _log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setenv("CONDUCTA_LOG_FILE", str(tmp_path / "conducta.log"))
    monkeypatch.setenv("CONDUCTA_THREADS", "1")


def run(capsys, *argv):
    code = conducta_ctl.main(list(argv))
    out, err = capsys.readouterr()
    response = json.loads(out) if out.strip() else None
    return code, response, err


def test_discovers_every_command():
    names = set(conducta_ctl.discover_commands())
    assert names == {
        "forward", "oracle-compare", "energy-audit", "farfield-matrix", "reciprocity",
        "distinguish", "lsm", "singularity", "dipole", "itp-check", "itp-radius",
    }


# --- usage errors -------------------------------------------------------------

def test_no_arguments(capsys):
    code, response, err = run(capsys)
    assert code == conducta_ctl.EXIT_INVALID
    assert response is None
    assert "usage" in err


def test_unknown_command(capsys):
    code, _, err = run(capsys, "scatter")
    assert code == 1
    assert "unknown command 'scatter'" in err


def test_bad_flag(capsys):
    code, _, err = run(capsys, "forward", "--config", config_path("disk.json"), "--bogus")
    assert code == 1
    assert "unrecognized arguments" in err


def test_missing_config(capsys):
    code, response, _ = run(capsys, "forward")
    assert code == 1
    assert response["kind"] == "validation"
    assert response["violations"][0]["code"] == "arguments"


def test_unreadable_config(capsys, tmp_path):
    code, response, _ = run(capsys, "forward", "--config", str(tmp_path / "nope.json"))
    assert code == 1
    assert response["violations"][0]["code"] == "config"


# --- forward family -----------------------------------------------------------

def test_oracle_compare_disk(capsys, tmp_path):
    out = tmp_path / "cmp"
    code, response, _ = run(capsys, "oracle-compare", "--config", config_path("disk.json"), "--out", str(out))
    assert code == 0
    assert response["ok"] and response["command"] == "oracle-compare"
    data = response["data"]
    assert data["rel_l2_farfield"] < 1e-6
    assert data["rel_l2_nearfield"] < 1e-6
    assert data["max_boundary_residual"] <= 1e-6
    assert data["config"]["lambda"] == 2.0
    assert data["incidence"] == {"type": "plane", "direction": [1.0, 0.0]}
    assert (out / "oracle_compare.json").exists()
    assert (out / "farfield_compare.csv").exists()
    manifest = read_manifest(str(out))
    assert manifest.command == "oracle-compare"
    assert manifest.config_path == config_path("disk.json")


def test_invalid_gamma_exits_1(capsys):
    code, response, _ = run(capsys, "forward", "--config", config_path("bad_gamma.json"))
    assert code == 1
    assert response["kind"] == "validation"
    assert "conductive sign" in {v["code"] for v in response["violations"]}


def test_resonance_exits_2(capsys):
    code, response, err = run(capsys, "forward", "--config", config_path("resonance.json"))
    assert code == 2
    assert response["kind"] == "numerical"
    assert "forward failed" in err


def test_forward_with_sample_points(capsys, tmp_path):
    code, response, _ = run(
        capsys, "forward", "--config", config_path("disk.json"), "--N", "64",
        "--incidence", '{"type": "plane", "direction": [0, 1]}',
        "--points", "[[0.2, 0.1], [2.0, 0.0]]", "--out", str(tmp_path),
    )
    assert code == 0
    data = response["data"]
    assert data["unknowns"] == 128
    assert [f["region"] for f in data["fields"]] == ["interior", "exterior"]
    assert data["incidence"]["direction"] == [0.0, 1.0]
    far = (tmp_path / "farfield.csv").read_text().splitlines()
    assert far[0] == "theta,re_uinf,im_uinf"
    assert len(far) == 1 + 64
    fields = (tmp_path / "fields.csv").read_text().splitlines()
    assert fields[0] == "x,y,region,re,im"
    assert fields[1].startswith("0.2,0.1,interior,")
    assert (tmp_path / "summary.json").exists()


def test_transparent_scatterer_is_silent(capsys):
    code, response, _ = run(capsys, "forward", "--config", config_path("transparent.json"), "--N", "64")
    assert code == 0
    assert response["data"]["far_field_max"] < 1e-10


def test_energy_audit(capsys):
    code, response, _ = run(capsys, "energy-audit", "--config", config_path("disk_obstacle.json"))
    assert code == 0
    data = response["data"]
    assert data["dissipation"] > 0
    assert data["residuals"]["balance"] <= 1e-6


# --- far-field family ---------------------------------------------------------

def test_farfield_matrix_roundtrip(capsys, tmp_path):
    code, response, _ = run(
        capsys, "farfield-matrix", "--config", config_path("disk.json"), "--grid", "8",
        "--engine", "oracle", "--out", str(tmp_path),
    )
    assert code == 0
    assert response["data"]["shape"] == [8, 8]
    assert response["data"]["reciprocity"] <= 1e-8
    matrix = read_farfield_csv(str(tmp_path / "farfield_matrix.csv"))
    assert matrix.shape == (8, 8)
    assert_allclose(matrix.k, 2.0)
    assert_allclose(response["data"]["frobenius"], (abs(matrix.values) ** 2).sum() ** 0.5, rtol=1e-12)
    assert read_manifest(str(tmp_path)).options["engine"] == "oracle"

    code, response, _ = run(capsys, "reciprocity", "--matrix", str(tmp_path / "farfield_matrix.csv"))
    assert code == 0
    assert response["data"]["residual"] <= 1e-8


def test_noise_is_recorded(capsys, tmp_path):
    code, _, _ = run(
        capsys, "farfield-matrix", "--config", config_path("disk.json"), "--grid", "8",
        "--engine", "oracle", "--noise", "0.01", "--seed", "7", "--out", str(tmp_path),
    )
    assert code == 0
    assert read_farfield_csv(str(tmp_path / "farfield_matrix.csv")).noise == 0.01
    assert read_manifest(str(tmp_path)).seed == 7


def test_reciprocity_odd_grid(capsys):
    code, response, _ = run(
        capsys, "reciprocity", "--config", config_path("disk.json"), "--grid", "7", "--engine", "oracle",
    )
    assert code == 1
    assert response["kind"] == "validation"


def test_distinguish_identical(capsys):
    code, response, _ = run(
        capsys, "distinguish", "--config", config_path("disk.json"),
        "--other", config_path("disk.json"), "--grid", "8", "--engine", "oracle",
    )
    assert code == 0
    assert response["data"]["distance"] == 0.0


def test_lsm_from_config(capsys, tmp_path):
    code, response, _ = run(
        capsys, "lsm", "--config", config_path("disk.json"), "--grid", "16",
        "--engine", "oracle", "--points", "21", "--out", str(tmp_path),
    )
    assert code == 0
    data = response["data"]
    assert data["alpha"] > 0
    assert data["max"] > data["threshold"] > 0
    assert len((tmp_path / "indicator.csv").read_text().splitlines()) == 1 + 21 * 21
    assert data["contour_points"] > 0
    assert data["hausdorff"] < 0.3
    assert len((tmp_path / "contour.csv").read_text().splitlines()) == 1 + data["contour_points"]


def test_lsm_matrix_needs_box(capsys, tmp_path):
    run(capsys, "farfield-matrix", "--config", config_path("disk.json"), "--grid", "8",
        "--engine", "oracle", "--out", str(tmp_path))
    csv_path = str(tmp_path / "farfield_matrix.csv")

    code, response, _ = run(capsys, "lsm", "--matrix", csv_path, "--points", "11")
    assert code == 1
    assert response["violations"][0]["code"] == "grid"

    code, response, _ = run(capsys, "lsm", "--matrix", csv_path, "--points", "11", "--box", "-2,2,-2,2")
    assert code == 0
    assert "hausdorff" not in response["data"]


# --- singularity experiments --------------------------------------------------

def test_singularity_oracle(capsys, tmp_path):
    code, response, _ = run(
        capsys, "singularity", "--config", config_path("disk.json"), "--engine", "oracle",
        "--J", "2", "--delta", "0.3", "--out", str(tmp_path),
    )
    assert code == 0
    data = response["data"]
    assert data["kind"] == "point"
    assert data["J"] == 2
    assert_allclose(data["c_expected"], 2.0 / 3.0)
    rows = (tmp_path / "singularity.csv").read_text().splitlines()
    assert rows[0] == "j,c_fit_re,c_fit_im,remainder_h1,vnorm_h1"
    assert len(rows) == 3
    assert read_manifest(str(tmp_path)).options["delta"] == 0.3


def test_dipole_needs_unit_lambda(capsys):
    code, response, _ = run(capsys, "dipole", "--config", config_path("disk.json"), "--engine", "oracle", "--J", "2")
    assert code == 1
    assert response["violations"][0]["code"] == "coefficient sign"


# --- interior transmission ----------------------------------------------------

def test_itp_check(capsys, tmp_path):
    code, response, _ = run(
        capsys, "itp-check", "--k", "1", "--n1", "0.5", "--n2", "1", "--eta", "1",
        "--coercivity", "--out", str(tmp_path),
    )
    assert code == 0
    data = response["data"]
    assert data["well_posed"]
    assert data["holding"] == [1]
    assert data["coercivity"] > 0
    assert json.loads((tmp_path / "itp_report.json").read_text())["holding"] == data["holding"]


def test_itp_check_rejects_bad_parameters(capsys):
    code, response, _ = run(capsys, "itp-check", "--k", "1", "--n1", "-0.5", "--n2", "1")
    assert code == 1
    assert response["kind"] == "validation"


def test_itp_radius(capsys):
    code, response, _ = run(capsys, "itp-radius", "--k", "1", "--n1", "0.5", "--n2", "1", "--eta", "1")
    assert code == 0
    assert response["data"]["radius"] > 0


def test_itp_missing_required_flag(capsys):
    code, _, err = run(capsys, "itp-radius", "--k", "1")
    assert code == 1
    assert "required" in err


def test_log_file_written(capsys, tmp_path):
    run(capsys, "itp-radius", "--k", "1", "--n1", "0.5", "--n2", "1")
    assert os.path.exists(tmp_path / "conducta.log")


def test_reconfigured_logging_closes_old_handlers(tmp_path):
    first = Settings(threads=1, log_file=str(tmp_path / "a.log"), log_level="INFO", resonance_threshold=1e12)
    setup_logging(first)
    old = [h for h in logging.getLogger().handlers if isinstance(h, logging.handlers.RotatingFileHandler)]
    assert len(old) == 1

    setup_logging(replace(first, log_file=str(tmp_path / "b.log")))
    files = [h for h in logging.getLogger().handlers if isinstance(h, logging.handlers.RotatingFileHandler)]
    assert old[0] not in files
    assert old[0].stream is None
    assert [h.baseFilename for h in files] == [str(tmp_path / "b.log")]
