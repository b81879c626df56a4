import csv
import json
import logging

import numpy as np
import pytest

import elastomono.cli as cli
from elastomono.cli import main
from elastomono.fem import assemble
from elastomono.linsolve import SolveError
from elastomono.materials import background
from elastomono.mesh import build_structured_hex_mesh
from elastomono.spectral import generalized_eigenvalues

from conftest import REFERENCE_BACKGROUND

SMALL = {
    "schema_version": 1,
    "name": "small",
    "domain": {"edge_length": 1.0, "mesh_n": 4, "dirichlet_sides": ["zmin"]},
    "inclusions": [{"lo": [0.25, 0.25, 0.5], "hi": [0.75, 0.75, 0.75],
                    "d_lambda": 1.4e6, "d_mu": 1.4e4, "d_rho": 2e3}],
    "loads": {"patches_per_edge": 2},
    "cover": {"blocks_per_axis": 4},
    "omegas": [0, 10],
    "mtilde": {"0": 0},
}


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.json"
    p.write_text(json.dumps(SMALL, indent=2))
    return str(p)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_forward_without_inclusions(tmp_path):
    p = tmp_path / "empty.json"
    p.write_text(json.dumps({**SMALL, "inclusions": []}))
    for omega in ("0", "10", "50"):
        out = tmp_path / f"f{omega}"
        assert main(["forward", "--scenario", str(p), "--omega", omega, "--out", str(out)]) == 0
        text = (out / "displacement.vtk").read_text()
        assert "VECTORS displacement double" in text and "DIMENSIONS 5 5 5" in text


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  "omegas": [0,, 1]\n}')
    assert main(["m0", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "bad.json:3" in capsys.readouterr().err


def test_resonance_exit_code(tmp_path):
    mesh = build_structured_hex_mesh(2)
    theta = generalized_eigenvalues(assemble(mesh, background(*REFERENCE_BACKGROUND, mesh)))
    omega = repr(float(np.sqrt(theta[2])))
    out = tmp_path / "r"
    code = main(["forward", "--background", "--mesh-n", "2", "--patches", "1", "--omega", omega, "--out", str(out)])
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == "resonance"


def test_numerical_failure_exit_code(tmp_path, small, monkeypatch):
    def broken(*a, **k):
        raise SolveError("residual too large")

    monkeypatch.setattr(cli, "forward_solutions", broken)
    assert main(["forward", "--scenario", small, "--out", str(tmp_path / "o")]) == 4


def test_bad_flags_are_input_errors(tmp_path, small):
    assert main(["sweep", "--mtilde", "x"]) == 2
    assert main(["forward", "--scenario", small, "--load-index", "99", "--out", str(tmp_path / "o")]) == 2
    assert main(["forward", "--scenario", small, "--mesh-n", "3", "--out", str(tmp_path / "o")]) == 2


def test_m0_table(tmp_path, small):
    out = tmp_path / "m0"
    assert main(["m0", "--scenario", small, "--mesh-n", "2", "4", "--omega", "50", "--omega", "0",
                 "--omega", "10", "--out", str(out)]) == 0
    rows = read_csv(out / "m0.csv")
    assert len(rows) == 6
    for n in ("2", "4"):
        counts = [int(r["M0"]) for r in rows if r["mesh_n"] == n]
        assert counts[0] == 0 and counts == sorted(counts)
    assert [float(r["omega"]) for r in rows[:3]] == [0.0, 10.0, 50.0]


def test_sweep_reconstruct_and_rerun(tmp_path, small):
    out = tmp_path / "s"
    assert main(["sweep", "--scenario", small, "--omega", "0", "--threads", "2", "--out", str(out)]) == 0
    rows = read_csv(out / "eigencounts.csv")
    assert len(rows) == 64
    inside = {int(r["block_index"]) for r in rows if r["verdict"] == "inside"}
    # phantom occupies elements [1,3) x [1,3) x [2,3) of the 4^3 grid
    assert inside == {i + 4 * j + 16 * 2 for i in (1, 2) for j in (1, 2)}

    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["mtilde"] == 0 and manifest["parameters"]["rel_tol"] == 1e-10
    assert manifest["parameters"]["zero_pivot_tol"] == 1e-12
    assert {"mesh", "loads", "measured_field"} <= set(manifest["fingerprints"])
    assert {"python", "numpy", "scipy", "elastomono"} <= set(manifest["versions"])
    assert "time" not in json.dumps(manifest).lower()

    rec = tmp_path / "rec"
    assert main(["reconstruct", "--scenario", small, "--sweep", str(out), "--out", str(rec)]) == 0
    summary = json.loads((rec / "reconstruction.json").read_text())
    assert set(summary["filled_inside"]) == inside
    assert "CELL_DATA 64" in (rec / "mask.vtk").read_text()

    again = tmp_path / "again"
    assert main(["rerun", str(out / "manifest.json"), "--out", str(again)]) == 0
    for name in ("eigencounts.csv", "verdicts.csv", "sweep.json", "ntd_measured.csv", "ntd_measured.json"):
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_auto_mtilde_logged(tmp_path, small, caplog):
    out = tmp_path / "a"
    with caplog.at_level(logging.WARNING, logger="elastomono"):
        assert main(["sweep", "--scenario", small, "--omega", "10", "--mtilde", "auto", "--out", str(out)]) == 0
    msg = [r.getMessage() for r in caplog.records if "auto M~" in r.getMessage()]
    assert msg and "gap (" in msg[0]
    data = json.loads((out / "sweep.json").read_text())
    assert data["suggestion"]["gap"][0] == data["m_tilde"]


def test_cover_125_rows(tmp_path):
    out = tmp_path / "c"
    assert main(["sweep", "--mesh-n", "5", "--patches", "1", "--omega", "0", "--out", str(out)]) == 0
    assert len(read_csv(out / "eigencounts.csv")) == 125
    assert len(read_csv(out / "verdicts.csv")) == 125


def test_measured_input_must_match(tmp_path, small):
    out = tmp_path / "s"
    assert main(["sweep", "--scenario", small, "--omega", "0", "--out", str(out)]) == 0
    other = tmp_path / "o"
    code = main(["sweep", "--scenario", small, "--omega", "0", "--patches", "1",
                 "--measured", str(out / "ntd_measured.csv"), "--out", str(other)])
    assert code == 2
    code = main(["sweep", "--scenario", small, "--omega", "0",
                 "--measured", str(out / "ntd_measured.csv"), "--out", str(other)])
    assert code == 0
    assert (out / "eigencounts.csv").read_bytes() == (other / "eigencounts.csv").read_bytes()


def test_verify_command(tmp_path):
    out = tmp_path / "v"
    assert main(["verify", "--out", str(out)]) == 0
    report = json.loads((out / "verify.json").read_text())
    assert all(report["checks"].values())
    assert report["wavelengths_m"]["10.0"]["p"] == pytest.approx(9.0, rel=0.02)
    assert len(read_csv(out / "convergence.csv")) == 3
