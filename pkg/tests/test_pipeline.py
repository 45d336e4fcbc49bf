import json

import numpy as np
import pytest

import quasiloc.pipeline as pipeline
from quasiloc.errors import ConfigError
from quasiloc.pipeline import PipelineConfig, emit_report, run_pipeline
from quasiloc.spectrum import SpectralReport

FAST = {"n_s": 2, "seeds": 1, "torus": {"T": 500.0, "sample_every": 100},
        "reconstruction": {"n_x": 11, "n_xN": 5, "n_y": 9}}


def test_default_run(default_run):
    rep = default_run["report"]
    assert rep.status == "ok" and rep.exit_code == 0
    st = rep.stages
    for name in ("S", "G", "A1", "ND"):
        assert st[name]["passed"], name
    assert st["G"]["details"]["eigenvalues"][0] == pytest.approx(-3.0, abs=1e-6)
    nd = st["ND"]["details"]["nd"]
    assert abs(nd["det"]) == pytest.approx(3.0618622, abs=1e-4)
    assert st["A1"]["lambda"] == pytest.approx(0.4)
    assert st["W"]["size"] >= 10
    assert st["reconstruction"]["positive"]


def test_report_files(default_run):
    out = default_run["out"]
    body = json.loads((out / "report.json").read_text())
    assert body["files"]
    for rel in body["files"].values():
        assert (out / rel).is_file(), rel
    for name in ("groundstate.csv", "spectrum.csv", "frequencies.csv", "tori.csv",
                 "reconstruction.csv"):
        assert name in body["files"].values()
    assert "seconds" not in (out / "report.json").read_text()
    assert body["config"] == pipeline.DEFAULTS
    assert (out / "report.md").read_text().startswith("# Pipeline report")
    tori = json.loads((out / "tori.json").read_text())
    assert len(tori["tori"]) == body["stages"]["W"]["size"]


def test_determinism(tmp_path):
    cfg = PipelineConfig.from_dict(FAST | {"figures": False})
    emit_report(run_pipeline(cfg), tmp_path / "a", figures=False)
    emit_report(run_pipeline(cfg), tmp_path / "b", figures=False)
    for name in ("report.json", "tori.json", "tori.csv", "reconstruction.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_quadratic_pipeline():
    rep = run_pipeline(PipelineConfig.from_dict(FAST | {"nonlinearity": {"kind": "power",
                                                                         "p": 2}}))
    assert rep.status == "ok"
    assert rep.stages["G"]["details"]["eigenvalues"][0] == pytest.approx(-1.25, abs=1e-6)
    assert rep.stages["A1"]["lambda"] == pytest.approx(1.2 / 1.25)


def test_morse_index_two_fails(monkeypatch, tmp_path):
    def fake(model, gs, count=3):
        return SpectralReport(eigenvalues=[-2.0, -0.5, 1.0], eigenfunctions=None,
                              grid=gs.grid, essential_spectrum_floor=1.0,
                              eigenvalues_coarse=np.array([-2.0, -0.5, 1.0]),
                              eigenvalues_fine=np.array([-2.0, -0.5, 1.0]))

    monkeypatch.setattr(pipeline, "radial_spectrum", fake)
    rep = run_pipeline(PipelineConfig.from_dict(FAST))
    assert rep.status == "failed"
    assert rep.failed_stage == "G"
    assert rep.exit_code == 2
    assert rep.stages["G"]["details"]["morse_index"] == 2
    assert "tori" not in rep.stages
    emit_report(rep, tmp_path, figures=False)
    body = json.loads((tmp_path / "report.json").read_text())
    assert body["status"] == "failed" and body["exit_code"] == 2


def test_lambda_outside_window():
    rep = run_pipeline(PipelineConfig.from_dict(FAST | {"lambda": 0.3}))
    assert rep.failed_stage == "A1" and rep.exit_code == 2


def test_smoothness_reported_not_gated():
    cfg = FAST | {"nonlinearity": {"kind": "power", "p": 2.5}, "n_s": 1}
    rep = run_pipeline(PipelineConfig.from_dict(cfg))
    assert not rep.stages["S"]["details"]["smoothness_ok"]
    assert rep.stages["S"]["details"]["sign_ok"]
    assert rep.failed_stage != "S"


@pytest.mark.parametrize("bad", [
    {"N": 1},
    {"unknown": 1},
    {"torus": {"dt": -1.0}},
    {"epsilons": [0.0]},
    {"epsilons": []},
    {"nonlinearity": {"kind": "power", "p": 1}},
    {"diophantine": {"nu": 0.5}},
    {"perturbation": {"name": "quintic"}},
    {"spectrum": {"count": 1}},
    {"lambda_x": 5.0},
])
def test_config_errors(bad):
    with pytest.raises(ConfigError) as exc:
        PipelineConfig.from_dict(bad)
    assert exc.value.exit_code == 64


def test_config_load(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        PipelineConfig.load(path)
    path.write_text(json.dumps({"seeds": 3}))
    assert PipelineConfig.load(path).data["seeds"] == 3
