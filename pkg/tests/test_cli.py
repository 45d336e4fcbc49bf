import json
import math

import pytest

from conftest import OMEGA0
from quasiloc.cli import main
from quasiloc.reduced import HamiltonianModel


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["groundstate", "--p", "3", "--out", str(d / "gs.json")]) == 0
    assert main(["spectrum", "--from", str(d / "gs.json"), "--lambda", "0.4",
                 "--out", str(d / "spec.json")]) == 0
    assert main(["hypotheses", "--from", str(d / "spec.json"), "--lambda", "0.4",
                 "--out", str(d / "freq.json")]) == 0
    return d


def test_groundstate_output(workdir):
    d = json.loads((workdir / "gs.json").read_text())
    for key in ("grid", "values", "alpha", "decay_rate", "residual"):
        assert key in d
    assert d["alpha"] == pytest.approx(math.sqrt(2), abs=1e-10)


def test_spectrum_output(workdir):
    d = json.loads((workdir / "spec.json").read_text())
    assert d["radial"]["eigenvalues"][0] == pytest.approx(-3.0, abs=1e-6)
    low = [m["eigenvalue"] for m in d["cylinder"]["nonpositive"]]
    assert low == pytest.approx([-1.2, -0.2], abs=1e-6)
    assert d["cylinder"]["assembled_lowest"]["1"] == pytest.approx(-0.2, abs=1e-6)


def test_hypotheses_output(workdir, capsys):
    d = json.loads((workdir / "freq.json").read_text())
    assert all(v["passed"] for v in d["verdicts"].values())
    assert abs(d["frequency_data"]["nd"]["det"]) == pytest.approx(3.0618622, abs=1e-6)
    assert main(["hypotheses", "--from", str(workdir / "spec.json"),
                 "--out", str(workdir / "auto.json")]) == 0
    assert main(["hypotheses", "--from", str(workdir / "spec.json"), "--lambda", "0.3",
                 "--out", str(workdir / "bad.json")]) == 2
    assert "outside" in capsys.readouterr().err


def test_diophantine_commands(tmp_path, capsys):
    assert main(["diophantine", "check", "--omega", "1.0,1.6180339887", "--kappa", "0.2",
                 "--bound", "10000"]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]
    main(["diophantine", "check", "--omega", "1.0,0.5"])
    v = json.loads(capsys.readouterr().out)
    assert not v["passed"] and v["worst_alpha"] == [1, -2]
    out = tmp_path / "v.json"
    assert main(["diophantine", "sample", "--n", "500", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["pass_fraction"] > 0.9
    assert d["W_size"] == len(d["members"])
    assert main(["diophantine", "sample", "--box", "1,2,1"]) == 64


def test_simulate(tmp_path):
    model = tmp_path / "m.json"
    model.write_text(json.dumps(HamiltonianModel.from_catalogue(OMEGA0, "cubic1").to_dict()))
    out = tmp_path / "t.csv"
    assert main(["simulate", "--model", str(model), "--state0", "0.1,0.1,0.05,0.05",
                 "--T", "10", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,xi1,xi2,eta1,eta2,H"
    assert len(lines) == 102
    assert main(["simulate", "--model", str(model), "--state0", "0.1,0.1",
                 "--out", str(out)]) == 64
    assert main(["simulate", "--model", str(model), "--state0", "0.3,0.2,0.1,-0.1",
                 "--T", "100", "--out", str(out)]) == 3


def test_find_tori_and_reconstruct(workdir):
    tori = workdir / "tori.json"
    assert main(["find-tori", "--freq", str(workdir / "freq.json"), "--sgrid", "2",
                 "--seeds", "1", "--T", "500", "--sample-every", "100",
                 "--out", str(tori)]) == 0
    d = json.loads(tori.read_text())
    assert len(d["tori"]) == 2
    field = workdir / "field.csv"
    assert main(["reconstruct", "--torus", f"{tori}#1", "--gs", str(workdir / "gs.json"),
                 "--nx", "11", "--nxn", "5", "--ny", "7", "--out", str(field)]) == 0
    assert field.read_text().splitlines()[0] == "x_prime,x_N,y,u"
    meta = json.loads(field.with_suffix(".json").read_text())
    assert meta["positive"]
    assert main(["reconstruct", "--torus", f"{tori}#9", "--gs", str(workdir / "gs.json"),
                 "--out", str(field)]) == 64


def test_exit_codes(tmp_path):
    assert main(["groundstate", "--p", "7", "--dim", "3", "--out",
                 str(tmp_path / "g.json")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["groundstate"])
    assert exc.value.code == 64
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 64
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"N": 1}))
    assert main(["pipeline", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 64
    assert main(["spectrum", "--from", str(tmp_path / "missing.json"),
                 "--out", str(tmp_path / "s.json")]) == 64


def test_pipeline_command(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n_s": 2, "seeds": 1, "torus": {"T": 500.0,
                                                                "sample_every": 100}}))
    out = tmp_path / "run"
    assert main(["pipeline", "--config", str(cfg), "--out", str(out), "--no-figures"]) == 0
    assert json.loads((out / "report.json").read_text())["status"] == "ok"
    assert not (out / "groundstate.png").exists()
