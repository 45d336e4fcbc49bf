"""End-to-end run: ground state through reconstruction, with a stable report.

The report JSON is a pure function of the configuration: wall-times go to a
separate ``timings.json`` and to the Markdown summary only.
"""

from __future__ import annotations

import copy
import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .diophantine import DiophantineSpec
from .errors import ConfigError, ConstructionFailure, HypothesisFailure, QuasilocError
from .groundstate import solve_ground_state
from .nonlinearity import NonlinearityModel, check_fcond, check_hypothesis_S
from .reduced import CATALOGUE
from .scaling import admissible_lambda_window, default_lambda, frequency_data
from .spectrum import (certify_A1, certify_G, cylinder_mode_eigenvalues, cylinder_spectrum,
                       radial_spectrum)
from .torus import TorusSearch, assemble_W, detect_tori, reconstruct_solution

DEFAULTS = {
    "nonlinearity": {"kind": "power", "p": 3},
    "N": 2,
    "groundstate": {"rmax": None, "nodes": 4000},
    "spectrum": {"count": 3, "k_max": 4, "tol_nd": 1e-6},
    "lambda": "scaled",
    "lambda_x": 1.2,
    "delta": "auto",
    "n_s": 11,
    "nd_step": 1e-5,
    "diophantine": {"kappa": 1e-3, "nu": 1.2, "alpha_bound": 1000},
    "perturbation": {"name": "angle-coupled", "coeffs": None},
    "epsilons": [0.01],
    "seeds": 2,
    "seed": 0,
    "torus": {"T": 1000.0, "dt": 1e-3, "sample_every": 200, "m_fit": 8,
              "residual_tol": 1e-6, "q": 0.5},
    "reconstruction": {"n_x": 41, "n_xN": 17, "n_y": 33},
    "workers": 1,
    "figures": True,
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {path + key!r}")
        if isinstance(base[key], dict) and key != "nonlinearity":
            if not isinstance(val, dict):
                raise ConfigError(f"{path + key} must be an object")
            out[key] = _merge(base[key], val, path + key + ".")
        else:
            out[key] = copy.deepcopy(val)
    return out


def _positive(name, value):
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
        raise ConfigError(f"{name} must be a positive number, got {value!r}")


@dataclass
class PipelineConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, d: dict | None = None) -> "PipelineConfig":
        if d is not None and not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        cfg = cls(_merge(DEFAULTS, d or {}))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        return cls.from_dict(raw)

    def validate(self) -> None:
        d = self.data
        if not isinstance(d["N"], int) or isinstance(d["N"], bool) or d["N"] < 2:
            raise ConfigError("N must be an integer >= 2")
        self.model()  # raises on a bad nonlinearity
        lam = d["lambda"]
        if lam not in ("auto", "scaled"):
            _positive("lambda", lam)
        x = d["lambda_x"]
        if not isinstance(x, (int, float)) or not 1 < x < 4:
            raise ConfigError("lambda_x must lie in (1, 4)")
        if d["delta"] != "auto":
            _positive("delta", d["delta"])
        if not isinstance(d["n_s"], int) or d["n_s"] < 1:
            raise ConfigError("n_s must be a positive integer")
        _positive("nd_step", d["nd_step"])
        for key in ("count", "k_max"):
            if not isinstance(d["spectrum"][key], int) or d["spectrum"][key] < 1:
                raise ConfigError(f"spectrum.{key} must be a positive integer")
        if d["spectrum"]["count"] < 2:
            raise ConfigError("spectrum.count must be >= 2 to certify the Morse index")
        _positive("spectrum.tol_nd", d["spectrum"]["tol_nd"])
        gs = d["groundstate"]
        if gs["rmax"] is not None:
            _positive("groundstate.rmax", gs["rmax"])
        if not isinstance(gs["nodes"], int) or gs["nodes"] < 16:
            raise ConfigError("groundstate.nodes must be an integer >= 16")
        self.dioph_spec()
        pert = d["perturbation"]
        if pert.get("name") not in CATALOGUE:
            raise ConfigError(f"perturbation.name must be one of {sorted(CATALOGUE)}")
        eps = d["epsilons"]
        if not isinstance(eps, list) or not eps:
            raise ConfigError("epsilons must be a nonempty list")
        for e in eps:
            if not isinstance(e, (int, float)) or not 0 < e <= 1:
                raise ConfigError(f"epsilon {e!r} must lie in (0, 1]")
        for key in ("seeds", "seed", "workers"):
            if not isinstance(d[key], int) or d[key] < (0 if key == "seed" else 1):
                raise ConfigError(f"{key} must be a {'nonnegative' if key == 'seed' else 'positive'} integer")
        t = d["torus"]
        for key in ("T", "dt", "residual_tol", "q"):
            _positive(f"torus.{key}", t[key])
        for key in ("sample_every", "m_fit"):
            if not isinstance(t[key], int) or t[key] < 1:
                raise ConfigError(f"torus.{key} must be a positive integer")
        for key, val in d["reconstruction"].items():
            if not isinstance(val, int) or val < 3:
                raise ConfigError(f"reconstruction.{key} must be an integer >= 3")

    def model(self) -> NonlinearityModel:
        try:
            return NonlinearityModel.from_config(self.data["nonlinearity"])
        except ConfigError:
            raise
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"invalid nonlinearity: {exc}") from exc

    def dioph_spec(self) -> DiophantineSpec:
        try:
            return DiophantineSpec(n=2, **self.data["diophantine"])
        except TypeError as exc:
            raise ConfigError(f"invalid diophantine block: {exc}") from exc

    def search(self) -> TorusSearch:
        return TorusSearch(**self.data["torus"])

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)


@dataclass
class PipelineReport:
    config: dict
    stages: dict = field(default_factory=dict)
    status: str = "running"
    failed_stage: Optional[str] = None
    error: Optional[str] = None
    exit_code: int = 0
    timings: dict = field(default_factory=dict)
    # heavy objects kept for emission
    artifacts: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        import numba
        import scipy

        return {
            "status": self.status,
            "exit_code": self.exit_code,
            "failed_stage": self.failed_stage,
            "error": self.error,
            "stages": self.stages,
            "config": self.config,
            "versions": {"quasiloc": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "numba": numba.__version__},
            "surrogate_note": "reduced perturbation is a catalogue surrogate; "
                              "center-manifold correction omitted in reconstruction",
        }


def _verdict_gate(verdict):
    if not verdict.passed:
        raise HypothesisFailure(f"hypothesis {verdict.name} fails: {verdict.details}")


def run_pipeline(config: PipelineConfig) -> PipelineReport:
    """Run all stages, stopping at the first failure (recorded, not raised)."""
    d = config.data
    report = PipelineReport(config=config.to_dict())
    stage = "setup"

    def timed(name):
        nonlocal stage
        stage = name
        report.timings[name] = time.perf_counter()

    def done(name):
        report.timings[name] = time.perf_counter() - report.timings[name]

    try:
        timed("S")
        model = config.model()
        f0, df0 = check_fcond(model)
        vs = check_hypothesis_S(model, d["N"])
        report.stages["S"] = vs.as_dict() | {"f0": f0, "df0": df0,
                                             "gate": "sign conditions only"}
        if not vs.details["sign_ok"]:
            raise HypothesisFailure(f"f(0) = {f0}, f'(0) = {df0}: need f(0) = 0 > f'(0)")
        done("S")

        timed("groundstate")
        dim = d["N"] - 1
        gs = solve_ground_state(model, dim, d["groundstate"]["rmax"], d["groundstate"]["nodes"])
        report.artifacts["gs"] = gs
        report.stages["groundstate"] = {
            "alpha": gs.alpha, "decay_rate": gs.decay_rate, "residual": gs.residual,
            "residual_tol": 40.0 * gs.h**2, "rmax": gs.rmax, "nodes": gs.nodes, "dim": dim,
            "bisection_rtol": 1e-12}
        done("groundstate")

        timed("G")
        sp = d["spectrum"]
        radial = radial_spectrum(model, gs, sp["count"])
        report.artifacts["radial"] = radial
        vg = certify_G(radial, sp["tol_nd"])
        report.stages["G"] = vg.as_dict() | {
            "eigenvalues_coarse": radial.eigenvalues_coarse.tolist(),
            "eigenvalues_fine": radial.eigenvalues_fine.tolist(),
            "essential_spectrum_floor": radial.essential_spectrum_floor}
        _verdict_gate(vg)
        done("G")

        timed("A1")
        mu0 = radial.mu0
        positive = radial.eigenvalues[radial.eigenvalues > 0]
        second = float(positive[0]) if positive.size else float(radial.eigenvalues[-1])
        lo, hi = admissible_lambda_window(mu0, second)
        if d["lambda"] == "auto":
            lam = default_lambda(mu0, second)
        elif d["lambda"] == "scaled":
            # λ|μ₀| = x fixes ω(0) = (√x, √(x-1)) independently of the model
            lam = d["lambda_x"] / abs(mu0)
        else:
            lam = float(d["lambda"])
        if not lo < lam < hi:
            raise ConstructionFailure(f"lambda = {lam} outside the window ({lo}, {hi})")
        delta = None if d["delta"] == "auto" else float(d["delta"])
        fdata = frequency_data(lam, mu0, d["n_s"], delta, d["nd_step"])
        direct = {}
        for k in (0, 1):
            sep = lam * mu0 + k * k
            val = float(cylinder_mode_eigenvalues(model, gs, lam, k)[0])
            direct[f"j0_k{k}"] = {"separated": sep, "assembled": val}
        va = certify_A1(radial, lam, fdata.s_grid, sp["k_max"], 2, direct)
        cyl = cylinder_spectrum(radial, lam, sp["k_max"])
        report.stages["A1"] = va.as_dict() | {"window": [lo, hi], "lambda": lam,
                                              "lambda_policy": d["lambda"],
                                              "cylinder": cyl.to_dict(), "tol": 1e-6}
        _verdict_gate(va)
        done("A1")

        timed("ND")
        report.artifacts["fd"] = fdata
        report.stages["ND"] = {"name": "ND", "passed": fdata.nd.rank == 2,
                               "details": fdata.to_dict()}
        done("ND")

        timed("tori")
        pert = d["perturbation"]
        spec = config.dioph_spec()
        cands = detect_tori(fdata, pert["name"], d["epsilons"], d["seeds"], spec,
                            coeffs=pert["coeffs"], seed=d["seed"], search=config.search(),
                            workers=d["workers"])
        report.artifacts["candidates"] = cands
        n_acc = sum(c.accepted for c in cands)
        report.stages["tori"] = {"n_orbits": len(cands), "n_accepted": n_acc,
                                 "acceptance_rate": n_acc / len(cands),
                                 "residual_tol": d["torus"]["residual_tol"],
                                 "diophantine": spec.as_dict(),
                                 "candidates": [c.to_dict() for c in cands]}
        done("tori")

        timed("W")
        W = assemble_W(cands)
        report.artifacts["W"] = W
        report.stages["W"] = {"size": len(W), "parallel_tol": 1e-10,
                              "members": [{"omega_bar": list(map(float, c.omega_bar)),
                                           "s": c.s, "epsilon": c.epsilon,
                                           "seed_index": c.seed_index,
                                           "seed_action": list(map(float, c.seed_action))}
                                          for c in W]}
        done("W")

        timed("reconstruction")
        if W:
            rc = d["reconstruction"]
            rec = reconstruct_solution(W[0], gs, radial.eigenfunctions[0], **rc)
            report.artifacts["reconstruction"] = rec
            report.stages["reconstruction"] = rec.meta | {"symmetry_tol": 1e-12,
                                                          "decay_tol": 1e-3}
        else:
            report.stages["reconstruction"] = {"skipped": "no accepted torus"}
        done("reconstruction")
        report.status = "ok"
    except QuasilocError as exc:
        report.status = "failed"
        report.failed_stage = stage
        report.error = f"{type(exc).__name__}: {exc}"
        report.exit_code = exc.exit_code
        report.timings[stage] = time.perf_counter() - report.timings.get(stage, time.perf_counter())
    return report


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                        for v in row])


def _markdown(report: PipelineReport, files: dict) -> str:
    lines = ["# Pipeline report", "", f"status: **{report.status}** "
             f"(exit code {report.exit_code})", ""]
    if report.failed_stage:
        lines += [f"failed stage: `{report.failed_stage}`", "", f"error: {report.error}", ""]
    st = report.stages
    lines += ["| stage | result |", "|---|---|"]
    for name in ("S", "G", "A1", "ND"):
        if name in st:
            lines.append(f"| {name} | {'pass' if st[name]['passed'] else 'FAIL'} |")
    if "groundstate" in st:
        g = st["groundstate"]
        lines.append(f"| ground state | φ(0) = {g['alpha']:.12g}, residual {g['residual']:.3e} |")
    if "G" in st:
        ev = st["G"]["details"]["eigenvalues"]
        lines.append(f"| radial spectrum | {', '.join(f'{v:.9g}' for v in ev)} |")
    if "ND" in st:
        nd = st["ND"]["details"]["nd"]
        lines.append(f"| det[ω'(0) ω(0)] | {nd['det']:.9g} (closed form "
                     f"{nd['closed_form_det']:.9g}; √(x+1) variant {nd['printed_variant_det']:.9g}) |")
    if "tori" in st:
        t = st["tori"]
        lines.append(f"| tori | {t['n_accepted']} / {t['n_orbits']} accepted |")
    if "W" in st:
        lines.append(f"| W | {st['W']['size']} pairwise non-parallel frequency vectors |")
    rec = st.get("reconstruction", {})
    if "min_u" in rec:
        lines.append(f"| reconstruction | min u = {rec['min_u']:.4g}, decay ratio "
                     f"{rec['decay_ratio']:.3e}, sup dist to φ = "
                     f"{rec['sup_distance_to_ground_state']:.3e} |")
    lines += ["", "## Files", ""] + [f"- `{v}` ({k})" for k, v in sorted(files.items())]
    lines += ["", "## Wall times (s)", ""]
    lines += [f"- {k}: {v:.3f}" for k, v in report.timings.items()]
    lines += ["", "The reduced perturbation is a catalogue surrogate; the center-manifold "
              "correction is omitted in the reconstruction.", ""]
    return "\n".join(lines)


def emit_report(report: PipelineReport, out_dir, figures: bool = True) -> dict:
    """Write report.json, report.md, timings.json, CSV data and figures.

    Returns the mapping of artifact names to relative paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    art = report.artifacts
    if "gs" in art:
        gs = art["gs"]
        _write_csv(out / "groundstate.csv", ["r", "phi"], zip(gs.grid, gs.values))
        files["groundstate"] = "groundstate.csv"
    if "radial" in art:
        rad = art["radial"]
        _write_csv(out / "spectrum.csv", ["j", "eigenvalue", "coarse", "fine"],
                   [(j, v, c, f) for j, (v, c, f) in enumerate(zip(
                       rad.eigenvalues, rad.eigenvalues_coarse, rad.eigenvalues_fine))])
        files["spectrum"] = "spectrum.csv"
    if "radial" in art and art["radial"].eigenfunctions is not None:
        rad = art["radial"]
        _write_csv(out / "eigenfunctions.csv",
                   ["r"] + [f"psi{j}" for j in range(len(rad.eigenfunctions))],
                   np.column_stack([rad.grid, rad.eigenfunctions.T]).tolist())
        files["eigenfunctions"] = "eigenfunctions.csv"
    if "fd" in art:
        fd = art["fd"]
        _write_csv(out / "frequencies.csv", ["s", "mu1", "mu2", "omega1", "omega2"],
                   np.column_stack([fd.s_grid, fd.mu1, fd.mu2, fd.omega]).tolist())
        files["frequencies"] = "frequencies.csv"
    if "candidates" in art:
        rows = [(c.epsilon, c.s, c.seed_index, c.omega_bar[0], c.omega_bar[1], c.fit_residual,
                 c.diophantine_margin, int(c.accepted), c.reason) for c in art["candidates"]]
        _write_csv(out / "tori.csv", ["epsilon", "s", "seed_index", "omega1", "omega2",
                                      "fit_residual", "diophantine_margin", "accepted",
                                      "reason"], rows)
        files["tori_table"] = "tori.csv"
        write_tori_json(out / "tori.json", art["candidates"], art.get("W", []))
        files["tori"] = "tori.json"
    if "reconstruction" in art:
        art["reconstruction"].write_csv(out / "reconstruction.csv")
        files["reconstruction"] = "reconstruction.csv"
    if figures:
        from .plotting import render_figures

        files.update(render_figures(report, out))
    body = report.to_dict() | {"files": dict(sorted(files.items()))}
    (out / "report.json").write_text(dumps_stable(body))
    files["report"] = "report.json"
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True))
    files["timings"] = "timings.json"
    (out / "report.md").write_text(_markdown(report, files))
    files["summary"] = "report.md"
    return files


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps_stable(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_tori_json(path, candidates, W) -> None:
    """Accepted tori in W order under ``tori``; every other orbit under ``rejected``."""
    in_w = {id(c) for c in W}
    body = {"tori": [c.to_dict() for c in W],
            "accepted_not_in_W": [c.to_dict() for c in candidates
                                  if c.accepted and id(c) not in in_w],
            "rejected": [c.to_dict() for c in candidates if not c.accepted]}
    Path(path).write_text(dumps_stable(body))
