"""Command-line interface.

Exit codes: 0 success, 2 hypothesis failure, 3 numeric failure, 64 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, HypothesisFailure, QuasilocError

EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _write_json(path, obj) -> None:
    from .pipeline import dumps_stable

    Path(path).write_text(dumps_stable(obj))


def _model_from(args):
    from .nonlinearity import NonlinearityModel

    if args.coeffs is not None:
        return NonlinearityModel.polynomial(args.coeffs)
    return NonlinearityModel.power(args.p)


def cmd_groundstate(args) -> int:
    from .groundstate import solve_ground_state

    model = _model_from(args)
    gs = solve_ground_state(model, args.dim, args.rmax, args.nodes)
    gs.model = model.to_config()
    gs.save(args.out)
    print(f"alpha = {gs.alpha:.12g}  decay_rate = {gs.decay_rate:.9g}  "
          f"residual = {gs.residual:.3e}  -> {args.out}")
    return 0


def _load_gs(path):
    from .groundstate import GroundState
    from .nonlinearity import NonlinearityModel

    gs = GroundState.from_dict(_read_json(path))
    if not gs.model:
        raise ConfigError(f"{path} does not record its nonlinearity")
    return gs, NonlinearityModel.from_config(gs.model)


def cmd_spectrum(args) -> int:
    from .spectrum import certify_G, cylinder_mode_eigenvalues, cylinder_spectrum, radial_spectrum

    gs, model = _load_gs(args.from_)
    radial = radial_spectrum(model, gs, args.count)
    verdict = certify_G(radial)
    out = {"radial": radial.to_dict(), "G": verdict.as_dict(), "nonlinearity": gs.model,
           "dim": gs.dim, "groundstate": str(args.from_)}
    code = 0
    if args.lam is not None:
        try:
            cyl = cylinder_spectrum(radial, args.lam, args.kmax)
            out["cylinder"] = cyl.to_dict()
            out["cylinder"]["assembled_lowest"] = {
                str(k): float(cylinder_mode_eigenvalues(model, gs, args.lam, k)[0])
                for k in range(min(args.kmax, 2) + 1)}
        except HypothesisFailure as exc:
            out["cylinder"] = {"error": str(exc)}
            code = exc.exit_code
    _write_json(args.out, out)
    print("eigenvalues:", ", ".join(f"{v:.9g}" for v in radial.eigenvalues),
          f"| Morse index {radial.morse_index} | G {'pass' if verdict.passed else 'FAIL'}")
    if not verdict.passed:
        code = 2
    return code


def cmd_hypotheses(args) -> int:
    from .nonlinearity import NonlinearityModel, check_hypothesis_S
    from .scaling import admissible_lambda_window, default_lambda, frequency_data
    from .spectrum import SpectralReport, certify_A1, certify_G

    d = _read_json(args.from_)
    model = NonlinearityModel.from_config(d["nonlinearity"])
    radial = SpectralReport.from_dict(d["radial"])
    verdicts = {"S": check_hypothesis_S(model, int(d["dim"]) + 1), "G": certify_G(radial)}
    out = {"verdicts": {}}
    # the smoothness threshold of S is reported, only its sign conditions gate
    failed = [k for k, v in verdicts.items()
              if not (v.details["sign_ok"] if k == "S" else v.passed)]
    if not failed:
        positive = radial.eigenvalues[radial.eigenvalues > 0]
        second = float(positive[0]) if positive.size else float(radial.eigenvalues[-1])
        lo, hi = admissible_lambda_window(radial.mu0, second)
        lam = default_lambda(radial.mu0, second) if args.lam == "auto" else float(args.lam)
        out["window"] = [lo, hi]
        if not lo < lam < hi:
            failed.append("A1")
            out["error"] = f"lambda = {lam} outside ({lo}, {hi})"
        else:
            fd = frequency_data(lam, radial.mu0, args.n_s)
            verdicts["A1"] = certify_A1(radial, lam, fd.s_grid, args.kmax)
            if not verdicts["A1"].passed:
                failed.append("A1")
            out["frequency_data"] = fd.to_dict()
            out["verdicts"]["ND"] = {"name": "ND", "passed": True,
                                     "details": fd.nd.as_dict()}
    out["verdicts"].update({k: v.as_dict() for k, v in verdicts.items()})
    out["nonlinearity"] = d["nonlinearity"]
    out["dim"] = d["dim"]
    _write_json(args.out, out)
    for name in ("S", "G", "A1", "ND"):
        if name in out["verdicts"]:
            print(f"{name}: {'pass' if out['verdicts'][name]['passed'] else 'FAIL'}")
    if "error" in out:
        print(f"A1: FAIL ({out['error']})", file=sys.stderr)
    return 2 if failed else 0


def cmd_diophantine(args) -> int:
    from .diophantine import DiophantineSpec, build_W, is_diophantine, sample_V_kappa

    if args.action == "check":
        omega = np.asarray(args.omega)
        spec = DiophantineSpec(args.kappa, args.nu, args.bound, n=omega.size)
        v = is_diophantine(omega, spec)
        print(json.dumps(v.as_dict()))
        return 0
    box = np.asarray(args.box, dtype=float)
    if box.size % 2:
        raise ConfigError("--box needs low,high pairs")
    box = box.reshape(-1, 2)
    spec = DiophantineSpec(args.kappa, args.nu, args.bound, n=box.shape[0])
    fs = sample_V_kappa(box, spec, args.n, args.seed)
    out = fs.to_dict()
    out["W_size"] = len(build_W(fs))
    if args.out:
        _write_json(args.out, out)
    print(f"pass fraction {fs.pass_fraction:.4f}  measure estimate {fs.measure_estimate:.4f}")
    return 0


def cmd_simulate(args) -> int:
    from .reduced import HamiltonianModel, integrate

    model = HamiltonianModel.from_dict(_read_json(args.model))
    if len(args.state0) != 4:
        raise ConfigError("--state0 needs four numbers xi1,xi2,eta1,eta2")
    traj = integrate(model, args.state0, args.T, args.dt, sample_every=args.sample_every)
    traj.write_csv(args.out)
    print(f"{len(traj.times)} samples, max |dH| = {traj.max_energy_error:.3e} -> {args.out}")
    return 0


def cmd_find_tori(args) -> int:
    from .diophantine import DiophantineSpec
    from .pipeline import write_tori_json
    from .scaling import FrequencyData, s_grid
    from .torus import TorusSearch, assemble_W, detect_tori

    d = _read_json(args.freq)
    fd = FrequencyData.from_dict(d.get("frequency_data", d))
    if args.sgrid != len(fd.s_grid):
        fd = FrequencyData(lam=fd.lam, mu0=fd.mu0, delta=fd.delta,
                           s_grid=s_grid(fd.delta, args.sgrid))
    spec = DiophantineSpec(args.kappa, args.nu, args.bound)
    search = TorusSearch(T=args.T, dt=args.dt, sample_every=args.sample_every)
    cands = detect_tori(fd, args.pert, args.eps, args.seeds, spec, coeffs=args.coeffs,
                        seed=args.seed, search=search, workers=args.workers)
    W = assemble_W(cands)
    write_tori_json(args.out, cands, W)
    print(f"{sum(c.accepted for c in cands)} / {len(cands)} accepted, |W| = {len(W)} "
          f"-> {args.out}")
    return 0


def cmd_reconstruct(args) -> int:
    from .spectrum import radial_spectrum
    from .torus import TorusCandidate, reconstruct_solution

    path, _, idx = args.torus.partition("#")
    tori = _read_json(path).get("tori", [])
    k = int(idx or 0)
    if not 0 <= k < len(tori):
        raise ConfigError(f"{path} holds {len(tori)} tori; index {k} is out of range")
    cand = TorusCandidate.from_dict(tori[k])
    gs, model = _load_gs(args.gs)
    psi = radial_spectrum(model, gs, 2).eigenfunctions[0]
    rec = reconstruct_solution(cand, gs, psi, n_x=args.nx, n_xN=args.nxn, n_y=args.ny)
    rec.write_csv(args.out)
    meta = Path(args.out).with_suffix(".json")
    _write_json(meta, rec.meta)
    print(f"min u = {rec.meta['min_u']:.4g}, decay ratio {rec.meta['decay_ratio']:.3e} "
          f"-> {args.out}")
    return 0


def cmd_pipeline(args) -> int:
    from .pipeline import PipelineConfig, emit_report, run_pipeline

    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig.from_dict({})
    report = run_pipeline(cfg)
    files = emit_report(report, args.out, figures=cfg.data["figures"] and not args.no_figures)
    print(f"status {report.status}; report -> {Path(args.out) / files['report']}")
    if report.error:
        print(f"stage {report.failed_stage}: {report.error}", file=sys.stderr)
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quasiloc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("groundstate", help="compute the radial ground state")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--p", type=float, default=3.0, help="power in f(u) = -u + u^p")
    src.add_argument("--coeffs", type=_floats, help="polynomial f = sum c_k u^k, k = 1, 2, ...")
    g.add_argument("--dim", type=int, default=1)
    g.add_argument("--rmax", type=float)
    g.add_argument("--nodes", type=int, default=4000)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_groundstate)

    s = sub.add_parser("spectrum", help="radial and cylinder spectra")
    s.add_argument("--from", dest="from_", required=True)
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--kmax", type=int, default=4)
    s.add_argument("--count", type=int, default=3)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_spectrum)

    h = sub.add_parser("hypotheses", help="certify S, G, A1 and ND; build frequency data")
    h.add_argument("--from", dest="from_", required=True)
    h.add_argument("--lambda", dest="lam", default="auto")
    h.add_argument("--n-s", type=int, default=11)
    h.add_argument("--kmax", type=int, default=4)
    h.add_argument("--out", required=True)
    h.set_defaults(func=cmd_hypotheses)

    d = sub.add_parser("diophantine", help="Diophantine checks and V_kappa sampling")
    d.add_argument("action", choices=["check", "sample"])
    d.add_argument("--omega", type=_floats)
    d.add_argument("--box", type=_floats, default=[1, 2, 1, 2])
    d.add_argument("--kappa", type=float, default=1e-3)
    d.add_argument("--nu", type=float, default=1.2)
    d.add_argument("--bound", type=int, default=1000)
    d.add_argument("--n", type=int, default=10000)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_diophantine)

    m = sub.add_parser("simulate", help="integrate the reduced Hamiltonian flow")
    m.add_argument("--model", required=True)
    m.add_argument("--state0", type=_floats, required=True)
    m.add_argument("--T", type=float, default=1e4)
    m.add_argument("--dt", type=float, default=1e-3)
    m.add_argument("--sample-every", type=int, default=100)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    t = sub.add_parser("find-tori", help="scan the reduced family for invariant tori")
    t.add_argument("--freq", required=True)
    t.add_argument("--pert", default="angle-coupled")
    t.add_argument("--coeffs", type=_floats)
    t.add_argument("--eps", type=_floats, default=[0.01])
    t.add_argument("--sgrid", type=int, default=11)
    t.add_argument("--seeds", type=int, default=16)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--kappa", type=float, default=1e-3)
    t.add_argument("--nu", type=float, default=1.2)
    t.add_argument("--bound", type=int, default=1000)
    t.add_argument("--T", type=float, default=1000.0)
    t.add_argument("--dt", type=float, default=1e-3)
    t.add_argument("--sample-every", type=int, default=200)
    t.add_argument("--workers", type=int, default=1)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_find_tori)

    r = sub.add_parser("reconstruct", help="leading-order field from a torus")
    r.add_argument("--torus", required=True, help="tori.json#k")
    r.add_argument("--gs", required=True)
    r.add_argument("--nx", type=int, default=41)
    r.add_argument("--nxn", type=int, default=17)
    r.add_argument("--ny", type=int, default=33)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    q = sub.add_parser("pipeline", help="run every stage and write a report")
    q.add_argument("--config")
    q.add_argument("--out", required=True)
    q.add_argument("--no-figures", action="store_true")
    q.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QuasilocError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (KeyError, ValueError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
