"""Low spectra of radial Schrödinger operators and of the cylinder operator.

Radial operators -u'' - (dim-1)/r u' + V(r) u are discretized by finite
volumes on a uniform grid (Neumann at r = 0, Dirichlet at R_max).  The
symmetrized matrix is tridiagonal, so eigenvalues come from Sturm-sequence
bisection.  Each spectrum is computed on M and 2M intervals and
Richardson-extrapolated.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericFailure, SimplicityViolation
from .groundstate import GroundState
from .nonlinearity import HypothesisVerdict, NonlinearityModel, eval_f

SIMPLICITY_RTOL = 1e-8
DEFAULT_TOL_ND = 1e-6


@dataclass
class RadialOperator:
    """Symmetrized tridiagonal form of a radial Schrödinger operator."""

    grid: np.ndarray
    diag: np.ndarray
    off: np.ndarray
    weights: np.ndarray  # finite-volume cell measures, nodes 0..M-1

    def eigen(self, count: int):
        try:
            vals, vecs = eigh_tridiagonal(self.diag, self.off, select="i",
                                          select_range=(0, count - 1))
        except np.linalg.LinAlgError as exc:
            raise NumericFailure(f"tridiagonal eigensolver failed: {exc}") from exc
        funcs = vecs / np.sqrt(self.weights)[:, None]
        funcs *= np.sign(funcs[0])[None, :] + (funcs[0] == 0)[None, :]
        funcs = np.vstack([funcs, np.zeros(count)])
        return vals, funcs.T

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


def radial_operator(grid, potential, dim: int) -> RadialOperator:
    """Finite-volume discretization of -Δ_rad + potential.

    ``potential`` holds V at every grid node; the last node carries the
    Dirichlet condition and is not an unknown.
    """
    r = np.asarray(grid, dtype=float)
    h = r[1] - r[0]
    d = dim
    rin = r[:-1]
    outer = rin + h / 2
    inner = np.maximum(rin - h / 2, 0.0)
    vol = (outer**d - inner**d) / d
    face_out = outer ** (d - 1)
    face_in = np.where(rin > 0, inner ** (d - 1), 0.0)
    diag = (face_in + face_out) / (h * vol) + np.asarray(potential, dtype=float)[:-1]
    off = -face_out[:-1] / (h * np.sqrt(vol[:-1] * vol[1:]))
    return RadialOperator(grid=r, diag=diag, off=off, weights=vol)


@dataclass
class SpectralReport:
    eigenvalues: np.ndarray
    eigenfunctions: Optional[np.ndarray] = None  # rows on ``grid``
    grid: Optional[np.ndarray] = None
    dim: int = 1
    essential_spectrum_floor: float = float("nan")
    eigenvalues_coarse: Optional[np.ndarray] = None
    eigenvalues_fine: Optional[np.ndarray] = None

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)

    @property
    def morse_index(self) -> int:
        return int(np.sum(self.eigenvalues < 0))

    @property
    def nondegeneracy_margin(self) -> float:
        return float(np.min(np.abs(self.eigenvalues)))

    @property
    def mu0(self) -> float:
        return float(self.eigenvalues[0])

    def bound_states(self) -> np.ndarray:
        return self.eigenvalues[self.eigenvalues < self.essential_spectrum_floor]

    def to_dict(self, with_functions: bool = True) -> dict:
        out = {
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvalues_coarse": None if self.eigenvalues_coarse is None
            else self.eigenvalues_coarse.tolist(),
            "eigenvalues_fine": None if self.eigenvalues_fine is None
            else self.eigenvalues_fine.tolist(),
            "morse_index": self.morse_index,
            "nondegeneracy_margin": self.nondegeneracy_margin,
            "essential_spectrum_floor": self.essential_spectrum_floor,
            "dim": self.dim,
        }
        if with_functions and self.eigenfunctions is not None:
            out["grid"] = self.grid.tolist()
            out["eigenfunctions"] = self.eigenfunctions.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralReport":
        arr = lambda key: None if d.get(key) is None else np.asarray(d[key], dtype=float)
        return cls(eigenvalues=np.asarray(d["eigenvalues"], dtype=float),
                   eigenfunctions=arr("eigenfunctions"), grid=arr("grid"),
                   dim=int(d.get("dim", 1)),
                   essential_spectrum_floor=float(d.get("essential_spectrum_floor", "nan")),
                   eigenvalues_coarse=arr("eigenvalues_coarse"),
                   eigenvalues_fine=arr("eigenvalues_fine"))


def _richardson(coarse, fine):
    return (4.0 * fine - coarse) / 3.0


def _refined_grid(gs: GroundState, factor: int = 2):
    return np.linspace(0.0, gs.rmax, factor * gs.nodes + 1)


def radial_spectrum(model: NonlinearityModel, gs: GroundState, count: int = 3) -> SpectralReport:
    """Lowest ``count`` eigenvalues of -Δ - f'(φ) in the radial class.

    Eigenfunctions live on the ground-state grid and are normalized in
    L²(r^(dim-1) dr).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    phi = gs.interpolant()
    coarse_op = radial_operator(gs.grid, -eval_f(model, gs.values, 1), gs.dim)
    fine_grid = _refined_grid(gs)
    fine_op = radial_operator(fine_grid, -eval_f(model, phi(fine_grid), 1), gs.dim)
    vals_c, funcs = coarse_op.eigen(count)
    vals_f, _ = fine_op.eigen(count)
    return SpectralReport(
        eigenvalues=_richardson(vals_c, vals_f),
        eigenfunctions=funcs,
        grid=gs.grid.copy(),
        dim=gs.dim,
        essential_spectrum_floor=-eval_f(model, 0.0, 1),
        eigenvalues_coarse=vals_c,
        eigenvalues_fine=vals_f,
    )


def certify_G(report: SpectralReport, tol_nd: float = DEFAULT_TOL_ND) -> HypothesisVerdict:
    """Morse index one and no zero eigenvalue among the computed levels."""
    if report.eigenvalues.size < 2 and report.morse_index == report.eigenvalues.size:
        raise ValueError("need at least two eigenvalues to certify the Morse index")
    margin = report.nondegeneracy_margin
    passed = report.morse_index == 1 and margin > tol_nd
    return HypothesisVerdict("G", passed=bool(passed), details={
        "morse_index": report.morse_index,
        "nondegeneracy_margin": margin,
        "tol_nd": tol_nd,
        "eigenvalues": report.eigenvalues.tolist(),
    })


@dataclass
class CylinderMode:
    j: int
    k: int
    eigenvalue: float
    bound: bool = True

    def as_dict(self):
        return {"j": self.j, "k": self.k, "eigenvalue": self.eigenvalue, "bound": self.bound}


@dataclass
class CylinderSpectrum:
    lam: float
    radial_eigenvalues: list
    modes: list = field(default_factory=list)
    zero_modes: list = field(default_factory=list)

    @property
    def nonpositive(self) -> list:
        return [m for m in self.modes if m.eigenvalue <= 0]

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "radial_eigenvalues": list(self.radial_eigenvalues),
            "modes": [m.as_dict() for m in self.modes],
            "nonpositive": [m.as_dict() for m in self.nonpositive],
            "zero_modes": [m.as_dict() for m in self.zero_modes],
        }


def _coincide(a: float, b: float) -> bool:
    return abs(a - b) < SIMPLICITY_RTOL * max(1.0, abs(a), abs(b))


def cylinder_spectrum(radial: SpectralReport, lam: float, k_max: int) -> CylinderSpectrum:
    """Separated spectrum λ μ_j + k² of the cylinder operator (even modes).

    Raises
    ------
    SimplicityViolation
        If two listed modes coincide.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    floor = radial.essential_spectrum_floor
    modes = []
    for j, mu in enumerate(radial.eigenvalues):
        for k in range(k_max + 1):
            bound = not (mu >= floor)
            modes.append(CylinderMode(j, k, float(lam * mu + k * k), bound))
    modes.sort(key=lambda m: m.eigenvalue)
    for a, b in zip(modes, modes[1:]):
        if _coincide(a.eigenvalue, b.eigenvalue):
            raise SimplicityViolation(
                f"modes (j={a.j},k={a.k}) and (j={b.j},k={b.k}) coincide at "
                f"{a.eigenvalue:.12g}")
    zero = [m for m in modes if abs(m.eigenvalue) < SIMPLICITY_RTOL]
    return CylinderSpectrum(lam=lam, radial_eigenvalues=radial.eigenvalues.tolist(),
                            modes=modes, zero_modes=zero)


def assemble_cylinder_operator(model: NonlinearityModel, gs: GroundState, lam: float,
                               k: int, nodes: int | None = None,
                               rmax: float | None = None) -> RadialOperator:
    """Fourier mode ``k`` of A^λ = -Δ - λ f'(φ(√λ |x'|)) on R^dim x S.

    The default grid is the ground-state grid stretched by 1/√λ so the
    scaled profile keeps the same resolution.
    """
    if k < 0:
        raise ValueError("Fourier index must be >= 0")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    nodes = gs.nodes if nodes is None else nodes
    rmax = gs.rmax / math.sqrt(lam) if rmax is None else rmax
    grid = np.linspace(0.0, rmax, nodes + 1)
    phi = gs.interpolant()
    pot = k * k - lam * eval_f(model, phi(math.sqrt(lam) * grid), 1)
    return radial_operator(grid, pot, gs.dim)


def cylinder_mode_eigenvalues(model: NonlinearityModel, gs: GroundState, lam: float,
                              k: int, count: int = 1, nodes: int | None = None,
                              rmax: float | None = None) -> np.ndarray:
    """Richardson-extrapolated low eigenvalues of one directly assembled mode."""
    nodes = gs.nodes if nodes is None else nodes
    coarse = assemble_cylinder_operator(model, gs, lam, k, nodes, rmax).eigen(count)[0]
    fine = assemble_cylinder_operator(model, gs, lam, k, 2 * nodes, rmax).eigen(count)[0]
    return _richardson(coarse, fine)


def tail_decay_rate(report: SpectralReport, j: int = 0, lo: float = 1e-9,
                    hi: float = 1e-3) -> float:
    """Exponential decay rate of eigenfunction ``j`` from a log-linear tail fit.

    The fit uses the nodes where |u|/max|u| lies in [lo, hi], with the
    r^((dim-1)/2) prefactor removed.
    """
    u = np.abs(report.eigenfunctions[j])
    r = report.grid
    rel = u / u.max()
    sel = (rel >= lo) & (rel <= hi) & (r < 0.8 * r[-1]) & (r > 0)
    if sel.sum() < 10:
        raise NumericFailure("eigenfunction tail too short to fit")
    y = np.log(u[sel]) + 0.5 * (report.dim - 1) * np.log(r[sel])
    return float(-np.polyfit(r[sel], y, 1)[0])


def save_report(report: SpectralReport, path, extra: dict | None = None) -> None:
    d = report.to_dict()
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh)


def certify_A1(radial: SpectralReport, lam: float, s_values, k_max: int = 4,
               n_nonpositive: int = 2, direct: dict | None = None) -> HypothesisVerdict:
    """Exactly ``n_nonpositive`` simple nonpositive cylinder modes at every λ + s.

    ``direct`` optionally maps mode labels to eigenvalues of directly assembled
    operators; they enter the verdict through their agreement with the
    separated values.
    """
    details = {"lambda": lam, "k_max": k_max, "per_s": []}
    passed = True
    for s in np.concatenate([[0.0], np.asarray(s_values, dtype=float)]):
        try:
            cyl = cylinder_spectrum(radial, lam + s, k_max)
        except SimplicityViolation as exc:
            details["per_s"].append({"s": float(s), "error": str(exc)})
            passed = False
            continue
        neg = cyl.nonpositive
        ok = len(neg) == n_nonpositive and not cyl.zero_modes
        passed &= ok
        details["per_s"].append({"s": float(s), "nonpositive": [m.as_dict() for m in neg],
                                 "ok": bool(ok)})
    if direct:
        details["direct_assembly"] = direct
        gap = max(abs(v["assembled"] - v["separated"]) for v in direct.values())
        details["direct_assembly_max_gap"] = gap
        passed &= gap <= 1e-6
    return HypothesisVerdict("A1", passed=bool(passed), details=details)
