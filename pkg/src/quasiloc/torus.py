"""Invariant-torus detection for the reduced system and field reconstruction.

Each orbit goes through three filters: frequency extraction (windowed
Fourier peak refined to the stationary point of the window power), a
Fourier fit of the orbit on the lattice of harmonics of those frequencies,
and the Diophantine test.  Rejected orbits are kept with their diagnostics.
"""

from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .diophantine import DiophantineSpec, build_W_indices, is_diophantine, is_nonresonant_up_to
from .errors import ChaoticOrbitError, ConditioningError, DomainError, NumericFailure
from .groundstate import GroundState
from .reduced import Trajectory, from_action_angle, integrate, scaled_model
from .scaling import FrequencyData

MIN_SAMPLES = 2**12
MAIN_LINE_MIN = 0.5
COND_MAX = 1e10
DEFAULT_RESIDUAL_TOL = 1e-6
DEFAULT_M_FIT = 8


def _hann(n: int) -> np.ndarray:
    return 1.0 - np.cos(2.0 * np.pi * np.arange(n) / (n - 1))


def _window_power(x, w, t, omega):
    """|Σ w x e^{-iωt}|² and its ω-derivative."""
    e = w * x * np.exp(-1j * omega * t)
    phi = e.sum()
    dphi = (-1j * t * e).sum()
    return abs(phi) ** 2, 2.0 * (np.conj(phi) * dphi).real, phi


def dominant_frequency(x, dt: float, pad: int = 8):
    """Frequency, complex amplitude and main-line power fraction of ``x``.

    The Hann-windowed FFT peak (zero-padded) seeds a root search for the
    stationary point of the window power within a quarter bin.
    """
    x = np.asarray(x, dtype=complex)
    n = x.size
    t = dt * (np.arange(n) - 0.5 * (n - 1))  # centered times keep phases small
    w = _hann(n)
    spec = np.fft.fft(w * x, pad * n)
    k = int(np.argmax(np.abs(spec)))
    freqs = 2.0 * np.pi * np.fft.fftfreq(pad * n, d=dt)
    w0 = freqs[k]
    half_bin = 0.25 * 2.0 * np.pi / (n * dt)
    g = lambda om: _window_power(x, w, t, om)[1]
    lo, hi = w0 - half_bin, w0 + half_bin
    if g(lo) > 0 and g(hi) < 0:
        omega = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    else:
        omega = w0
    _, _, phi = _window_power(x, w, t, omega)
    amp = phi / w.sum()
    power = np.mean(np.abs(x) ** 2)
    fraction = float(abs(amp) ** 2 / power) if power > 0 else 0.0
    # amplitude referred back to t = 0 of the original time axis
    amp0 = amp * np.exp(-1j * omega * 0.5 * (n - 1) * dt)
    return float(omega), complex(amp0), fraction


def naff_frequencies(traj: Trajectory, n: int = 2, min_fraction: float = MAIN_LINE_MIN,
                     diffusion: bool = False):
    """Dominant frequency of ξ_j + iη_j for each degree of freedom.

    Returns ``(frequencies, amplitudes)``; with ``diffusion=True`` also the
    largest change of the frequencies between the two halves of the record.

    Raises
    ------
    ChaoticOrbitError
        If the main spectral line carries less than ``min_fraction`` of the
        signal power.
    """
    if len(traj.times) < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {len(traj.times)}")
    dts = np.diff(traj.times)
    dt = float(dts[0])
    if not np.allclose(dts, dt, rtol=1e-9, atol=0):
        raise ValueError("samples must be uniformly spaced")
    freqs, amps = np.empty(n), np.empty(n, dtype=complex)
    for j in range(n):
        om, a, frac = dominant_frequency(traj.states[:, j] + 1j * traj.states[:, n + j], dt)
        if frac < min_fraction:
            raise ChaoticOrbitError(f"no dominant line in dof {j + 1}: main-line power "
                                    f"fraction {frac:.3f} < {min_fraction}")
        freqs[j], amps[j] = om, a
    if not diffusion:
        return freqs, amps
    half = len(traj.times) // 2
    drift = 0.0
    for j in range(n):
        sig = traj.states[:, j] + 1j * traj.states[:, n + j]
        a = dominant_frequency(sig[:half], dt)[0]
        b = dominant_frequency(sig[half:2 * half], dt)[0]
        drift = max(drift, abs(a - b))
    return freqs, amps, drift


def naff_signal(x, dt: float) -> float:
    """Dominant frequency of a uniformly sampled complex signal."""
    return dominant_frequency(x, dt)[0]


def midpoint_frequency_correction(omega, dt: float) -> np.ndarray:
    """Continuous-time frequency whose implicit-midpoint map rotates at ``omega``.

    For a linear rotation the midpoint map advances the phase by
    2 atan(ω dt / 2) per step; this inverts that relation.
    """
    omega = np.asarray(omega, dtype=float)
    return (2.0 / dt) * np.tan(0.5 * omega * dt)


def fourier_modes(m_fit: int) -> np.ndarray:
    r = np.arange(-m_fit, m_fit + 1)
    return np.array([(a, b) for a in r for b in r], dtype=int)


def fit_torus(traj: Trajectory, omega_hat, m_fit: int = DEFAULT_M_FIT,
              cond_max: float = COND_MAX):
    """Least-squares torus fit z_j(t) ≈ Σ_m a_{m,j} exp(i m·ω̂ t), |m|_∞ <= m_fit.

    Returns ``(modes, coeffs, residual)`` with ``coeffs`` of shape
    (len(modes), 2) and residual = RMS misfit / RMS signal.

    Raises
    ------
    ConditioningError
        If ω̂ is resonant up to order 2 m_fit or the design matrix is
        ill-conditioned.
    """
    omega_hat = np.asarray(omega_hat, dtype=float)
    ok, witness = is_nonresonant_up_to(omega_hat, 2 * m_fit)
    if not ok:
        raise ConditioningError(f"frequencies resonant at {witness}")
    modes = fourier_modes(m_fit)
    t = traj.times - traj.times[0]
    phase = t[:, None] * (modes @ omega_hat)[None, :]
    design = np.exp(1j * phase)
    z = traj.states[:, :2] + 1j * traj.states[:, 2:]
    coeffs, _, rank, sv = np.linalg.lstsq(design, z, rcond=None)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    if cond > cond_max or rank < len(modes):
        raise ConditioningError(f"torus fit condition number {cond:.3e} exceeds {cond_max:.1e}")
    misfit = design @ coeffs - z
    residual = float(np.sqrt(np.mean(np.abs(misfit) ** 2) / np.mean(np.abs(z) ** 2)))
    return modes, coeffs, residual


@dataclass
class TorusCandidate:
    omega_bar: np.ndarray
    s: float
    epsilon: float
    seed_action: np.ndarray
    seed_angle: np.ndarray
    seed_index: int
    s_index: int
    accepted: bool = False
    reason: str = ""
    omega_raw: Optional[np.ndarray] = None
    modes: Optional[np.ndarray] = None
    coeffs: Optional[np.ndarray] = None
    fit_residual: float = math.nan
    diophantine_margin: float = math.nan
    worst_alpha: Optional[tuple] = None
    main_line_diffusion: float = math.nan
    max_energy_error: float = math.nan
    lam: float = math.nan
    mu0: float = math.nan
    perturbation: str = "none"
    q: float = 0.5

    @property
    def key(self):
        return (self.epsilon, self.s_index, self.seed_index)

    def torus_point(self, t) -> np.ndarray:
        """State (ξ̃₁, ξ̃₂, η̃₁, η̃₂) on the fitted torus at scaled time t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phase = np.exp(1j * t[:, None] * (self.modes @ self.omega_fit)[None, :])
        z = phase @ self.coeffs
        return np.column_stack([z.real, z.imag])

    @property
    def omega_fit(self) -> np.ndarray:
        return self.omega_raw if self.omega_raw is not None else self.omega_bar

    def to_dict(self, coeff_floor: float = 1e-14) -> dict:
        d = {
            "omega_bar": list(map(float, self.omega_bar)),
            "omega_raw": None if self.omega_raw is None else list(map(float, self.omega_raw)),
            "s": self.s, "s_index": self.s_index, "epsilon": self.epsilon,
            "seed_index": self.seed_index,
            "seed_action": list(map(float, self.seed_action)),
            "seed_angle": list(map(float, self.seed_angle)),
            "accepted": bool(self.accepted), "reason": self.reason,
            "fit_residual": self.fit_residual,
            "diophantine_margin": self.diophantine_margin,
            "worst_alpha": None if self.worst_alpha is None else list(self.worst_alpha),
            "frequency_drift": self.main_line_diffusion,
            "max_energy_error": self.max_energy_error,
            "lambda": self.lam, "mu0": self.mu0, "perturbation": self.perturbation, "q": self.q,
        }
        if self.coeffs is not None:
            scale = np.abs(self.coeffs).max()
            keep = np.nonzero(np.abs(self.coeffs).max(axis=1) > coeff_floor * scale)[0]
            d["fourier"] = [{"mode": [int(v) for v in self.modes[i]],
                             "coeffs": [[float(c.real), float(c.imag)] for c in self.coeffs[i]]}
                            for i in keep]
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "TorusCandidate":
        nan = lambda v: math.nan if v is None else float(v)
        c = cls(omega_bar=np.asarray(d["omega_bar"]), s=float(d["s"]),
                epsilon=float(d["epsilon"]), seed_action=np.asarray(d["seed_action"]),
                seed_angle=np.asarray(d["seed_angle"]), seed_index=int(d["seed_index"]),
                s_index=int(d["s_index"]), accepted=bool(d["accepted"]),
                reason=d.get("reason", ""),
                omega_raw=None if d.get("omega_raw") is None else np.asarray(d["omega_raw"]),
                fit_residual=nan(d.get("fit_residual")),
                diophantine_margin=nan(d.get("diophantine_margin")),
                worst_alpha=None if d.get("worst_alpha") is None else tuple(d["worst_alpha"]),
                main_line_diffusion=nan(d.get("frequency_drift")),
                max_energy_error=nan(d.get("max_energy_error")),
                lam=nan(d.get("lambda")), mu0=nan(d.get("mu0")),
                perturbation=d.get("perturbation", "none"), q=float(d.get("q", 0.5)))
        if d.get("fourier"):
            c.modes = np.array([f["mode"] for f in d["fourier"]], dtype=int)
            c.coeffs = np.array([[complex(*v) for v in f["coeffs"]] for f in d["fourier"]])
        return c


@dataclass
class TorusSearch:
    """Settings for :func:`detect_tori`."""

    T: float = 1000.0
    dt: float = 1e-3
    sample_every: int = 200
    m_fit: int = DEFAULT_M_FIT
    residual_tol: float = DEFAULT_RESIDUAL_TOL
    q: float = 0.5
    min_fraction: float = MAIN_LINE_MIN

    def as_dict(self):
        return dict(self.__dict__)


def seed_points(n_seeds: int, q: float, seed: int):
    """Initial actions in Ω = [q, 2q]² and angles in T², keyed by ``seed``."""
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = rng.random((n_seeds, 4))
    return q * (1.0 + u[:, :2]), 2.0 * np.pi * u[:, 2:]


def analyse_orbit(fd_lam: float, mu0: float, s: float, s_index: int, omega, perturbation: str,
                  coeffs, epsilon: float, action, angle, seed_index: int,
                  spec: DiophantineSpec, search: TorusSearch) -> TorusCandidate:
    """Integrate one orbit and run it through the torus filters."""
    cand = TorusCandidate(omega_bar=np.asarray(omega, dtype=float), s=float(s),
                          epsilon=float(epsilon), seed_action=np.asarray(action),
                          seed_angle=np.asarray(angle), seed_index=seed_index,
                          s_index=s_index, lam=fd_lam, mu0=mu0, perturbation=perturbation,
                          q=search.q)
    model = scaled_model(omega, perturbation, epsilon, coeffs=coeffs, s=s, q=search.q)
    try:
        traj = integrate(model, from_action_angle(angle, action), search.T, search.dt,
                         sample_every=search.sample_every)
        cand.max_energy_error = traj.max_energy_error
        raw, _, drift = naff_frequencies(traj, 2, search.min_fraction, diffusion=True)
        cand.omega_raw = raw
        cand.main_line_diffusion = float(drift)
        cand.omega_bar = midpoint_frequency_correction(raw, search.dt)
        cand.modes, cand.coeffs, cand.fit_residual = fit_torus(traj, raw, search.m_fit)
    except ChaoticOrbitError as exc:
        cand.reason = f"chaotic: {exc}"
        return cand
    except ConditioningError as exc:
        cand.reason = f"conditioning: {exc}"
        return cand
    except NumericFailure as exc:
        cand.reason = f"integration: {exc}"
        return cand
    verdict = is_diophantine(cand.omega_bar, spec)
    cand.diophantine_margin = verdict.margin
    cand.worst_alpha = verdict.worst_alpha
    if cand.fit_residual > search.residual_tol:
        cand.reason = f"fit residual {cand.fit_residual:.3e} > {search.residual_tol:.1e}"
    elif not verdict.passed:
        cand.reason = f"not Diophantine: margin {verdict.margin:.3e} at {verdict.worst_alpha}"
    else:
        cand.accepted = True
    return cand


def detect_tori(fd: FrequencyData, perturbation: str, epsilons, n_seeds: int,
                spec: DiophantineSpec, coeffs=None, seed: int = 0,
                search: TorusSearch | None = None, workers: int = 1) -> list:
    """Scan the (ε, s, seed) family and return every candidate, sorted by key.

    Seeds are shared across s and ε so the scan is a tensor product.
    """
    search = search or TorusSearch()
    actions, angles = seed_points(n_seeds, search.q, seed)
    jobs = []
    for eps in epsilons:
        for i, s in enumerate(fd.s_grid):
            for k in range(n_seeds):
                jobs.append((fd.lam, fd.mu0, float(s), i, fd.omega[i], perturbation, coeffs,
                             float(eps), actions[k], angles[k], k, spec, search))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda a: analyse_orbit(*a), jobs))
    else:
        out = [analyse_orbit(*a) for a in jobs]
    return sorted(out, key=lambda c: c.key)


def assemble_W(candidates, parallel_tol: float = 1e-10) -> list:
    """Accepted candidates with pairwise non-parallel frequency vectors."""
    acc = [c for c in candidates if c.accepted]
    if not acc:
        return []
    idx = build_W_indices(np.array([c.omega_bar for c in acc]), parallel_tol)
    return [acc[i] for i in idx]


@dataclass
class Reconstruction:
    x_prime: np.ndarray
    x_N: np.ndarray
    y: np.ndarray
    u: np.ndarray  # shape (len(x_prime), len(x_N), len(y))
    base: np.ndarray  # φ on x_prime
    meta: dict = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x_prime", "x_N", "y", "u"])
            for i, a in enumerate(self.x_prime):
                for j, b in enumerate(self.x_N):
                    for k, c in enumerate(self.y):
                        w.writerow([repr(float(a)), repr(float(b)), repr(float(c)),
                                    repr(float(self.u[i, j, k]))])

    def symmetry_errors(self) -> dict:
        return {"x_N_even": float(np.abs(self.u - self.u[:, ::-1, :]).max()),
                "x_prime_radial": float(np.abs(self.u - self.u[::-1, :, :]).max())}

    def decay_ratio(self) -> float:
        """sup |u| at the outermost |x'| over sup |u|."""
        edge = np.abs(self.u[[0, -1]]).max()
        return float(edge / np.abs(self.u).max())


def reconstruct_solution(cand: TorusCandidate, gs: GroundState, eigenfunction,
                         n_x: int = 41, n_xN: int = 17, n_y: int = 33,
                         y_span: float | None = None, x_extent: float | None = None,
                         ) -> Reconstruction:
    """Leading-order field u(x', x_N, y) of the equation with nonlinearity f.

    On the cylinder of period 2π the field is φ^{λ+s}(x') plus the two
    center-mode amplitudes times their eigenfunctions ψ(√(λ+s)|x'|) and
    ψ(√(λ+s)|x'|)cos x_N, with (ξ, η) = √ε (ξ̃, η̃) read off the torus fit.
    Rescaling by √(λ+s) maps that to

        u = φ(|x'|) + ξ₁(y/√(λ+s)) ψ(|x'|) + ξ₂(y/√(λ+s)) ψ(|x'|) cos(x_N/√(λ+s)),

    which is 2π√(λ+s)-periodic in x_N.  x' is sampled along a signed ray,
    x_N on a grid symmetric about 0, y on [0, y_span].
    """
    if cand.coeffs is None:
        raise DomainError("candidate has no torus fit")
    scale = cand.lam + cand.s
    if not scale > 0:
        raise DomainError("lambda + s must be positive")
    root = math.sqrt(scale)
    period = 2.0 * np.pi * root
    x_extent = 0.5 * gs.rmax if x_extent is None else x_extent
    xp = np.linspace(-x_extent, x_extent, n_x)
    xn = np.linspace(-0.5 * period, 0.5 * period, n_xN)
    if y_span is None:
        y_span = 2.0 * np.pi * root / float(np.min(cand.omega_bar))
    y = np.linspace(0.0, y_span, n_y)
    phi = gs.interpolant()(np.abs(xp))
    psi = CubicSpline(gs.grid, np.asarray(eigenfunction, dtype=float),
                      bc_type=((1, 0.0), "not-a-knot"))(np.abs(xp))
    tau = y / root
    z = cand.torus_point(tau) * math.sqrt(cand.epsilon)  # (ξ₁, ξ₂, η₁, η₂)
    xi1, xi2 = z[:, 0], z[:, 1]
    cosx = np.cos(xn / root)
    u = (phi[:, None, None]
         + psi[:, None, None] * xi1[None, None, :]
         + psi[:, None, None] * cosx[None, :, None] * xi2[None, None, :])
    dist = float(np.abs(u - phi[:, None, None]).max())
    sup_psi = float(np.abs(eigenfunction).max())
    bound = 2.0 * math.sqrt(2.0 * cand.epsilon * 2.0 * cand.q) * 2.0 * sup_psi
    umin = float(u.min())
    if umin <= 0:
        warnings.warn(f"reconstructed field is not positive (min {umin:.3e}); "
                      "the leading-order expansion is outside its range", RuntimeWarning,
                      stacklevel=2)
    rec = Reconstruction(x_prime=xp, x_N=xn, y=y, u=u, base=phi)
    rec.meta = {
        "lambda_plus_s": scale, "period_x_N": period,
        "frequencies_y": list(map(float, np.asarray(cand.omega_bar) / root)),
        "epsilon": cand.epsilon, "min_u": umin, "max_u": float(u.max()),
        "positive": umin > 0, "sup_distance_to_ground_state": dist,
        "amplitude_bound": bound, "decay_ratio": rec.decay_ratio(),
        "x_extent": x_extent, "y_span": y_span,
        "grid": [n_x, n_xN, n_y], "center_manifold_correction": "omitted",
    }
    rec.meta.update(rec.symmetry_errors())
    return rec
