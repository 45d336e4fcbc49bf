"""Parameter construction: λ window, s-family frequencies and the (ND) certificate.

With μ₀ the principal radial eigenvalue, the cylinder operator at scale λ+s
has the two nonpositive eigenvalues μ₁(s) = (λ+s)μ₀ and μ₂(s) = μ₁(s) + 1,
and frequencies ω_j(s) = sqrt(|μ_j(s)|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstructionFailure, DomainError, NDFailure

ND_TOL = 1e-8
DELTA_SAFETY = 0.9
LAMBDA_BIAS = 0.2


def admissible_lambda_window(mu0: float, radial_second: float) -> tuple[float, float]:
    """Open interval of λ with exactly two nonpositive cylinder modes."""
    if not mu0 < 0:
        raise ConstructionFailure(f"principal eigenvalue must be negative, got {mu0}")
    if not radial_second > 0:
        raise ConstructionFailure(
            f"second radial eigenvalue {radial_second} is not positive; the window is empty")
    a = abs(mu0)
    return 1.0 / a, 4.0 / a


def default_lambda(mu0: float, radial_second: float) -> float:
    lo, hi = admissible_lambda_window(mu0, radial_second)
    return lo + LAMBDA_BIAS * (hi - lo)


def frequency_map(lam: float, mu0: float, s: float = 0.0) -> tuple[float, float]:
    x = (lam + s) * abs(mu0)
    if not x > 1.0:
        raise DomainError(f"(lambda+s)|mu0| = {x} must exceed 1")
    return math.sqrt(x), math.sqrt(x - 1.0)


def omega_of_s(lam: float, mu0: float, s) -> np.ndarray:
    """Vectorized frequency map; rows are (ω₁, ω₂)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    x = (lam + s) * abs(mu0)
    if np.any(x <= 1.0):
        raise DomainError("parameter leaves the admissible window")
    return np.column_stack([np.sqrt(x), np.sqrt(x - 1.0)])


def nd_closed_form(lam: float, mu0: float) -> float:
    """det[ω'(0) ω(0)] in closed form."""
    x = lam * abs(mu0)
    return -abs(mu0) / (2.0 * math.sqrt(x * (x - 1.0)))


def nd_closed_form_printed(lam: float, mu0: float) -> float:
    """The variant with ω₂ = sqrt((λ+s)|μ₀| + 1), kept for comparison."""
    x = lam * abs(mu0)
    return abs(mu0) / (2.0 * math.sqrt(x * (x + 1.0)))


@dataclass
class NDCertificate:
    matrix: np.ndarray
    det: float
    rank: int
    closed_form_det: float
    printed_variant_det: float
    h: float

    def as_dict(self):
        return {
            "matrix": self.matrix.tolist(),
            "det": self.det,
            "abs_det": abs(self.det),
            "rank": self.rank,
            "closed_form_det": self.closed_form_det,
            "printed_variant_det": self.printed_variant_det,
            "fd_step": self.h,
            "tol": ND_TOL,
        }


def nd_certificate(lam: float, mu0: float, h: float = 1e-5, tol: float = ND_TOL,
                   raise_on_failure: bool = True) -> NDCertificate:
    """Finite-difference rank certificate for the matrix [ω'(0) ω(0)]."""
    w_plus = np.array(frequency_map(lam, mu0, h))
    w_minus = np.array(frequency_map(lam, mu0, -h))
    w0 = np.array(frequency_map(lam, mu0, 0.0))
    grad = (w_plus - w_minus) / (2.0 * h)
    mat = np.column_stack([grad, w0])
    det = float(mat[0, 0] * mat[1, 1] - mat[0, 1] * mat[1, 0])
    rank = 2 if abs(det) > tol else int(np.linalg.matrix_rank(mat, tol=tol))
    cert = NDCertificate(matrix=mat, det=det, rank=rank,
                         closed_form_det=nd_closed_form(lam, mu0),
                         printed_variant_det=nd_closed_form_printed(lam, mu0), h=h)
    if raise_on_failure and rank < 2:
        raise NDFailure(f"|det| = {abs(det):.3e} <= {tol:.1e}")
    return cert


def delta_window(lam: float, mu0: float) -> float:
    a = abs(mu0)
    return DELTA_SAFETY * min(lam - 1.0 / a, 4.0 / a - lam, lam)


def s_grid(delta: float, n: int) -> np.ndarray:
    """``n`` equispaced points strictly inside (-δ, δ)."""
    return np.linspace(-delta, delta, n + 2)[1:-1]


@dataclass
class FrequencyData:
    lam: float
    mu0: float
    delta: float
    s_grid: np.ndarray
    mu1: np.ndarray = field(init=False)
    mu2: np.ndarray = field(init=False)
    omega: np.ndarray = field(init=False)
    nd: NDCertificate | None = None

    def __post_init__(self):
        self.s_grid = np.asarray(self.s_grid, dtype=float)
        self.mu1 = (self.lam + self.s_grid) * self.mu0
        self.mu2 = self.mu1 + 1.0
        self.omega = omega_of_s(self.lam, self.mu0, self.s_grid)

    def window_ok(self) -> bool:
        return bool(np.all(self.mu1 < self.mu2) and np.all(self.mu2 < 0))

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "mu0": self.mu0,
            "delta": self.delta,
            "s_grid": self.s_grid.tolist(),
            "mu1": self.mu1.tolist(),
            "mu2": self.mu2.tolist(),
            "omega": self.omega.tolist(),
            "nd": None if self.nd is None else self.nd.as_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrequencyData":
        fd = cls(lam=float(d["lambda"]), mu0=float(d["mu0"]), delta=float(d["delta"]),
                 s_grid=np.asarray(d["s_grid"], dtype=float))
        if d.get("nd"):
            n = d["nd"]
            fd.nd = NDCertificate(matrix=np.asarray(n["matrix"]), det=n["det"],
                                  rank=n["rank"], closed_form_det=n["closed_form_det"],
                                  printed_variant_det=n["printed_variant_det"],
                                  h=n["fd_step"])
        return fd


def frequency_data(lam: float, mu0: float, n_s: int = 11, delta: float | None = None,
                   h: float = 1e-5) -> FrequencyData:
    if delta is None:
        delta = delta_window(lam, mu0)
    fd = FrequencyData(lam=lam, mu0=mu0, delta=delta, s_grid=s_grid(delta, n_s))
    fd.nd = nd_certificate(lam, mu0, h)
    return fd
