"""Nonresonance and κ,ν-Diophantine checks, V_κ sampling and the set W.

Integer vectors are measured in the max norm |α| = max_i |α_i|, both for
the lattice truncation and in the bound |ω·α| >= κ|α|^(-ν).  Verdicts are
exact statements only up to the truncation level.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np

from .errors import ConfigError

RESONANCE_RTOL = 1e-14


@dataclass(frozen=True)
class DiophantineSpec:
    kappa: float
    nu: float = 1.2
    alpha_bound: int = 1000
    n: int = 2

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if not self.nu > self.n - 1:
            raise ConfigError(f"nu must exceed n - 1 = {self.n - 1}")
        if self.alpha_bound < 1:
            raise ConfigError("alpha_bound must be >= 1")

    def as_dict(self):
        return {"kappa": self.kappa, "nu": self.nu, "alpha_bound": self.alpha_bound,
                "n": self.n}


@dataclass
class DiophantineVerdict:
    passed: bool
    worst_alpha: tuple
    margin: float  # min over the lattice of |ω·α| |α|^ν
    bound: int
    cf_alpha: Optional[tuple] = None
    cf_margin: Optional[float] = None
    convergents: list = field(default_factory=list)

    def as_dict(self):
        return {"passed": bool(self.passed), "worst_alpha": list(self.worst_alpha),
                "margin": self.margin, "truncation": self.bound,
                "cf_alpha": None if self.cf_alpha is None else list(self.cf_alpha),
                "cf_margin": self.cf_margin}


@lru_cache(maxsize=16)
def _half_lattice(n: int, k: int) -> np.ndarray:
    """Nonzero integer vectors with |α|_inf <= k, one from each ±α pair."""
    pts = np.array(list(itertools.product(range(-k, k + 1), repeat=n)), dtype=float)
    nz = np.argmax(pts != 0, axis=1)
    lead = pts[np.arange(len(pts)), nz]
    out = pts[lead > 0]
    out.setflags(write=False)
    return out


def is_nonresonant_up_to(omega, k: int):
    """``(True, None)`` if ω·α ≠ 0 for 0 < |α| <= k, else ``(False, α)``.

    A dot product counts as zero below 1e-14 |ω||α|.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    omega = np.asarray(omega, dtype=float)
    lattice = _half_lattice(omega.size, k)
    dots = np.abs(lattice @ omega)
    norms = np.linalg.norm(lattice, axis=1)
    bad = dots <= RESONANCE_RTOL * np.linalg.norm(omega) * norms
    if not np.any(bad):
        return True, None
    # smallest witness first, then the canonical sign (first nonzero > 0)
    cand = lattice[bad]
    first = np.argsort(np.abs(cand).sum(axis=1), kind="stable")[0]
    return False, tuple(int(a) for a in cand[first])


def continued_fraction(x: float, max_den: int):
    """Convergents p/q of ``x`` (exact rational expansion of the float)."""
    frac = Fraction(x)
    p0, q0, p1, q1 = 0, 1, 1, 0
    out = []
    while True:
        a = math.floor(frac)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        if q1 > max_den:
            break
        out.append((p1, q1))
        rem = frac - a
        if rem == 0:
            break
        frac = 1 / rem
    return out


def _cf_oracle(omega: np.ndarray, spec: DiophantineSpec):
    """Minimal weighted margin over continued-fraction convergents (n = 2)."""
    w1, w2 = float(omega[0]), float(omega[1])
    if w2 == 0:
        return (0, 1), 0.0, []
    sign = 1 if w1 / w2 >= 0 else -1
    ratio = abs(w1 / w2)
    # α = (q, -sign*p) makes ω·α = w2 * sign * (q*ratio - p)
    cands = [(0, 1), (1, 0)]
    convs = continued_fraction(ratio, spec.alpha_bound)
    for p, q in convs:
        if max(p, q) <= spec.alpha_bound:
            cands.append((q, -sign * p))
    best, best_margin = None, math.inf
    for a in cands:
        if a == (0, 0):
            continue
        m = abs(w1 * a[0] + w2 * a[1]) * max(abs(a[0]), abs(a[1])) ** spec.nu
        if m < best_margin:
            best, best_margin = a, m
    return best, best_margin, convs


def _sweep_2d(omega: np.ndarray, spec: DiophantineSpec):
    """Exact minimum over the truncated lattice for n = 2.

    For fixed first component a, only the two integers b nearest to
    -a w1/w2 can beat the vector (0, 1).
    """
    w1, w2 = float(omega[0]), float(omega[1])
    A = spec.alpha_bound
    if w2 == 0:
        return (0, 1), 0.0
    a = np.arange(1, A + 1, dtype=float)
    x = -a * w1 / w2
    best = ((0, 1), abs(w2))
    for b in (np.floor(x), np.ceil(x)):
        ok = np.abs(b) <= A
        if not np.any(ok):
            continue
        aa, bb = a[ok], b[ok]
        norm = np.maximum(aa, np.abs(bb))
        margin = np.abs(w1 * aa + w2 * bb) * norm**spec.nu
        i = int(np.argmin(margin))
        if margin[i] < best[1]:
            best = ((int(aa[i]), int(bb[i])), float(margin[i]))
    return best


def _sweep_general(omega: np.ndarray, spec: DiophantineSpec):
    lattice = _half_lattice(omega.size, spec.alpha_bound)
    margin = np.abs(lattice @ omega) * np.abs(lattice).max(axis=1) ** spec.nu
    i = int(np.argmin(margin))
    return tuple(int(v) for v in lattice[i]), float(margin[i])


def is_diophantine(omega, spec: DiophantineSpec, sweep: bool = True) -> DiophantineVerdict:
    """κ,ν-Diophantine verdict at truncation level ``spec.alpha_bound``.

    For two frequencies the continued-fraction expansion of ω₁/ω₂ is run as
    well; with ``sweep=False`` it is the only check (it is exact because the
    weighted minimum is attained at a convergent).
    """
    omega = np.asarray(omega, dtype=float)
    if not np.any(omega):
        raise ValueError("omega must be nonzero")
    cf_alpha = cf_margin = None
    convs = []
    if omega.size == 2:
        cf_alpha, cf_margin, convs = _cf_oracle(omega, spec)
        if sweep:
            alpha, margin = _sweep_2d(omega, spec)
        else:
            alpha, margin = cf_alpha, cf_margin
    else:
        alpha, margin = _sweep_general(omega, spec)
    return DiophantineVerdict(passed=bool(margin >= spec.kappa), worst_alpha=alpha,
                              margin=margin, bound=spec.alpha_bound, cf_alpha=cf_alpha,
                              cf_margin=cf_margin, convergents=convs)


@dataclass
class FrequencySet:
    box: np.ndarray  # shape (n, 2): lower/upper per axis
    members: np.ndarray
    margins: np.ndarray
    measure_estimate: float
    n_samples: int
    spec: DiophantineSpec

    @property
    def pass_fraction(self) -> float:
        return len(self.members) / self.n_samples

    def to_dict(self) -> dict:
        return {"box": self.box.tolist(), "members": self.members.tolist(),
                "margins": self.margins.tolist(),
                "measure_estimate": self.measure_estimate,
                "pass_fraction": self.pass_fraction, "n_samples": self.n_samples,
                "spec": self.spec.as_dict()}


def sample_points(box, n_samples: int, seed: int) -> np.ndarray:
    """Uniform samples from a counter-based generator keyed by ``seed``."""
    box = np.asarray(box, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    u = rng.random((n_samples, box.shape[0]))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def sample_V_kappa(box, spec: DiophantineSpec, n_samples: int, seed: int = 0) -> FrequencySet:
    box = np.asarray(box, dtype=float)
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] <= box[:, 0]):
        raise ValueError("box must be a nonempty (n, 2) array of [low, high] rows")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pts = sample_points(box, n_samples, seed)
    dist = np.minimum(pts - box[:, 0], box[:, 1] - pts).min(axis=1)
    keep, margins = [], []
    for i in np.nonzero(dist >= spec.kappa)[0]:
        v = is_diophantine(pts[i], spec, sweep=box.shape[0] != 2)
        if v.passed:
            keep.append(i)
            margins.append(v.margin)
    members = pts[keep] if keep else np.empty((0, box.shape[0]))
    volume = float(np.prod(box[:, 1] - box[:, 0]))
    if not keep:
        warnings.warn("V_kappa sample is empty; try a smaller kappa", RuntimeWarning,
                      stacklevel=2)
    return FrequencySet(box=box, members=members, margins=np.asarray(margins),
                        measure_estimate=volume * len(keep) / n_samples,
                        n_samples=n_samples, spec=spec)


def _wedge_norms(kept: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = v.size
    acc = np.zeros(len(kept))
    for i in range(n):
        for j in range(i + 1, n):
            acc += (kept[:, i] * v[j] - kept[:, j] * v[i]) ** 2
    return np.sqrt(acc)


def build_W(candidates, parallel_tol: float = 1e-10, nonres_order: int = 20) -> list:
    """Maximal subset of ``candidates`` with pairwise non-parallel members.

    The first member met on each line through the origin is kept; members
    resonant up to ``nonres_order`` are dropped.
    """
    vecs = candidates.members if isinstance(candidates, FrequencySet) else candidates
    vecs = np.asarray(vecs, dtype=float)
    return [vecs.reshape(len(vecs), -1)[i] for i in
            build_W_indices(vecs, parallel_tol, nonres_order)] if vecs.size else []


def build_W_indices(candidates, parallel_tol: float = 1e-10, nonres_order: int = 20) -> list:
    """Positions in ``candidates`` of the members kept by :func:`build_W`."""
    vecs = candidates.members if isinstance(candidates, FrequencySet) else candidates
    vecs = np.asarray(vecs, dtype=float)
    if vecs.size == 0:
        return []
    vecs = vecs.reshape(len(vecs), -1)
    kept = []
    units = np.empty((0, vecs.shape[1]))
    for i, v in enumerate(vecs):
        norm = np.linalg.norm(v)
        if norm == 0:
            continue
        u = v / norm
        if len(kept) and np.any(_wedge_norms(units, u) <= parallel_tol):
            continue
        if not is_nonresonant_up_to(v, nonres_order)[0]:
            continue
        kept.append(i)
        units = np.vstack([units, u])
    return kept
