"""Scalar nonlinearities f(u) and the structural checks they must pass."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError

# Integer powers and polynomials are C^infinity; this stands in for "infinite".
SMOOTH_SENTINEL = 64


@dataclass(frozen=True)
class HypothesisVerdict:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "details": self.details}


def _smoothstep(t, order=0):
    """C-infinity step rising from 0 (t<=0) to 1 (t>=1) and its derivatives."""
    t = np.asarray(t, dtype=float)
    tt = np.clip(t, 0.0, 1.0)
    inner = (tt > 0.0) & (tt < 1.0)
    out = np.where(tt >= 1.0, 1.0 if order == 0 else 0.0, 0.0)
    if not np.any(inner):
        return out
    x = tt[inner]
    y = 1.0 - x
    a, b = np.exp(-1.0 / x), np.exp(-1.0 / y)
    a1, b1 = a / x**2, -b / y**2
    a2 = a * (1.0 / x**4 - 2.0 / x**3)
    b2 = b * (1.0 / y**4 - 2.0 / y**3)
    d, d1, d2 = a + b, a1 + b1, a2 + b2
    if order == 0:
        val = a / d
    elif order == 1:
        val = (a1 * d - a * d1) / d**2
    else:
        val = (a2 * d - a * d2) / d**2 - 2.0 * d1 * (a1 * d - a * d1) / d**3
    out = np.array(out, dtype=float)
    out[inner] = val
    return out


@dataclass(frozen=True)
class NonlinearityModel:
    """Nonlinearity f with derivatives up to order two.

    ``kind`` is ``"power"`` (f = -u + u**p on u >= 0) or ``"custom"``, where
    custom models carry either polynomial coefficients (f = sum c_k u**k,
    k starting at 1) or three callables for f, f', f''.
    """

    kind: str
    p: Optional[float] = None
    coeffs: Optional[tuple] = None
    smoothness: int = SMOOTH_SENTINEL
    negative_extension: bool = False
    funcs: Optional[tuple] = field(default=None, compare=False, repr=False)
    # ("even", "abs", or ("blend", u0, u1, taylor)) once extended
    extension: Optional[tuple] = None

    # -- constructors ---------------------------------------------------
    @classmethod
    def power(cls, p: float) -> "NonlinearityModel":
        if p <= 1:
            raise ConfigError(f"power nonlinearity needs p > 1, got {p}")
        p = float(p)
        ell = SMOOTH_SENTINEL if p.is_integer() else int(math.floor(p))
        return cls(kind="power", p=p, smoothness=ell)

    @classmethod
    def polynomial(cls, coeffs: Sequence[float]) -> "NonlinearityModel":
        return cls(kind="custom", coeffs=tuple(float(c) for c in coeffs))

    @classmethod
    def from_callables(cls, f: Callable, df: Callable, d2f: Callable,
                       smoothness: int = SMOOTH_SENTINEL) -> "NonlinearityModel":
        return cls(kind="custom", funcs=(f, df, d2f), smoothness=int(smoothness))

    @classmethod
    def from_config(cls, cfg: dict) -> "NonlinearityModel":
        kind = cfg.get("kind", "power")
        if kind == "power":
            if "p" not in cfg:
                raise ConfigError("power nonlinearity requires 'p'")
            model = cls.power(cfg["p"])
        elif kind == "custom":
            if "coeffs" not in cfg:
                raise ConfigError("custom nonlinearity in a config needs 'coeffs'")
            model = cls.polynomial(cfg["coeffs"])
        else:
            raise ConfigError(f"unknown nonlinearity kind {kind!r}")
        if "smoothness" in cfg:
            model = replace(model, smoothness=int(cfg["smoothness"]))
        return model

    def to_config(self) -> dict:
        if self.kind == "power":
            out = {"kind": "power", "p": self.p}
        elif self.coeffs is not None:
            out = {"kind": "custom", "coeffs": list(self.coeffs)}
        else:
            out = {"kind": "custom", "callables": True}
        out["smoothness"] = self.smoothness
        out["negative_extension"] = self.negative_extension
        return out

    @property
    def label(self) -> str:
        if self.kind == "power":
            p = int(self.p) if self.p.is_integer() else self.p
            return f"-u + u^{p}"
        return "custom"

    # -- evaluation -----------------------------------------------------
    def _raw(self, u, order):
        """Formula value; for non-integer powers only meaningful on u >= 0."""
        if self.kind == "power":
            p = self.p
            if order == 0:
                return -u + u**p
            if order == 1:
                return -1.0 + p * u ** (p - 1)
            return p * (p - 1) * u ** (p - 2) if p != 2 else np.full_like(u, 2.0)
        if self.coeffs is not None:
            poly = np.polynomial.Polynomial((0.0,) + self.coeffs)
            return poly.deriv(order)(u) if order else poly(u)
        return np.asarray(self.funcs[order](u), dtype=float)

    def _raw_defined_below_zero(self) -> bool:
        return self.kind != "power" or float(self.p).is_integer()

    def __call__(self, u, order: int = 0):
        return eval_f(self, u, order)


def eval_f(model: NonlinearityModel, u, order: int = 0):
    """d^order f / du^order at ``u`` (scalar or array)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    out = np.empty_like(u)
    pos = u >= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(pos):
            out[pos] = model._raw(u[pos], order)
        neg = ~pos
        if np.any(neg):
            out[neg] = _eval_negative(model, u[neg], order)
    return float(out) if scalar else out


def _eval_negative(model, u, order):
    ext = model.extension
    if ext is None:
        if not model._raw_defined_below_zero():
            raise DomainError(
                f"u^{model.p} undefined for u < 0; call extend_negative first")
        return model._raw(u, order)
    if ext[0] == "even":
        return model._raw(u, order)
    if ext[0] == "abs":
        p = model.p
        a = -u
        if order == 0:
            return -u + a**p
        if order == 1:
            return -1.0 - p * a ** (p - 1)
        return p * (p - 1) * a ** (p - 2)
    _, u0, u1, taylor = ext
    if taylor:
        d1 = float(model._raw(np.array([0.0]), 1)[0])
        d2 = float(model._raw(np.array([0.0]), 2)[0])
        base = [d1 * u + 0.5 * d2 * u**2, d1 + d2 * u, np.full_like(u, d2)]
    else:
        base = [model._raw(u, k) for k in range(3)]
    slope = float(model._raw(np.array([0.0]), 1)[0])
    lin = [slope * u, np.full_like(u, slope), np.zeros_like(u)]
    # blend weight as a function of u: t = (-u - u1)/(u0 - u1)
    w = u0 - u1
    t = (-u - u1) / w
    b = [_smoothstep(t, 0), -_smoothstep(t, 1) / w, _smoothstep(t, 2) / w**2]
    diff = [lin[k] - base[k] for k in range(3)]
    if order == 0:
        return base[0] + b[0] * diff[0]
    if order == 1:
        return base[1] + b[1] * diff[0] + b[0] * diff[1]
    return base[2] + b[2] * diff[0] + 2 * b[1] * diff[1] + b[0] * diff[2]


def check_fcond(model: NonlinearityModel) -> tuple[float, float]:
    return eval_f(model, 0.0, 0), eval_f(model, 0.0, 1)


def check_hypothesis_S(model: NonlinearityModel, N: int) -> HypothesisVerdict:
    """Smoothness and sign bookkeeping for hypothesis (S).

    The smoothness threshold is reported, not enforced elsewhere: the
    pipeline only gates on the sign conditions.
    """
    if N < 2:
        raise ConfigError(f"N must be >= 2, got {N}")
    f0, f1 = check_fcond(model)
    ell = model.smoothness
    smooth_ok = ell > 14 + N / 2
    sign_ok = abs(f0) == 0.0 and f1 < 0
    m = ell - 14
    return HypothesisVerdict(
        "S",
        passed=bool(smooth_ok and sign_ok),
        details={
            "smoothness": ell,
            "smoothness_sentinel": ell == SMOOTH_SENTINEL,
            "required_smoothness_exceeds": 14 + N / 2,
            "smoothness_ok": bool(smooth_ok),
            "f(0)": f0,
            "f'(0)": f1,
            "sign_ok": bool(sign_ok),
            "K": 10,
            "m": m,
            "m_exceeds_N_over_2": bool(m > N / 2),
        },
    )


def extend_negative(model: NonlinearityModel) -> NonlinearityModel:
    """Return a model equal to ``model`` on u >= 0 and positive on u < 0."""
    if model.negative_extension:
        return model
    f0, f1 = check_fcond(model)
    if abs(f0) > 0 or not f1 < 0:
        raise DomainError("extension needs f(0) = 0 > f'(0)")
    grid = -np.geomspace(1e-6, 10.0, 400)
    if model.kind == "power" and not float(model.p).is_integer():
        return replace(model, negative_extension=True, extension=("abs",))
    raw = None
    try:
        with np.errstate(all="ignore"):
            raw = np.asarray(model._raw(grid, 0), dtype=float)
    except Exception:  # noqa: BLE001 - user callables may reject u < 0
        raw = None
    if raw is not None and np.all(np.isfinite(raw)) and np.all(raw > 0):
        return replace(model, negative_extension=True, extension=("even",))
    taylor = raw is None or not np.all(np.isfinite(raw))
    if taylor:
        d2 = float(model._raw(np.array([0.0]), 2)[0])
        u0 = 1.0 if d2 >= 0 else min(1.0, abs(f1) / abs(d2))
    else:
        bad = np.nonzero(raw <= 0)[0]
        # grid runs outward from 0, so raw > 0 on (-first_bad, 0)
        first_bad = -grid[bad[0]] if bad.size else 10.0
        u0 = min(1.0, 0.8 * first_bad)
    return replace(model, negative_extension=True,
                   extension=("blend", u0, 0.5 * u0, taylor))
