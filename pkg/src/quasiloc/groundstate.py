"""Radial ground state of Δu + f(u) = 0 on R^dim by shooting.

The shooting height α = φ(0) is bisected between trajectories that cross
zero (overshoot) and trajectories that turn back up while still positive
(undershoot).  Shooting forward is unstable in the tail, so the profile is
assembled from the forward solution on [0, r_match] and a backward
integration from R_max along the decaying branch on [r_match, R_max].
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded
from scipy.special import kve

from .errors import ExistenceFailure, NumericFailure
from .nonlinearity import NonlinearityModel, eval_f

logger = logging.getLogger(__name__)

R_START = 1e-4
SHOOT_RTOL = 1e-12
SHOOT_ATOL = 1e-14
BISECT_RTOL = 1e-12
MATCH_TOL = 1e-11
DEFAULT_NODES = 4000
# residual tolerance per h^2; centered differences leave an O(h^2) truncation
TOL_RES_PER_H2 = 40.0


@dataclass
class GroundState:
    dim: int
    grid: np.ndarray
    values: np.ndarray
    alpha: float
    decay_rate: float
    residual: float = float("nan")
    match_radius: float = float("nan")
    model: dict = field(default_factory=dict)

    @property
    def rmax(self) -> float:
        return float(self.grid[-1])

    @property
    def nodes(self) -> int:
        return len(self.grid) - 1

    @property
    def h(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def interpolant(self):
        """Cubic spline of the profile, zero beyond R_max."""
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(self.grid, self.values, bc_type=((1, 0.0), "not-a-knot"))
        rmax = self.rmax

        def phi(r):
            r = np.abs(np.asarray(r, dtype=float))
            return np.where(r <= rmax, spline(np.minimum(r, rmax)), 0.0)

        return phi

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "grid": self.grid.tolist(),
            "values": self.values.tolist(),
            "alpha": self.alpha,
            "decay_rate": self.decay_rate,
            "residual": self.residual,
            "match_radius": self.match_radius,
            "nonlinearity": self.model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundState":
        return cls(
            dim=int(d["dim"]),
            grid=np.asarray(d["grid"], dtype=float),
            values=np.asarray(d["values"], dtype=float),
            alpha=float(d["alpha"]),
            decay_rate=float(d["decay_rate"]),
            residual=float(d.get("residual", float("nan"))),
            match_radius=float(d.get("match_radius", float("nan"))),
            model=d.get("nonlinearity", {}),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GroundState":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _scalar_f(model: NonlinearityModel):
    if model.kind == "power":
        p = model.p
        if float(p).is_integer():
            ip = int(p)
            return lambda u: -u + u**ip
        return lambda u: -u + abs(u) ** p
    return lambda u: float(eval_f(model, u, 0))


def _rhs(f, dim):
    c = dim - 1.0

    def rhs(r, y):
        return [y[1], -c * y[1] / r - f(y[0])]

    return rhs


def _r0(f, alpha):
    # keep the quadratic Taylor term small relative to alpha
    return R_START * min(1.0, math.sqrt(alpha / abs(f(alpha))) if f(alpha) else 1.0)


def _start(f, alpha, dim, r0):
    fa = f(alpha)
    return [alpha - fa * r0**2 / (2 * dim), -fa * r0 / dim]


def _cross(r, y):
    return y[0]


_cross.terminal = True
_cross.direction = -1


def _turn(r, y):
    return y[1]


_turn.terminal = True
_turn.direction = 1


def _shoot(f, dim, alpha, r_end, dense=False):
    r0 = _r0(f, alpha)
    return solve_ivp(_rhs(f, dim), (r0, r_end), _start(f, alpha, dim, r0),
                     method="DOP853", rtol=SHOOT_RTOL, atol=SHOOT_ATOL,
                     events=(_cross, _turn), dense_output=dense)


def _overshoots(f, dim, alpha, r_end) -> bool:
    if f(alpha) <= 0:
        return False
    sol = _shoot(f, dim, alpha, r_end)
    if sol.t_events[0].size:
        return True
    if sol.t_events[1].size:
        return False
    return sol.y[1, -1] < 0 and sol.y[0, -1] < 0


def _decay_ratio(kappa, dim, r):
    """g'(r)/g(r) for the decaying solution g = r^-nu K_nu(kappa r)."""
    nu = (dim - 2) / 2.0
    return -kappa * kve(nu + 1, kappa * r) / kve(nu, kappa * r)


def _decay_profile_ratio(kappa, dim, r, r_ref):
    nu = (dim - 2) / 2.0
    return ((r / r_ref) ** (-nu) * kve(nu, kappa * r) / kve(nu, kappa * r_ref)
            * np.exp(-kappa * (r - r_ref)))


def solve_ground_state(model: NonlinearityModel, dim: int, rmax: float | None = None,
                       nodes: int = DEFAULT_NODES,
                       tol_res: float | None = None) -> GroundState:
    """Shoot for the positive radial ground state and sample it on a uniform grid.

    Parameters
    ----------
    model
        Nonlinearity with f(0) = 0 > f'(0).
    dim
        Dimension of the cross-section (N - 1).
    rmax, nodes
        Grid [0, rmax] with ``nodes`` intervals.  ``rmax`` defaults to
        20 / sqrt(|f'(0)|).
    tol_res
        Max-norm residual gate; defaults to 40 h^2.

    Raises
    ------
    ExistenceFailure
        If no overshoot/undershoot bracket exists.
    NumericFailure
        If the sampled profile misses the residual tolerance.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    f1 = eval_f(model, 0.0, 1)
    if not (eval_f(model, 0.0, 0) == 0.0 and f1 < 0):
        raise ExistenceFailure("ground state needs f(0) = 0 > f'(0)")
    kappa = math.sqrt(-f1)
    if rmax is None:
        rmax = 20.0 / kappa
    f = _scalar_f(model)
    r_end = max(3.0 * rmax, 60.0 / kappa)

    if _overshoots(f, dim, 1e-6, r_end):
        raise ExistenceFailure("small shooting heights do not undershoot")
    lo, hi = 0.0, 2.0
    for _ in range(40):
        if _overshoots(f, dim, hi, r_end):
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise ExistenceFailure(
            "no overshooting height found; f is outside the existence class")
    while hi - lo > BISECT_RTOL * hi:
        mid = 0.5 * (lo + hi)
        if _overshoots(f, dim, mid, r_end):
            hi = mid
        else:
            lo = mid
    alpha = 0.5 * (lo + hi)

    grid = np.linspace(0.0, rmax, nodes + 1)
    sol_lo = _shoot(f, dim, lo, r_end, dense=True)
    sol_hi = _shoot(f, dim, hi, r_end, dense=True)
    r_valid = min(sol_lo.t[-1], sol_hi.t[-1], 0.75 * rmax)
    idx = np.nonzero((grid > 0) & (grid <= r_valid))[0]
    u_lo = sol_lo.sol(grid[idx])[0]
    u_hi = sol_hi.sol(grid[idx])[0]
    bad = np.nonzero(np.abs(u_hi - u_lo) > MATCH_TOL * alpha)[0]
    i_match = idx[bad[0] - 1] if bad.size and bad[0] > 0 else idx[-1]
    i_match = min(i_match, idx[-1])
    r_match = grid[i_match]

    values = np.empty_like(grid)
    fwd = 0.5 * (sol_lo.sol(grid[1:i_match + 1]) + sol_hi.sol(grid[1:i_match + 1]))
    values[0] = alpha
    values[1:i_match + 1] = fwd[0]
    u_match = fwd[0, -1]
    du_match = fwd[1, -1]

    tail_r = grid[i_match:][::-1]
    rhs = _rhs(f, dim)
    slope = _decay_ratio(kappa, dim, rmax)

    def backward(eps):
        return solve_ivp(rhs, (rmax, r_match), [eps, eps * slope], method="DOP853",
                         rtol=SHOOT_RTOL, atol=1e-300, t_eval=tail_r)

    def miss(log_eps):
        sol = backward(math.exp(log_eps))
        return math.log(sol.y[0, -1]) - math.log(u_match), sol

    x0 = math.log(u_match * _decay_profile_ratio(kappa, dim, rmax, r_match))
    m0, sol = miss(x0)
    x1 = x0 - m0
    for _ in range(50):
        m1, sol = miss(x1)
        if abs(m1) < 1e-14 or m1 == m0:
            break
        x0, m0, x1 = x1, m1, x1 - m1 * (x1 - x0) / (m1 - m0)
    else:
        raise NumericFailure("tail matching did not converge")
    tail = sol.y[0][::-1]
    values[i_match:] = tail
    slope_gap = abs(sol.y[1, -1] - du_match)
    logger.debug("ground state: alpha=%.15g r_match=%.3f slope_gap=%.2e",
                 alpha, r_match, slope_gap)

    gs = GroundState(dim=dim, grid=grid, values=values, alpha=alpha,
                     decay_rate=_fit_decay(grid, values, dim), match_radius=float(r_match),
                     model=model.to_config())
    gs.residual = residual_norm(gs, model)
    if tol_res is None:
        tol_res = TOL_RES_PER_H2 * gs.h**2
    if not gs.residual <= tol_res:
        raise NumericFailure(f"ground-state residual {gs.residual:.3e} exceeds {tol_res:.1e}")
    return gs


def _fit_decay(grid, values, dim):
    rmax = grid[-1]
    sel = (grid >= 0.5 * rmax) & (grid <= 0.75 * rmax)
    r = grid[sel]
    y = np.log(values[sel]) + 0.5 * (dim - 1) * np.log(r)
    slope = np.polyfit(r, y, 1)[0]
    return float(-slope)


def residual_norm(gs: GroundState, model: NonlinearityModel) -> float:
    """Max-norm residual of the radial equation on interior nodes."""
    u = np.asarray(gs.values, dtype=float)
    r = np.asarray(gs.grid, dtype=float)
    h = r[1] - r[0]
    d2 = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    d1 = (u[2:] - u[:-2]) / (2 * h)
    res = d2 + (gs.dim - 1) / r[1:-1] * d1 + eval_f(model, u[1:-1], 0)
    return float(np.max(np.abs(res))) if res.size else 0.0


def fd_ground_state(model: NonlinearityModel, dim: int, rmax: float, nodes: int,
                    guess=None, tol: float = 1e-10, maxiter: int = 50) -> np.ndarray:
    """Newton solve of the second-order finite-difference boundary value problem.

    Neumann at r = 0 via the symmetric ghost node, Dirichlet at ``rmax``.
    ``guess`` is a callable r -> u used for the initial iterate.
    """
    r = np.linspace(0.0, rmax, nodes + 1)
    h = r[1] - r[0]
    u = np.asarray(guess(r[:-1]), dtype=float)
    n = nodes
    c = (dim - 1) / np.where(r[:-1] > 0, r[:-1], 1.0) / (2 * h)
    lower = 1 / h**2 - c
    upper = 1 / h**2 + c
    upper[0] = 2 * dim / h**2
    diag0 = -2 / h**2 * np.ones(n)
    diag0[0] = -2 * dim / h**2
    for _ in range(maxiter):
        right = np.append(u[1:], 0.0)
        left = np.concatenate(([0.0], u[:-1]))
        F = diag0 * u + upper * right + lower * left + eval_f(model, u, 0)
        F[0] = diag0[0] * u[0] + upper[0] * u[1] + eval_f(model, u[0], 0)
        ab = np.zeros((3, n))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag0 + eval_f(model, u, 1)
        ab[2, :-1] = lower[1:]
        du = solve_banded((1, 1), ab, -F)
        u = u + du
        if np.max(np.abs(du)) < tol * max(1.0, np.max(np.abs(u))):
            break
    else:
        raise NumericFailure("finite-difference Newton iteration did not converge")
    return np.append(u, 0.0)


def richardson_peak(model: NonlinearityModel, dim: int, rmax: float | None = None,
                    nodes: int = DEFAULT_NODES, gs: GroundState | None = None):
    """φ(0) from finite-difference solves on M and 2M nodes, extrapolated.

    Returns ``(extrapolated, coarse, fine)``.
    """
    if gs is None:
        gs = solve_ground_state(model, dim, rmax, nodes)
    guess = gs.interpolant()
    coarse = fd_ground_state(model, dim, gs.rmax, nodes, guess)[0]
    fine = fd_ground_state(model, dim, gs.rmax, 2 * nodes, guess)[0]
    return (4 * fine - coarse) / 3, coarse, fine
