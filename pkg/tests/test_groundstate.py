import math

import numpy as np
import pytest

from quasiloc.errors import ExistenceFailure
from quasiloc.groundstate import (GroundState, fd_ground_state, residual_norm,
                                  richardson_peak, solve_ground_state)
from quasiloc.nonlinearity import NonlinearityModel


def sech(x):
    return 1.0 / np.cosh(x)


def test_cubic_profile(gs3):
    assert gs3.alpha == pytest.approx(math.sqrt(2.0), abs=1e-10)
    np.testing.assert_allclose(gs3.values, math.sqrt(2.0) * sech(gs3.grid), atol=1e-9)


def test_quadratic_profile(gs2):
    assert gs2.alpha == pytest.approx(1.5, abs=1e-10)
    np.testing.assert_allclose(gs2.values, 1.5 * sech(gs2.grid / 2) ** 2, atol=1e-9)


def test_decay_rate(gs3, gs2):
    assert gs3.decay_rate == pytest.approx(1.0, abs=1e-6)
    # sech² carries a relative e^{-r} correction in its tail
    assert gs2.decay_rate == pytest.approx(1.0, abs=1e-4)


@pytest.mark.parametrize("name", ["gs3", "gs2"])
def test_profile_invariants(name, request):
    gs = request.getfixturevalue(name)
    assert np.all(gs.values > 0)
    assert np.all(np.diff(gs.values) < 0)
    assert gs.values[-1] < 1e-6 * gs.values[0]
    # φ'(0) = 0: the one-sided difference is O(h) with zero first-order term
    assert abs(gs.values[1] - gs.values[0]) / gs.h < 10 * gs.h


def test_tail_law(gs3):
    r = gs3.grid
    sel = (r >= gs3.rmax / 2) & (r <= 0.75 * gs3.rmax)
    g = np.log(gs3.values[sel]) + gs3.decay_rate * r[sel]
    assert np.ptp(g) <= 0.01 * np.abs(g).max()


def test_analytic_residual(model3):
    r = np.linspace(0, 20, 4001)
    gs = GroundState(dim=1, grid=r, values=math.sqrt(2) * sech(r), alpha=math.sqrt(2),
                     decay_rate=1.0)
    res = residual_norm(gs, model3)
    # measured O(h²) truncation error of the second difference on this grid
    assert res == pytest.approx(1.4729e-5, rel=1e-3)
    r2 = np.linspace(0, 20, 8001)
    gs_fine = GroundState(dim=1, grid=r2, values=math.sqrt(2) * sech(r2),
                          alpha=math.sqrt(2), decay_rate=1.0)
    assert res / residual_norm(gs_fine, model3) == pytest.approx(4.0, rel=0.02)


def test_zero_profile_residual(model3):
    r = np.linspace(0, 20, 101)
    gs = GroundState(dim=1, grid=r, values=np.zeros_like(r), alpha=0.0, decay_rate=1.0)
    assert residual_norm(gs, model3) == 0.0


def test_richardson_peak(model3, gs3):
    peak, coarse, fine = richardson_peak(model3, 1, gs=gs3)
    assert abs(peak - math.sqrt(2)) < 1e-6
    # the second-order errors shrink by four under grid halving
    assert (coarse - math.sqrt(2)) / (fine - math.sqrt(2)) == pytest.approx(4.0, rel=0.01)


def test_fd_grid_refinement(model3, gs3):
    vals = [fd_ground_state(model3, 1, 20.0, m, gs3.interpolant())[0]
            for m in (1000, 2000, 4000)]
    ratio = (vals[0] - vals[1]) / (vals[1] - vals[2])
    assert ratio == pytest.approx(4.0, rel=0.02)


def test_townes_profile():
    # two-dimensional cubic ground state, φ(0) = 2.20620086 (standard literature value)
    gs = solve_ground_state(NonlinearityModel.power(3), 2)
    assert gs.alpha == pytest.approx(2.2062008647, abs=1e-6)
    assert np.all(np.diff(gs.values) < 0)


def test_supercritical_power_fails():
    with pytest.raises(ExistenceFailure):
        solve_ground_state(NonlinearityModel.power(7), 3)


def test_wrong_sign_fails():
    with pytest.raises(ExistenceFailure):
        solve_ground_state(NonlinearityModel.polynomial([1.0, 0.0, -1.0]), 1)


def test_save_load(tmp_path, gs3):
    path = tmp_path / "gs.json"
    gs3.save(path)
    again = GroundState.load(path)
    np.testing.assert_array_equal(again.values, gs3.values)
    assert again.alpha == gs3.alpha
    assert again.model == gs3.model
