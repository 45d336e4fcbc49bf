import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasiloc.errors import ConstructionFailure, DomainError, NDFailure
from quasiloc.scaling import (FrequencyData, admissible_lambda_window, default_lambda,
                              delta_window, frequency_data, frequency_map, nd_certificate,
                              nd_closed_form, nd_closed_form_printed, s_grid)
from quasiloc.spectrum import cylinder_spectrum


def test_window():
    assert admissible_lambda_window(-3.0, 1.0) == pytest.approx((1 / 3, 4 / 3))
    assert admissible_lambda_window(-1.25, 0.75) == pytest.approx((0.8, 3.2))
    with pytest.raises(ConstructionFailure):
        admissible_lambda_window(-3.0, -0.1)
    with pytest.raises(ConstructionFailure):
        admissible_lambda_window(0.5, 1.0)
    assert default_lambda(-3.0, 1.0) == pytest.approx(1 / 3 + 0.2)


def test_frequency_map_values():
    assert frequency_map(0.4, -3.0) == pytest.approx((1.09544512, 0.44721360), abs=1e-8)
    assert frequency_map(0.4, -3.0, 0.02) == pytest.approx((1.12249722, 0.50990195),
                                                           abs=1e-8)
    with pytest.raises(DomainError):
        frequency_map(1 / 3, -3.0)
    with pytest.raises(DomainError):
        frequency_map(0.8, -1.25)


def test_nd_values():
    cert = nd_certificate(0.4, -3.0)
    assert abs(cert.det) == pytest.approx(3.0618622, abs=1e-6)
    assert cert.rank == 2
    assert cert.det == pytest.approx(nd_closed_form(0.4, -3.0), abs=1e-7)
    assert abs(nd_certificate(1.0, -1.25).det) == pytest.approx(1.1180340, abs=1e-6)
    # ω₂ = √(x+1) variant, kept for comparison
    assert nd_closed_form_printed(0.4, -3.0) == pytest.approx(3 / (2 * math.sqrt(1.2 * 2.2)))


def test_nd_fd_order():
    exact = nd_closed_form(0.4, -3.0)
    e1 = nd_certificate(0.4, -3.0, h=1e-2).det - exact
    e2 = nd_certificate(0.4, -3.0, h=5e-3).det - exact
    assert e1 / e2 == pytest.approx(4.0, rel=0.01)


def test_fd_gradient_vs_analytic():
    lam, mu0 = 0.4, -3.0
    w = np.array(frequency_map(lam, mu0))
    analytic = abs(mu0) / (2 * w)
    # C bounds |ω'''|/6 at s = 0; ω₂ is steep near the window edge
    for h in (1e-2, 1e-3, 1e-4):
        grad = nd_certificate(lam, mu0, h=h).matrix[:, 0]
        assert np.max(np.abs(grad - analytic)) <= 100.0 * h**2


@pytest.mark.parametrize("h", [1e-3, 1e-4, 1e-5])
def test_rank_stable(h):
    assert nd_certificate(0.4, -3.0, h=h).rank == 2


def test_nd_failure_on_tiny_tolerance():
    with pytest.raises(NDFailure):
        nd_certificate(0.4, -3.0, tol=10.0)


def test_delta_window():
    assert delta_window(0.4, -3.0) == pytest.approx(0.06)
    assert delta_window(1.0, -3.0) == pytest.approx(0.3)
    assert delta_window(1 / 3 + 1e-9, -3.0) < 1e-8


def test_s_grid_interior():
    g = s_grid(0.06, 11)
    assert len(g) == 11
    assert np.all(np.abs(g) < 0.06)
    assert g[5] == 0.0


def test_frequency_data(radial3):
    fd = frequency_data(0.4, -3.0, 11)
    assert fd.window_ok()
    np.testing.assert_allclose(fd.omega[:, 0] ** 2 + fd.mu1, 0.0, atol=1e-14)
    np.testing.assert_allclose(fd.omega[:, 1] ** 2 + fd.mu2, 0.0, atol=1e-14)
    for s in fd.s_grid:
        cyl = cylinder_spectrum(radial3, 0.4 + s, 4)
        assert len(cyl.nonpositive) == 2
        assert not cyl.zero_modes
    again = FrequencyData.from_dict(fd.to_dict())
    np.testing.assert_array_equal(again.omega, fd.omega)
    assert again.nd.det == fd.nd.det


@settings(max_examples=100, deadline=None)
@given(lam=st.floats(0.34, 1.3), mu0=st.floats(-5.0, -0.5), frac=st.floats(-0.99, 0.99))
def test_frequency_identity(lam, mu0, frac):
    lo, hi = 1 / abs(mu0), 4 / abs(mu0)
    if not lo < lam < hi:
        return
    s = frac * delta_window(lam, mu0)
    w1, w2 = frequency_map(lam, mu0, s)
    mu1 = (lam + s) * mu0
    assert abs(w1**2 + mu1) <= 1e-12 * max(1.0, abs(mu1))
    assert abs(w2**2 + mu1 + 1) <= 1e-12 * max(1.0, abs(mu1))
    assert mu1 < mu1 + 1 < 0
