import numpy as np
import pytest

from quasiloc.errors import SimplicityViolation
from quasiloc.spectrum import (SpectralReport, assemble_cylinder_operator, certify_A1,
                               certify_G, cylinder_mode_eigenvalues, cylinder_spectrum,
                               radial_spectrum, tail_decay_rate)


def test_cubic_levels(radial3):
    assert radial3.mu0 == pytest.approx(-3.0, abs=1e-6)
    assert radial3.eigenvalues[1] >= 0.9
    assert radial3.morse_index == 1
    assert radial3.essential_spectrum_floor == 1.0
    assert np.all(np.diff(radial3.eigenvalues) > 0)


def test_quadratic_levels(radial2):
    assert radial2.mu0 == pytest.approx(-1.25, abs=1e-6)
    assert radial2.eigenvalues[1] == pytest.approx(0.75, abs=1e-6)
    assert radial2.morse_index == 1


def test_certify_G(radial3, radial2):
    assert certify_G(radial3).passed
    assert certify_G(radial2).passed
    bad = certify_G(SpectralReport(eigenvalues=[-2.0, -0.5]))
    assert not bad.passed
    assert bad.details["morse_index"] == 2


def test_certify_G_zero_mode():
    v = certify_G(SpectralReport(eigenvalues=[-2.0, 1e-9, 1.0]))
    assert not v.passed


def test_cylinder_in_window(radial3):
    cyl = cylinder_spectrum(radial3, 0.4, 4)
    neg = [(m.j, m.k, m.eigenvalue) for m in cyl.nonpositive]
    assert [(j, k) for j, k, _ in neg] == [(0, 0), (0, 1)]
    assert neg[0][2] == pytest.approx(-1.2, abs=1e-6)
    assert neg[1][2] == pytest.approx(-0.2, abs=1e-6)
    vals = [m.eigenvalue for m in cyl.modes]
    assert vals == sorted(vals)
    for m in cyl.modes:
        assert m.eigenvalue == 0.4 * radial3.eigenvalues[m.j] + m.k**2


def test_cylinder_below_window(radial3):
    cyl = cylinder_spectrum(radial3, 0.3, 4)
    assert len(cyl.nonpositive) == 1
    assert cyl.nonpositive[0].eigenvalue == pytest.approx(-0.9, abs=1e-6)
    m01 = next(m for m in cyl.modes if (m.j, m.k) == (0, 1))
    assert m01.eigenvalue == pytest.approx(0.1, abs=1e-6)


def test_cylinder_window_edge():
    cyl = cylinder_spectrum(SpectralReport(eigenvalues=[-3.0, 1.0],
                                           essential_spectrum_floor=1.0), 4.0 / 3.0, 4)
    assert [(m.j, m.k) for m in cyl.zero_modes] == [(0, 2)]


def test_cylinder_coincidence():
    # 0.25 * (-3) + 1 == 0.25 * 1 + 0
    with pytest.raises(SimplicityViolation):
        cylinder_spectrum(SpectralReport(eigenvalues=[-3.0, 1.0]), 0.25, 2)


def test_direct_assembly(model3, gs3):
    for k, expected in ((0, -1.2), (1, -0.2)):
        val = cylinder_mode_eigenvalues(model3, gs3, 0.4, k)[0]
        assert val == pytest.approx(expected, abs=1e-6)
    high = cylinder_mode_eigenvalues(model3, gs3, 0.05, 5, count=3)
    assert np.all(high >= 25 + 0.05 * -3.0 - 1e-6)
    assert np.all(high > 0)


def test_scaling_identity(model3, gs3, radial3):
    lam = 0.4
    direct = assemble_cylinder_operator(model3, gs3, lam, 0).eigen(3)[0]
    base = assemble_cylinder_operator(model3, gs3, 1.0, 0).eigen(3)[0]
    np.testing.assert_allclose(direct, lam * base, rtol=1e-9)
    assert lam * radial3.mu0 == pytest.approx(-1.2, abs=1e-6)


def test_fourier_shift(model3, gs3):
    k0 = cylinder_mode_eigenvalues(model3, gs3, 0.4, 0)[0]
    k2 = cylinder_mode_eigenvalues(model3, gs3, 0.4, 2)[0]
    assert k2 - k0 == pytest.approx(4.0, abs=1e-6)


def test_eigenfunction_decay(radial3, radial2):
    for rep in (radial3, radial2):
        expected = np.sqrt(rep.essential_spectrum_floor - rep.mu0)
        assert tail_decay_rate(rep, 0) == pytest.approx(expected, rel=0.02)


def test_orthonormality(model3, gs3):
    from quasiloc.spectrum import radial_operator
    from quasiloc.nonlinearity import eval_f

    op = radial_operator(gs3.grid, -eval_f(model3, gs3.values, 1), gs3.dim)
    _, funcs = op.eigen(3)
    gram = (funcs[:, :-1] * op.weights) @ funcs[:, :-1].T
    np.testing.assert_allclose(gram, np.eye(3), atol=1e-8)


def test_two_dimensional_radial():
    from quasiloc.groundstate import solve_ground_state
    from quasiloc.nonlinearity import NonlinearityModel

    m = NonlinearityModel.power(3)
    rep = radial_spectrum(m, solve_ground_state(m, 2), 2)
    assert rep.morse_index == 1
    assert certify_G(rep).passed


def test_certify_A1(radial3):
    s = np.linspace(-0.05, 0.05, 11)
    assert certify_A1(radial3, 0.4, s).passed
    direct = {"j0_k0": {"separated": -1.2, "assembled": -1.2 + 5e-6}}
    assert not certify_A1(radial3, 0.4, s, direct=direct).passed
    assert not certify_A1(radial3, 0.3, s).passed


def test_report_round_trip(radial3):
    again = SpectralReport.from_dict(radial3.to_dict())
    np.testing.assert_array_equal(again.eigenvalues, radial3.eigenvalues)
    np.testing.assert_array_equal(again.eigenfunctions, radial3.eigenfunctions)
