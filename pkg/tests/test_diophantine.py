import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasiloc.diophantine import (DiophantineSpec, FrequencySet, build_W, continued_fraction,
                                  is_diophantine, is_nonresonant_up_to, sample_V_kappa)
from quasiloc.errors import ConfigError

GOLDEN = (1.0, 1.6180339887)
BOX = [[1.0, 2.0], [1.0, 2.0]]


def test_nonresonance_examples():
    assert is_nonresonant_up_to((1.0, 0.5), 3) == (False, (1, -2))
    assert is_nonresonant_up_to((1.0, math.sqrt(2)), 50) == (True, None)
    assert is_nonresonant_up_to((1.0, 1.0), 1) == (False, (1, -1))


def test_golden_ratio_certified():
    v = is_diophantine(GOLDEN, DiophantineSpec(0.2, 1.2, 10_000))
    assert v.passed
    assert v.cf_alpha == v.worst_alpha == (1, -1)
    assert v.margin == pytest.approx(0.6180339887, abs=1e-10)
    # CF-only certification agrees
    assert is_diophantine(GOLDEN, DiophantineSpec(0.2, 1.2, 10_000), sweep=False).passed


def test_resonance_rejected():
    v = is_diophantine((1.0, 0.5), DiophantineSpec(1e-3))
    assert not v.passed
    assert v.worst_alpha == (1, -2)
    assert v.margin == 0.0


def test_truncated_golden_is_rational():
    # 1.618 = 809/500 is an exact resonance within the bound
    v = is_diophantine((1.0, 1.618), DiophantineSpec(0.2, 1.2, 10_000))
    assert not v.passed
    assert v.worst_alpha == (809, -500)


def test_sqrt6_ratio():
    w = (math.sqrt(1.2), math.sqrt(0.2))
    v = is_diophantine(w, DiophantineSpec(1e-3, 1.2, 1000))
    assert v.passed
    assert v.worst_alpha == v.cf_alpha == (2, -5)
    assert v.margin == pytest.approx(0.31166539117, abs=1e-10)
    assert v.convergents[:4] == [(2, 1), (5, 2), (22, 9), (49, 20)]


def test_continued_fraction_sqrt2():
    conv = continued_fraction(math.sqrt(2), 100)
    assert conv == [(1, 1), (3, 2), (7, 5), (17, 12), (41, 29), (99, 70)]


def test_spec_validation():
    with pytest.raises(ConfigError):
        DiophantineSpec(kappa=0.0)
    with pytest.raises(ConfigError):
        DiophantineSpec(kappa=0.1, nu=1.0)
    with pytest.raises(ConfigError):
        DiophantineSpec(kappa=0.1, alpha_bound=0)


@settings(max_examples=60, deadline=None)
@given(w1=st.floats(0.5, 3.0), w2=st.floats(0.5, 3.0), c=st.floats(0.1, 10.0))
def test_scaling_covariance(w1, w2, c):
    spec = DiophantineSpec(0.01, 1.2, 300)
    v = is_diophantine((w1, w2), spec)
    vc = is_diophantine((c * w1, c * w2), DiophantineSpec(c * 0.01, 1.2, 300))
    # rounding in ω·α is at most a few ulp of |ω||α|, weighted by |α|^ν
    ulp = 8 * np.finfo(float).eps * c * (w1 + w2) * 300 ** (1 + spec.nu)
    assert vc.margin == pytest.approx(c * v.margin, rel=1e-9, abs=ulp)
    if abs(v.margin - spec.kappa) > 1e-9 * spec.kappa + ulp:
        assert vc.passed == v.passed


@settings(max_examples=80, deadline=None)
@given(w1=st.floats(0.2, 5.0), w2=st.floats(0.2, 5.0))
def test_cf_dominance(w1, w2):
    v = is_diophantine((w1, w2), DiophantineSpec(1e-3, 1.2, 500))
    assert abs(v.margin - v.cf_margin) <= 1e-12 * max(1.0, v.cf_margin)


def test_monte_carlo_pass_fraction():
    fracs = [sample_V_kappa(BOX, DiophantineSpec(k, 1.2, 1000), 10_000, seed=0).pass_fraction
             for k in (1e-3, 1e-2, 1e-1)]
    assert fracs[0] > 0.9
    assert fracs[0] >= fracs[1] >= fracs[2]


def test_nu_tightening_monotone():
    fracs = [sample_V_kappa(BOX, DiophantineSpec(1e-2, nu, 1000), 2000, seed=1).pass_fraction
             for nu in (1.5, 1.2, 1.05)]
    assert fracs[0] >= fracs[1] >= fracs[2]


def test_members_respect_boundary():
    fs = sample_V_kappa(BOX, DiophantineSpec(0.05, 1.2, 1000), 500, seed=3)
    assert np.all(fs.members >= 1.05) and np.all(fs.members <= 1.95)
    assert np.all(fs.margins >= 0.05)
    assert fs.measure_estimate == pytest.approx(fs.pass_fraction)


def test_empty_sample_warns():
    with pytest.warns(RuntimeWarning):
        fs = sample_V_kappa(BOX, DiophantineSpec(0.6, 1.2, 100), 200, seed=0)
    assert len(fs.members) == 0


def test_sampling_determinism():
    a = sample_V_kappa(BOX, DiophantineSpec(1e-3), 500, seed=42)
    b = sample_V_kappa(BOX, DiophantineSpec(1e-3), 500, seed=42)
    c = sample_V_kappa(BOX, DiophantineSpec(1e-3), 500, seed=43)
    np.testing.assert_array_equal(a.members, b.members)
    assert not np.array_equal(a.members[:10], c.members[:10])


def test_build_W_examples():
    phi = (1 + math.sqrt(5)) / 2
    W = build_W([(1, phi), (2, 2 * phi), (1, math.sqrt(2))])
    assert len(W) == 2
    np.testing.assert_array_equal(W[0], (1, phi))
    np.testing.assert_array_equal(W[1], (1, math.sqrt(2)))
    assert build_W([]) == []


def test_build_W_retains_random_samples():
    fs = sample_V_kappa(BOX, DiophantineSpec(1e-3), 10_000, seed=0)
    assert isinstance(fs, FrequencySet)
    assert len(build_W(fs)) >= 0.99 * len(fs.members)
