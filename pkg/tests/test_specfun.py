import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trigfit.gensim import RngStream, sample_gg, GGSpec
from trigfit.specfun import GGShape, c_zero, digamma, expected_log_gg, gg_mean, ln_gamma

mp.mp.dps = 40


def mp_lgamma(u):
    return float(mp.loggamma(mp.mpf(u)))


def mp_digamma(u):
    return float(mp.digamma(mp.mpf(u)))


EULER = float(mp.euler)


def test_ln_gamma_examples():
    assert ln_gamma(1.0) == pytest.approx(0.0, abs=1e-15)
    assert ln_gamma(2.0) == pytest.approx(0.0, abs=1e-15)
    assert ln_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-13)
    assert ln_gamma(0.5) == pytest.approx(0.5723649429, abs=1e-10)


def test_digamma_examples():
    assert digamma(1.0) == pytest.approx(-EULER, abs=1e-14)
    assert digamma(2.0) == pytest.approx(1.0 - EULER, abs=1e-14)
    assert digamma(2.0) == pytest.approx(0.4227843351, abs=1e-10)


@pytest.mark.parametrize("func", [ln_gamma, digamma])
@pytest.mark.parametrize("bad", [0.0, -1.0, -0.5, math.inf, math.nan])
def test_domain_errors(func, bad):
    with pytest.raises(ValueError):
        func(bad)


GRID = np.concatenate([np.geomspace(1e-6, 1e6, 600), np.linspace(0.05, 30.0, 300)])


def test_ln_gamma_against_mpmath():
    # Absolute 1e-12 up to |value| ~ 1e3; beyond that doubles carry only
    # ~16 significant digits, so the bound becomes relative.
    for u in GRID:
        ref = mp_lgamma(u)
        assert abs(ln_gamma(u) - ref) <= 1e-12 * max(1.0, abs(ref) / 1e3) + 4 * np.spacing(abs(ref)), u


def test_digamma_against_mpmath():
    for u in GRID:
        assert abs(digamma(u) - mp_digamma(u)) <= 1e-10, u


@given(st.floats(0.1, 100.0))
def test_digamma_recurrence(u):
    assert abs(digamma(u + 1) - digamma(u) - 1.0 / u) <= 1e-10


@given(st.floats(1.0, 500.0), st.floats(1e-4, 0.1))
def test_ln_gamma_convexity(u, h):
    assert ln_gamma(u - h) + ln_gamma(u + h) >= 2 * ln_gamma(u) - 1e-12


def test_shape_validation():
    with pytest.raises(ValueError):
        GGShape(0.0, 1.0)
    with pytest.raises(ValueError):
        GGShape(1.0, -2.0)
    assert GGShape(3, 1.5).gamma_shape == 2.0


def test_c_zero_examples():
    assert c_zero(GGShape(1, 1)) == pytest.approx(-EULER, abs=1e-13)
    assert c_zero(GGShape(2, 1)) == pytest.approx(1 - EULER - math.log(2), abs=1e-13)
    assert c_zero(GGShape(2, 1)) == pytest.approx(-0.2703628455, abs=1e-10)


def test_c_zero_against_mpmath():
    for k, r in [(0.7, 0.4), (2.0, 1.0), (3.0, 1.5), (5.0, 2.5), (1.3, 3.1)]:
        a = mp.mpf(k) / r
        ref = mp.digamma(a) / r - mp.loggamma((mp.mpf(k) + 1) / r) + mp.loggamma(a)
        assert c_zero(GGShape(k, r)) == pytest.approx(float(ref), abs=1e-12)


@given(st.floats(0.2, 8.0), st.floats(0.3, 4.0), st.floats(0.01, 100.0))
def test_c_zero_is_log_moment_gap(kappa, rho, lam):
    shape = GGShape(kappa, rho)
    gap = expected_log_gg(lam, shape) - math.log(gg_mean(lam, shape))
    assert abs(c_zero(shape) - gap) <= 1e-10


def test_expected_log_gg_examples():
    assert expected_log_gg(1.0, GGShape(1, 1)) == pytest.approx(-EULER, abs=1e-13)
    assert expected_log_gg(math.e, GGShape(1, 1)) == pytest.approx(0.4227843351, abs=1e-10)
    with pytest.raises(ValueError):
        expected_log_gg(0.0, GGShape(1, 1))


@pytest.mark.slow
def test_c_zero_exponential_sampling():
    # Unit-rate exponential: E[log Y] - log E[Y] = -gamma.
    spec = GGSpec.from_beta([0.0, 0.0, 0.0], 1.0, 1.0, 1.0)
    y = sample_gg(RngStream(11, 0), 0.0, spec, size=10**6)
    logs = np.log(y)
    se = logs.std(ddof=1) / 1e3
    assert abs(logs.mean() - math.log(1.0) - c_zero(GGShape(1, 1))) < 4 * se + 4 * y.std() / 1e3


@pytest.mark.slow
def test_expected_log_gg_sampling():
    shape = GGShape(3.0, 1.5)
    lam = 2.0
    # beta0 chosen so the sampler's scale is exactly lam
    beta0 = math.log(gg_mean(lam, shape))
    spec = GGSpec.from_beta([beta0, 0.0, 0.0], 1.0, 3.0, 1.5)
    logs = np.log(sample_gg(RngStream(12, 0), 0.0, spec, size=10**6))
    se = logs.std(ddof=1) / 1e3
    assert abs(logs.mean() - expected_log_gg(lam, shape)) < 4 * se
