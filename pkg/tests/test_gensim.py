import json
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from conftest import CIRCADIAN
from trigfit.gensim import (
    GGSpec,
    NyquistViolation,
    RngStream,
    gg_density,
    gg_lambda,
    sample_gamma,
    sample_gg,
    simulate_dataset,
)
from trigfit.specfun import GGShape, expected_log_gg, gg_mean

GOLDEN = json.loads((Path(__file__).parent / "golden" / "draws.json").read_text())
BETA = [1.0, 0.5, 0.5, 0.8, 0.3]


def test_rng_stream_reproducible():
    a = RngStream(5, 9).uniform(100)
    b = RngStream(5, 9).uniform(100)
    c = RngStream(5, 10).uniform(100)
    d = RngStream(6, 9).uniform(100)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_rng_stream_accepts_large_and_negative_seeds():
    assert RngStream(2**70 + 3, -1).stream_id == 2**64 - 1


def test_gg_lambda_examples():
    spec = GGSpec.from_beta([0.3, 0.2, -0.1], 1.0, 1.0, 1.0)
    assert gg_lambda(0.7, spec) == pytest.approx(math.exp(spec.log_mean(0.7)[0]), rel=1e-14)
    flat = GGSpec.from_beta([0.0, 0.0, 0.0], 1.0, 2.0, 1.0)
    assert gg_lambda(1.23, flat) == pytest.approx(0.5, rel=1e-14)


def test_gg_lambda_mean_identity(rng):
    for _ in range(20):
        shape = GGShape(rng.uniform(0.3, 6), rng.uniform(0.3, 4))
        spec = GGSpec(rng.normal(size=5), 2, CIRCADIAN, shape)
        x = rng.uniform(0, 24)
        assert gg_mean(gg_lambda(x, spec), shape) == pytest.approx(math.exp(spec.log_mean(x)[0]), rel=1e-12)


def test_gg_density_examples():
    assert gg_density(0.5, 1.0, GGShape(1, 1)) == pytest.approx(math.exp(-0.5), rel=1e-14)
    assert gg_density(1.0, 1.0, GGShape(2, 2)) == pytest.approx(2 * math.exp(-1), rel=1e-14)
    assert gg_density(1.0, 1.0, GGShape(2, 2)) == pytest.approx(0.73576, abs=1e-5)
    with pytest.raises(ValueError):
        gg_density(0.0, 1.0, GGShape(1, 1))


@pytest.mark.parametrize("kappa,rho,lam", [(3.0, 1.5, 2.0), (0.7, 0.5, 1.0), (2.0, 3.0, 0.3)])
def test_gg_density_integrates_to_one(kappa, rho, lam):
    shape = GGShape(kappa, rho)
    total, _ = integrate.quad(lambda y: gg_density(y, lam, shape), 0, np.inf, epsabs=1e-12, epsrel=1e-12, limit=200)
    assert total == pytest.approx(1.0, abs=1e-8)


def test_golden_first_draws():
    g = GOLDEN["sample_gamma"]
    stream = RngStream(g["seed"], g["stream"])
    draws = [sample_gamma(stream, a) for a in g["shapes"]]
    assert [repr(d) for d in draws] == g["draws"]


def test_golden_dataset():
    g = GOLDEN["simulate_dataset"]
    spec = GGSpec.from_beta(g["beta_star"], 2 * math.pi / g["period"], g["kappa"], g["rho"])
    t, y = simulate_dataset(RngStream(g["seed"], g["stream"]), spec, g["n"])
    assert [repr(float(v)) for v in t] == g["times"]
    assert [repr(float(v)) for v in y] == g["responses"]


def test_simulate_dataset_shape():
    spec = GGSpec.from_beta(BETA, CIRCADIAN, 2.0, 1.0)
    t, y = simulate_dataset(RngStream(1), spec, 12)
    np.testing.assert_allclose(t, np.arange(0, 24, 2.0), atol=1e-12)
    assert y.shape == (12,) and np.all(y > 0)
    with pytest.raises(NyquistViolation):
        simulate_dataset(RngStream(1), spec, 4)


def test_ggspec_validation():
    with pytest.raises(ValueError):
        GGSpec(np.ones(4), 2, 1.0, GGShape(1, 1))
    with pytest.raises(ValueError):
        GGSpec.from_beta([1.0, 2.0], 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GGSpec.from_beta(BETA, 1.0, -1.0, 1.0)


def _mean_z(draws, target):
    return (draws.mean() - target) / (draws.std(ddof=1) / math.sqrt(draws.size))


@pytest.mark.slow
@pytest.mark.parametrize("shape", [2.0, 3.0, 0.3])
def test_sample_gamma_moments(shape):
    g = sample_gamma(RngStream(31, int(shape * 10)), shape, size=10**6)
    assert abs(_mean_z(g, shape)) < 4
    # fourth central moment of Gamma(a) sets the spread of the sample variance
    m4 = 3 * shape**2 + 6 * shape
    se_var = math.sqrt((m4 - shape**2) / g.size)
    assert abs(g.var(ddof=1) - shape) < 4 * se_var


@pytest.mark.slow
def test_sample_gg_reduces_to_gamma():
    spec = GGSpec.from_beta([0.4, 0.0, 0.0], 1.0, 2.5, 1.0)
    lam = gg_lambda(0.0, spec)
    y = sample_gg(RngStream(4), 0.0, spec, size=10**6)
    assert abs(_mean_z(y, 2.5 * lam)) < 4
    assert stats.kstest(y, stats.gamma(2.5, scale=lam).cdf).pvalue > 0.01


@pytest.mark.slow
def test_sample_gg_mean_and_log_mean():
    spec = GGSpec.from_beta(BETA, CIRCADIAN, 2.0, 1.5)
    x = 5.0
    y = sample_gg(RngStream(8, 3), x, spec, size=10**6)
    assert abs(_mean_z(y, math.exp(spec.log_mean(x)[0]))) < 4
    assert abs(_mean_z(np.log(y), expected_log_gg(gg_lambda(x, spec), spec.shape))) < 4


@pytest.mark.slow
def test_simulated_curve_means():
    spec = GGSpec.from_beta(BETA, CIRCADIAN, 2.0, 1.0)
    reps = 10**5
    data = np.array([simulate_dataset(RngStream(77, r), spec, 12)[1] for r in range(reps)])
    t = np.arange(0, 24, 2.0)
    target = np.exp(spec.log_mean(t))
    z = (data.mean(axis=0) - target) / (data.std(axis=0, ddof=1) / math.sqrt(reps))
    assert np.max(np.abs(z)) < 4
