import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import ggd_logpdf

from mdera_ccuc.bhmm.ggd import (Ggdc, ReducedSimplex, bounded_pdf, ggd_pdf_unbounded, log_ggd,
                                 mc_normalizer, mixture_logpdf, sample_unbounded)


@given(st.integers(0, 10_000), st.integers(1, 4), st.floats(0.3, 5.0))
def test_log_density_matches_closed_form(seed, K, shape):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(K, K))
    cov = A @ A.T + 0.1 * np.eye(K)
    mean = rng.normal(size=K)
    X = rng.normal(size=(7, K))
    logf, _ = log_ggd(X, mean, cov, shape)
    assert np.allclose(logf, ggd_logpdf(X, mean, cov, shape), atol=1e-10)


def test_shape_one_is_gaussian():
    from scipy.stats import multivariate_normal
    cov = np.array([[0.5, 0.1], [0.1, 0.3]])
    x = np.array([[0.3, -0.2], [1.0, 0.4]])
    g = Ggdc([0.1, 0.0], cov, 1.0)
    assert np.allclose(ggd_pdf_unbounded(x, g), multivariate_normal([0.1, 0.0], cov).pdf(x), rtol=1e-12)


@pytest.mark.parametrize("shape", [0.5, 1.0, 3.0])
def test_unbounded_density_integrates_to_one_in_1d(shape):
    from scipy.integrate import quad
    g = Ggdc([0.2], [[0.3]], shape)
    val, _ = quad(lambda t: ggd_pdf_unbounded(np.array([[t]]), g)[0], -np.inf, np.inf)
    assert val == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("shape", [0.6, 1.0, 2.5])
def test_sampler_radial_law(shape):
    g = Ggdc([0.0, 0.0], [[1.0, 0.3], [0.3, 0.5]], shape)
    X = sample_unbounded(g, 200_000, np.random.default_rng(1))
    _, y = log_ggd(X, g.mean, g.covariance, g.shape)
    # y**shape is Gamma(K / (2 shape), scale 2)
    z = y ** shape
    assert z.mean() == pytest.approx(2 * 2 / (2 * shape), rel=0.02)


def test_simplex_samplers_are_uniform():
    region = ReducedSimplex(2)
    for pts in (region.uniform(50_000, np.random.default_rng(0)), region.uniform_qmc(50_000, 0)):
        assert np.all(region.contains(pts))
        # uniform on the triangle: mean (1/3, 1/3), P(x0 < 1/2) = 3/4
        assert np.allclose(pts.mean(axis=0), 1 / 3, atol=0.01)
        assert np.mean(pts[:, 0] < 0.5) == pytest.approx(0.75, abs=0.01)
    assert region.volume == pytest.approx(0.5)


def test_bounded_pdf_integrates_to_one():
    region = ReducedSimplex(2)
    g = Ggdc([0.3, 0.3], [[0.02, 0.0], [0.0, 0.05]], 1.5)
    z = mc_normalizer(g, region, region.uniform_qmc(1 << 15, 1))
    check = region.uniform(100_000, np.random.default_rng(9))
    assert region.volume * np.mean(bounded_pdf(check, g, region, z)) == pytest.approx(1.0, abs=0.02)
    assert bounded_pdf(np.array([0.8, 0.8]), g, region, z) == 0.0


def test_mixture_logpdf_is_weighted_sum():
    region = ReducedSimplex(1)
    mix = [Ggdc([0.2], [[0.01]], 1.0, 0.3), Ggdc([0.7], [[0.02]], 2.0, 0.7)]
    samples = region.uniform_qmc(4096, 0)
    norms = [math.log(mc_normalizer(g, region, samples)) for g in mix]
    x = np.array([[0.1], [0.5], [0.9]])
    direct = sum(g.weight * bounded_pdf(x, g, region, math.exp(n)) for g, n in zip(mix, norms))
    assert np.allclose(np.exp(mixture_logpdf(x, mix, region, norms)), direct, rtol=1e-12)
