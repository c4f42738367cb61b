"""Tests fuer den stationaeren Vergleichs-GP (domain/baseline.py)."""

import math

import numpy as np
import pytest
from scipy.spatial.distance import cdist
from scipy.stats import multivariate_normal

from deepwarp.domain.baseline import (
    MaternParams,
    _loglik_and_gradient,
    gp_fit_ml,
    gp_loglik,
    gp_predict,
    matern32,
)
from deepwarp.domain.core import Dataset, InvalidParameterError, LocationSet, RngStream
from deepwarp.domain.simulate import DOMAIN_1D, add_noise, regular_grid, sample_matern_field


def _make_data(n=40, seed=0):
    rng = RngStream(seed)
    s = np.sort(rng.uniform(-0.5, 0.5, n))
    z = np.sin(8.0 * s) + 0.1 * rng.normal(n)
    return Dataset(locations=LocationSet(s), z=z, seed=seed)


class TestMatern:
    """Tests fuer die Matern-3/2-Kovarianz."""

    def test_value_at_zero_is_variance(self):
        p = MaternParams(variance=2.0, range=0.3, noise_var=0.1)
        assert matern32(0.0, p) == pytest.approx(2.0)

    def test_known_value(self):
        p = MaternParams(variance=1.0, range=math.sqrt(3.0), noise_var=0.1)
        assert matern32(1.0, p) == pytest.approx(2.0 * math.exp(-1.0))

    def test_decreasing(self):
        p = MaternParams(variance=1.0, range=0.2, noise_var=0.1)
        values = matern32(np.linspace(0.0, 2.0, 50), p)
        assert np.all(np.diff(values) < 0)

    def test_non_positive_parameters_rejected(self):
        with pytest.raises(InvalidParameterError):
            MaternParams(variance=1.0, range=0.0, noise_var=0.1)

    def test_log_roundtrip(self):
        p = MaternParams(variance=1.5, range=0.2, noise_var=0.05)
        back = MaternParams.from_log(p.log_params())
        assert back.variance == pytest.approx(1.5)
        assert back.range == pytest.approx(0.2)
        assert back.noise_var == pytest.approx(0.05)


class TestLikelihood:
    """Tests fuer die dichte Log-Likelihood."""

    def test_matches_scipy(self):
        data = _make_data(25)
        p = MaternParams(variance=0.8, range=0.15, noise_var=0.02)
        s = data.locations.coords
        cov = np.asarray(matern32(np.abs(s - s.T), p)) + p.noise_var * np.eye(25)
        expected = multivariate_normal.logpdf(data.z, cov=cov)
        assert gp_loglik(data, p) == pytest.approx(expected, abs=1e-8)

    def test_fit_improves_likelihood(self):
        data = _make_data(40)
        init = MaternParams(variance=1.0, range=0.5, noise_var=0.5)
        fitted = gp_fit_ml(data, n_steps=100, init=init)
        assert gp_loglik(data, fitted) > gp_loglik(data, init)

    def test_gradient_matches_finite_differences(self):
        data = _make_data(25)
        dist = cdist(data.locations.coords, data.locations.coords)
        theta = MaternParams(variance=0.8, range=0.15, noise_var=0.05).log_params()
        _, exact = _loglik_and_gradient(dist, data.z, theta)
        step = 1e-6
        numeric = np.empty(3)
        for i in range(3):
            plus, minus = theta.copy(), theta.copy()
            plus[i] += step
            minus[i] -= step
            numeric[i] = (
                _loglik_and_gradient(dist, data.z, plus)[0]
                - _loglik_and_gradient(dist, data.z, minus)[0]
            ) / (2.0 * step)
        np.testing.assert_allclose(exact, numeric, rtol=1e-5, atol=1e-6)

    def test_fit_recovers_known_parameters(self):
        truth = MaternParams(variance=1.0, range=0.01, noise_var=0.01)
        rng = RngStream(3)
        grid = regular_grid(DOMAIN_1D, 400)
        y = sample_matern_field(grid, truth, rng)
        data = Dataset(locations=grid, z=add_noise(y, truth.noise_var, rng))
        fitted = gp_fit_ml(data, n_steps=400)
        assert abs(math.log(fitted.variance / truth.variance)) <= 0.5
        assert abs(math.log(fitted.range / truth.range)) <= 0.5


class TestPredict:
    """Tests fuer das Kriging."""

    def test_interpolates_without_noise(self):
        data = _make_data(20)
        p = MaternParams(variance=1.0, range=0.2, noise_var=1e-8)
        summary = gp_predict(p, data, data.locations)
        np.testing.assert_allclose(summary.mean, data.z, atol=1e-4)
        assert np.all(summary.sd < 1e-2)

    def test_reverts_to_prior_far_away(self):
        data = _make_data(20)
        p = MaternParams(variance=1.5, range=0.1, noise_var=0.01)
        summary = gp_predict(p, data, LocationSet(np.array([50.0])))
        assert summary.mean[0] == pytest.approx(0.0, abs=1e-10)
        assert summary.sd[0] ** 2 == pytest.approx(1.5)

    def test_include_noise_adds_variance(self):
        data = _make_data(20)
        p = MaternParams(variance=1.0, range=0.2, noise_var=0.3)
        targets = LocationSet(np.array([0.0, 0.1]))
        plain = gp_predict(p, data, targets)
        noisy = gp_predict(p, data, targets, include_noise=True)
        np.testing.assert_allclose(noisy.sd**2, plain.sd**2 + 0.3)
