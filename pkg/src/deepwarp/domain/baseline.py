"""Stationaerer Matern-3/2-GP als Vergleichsmodell (voller Rang, dichte Algebra)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.spatial.distance import cdist

from deepwarp.domain.core import (
    Dataset,
    IllConditionedCovarianceError,
    InvalidParameterError,
    LocationSet,
    PredictiveSummary,
)
from deepwarp.domain.siwgp import VARIANCE_FLOOR, AdamState, adam_step

logger = logging.getLogger(__name__)

SQRT3: float = math.sqrt(3.0)

JITTER_STEPS: tuple[float, ...] = (0.0, 1e-8, 1e-6)
"""Relative Jitter-Stufen (mal sigma^2) fuer die Cholesky-Zerlegung."""


@dataclass(frozen=True, slots=True)
class MaternParams:
    """Varianz sigma^2, Reichweite rho und Messfehlervarianz sigma^2_eps."""

    variance: float
    range: float
    noise_var: float

    def __post_init__(self) -> None:
        if not (self.variance > 0 and self.range > 0 and self.noise_var > 0):
            msg = f"Matern-Parameter muessen positiv sein: {self}"
            raise InvalidParameterError(msg)

    def log_params(self) -> NDArray[np.float64]:
        return np.log([self.variance, self.range, self.noise_var])

    @classmethod
    def from_log(cls, values: NDArray[np.float64]) -> MaternParams:
        v = np.exp(values)
        return cls(variance=float(v[0]), range=float(v[1]), noise_var=float(v[2]))


def matern32(h: float | NDArray[np.float64], p: MaternParams) -> float | NDArray[np.float64]:
    """sigma^2 (1 + sqrt(3) h / rho) exp(-sqrt(3) h / rho)."""
    x = SQRT3 * np.asarray(h, dtype=np.float64) / p.range
    result = p.variance * (1.0 + x) * np.exp(-x)
    if np.ndim(result) == 0:
        return float(result)
    return result  # type: ignore[no-any-return]


def _factor(k: NDArray[np.float64], variance: float) -> tuple[NDArray[np.float64], bool]:
    for level in JITTER_STEPS:
        try:
            kj = k + level * variance * np.eye(k.shape[0]) if level else k
            c, lower = cho_factor(kj, lower=True)
            if level:
                logger.warning("Matern-Kovarianz erst mit Jitter %.0e faktorisierbar", level)
            return c, lower
        except LinAlgError:
            continue
    msg = "Cholesky-Zerlegung der Matern-Kovarianz fehlgeschlagen"
    raise IllConditionedCovarianceError(msg)


def _loglik_and_gradient(
    dist: NDArray[np.float64], z: NDArray[np.float64], log_params: NDArray[np.float64]
) -> tuple[float, NDArray[np.float64]]:
    p = MaternParams.from_log(log_params)
    n = z.shape[0]
    x = SQRT3 * dist / p.range
    ex = np.exp(-x)
    kmat = p.variance * (1.0 + x) * ex
    cov = kmat + p.noise_var * np.eye(n)
    c, lower = _factor(cov, p.variance)
    alpha = cho_solve((c, lower), z)
    k_inv = cho_solve((c, lower), np.eye(n))
    logdet = 2.0 * float(np.sum(np.log(np.diag(c))))
    value = -0.5 * (float(z @ alpha) + logdet + n * math.log(2.0 * math.pi))

    inner = np.outer(alpha, alpha) - k_inv
    d_variance = kmat
    d_range = p.variance * x * x * ex
    grad = 0.5 * np.array([
        float(np.sum(inner * d_variance)),
        float(np.sum(inner * d_range)),
        p.noise_var * float(np.trace(inner)),
    ])
    return value, grad


def gp_loglik(data: Dataset, params: MaternParams) -> float:
    """log Gau(Z; 0, K + sigma^2_eps I)."""
    dist = cdist(data.locations.coords, data.locations.coords)
    value, _ = _loglik_and_gradient(dist, data.z, params.log_params())
    return value


def gp_fit_ml(
    data: Dataset,
    *,
    n_steps: int = 500,
    lr: float = 0.05,
    init: MaternParams | None = None,
) -> MaternParams:
    """Maximum-Likelihood-Schaetzung der log-Parameter per Adam (bester Iterand).

    Startwerte: sigma^2 = Var(Z), rho = 1/4 der Gebietsseite, sigma^2_eps = 0.1 Var(Z).
    """
    if data.n > 3000:
        logger.warning("Dichter GP mit N=%d - Laufzeit O(N^3)", data.n)
    if init is None:
        var_z = max(float(np.var(data.z)), VARIANCE_FLOOR)
        side = float(np.max(np.ptp(data.locations.coords, axis=0))) or 1.0
        init = MaternParams(variance=var_z, range=0.25 * side, noise_var=0.1 * var_z)
    dist = cdist(data.locations.coords, data.locations.coords)
    theta = init.log_params()
    value, grad = _loglik_and_gradient(dist, data.z, theta)
    best_value, best_theta = value, theta
    state = AdamState.initial(3, lr)
    for _ in range(n_steps):
        theta, state = adam_step(state, -grad, theta)
        try:
            value, grad = _loglik_and_gradient(dist, data.z, theta)
        except IllConditionedCovarianceError as e:
            logger.warning("GP-Schritt fehlgeschlagen: %s", e)
            break
        if value > best_value:
            best_value, best_theta = value, theta
    result = MaternParams.from_log(best_theta)
    logger.info(
        "GP-Fit: sigma2=%.4g rho=%.4g noise=%.4g (log L %.3f)",
        result.variance, result.range, result.noise_var, best_value,
    )
    return result


def gp_predict(
    params: MaternParams, data: Dataset, targets: LocationSet, *, include_noise: bool = False
) -> PredictiveSummary:
    """Kriging mit k*'(K + sigma^2_eps I)^{-1} Z und k** - k*'(K + sigma^2_eps I)^{-1} k*."""
    dist = cdist(data.locations.coords, data.locations.coords)
    cov = np.asarray(matern32(dist, params)) + params.noise_var * np.eye(data.n)
    c, lower = _factor(cov, params.variance)
    k_star = np.asarray(matern32(cdist(targets.coords, data.locations.coords), params))
    mean = k_star @ cho_solve((c, lower), data.z)
    var = params.variance - np.sum(k_star * cho_solve((c, lower), k_star.T).T, axis=1)
    if np.any(var < -1e-10):
        logger.warning("Negative Vorhersagevarianz (min %.3g) auf 0 gesetzt", float(var.min()))
    var = np.clip(var, 0.0, None)
    if include_noise:
        var = var + params.noise_var
    return PredictiveSummary.from_moments(mean, var)
