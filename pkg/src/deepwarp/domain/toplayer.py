"""Niedrigrangiger Prozess-Layer auf dem verzerrten Gebiet.

Y(u) = phi(u)' w mit kompakt getragenen Bisquare-Basisfunktionen
phi_j(u) = (1 - (||u - gamma_j|| / delta_j)^2)^2 fuer ||u - gamma_j|| <= delta_j
und exponentieller Kovarianz der Gewichte Sigma_jj' = sigma^2 exp(-||gamma_j - gamma_j'|| / l).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import cdist, pdist, squareform

from deepwarp.domain.core import (
    Domain,
    IllConditionedCovarianceError,
    InvalidParameterError,
    LocationSet,
)

JITTER: float = 1e-8
"""Relativer Diagonal-Jitter (mal sigma^2) vor jeder Faktorisierung."""

APERTURE_FACTOR: float = 1.5
"""Apertur delta = 1.5 x Zentrumsabstand."""


@dataclass(frozen=True, slots=True, eq=False)
class ProcessLayer:
    """Bisquare-Basis und Kovarianzparameter tau = (sigma^2, l).

    Attributes:
        centroids: r x d Zentren (regulaeres Gitter ueber D_n).
        apertures: delta_j > 0 je Basisfunktion.
        sigma2: Varianz der Gewichte.
        lengthscale: Reichweite l der exponentiellen Kovarianz.
    """

    centroids: NDArray[np.float64]
    apertures: NDArray[np.float64]
    sigma2: float = 1.0
    lengthscale: float = 0.25

    def __post_init__(self) -> None:
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 1:
            msg = f"Zentren brauchen Form (r>=1, d), erhalten: {self.centroids.shape}"
            raise InvalidParameterError(msg)
        if np.any(self.apertures <= 0):
            msg = "Aperturen muessen positiv sein"
            raise InvalidParameterError(msg)
        if not (self.sigma2 > 0 and self.lengthscale > 0):
            msg = f"sigma2 und l muessen positiv sein: {self.sigma2}, {self.lengthscale}"
            raise InvalidParameterError(msg)

    @property
    def r(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    def log_params(self) -> NDArray[np.float64]:
        return np.array([np.log(self.sigma2), np.log(self.lengthscale)])

    def with_log_params(self, values: NDArray[np.float64]) -> ProcessLayer:
        return replace(self, sigma2=float(np.exp(values[0])), lengthscale=float(np.exp(values[1])))


def place_centroids(
    domain: Domain, per_dim: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Regulaeres Gitter mit per_dim^d Zentren (inkl. Raender) und Aperturen."""
    if per_dim < 1:
        msg = f"per_dim muss >= 1 sein, erhalten: {per_dim}"
        raise InvalidParameterError(msg)
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(domain.lower, domain.upper, strict=True)]
    spacing = domain.sides / (per_dim - 1) if per_dim > 1 else domain.sides
    if domain.dim == 1:
        grid = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1])
        grid = np.column_stack([gx.ravel(), gy.ravel()])
    apertures = np.full(grid.shape[0], APERTURE_FACTOR * float(np.max(spacing)))
    return grid, apertures


def make_process_layer(
    domain: Domain, per_dim: int, *, sigma2: float = 1.0, lengthscale: float | None = None
) -> ProcessLayer:
    """Prozess-Layer mit Startwert l = 1/4 Gebietsseite (falls nicht angegeben)."""
    centroids, apertures = place_centroids(domain, per_dim)
    if lengthscale is None:
        lengthscale = 0.25 * float(np.max(domain.sides))
    return ProcessLayer(
        centroids=centroids, apertures=apertures, sigma2=sigma2, lengthscale=lengthscale
    )


def bisquare_matrix(layer: ProcessLayer, locations: LocationSet) -> NDArray[np.float64]:
    """N x r Basismatrix A mit Eintraegen in [0, 1]."""
    if locations.dim != layer.dim:
        msg = f"Dimension der Orte ({locations.dim}) passt nicht zu den Zentren ({layer.dim})"
        raise InvalidParameterError(msg)
    ratio_sq = cdist(locations.coords, layer.centroids, "sqeuclidean") / layer.apertures**2
    inner = np.clip(1.0 - ratio_sq, 0.0, None)
    result: NDArray[np.float64] = inner**2
    return result


def bisquare_vjp(
    layer: ProcessLayer, locations: LocationSet, g_a: NDArray[np.float64]
) -> NDArray[np.float64]:
    """Kotangente der Orte aus der Kotangente von A (N x d)."""
    u = locations.coords
    ratio_sq = cdist(u, layer.centroids, "sqeuclidean") / layer.apertures**2
    inner = np.clip(1.0 - ratio_sq, 0.0, None)
    # dA_ij/du_i = -4 (1 - d^2/delta^2)_+ (u_i - gamma_j) / delta_j^2
    b = g_a * inner * (-4.0 / layer.apertures**2)
    result: NDArray[np.float64] = b.sum(axis=1)[:, None] * u - b @ layer.centroids
    return result


def _distances(layer: ProcessLayer) -> NDArray[np.float64]:
    return squareform(pdist(layer.centroids)) if layer.r > 1 else np.zeros((1, 1))


def weight_cov(layer: ProcessLayer) -> NDArray[np.float64]:
    """Sigma_tau = sigma^2 exp(-D / l), exakt symmetrisch, Diagonale sigma^2."""
    result: NDArray[np.float64] = layer.sigma2 * np.exp(-_distances(layer) / layer.lengthscale)
    return result


def jittered_weight_cov(layer: ProcessLayer) -> NDArray[np.float64]:
    """Sigma_tau + 1e-8 sigma^2 I (Grundlage aller Faktorisierungen)."""
    cov = weight_cov(layer)
    cov[np.diag_indices_from(cov)] += JITTER * layer.sigma2
    return cov


def weight_cov_log_grads(
    layer: ProcessLayer,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Ableitungen der gejitterten Kovarianz nach log sigma^2 und log l."""
    dist = _distances(layer)
    corr = np.exp(-dist / layer.lengthscale)
    d_log_sigma2 = jittered_weight_cov(layer)
    d_log_l = layer.sigma2 * corr * dist / layer.lengthscale
    return d_log_sigma2, d_log_l


def safe_cholesky(matrix: NDArray[np.float64], what: str = "Kovarianz") -> NDArray[np.float64]:
    """Untere Cholesky-Zerlegung; Fehlschlag als IllConditionedCovarianceError."""
    try:
        result: NDArray[np.float64] = cholesky(matrix, lower=True)
    except LinAlgError as e:
        msg = f"Cholesky-Zerlegung der {what} fehlgeschlagen: {e}"
        raise IllConditionedCovarianceError(msg) from e
    return result
