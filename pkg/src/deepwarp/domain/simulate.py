"""Testprozess-Generatoren fuer die Simulationsexperimente.

- Y11: Rechteckfunktion auf [-0.5, 0.5].
- Y12: glatter Anteil fuer s < 0, Sprungstellen auf [0.2, 0.4].
- MATERN: stationaeres Matern-3/2-Feld (Cholesky mit Jitter).
- SIWGP_DRAW: Ziehung aus einem bekannten SIWGP (Y(s) = w' phi(f(s))).
- SCENE: synthetische nichtstationaere Rasterszene mit strahlungsaehnlichen Werten.

Alle Generatoren sind bei festem Seed bitgenau reproduzierbar.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import StrEnum

import numpy as np
from numpy.typing import NDArray
from scipy.spatial.distance import cdist

from deepwarp.domain.baseline import MaternParams, matern32
from deepwarp.domain.core import (
    Dataset,
    Domain,
    InvalidParameterError,
    LocationSet,
    RngStream,
)
from deepwarp.domain.sdsp import default_priors
from deepwarp.domain.toplayer import (
    ProcessLayer,
    bisquare_matrix,
    jittered_weight_cov,
    safe_cholesky,
)
from deepwarp.domain.warp import MobiusLayer, WarpStack, warp_forward

logger = logging.getLogger(__name__)

# ---------------------------------------------------------------------------
# Konfiguration
# ---------------------------------------------------------------------------

DOMAIN_1D: Domain = Domain(lower=(-0.5,), upper=(0.5,))
DOMAIN_2D: Domain = Domain(lower=(-0.5, -0.5), upper=(0.5, 0.5))

WEIGHT_DRAW_VAR: float = 1.0
"""Varianz der Gewichtsziehungen um die Prior-Erwartungen (Simulation)."""

MOBIUS_MAX_TRIES: int = 1000

SCENE_LEVEL: float = 160.0
"""Mittleres Niveau synthetischer Szenen (Schwellwert z_obs)."""

SCENE_SCALE: float = 50.0


class SimProcess(StrEnum):
    Y11 = "Y11"
    Y12 = "Y12"
    MATERN = "MATERN"
    SIWGP_DRAW = "SIWGP_DRAW"
    SCENE = "SCENE"


@dataclass(frozen=True, slots=True, eq=False)
class SimSpec:
    """Beschreibung eines Simulationslaufs.

    Attributes:
        process: Prozesskennung.
        n: Anzahl Beobachtungen.
        noise_var: Messfehlervarianz (0 = ohne Rauschen).
        seed: Master-Seed.
        domain: Beobachtungsgebiet G.
        stack: Warping fuer SIWGP_DRAW.
        process_layer: Top-Layer fuer SIWGP_DRAW.
        matern: Parameter fuer MATERN.
        random_warp: Warping-Gewichte zufaellig ziehen (SIWGP_DRAW).
    """

    process: SimProcess
    n: int
    noise_var: float = 0.01
    seed: int = 0
    domain: Domain = DOMAIN_1D
    stack: WarpStack | None = None
    process_layer: ProcessLayer | None = None
    matern: MaternParams | None = None
    random_warp: bool = True

    def __post_init__(self) -> None:
        if self.n < 1:
            msg = f"N muss >= 1 sein, erhalten: {self.n}"
            raise InvalidParameterError(msg)
        if self.noise_var < 0:
            msg = f"noise_var muss >= 0 sein, erhalten: {self.noise_var}"
            raise InvalidParameterError(msg)


# ---------------------------------------------------------------------------
# 1D-Prozesse
# ---------------------------------------------------------------------------


def eval_y11(s: float | NDArray[np.float64]) -> float | NDArray[np.float64]:
    """-0.5 fuer |s| > 0.2, sonst 0.5."""
    arr = np.asarray(s, dtype=np.float64)
    result = np.where(np.abs(arr) > 0.2, -0.5, 0.5)
    return float(result) if result.ndim == 0 else result


def eval_y12(s: float | NDArray[np.float64]) -> float | NDArray[np.float64]:
    """exp(4 + 5 / (2s(10s + 5))) fuer -0.5 < s < 0; 1 auf [0.2, 0.3]; -1 auf (0.3, 0.4]."""
    arr = np.asarray(s, dtype=np.float64)
    smooth = (arr > -0.5) & (arr < 0.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        expo = np.exp(4.0 + 5.0 / (2.0 * arr * (10.0 * arr + 5.0)))
    result = np.select(
        [smooth, (arr >= 0.2) & (arr <= 0.3), (arr > 0.3) & (arr <= 0.4)],
        [expo, 1.0, -1.0],
        default=0.0,
    )
    return float(result) if result.ndim == 0 else result


# ---------------------------------------------------------------------------
# Felder
# ---------------------------------------------------------------------------


def sample_matern_field(
    grid: LocationSet, params: MaternParams, rng: RngStream
) -> NDArray[np.float64]:
    """Ziehung aus Gau(0, K) ueber Cholesky mit Jitter 1e-8 sigma^2."""
    cov = np.asarray(matern32(cdist(grid.coords, grid.coords), params))
    cov[np.diag_indices_from(cov)] += 1e-8 * params.variance
    chol = safe_cholesky(cov, "Matern-Kovarianz")
    result: NDArray[np.float64] = chol @ rng.normal(grid.n)
    return result


def draw_random_weights(
    stack: WarpStack, rng: RngStream, *, var: float = WEIGHT_DRAW_VAR
) -> WarpStack:
    """Zufaellige zulaessige Gewichte: AWU/RBF um die Prior-Erwartungen, Moebius
    standardnormal unter der Polbedingung (Verwerfungsverfahren)."""
    priors = iter(default_priors(stack, var=var))
    values = stack.params()
    for layer, sl in zip(stack.layers, stack.layer_slices(), strict=True):
        if isinstance(layer, MobiusLayer):
            for _ in range(MOBIUS_MAX_TRIES):
                candidate = rng.normal(8)
                if not layer.with_params(candidate).pole_violated():
                    break
            else:
                msg = "Keine zulaessige Moebius-Ziehung gefunden"
                raise InvalidParameterError(msg)
            values[sl] = candidate
        else:
            prior = next(priors)
            values[sl] = prior.mean + np.sqrt(prior.var) * rng.normal(layer.n_params)
    return stack.with_params(values)


def draw_top_weights(process: ProcessLayer, rng: RngStream) -> NDArray[np.float64]:
    """w ~ Gau(0, Sigma_tau)."""
    chol = safe_cholesky(jittered_weight_cov(process), "Gewichtskovarianz")
    result: NDArray[np.float64] = chol @ rng.normal(process.r)
    return result


def evaluate_siwgp(
    stack: WarpStack, process: ProcessLayer, weights: NDArray[np.float64], locations: LocationSet
) -> NDArray[np.float64]:
    """Y(s) = w' phi(f(s))."""
    f_n, _ = warp_forward(stack, locations)
    result: NDArray[np.float64] = bisquare_matrix(process, f_n) @ weights
    return result


def draw_siwgp(spec: SimSpec, locations: LocationSet, rng: RngStream) -> NDArray[np.float64]:
    """Prozesswerte eines bekannten SIWGP an den gegebenen Orten."""
    if spec.stack is None or spec.process_layer is None:
        msg = "SIWGP_DRAW braucht Stack und Prozess-Layer"
        raise InvalidParameterError(msg)
    stack = draw_random_weights(spec.stack, rng) if spec.random_warp else spec.stack
    weights = draw_top_weights(spec.process_layer, rng)
    return evaluate_siwgp(stack, spec.process_layer, weights, locations)


def add_noise(y: NDArray[np.float64], noise_var: float, rng: RngStream) -> NDArray[np.float64]:
    """Unabhaengiges Gauss-Rauschen mit Varianz noise_var."""
    if noise_var < 0:
        msg = f"noise_var muss >= 0 sein, erhalten: {noise_var}"
        raise InvalidParameterError(msg)
    if noise_var == 0:
        return np.array(y, dtype=np.float64)
    result: NDArray[np.float64] = y + np.sqrt(noise_var) * rng.normal(np.shape(y))
    return result


def sample_uniform(domain: Domain, n: int, rng: RngStream) -> LocationSet:
    """n unabhaengig gleichverteilte Orte im Gebiet."""
    lower = np.asarray(domain.lower)
    upper = np.asarray(domain.upper)
    return LocationSet(rng.uniform(lower, upper, (n, domain.dim)))


def regular_grid(domain: Domain, per_dim: int) -> LocationSet:
    """Regulaeres Gitter (1D: per_dim Punkte, 2D: per_dim^2, zeilenweise)."""
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in zip(domain.lower, domain.upper, strict=True)]
    if domain.dim == 1:
        return LocationSet(axes[0])
    gx, gy = np.meshgrid(axes[0], axes[1])
    return LocationSet(np.column_stack([gx.ravel(), gy.ravel()]))


# ---------------------------------------------------------------------------
# Gesamtlaeufe
# ---------------------------------------------------------------------------


def generate(spec: SimSpec, grid: LocationSet) -> tuple[Dataset, NDArray[np.float64]]:
    """Beobachtungen und wahre Prozesswerte auf dem Validierungsgitter erzeugen.

    Returns:
        (Datensatz mit verrauschten Beobachtungen, wahre Werte auf ``grid``)
    """
    rng = RngStream(spec.seed)
    locations = sample_uniform(spec.domain, spec.n, rng.substream(0))
    joint = LocationSet(np.vstack([locations.coords, grid.coords]))
    field_rng = rng.substream(1)

    if spec.process is SimProcess.Y11:
        values = np.asarray(eval_y11(joint.coords[:, 0]))
    elif spec.process is SimProcess.Y12:
        values = np.asarray(eval_y12(joint.coords[:, 0]))
    elif spec.process is SimProcess.MATERN:
        params = spec.matern or MaternParams(variance=1.0, range=0.05, noise_var=spec.noise_var)
        values = sample_matern_field(joint, params, field_rng)
    elif spec.process is SimProcess.SIWGP_DRAW:
        values = draw_siwgp(spec, joint, field_rng)
    else:
        msg = f"Prozess {spec.process} wird ueber simulate_scene erzeugt"
        raise InvalidParameterError(msg)

    y_obs, truth = values[: spec.n], values[spec.n :]
    z = add_noise(y_obs, spec.noise_var, rng.substream(2))
    logger.info("Simulation %s: N=%d, Gitter=%d", spec.process, spec.n, grid.n)
    noise_var = spec.noise_var if spec.noise_var > 0 else 1.0
    data = Dataset(locations=locations, z=z, noise_var=noise_var, seed=spec.seed)
    return data, truth


def scene_grid(rows: int, cols: int) -> LocationSet:
    """Zellmittelpunkte eines rows x cols Rasters, abgebildet auf [0, 1]^2."""
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    return LocationSet(
        np.column_stack([c.ravel() / max(cols - 1, 1), r.ravel() / max(rows - 1, 1)])
    )


def simulate_scene(
    stack: WarpStack, process: ProcessLayer, rows: int, cols: int, rng: RngStream
) -> NDArray[np.float64]:
    """Synthetische Szene (zeilenweise) mit Werten um SCENE_LEVEL."""
    warped = draw_random_weights(stack, rng)
    weights = draw_top_weights(process, rng)
    y = evaluate_siwgp(warped, process, weights, scene_grid(rows, cols))
    return SCENE_LEVEL + SCENE_SCALE * y


def split_cells(
    n_cells: int, n_train: int, rng: RngStream
) -> tuple[NDArray[np.intp], NDArray[np.intp]]:
    """Gleichverteilte Aufteilung der Zellen in Training und Validierung."""
    if not 0 < n_train < n_cells:
        msg = f"Trainingsgroesse {n_train} ausserhalb von (0, {n_cells})"
        raise InvalidParameterError(msg)
    perm = rng.permutation(n_cells)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])
