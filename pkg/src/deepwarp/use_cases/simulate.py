"""Simulation: Beobachtungen und Wahrheit auf dem Validierungsgitter erzeugen."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from deepwarp.domain.baseline import MaternParams
from deepwarp.domain.core import Dataset, Domain, KnotSet, LocationSet, RngStream
from deepwarp.domain.models import (
    AwuUnit,
    MobiusUnit,
    SimulationConfig,
    SrRbfUnit,
)
from deepwarp.domain.simulate import (
    DOMAIN_2D,
    SimProcess,
    SimSpec,
    add_noise,
    generate,
    regular_grid,
    scene_grid,
    simulate_scene,
    split_cells,
)
from deepwarp.domain.toplayer import make_process_layer
from deepwarp.domain.warp import SCENE_STEEPNESS, WarpStack
from deepwarp.use_cases._helpers import Unit, build_stack, top_domain

logger = logging.getLogger(__name__)

KNOTS_PER_DIM: int = 40
"""Knotengitter fuer bekannte Simulations-Stacks (40 x 40 in 2D)."""

SCENE_PER_DIM: int = 20


def preset_units(name: str) -> list[Unit]:
    """Y21: zwei AWUs + SR-RBF(1); Y22: zusaetzlich eine Moebius-Einheit."""
    units: list[Unit] = [AwuUnit(axis=0), AwuUnit(axis=1), SrRbfUnit(l=1)]
    if name == "Y22":
        units.append(MobiusUnit())
    return units


def truth_stack(units: list[Unit], domain: Domain) -> WarpStack:
    knots = KnotSet(regular_grid(domain, KNOTS_PER_DIM).coords)
    return build_stack(units, domain, knots)


@dataclass(frozen=True, slots=True, eq=False)
class SimulationResult:
    """Simulierte Beobachtungen, Wahrheit und (bei Szenen) das volle Raster."""

    data: Dataset
    truth_coords: NDArray[np.float64]
    truth: NDArray[np.float64]
    scene: NDArray[np.float64] | None = None


def _domain(sim: SimulationConfig) -> Domain:
    if sim.preset is not None and sim.dim != 2:
        return DOMAIN_2D
    return Domain(lower=tuple(sim.lower), upper=tuple(sim.upper))


def run_simulation(
    sim: SimulationConfig, seed: int, *, scene: NDArray[np.float64] | None = None
) -> SimulationResult:
    """Simulationslauf nach Konfiguration.

    Bei SCENE wird ``scene`` (vorgerastert, z.B. aus read_scene_csv) verwendet,
    sonst eine synthetische Szene erzeugt.
    """
    if sim.process is SimProcess.SCENE:
        return _run_scene(sim, seed, scene)

    domain = _domain(sim)
    stack = process = None
    if sim.process is SimProcess.SIWGP_DRAW:
        units = preset_units(sim.preset) if sim.preset else list(sim.truth_architecture)
        stack = truth_stack(units, domain)
        process = make_process_layer(
            top_domain(stack), sim.truth_per_dim,
            sigma2=sim.truth_sigma2, lengthscale=sim.truth_lengthscale,
        )
    spec = SimSpec(
        process=sim.process,
        n=sim.n,
        noise_var=sim.noise_var,
        seed=seed,
        domain=domain,
        stack=stack,
        process_layer=process,
        matern=MaternParams(
            variance=sim.matern_variance, range=sim.matern_range,
            noise_var=sim.noise_var if sim.noise_var > 0 else 1.0,
        ),
        random_warp=sim.random_warp,
    )
    grid = regular_grid(domain, sim.effective_grid_per_dim)
    data, truth = generate(spec, grid)
    return SimulationResult(data=data, truth_coords=grid.coords, truth=truth)


def _run_scene(
    sim: SimulationConfig, seed: int, scene: NDArray[np.float64] | None
) -> SimulationResult:
    rng = RngStream(seed)
    if scene is None:
        units: list[Unit] = [
            AwuUnit(axis=0, steepness=SCENE_STEEPNESS),
            AwuUnit(axis=1, steepness=SCENE_STEEPNESS),
            SrRbfUnit(l=1),
        ]
        stack = truth_stack(units, Domain.unit(2))
        process = make_process_layer(
            top_domain(stack), SCENE_PER_DIM,
            sigma2=sim.truth_sigma2, lengthscale=sim.truth_lengthscale,
        )
        scene = simulate_scene(stack, process, sim.rows, sim.cols, rng.substream(0))
        scene = scene.reshape(sim.rows, sim.cols)
    rows, cols = scene.shape
    cells = scene_grid(rows, cols)
    values = scene.ravel()
    train, valid = split_cells(values.shape[0], sim.n_train, rng.substream(1))
    z = add_noise(values[train], sim.noise_var, rng.substream(2))
    data = Dataset(
        locations=LocationSet(cells.coords[train]),
        z=z,
        noise_var=sim.noise_var if sim.noise_var > 0 else 1.0,
        seed=seed,
    )
    logger.info("Szene %dx%d: %d Trainings-, %d Validierungszellen", rows, cols, train.size,
                valid.size)
    return SimulationResult(
        data=data, truth_coords=cells.coords[valid], truth=values[valid], scene=scene
    )
