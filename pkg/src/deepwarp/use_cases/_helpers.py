"""Shared Hilfsfunktionen fuer Use Cases.

Aufbau von Stack und Prozess-Layer aus der Architektur-Beschreibung sowie
Umwandlung zwischen Fit-Objekten und dem persistierten Artefakt.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from deepwarp.domain.baseline import MaternParams
from deepwarp.domain.core import (
    Dataset,
    Domain,
    InvalidParameterError,
    KnotSet,
    LocationSet,
)
from deepwarp.domain.models import (
    AwuUnit,
    MobiusUnit,
    ModelArtifact,
    ModelKind,
    SrRbfUnit,
    VariationalBlockModel,
)
from deepwarp.domain.sdsp import (
    SdspFit,
    VariationalBlock,
    VariationalState,
    default_priors,
)
from deepwarp.domain.siwgp import SiwgpFit
from deepwarp.domain.toplayer import ProcessLayer, make_process_layer
from deepwarp.domain.warp import (
    WarpLayer,
    WarpStack,
    build_sr_rbf,
    make_awu,
    make_mobius,
)

logger = logging.getLogger(__name__)

Unit = AwuUnit | SrRbfUnit | MobiusUnit


def layer_input_domain(index: int, domain: Domain) -> Domain:
    """Eingabegebiet von Layer ``index``: G fuer den ersten, sonst das Einheitsquadrat."""
    return domain if index == 0 else Domain.unit(domain.dim)


def build_stack(units: Sequence[Unit], domain: Domain, knots: KnotSet) -> WarpStack:
    """Stack mit identitaetsnahen Startgewichten aus der Architektur bauen."""
    layers: list[WarpLayer] = []
    for unit in units:
        input_domain = layer_input_domain(len(layers), domain)
        if isinstance(unit, AwuUnit):
            if unit.axis >= domain.dim:
                msg = f"AWU-Achse {unit.axis} bei {domain.dim}D-Gebiet"
                raise InvalidParameterError(msg)
            layers.append(make_awu(unit.axis, unit.r, input_domain, steepness=unit.steepness))
        elif isinstance(unit, SrRbfUnit):
            layers.extend(build_sr_rbf(unit.l, input_domain))
        else:
            layers.append(make_mobius(input_domain))
    return WarpStack(layers=tuple(layers), knots=knots, domain=domain)


def top_domain(stack: WarpStack) -> Domain:
    """Gebiet D_n des Top-Layers: G ohne Warping, sonst das Einheitsquadrat."""
    return stack.domain if stack.n_layers == 0 else Domain.unit(stack.domain.dim)


def build_process(stack: WarpStack, per_dim: int) -> ProcessLayer:
    return make_process_layer(top_domain(stack), per_dim)


def center(data: Dataset, enabled: bool) -> tuple[Dataset, float]:
    """Z um den Mittelwert zentrieren (Modelle haben Erwartung null)."""
    if not enabled:
        return data, 0.0
    offset = float(np.mean(data.z))
    shifted = Dataset(
        locations=data.locations, z=data.z - offset, noise_var=data.noise_var, seed=data.seed
    )
    return shifted, offset


def check_dimension(artifact: ModelArtifact, coords: NDArray[np.float64]) -> None:
    """Raises InvalidParameterError bei abweichender Dimension von Modell und Orten."""
    if coords.shape[0] and coords.shape[1] != artifact.dim:
        msg = f"Modell ist {artifact.dim}D, Orte sind {coords.shape[1]}D"
        raise InvalidParameterError(msg)


# --- Artefakt ---


def _tolist(values: NDArray[np.float64]) -> list[float]:
    return [float(v) for v in np.ravel(values)]


def artifact_from_siwgp(
    fit: SiwgpFit, kind: ModelKind, units: Sequence[Unit], per_dim: int, offset: float, seed: int
) -> ModelArtifact:
    if fit.data is None:
        msg = "Fit enthaelt keine Trainingsdaten"
        raise InvalidParameterError(msg)
    params = np.concatenate(
        [fit.stack.params(), fit.process.log_params(), [np.log(fit.noise_var)]]
    )
    return ModelArtifact(
        model=kind,
        lower=list(fit.stack.domain.lower),
        upper=list(fit.stack.domain.upper),
        architecture=list(units),
        top_per_dim=per_dim,
        params=_tolist(params),
        knots=fit.stack.knots.coords.tolist(),
        locations=fit.data.locations.coords.tolist(),
        z=_tolist(fit.data.z),
        z_offset=offset,
        seed=seed,
    )


def artifact_from_sdsp(
    fit: SdspFit,
    units: Sequence[Unit],
    per_dim: int,
    offset: float,
    *,
    n_mc: int,
    prior_var: float,
) -> ModelArtifact:
    base = artifact_from_siwgp(
        SiwgpFit(stack=fit.stack, process=fit.process, noise_var=fit.noise_var, data=fit.data),
        ModelKind.SDSP, units, per_dim, offset, fit.seed,
    )
    blocks = [
        VariationalBlockModel(mean=_tolist(b.mean), eta=b.eta.tolist()) for b in fit.vs.blocks
    ]
    full = bool(fit.vs.blocks and fit.vs.blocks[0].full)
    return base.model_copy(
        update={"variational": blocks, "n_mc": n_mc, "full_cov": full, "prior_var": prior_var}
    )


def artifact_from_gp(
    params: MaternParams, data: Dataset, domain: Domain, offset: float, seed: int
) -> ModelArtifact:
    return ModelArtifact(
        model=ModelKind.GP,
        lower=list(domain.lower),
        upper=list(domain.upper),
        params=_tolist(params.log_params()),
        locations=data.locations.coords.tolist(),
        z=_tolist(data.z),
        z_offset=offset,
        seed=seed,
    )


def artifact_dataset(artifact: ModelArtifact) -> Dataset:
    """Zentrierte Trainingsdaten aus dem Artefakt."""
    return Dataset(
        locations=LocationSet(np.array(artifact.locations)),
        z=np.array(artifact.z),
        seed=artifact.seed,
    )


def artifact_domain(artifact: ModelArtifact) -> Domain:
    return Domain(lower=tuple(artifact.lower), upper=tuple(artifact.upper))


def restore_siwgp(artifact: ModelArtifact) -> SiwgpFit:
    """SIWGP (bzw. FRK) aus dem Artefakt wiederherstellen."""
    skeleton = build_stack(
        artifact.architecture, artifact_domain(artifact), KnotSet(np.array(artifact.knots))
    )
    theta = np.array(artifact.params)
    n_warp = skeleton.n_params
    if theta.shape[0] != n_warp + 3:
        msg = f"Artefakt hat {theta.shape[0]} Parameter, Architektur erwartet {n_warp + 3}"
        raise InvalidParameterError(msg)
    stack = skeleton.with_params(theta[:n_warp])
    process = build_process(stack, artifact.top_per_dim).with_log_params(
        theta[n_warp : n_warp + 2]
    )
    return SiwgpFit(
        stack=stack,
        process=process,
        noise_var=float(np.exp(theta[-1])),
        data=artifact_dataset(artifact),
    )


def restore_sdsp(artifact: ModelArtifact) -> SdspFit:
    point = restore_siwgp(artifact)
    vs = VariationalState(
        blocks=tuple(
            VariationalBlock(mean=np.array(b.mean), eta=np.array(b.eta), full=artifact.full_cov)
            for b in artifact.variational
        )
    )
    assert point.data is not None
    return SdspFit(
        stack=point.stack,
        vs=vs,
        priors=default_priors(point.stack, var=artifact.prior_var),
        process=point.process,
        noise_var=point.noise_var,
        trace=[],
        seed=artifact.seed,
        data=point.data,
    )


def restore_gp(artifact: ModelArtifact) -> MaternParams:
    return MaternParams.from_log(np.array(artifact.params))
