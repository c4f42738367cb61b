"""Vorhersage aus einem gespeicherten Modell-Artefakt."""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray

from deepwarp.config import Settings
from deepwarp.domain.baseline import gp_predict
from deepwarp.domain.core import LocationSet, PredictiveSummary, RngStream
from deepwarp.domain.models import ModelArtifact, ModelKind
from deepwarp.domain.sdsp import predict_sdsp
from deepwarp.domain.siwgp import predict_siwgp
from deepwarp.use_cases._helpers import (
    artifact_dataset,
    check_dimension,
    restore_gp,
    restore_sdsp,
    restore_siwgp,
)

logger = logging.getLogger(__name__)


def predict_artifact(
    artifact: ModelArtifact,
    coords: NDArray[np.float64],
    *,
    settings: Settings | None = None,
    include_noise: bool = False,
) -> PredictiveSummary | None:
    """Praediktive Zusammenfassung an ``coords`` in Beobachtungseinheiten.

    Gibt ``None`` zurueck, wenn keine Orte uebergeben wurden.

    Raises:
        InvalidParameterError: Dimension der Orte passt nicht zum Modell.
    """
    if settings is None:
        settings = Settings()
    check_dimension(artifact, coords)
    if coords.shape[0] == 0:
        logger.info("Keine Vorhersageorte - nur Kopfzeile")
        return None
    # Doppelte Orte einmal vorhersagen, damit sie identische Zusammenfassungen erhalten
    unique, inverse = np.unique(coords, axis=0, return_inverse=True)
    targets = LocationSet(unique)

    if artifact.model is ModelKind.GP:
        summary = gp_predict(
            restore_gp(artifact), artifact_dataset(artifact), targets, include_noise=include_noise
        )
    elif artifact.model is ModelKind.SDSP:
        fit = restore_sdsp(artifact)
        summary = predict_sdsp(
            fit, targets, n_mc=artifact.n_mc, per_component=settings.per_component,
            rng=RngStream(artifact.seed).substream(1), include_noise=include_noise,
        )
    else:
        summary = predict_siwgp(restore_siwgp(artifact), targets, include_noise=include_noise)
    logger.info("%d Vorhersagen an %d Orten (%s)", coords.shape[0], targets.n, artifact.model)
    return _expand(summary, np.ravel(inverse)).shifted(artifact.z_offset)


def _expand(summary: PredictiveSummary, index: NDArray[np.intp]) -> PredictiveSummary:
    return PredictiveSummary(
        mean=summary.mean[index],
        sd=summary.sd[index],
        lower=summary.lower[index],
        upper=summary.upper[index],
        samples=None if summary.samples is None else summary.samples[index],
    )
