"""Sweep: mehrere Architekturen bzw. AWU-Groessen auf denselben Daten vergleichen."""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

from deepwarp.config import Settings
from deepwarp.domain.core import Dataset
from deepwarp.domain.models import AwuUnit, ModelKind, RunConfig, parse_architecture
from deepwarp.domain.scoring import ScoreReport
from deepwarp.use_cases.diagnose import diagnose
from deepwarp.use_cases.fit import fit_model
from deepwarp.use_cases.predict import predict_artifact

logger = logging.getLogger(__name__)


class SweepEntry(BaseModel):
    label: str
    model: ModelKind
    awu_r: int | None = None
    wall_time_s: float
    scores: ScoreReport


class SweepReport(BaseModel):
    """Inhalt von ``sweep.json``."""

    n_obs: int
    n_truth: int
    entries: list[SweepEntry] = []


def _warped_kind(config: RunConfig) -> ModelKind:
    return ModelKind.SDSP if config.model is ModelKind.SDSP else ModelKind.SIWGP


def _variants(config: RunConfig, dim: int) -> list[tuple[str, RunConfig, int | None]]:
    variants: list[tuple[str, RunConfig, int | None]] = []
    for code in config.sweep.architectures:
        if code.strip().upper() == "GP":
            variants.append(
                ("GP", config.model_copy(update={"architecture": [], "model": ModelKind.GP}), None)
            )
            continue
        units = parse_architecture(code, dim)
        if dim != 2 and any(not isinstance(u, AwuUnit) for u in units):
            logger.warning("Architektur '%s' braucht 2D-Daten - uebersprungen", code)
            continue
        model = _warped_kind(config) if units else ModelKind.FRK
        variants.append(
            (code or "FRK", config.model_copy(update={"architecture": units, "model": model}), None)
        )
    for r in config.sweep.awu_sizes:
        units = [AwuUnit(axis=k, r=r) for k in range(dim)]
        update = {"architecture": units, "model": _warped_kind(config)}
        variants.append((f"AWU(r={r})", config.model_copy(update=update), r))
    return variants


def run_sweep(
    config: RunConfig,
    data: Dataset,
    truth_coords: NDArray[np.float64],
    truth: NDArray[np.float64],
    *,
    settings: Settings | None = None,
) -> SweepReport:
    """Jede Variante fitten, an den Wahrheitsorten vorhersagen und bewerten.

    Architekturen ohne Einheit laufen als FRK, "GP" als stationaerer Vergleichs-GP.
    Varianten mit Einheiten verwenden SIWGP bzw. SDSP gemaess ``config.model``.
    """
    if settings is None:
        settings = Settings()
    report = SweepReport(n_obs=data.n, n_truth=truth.shape[0])
    for label, variant, awu_r in _variants(config, data.dim):
        logger.info("Sweep-Variante %s (%s)", label, variant.model)
        artifact, fit_report = fit_model(variant, data, settings=settings)
        summary = predict_artifact(artifact, truth_coords, settings=settings)
        if summary is None:
            continue
        scores = diagnose(truth_coords, summary, truth_coords, truth).scores
        report.entries.append(
            SweepEntry(
                label=label, model=variant.model, awu_r=awu_r,
                wall_time_s=fit_report.wall_time_s, scores=scores,
            )
        )
    return report
