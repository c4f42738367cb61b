"""Diagnose: Vorhersagen gegen die Wahrheit bewerten."""

from __future__ import annotations

import logging

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

from deepwarp.domain.core import InvalidParameterError, PredictiveSummary
from deepwarp.domain.scoring import ScoreReport, score_report, threat_curve

logger = logging.getLogger(__name__)

LOCATION_TOL: float = 1e-8


class ThreatPoint(BaseModel):
    threshold: float
    threat_score: float


class DiagnosisReport(BaseModel):
    """Inhalt von ``scores.json``."""

    scores: ScoreReport
    z_obs: float | None = None
    threat_curve: list[ThreatPoint] = []


def diagnose(
    pred_coords: NDArray[np.float64],
    summary: PredictiveSummary,
    truth_coords: NDArray[np.float64],
    truth: NDArray[np.float64],
    *,
    thresholds: NDArray[np.float64] | None = None,
    z_obs: float | None = None,
) -> DiagnosisReport:
    """MAPE, RMSPE, CRPS, IS und optional die Threat-Score-Kurve.

    Raises:
        InvalidParameterError: Orte von Vorhersage und Wahrheit stimmen nicht ueberein.
    """
    if pred_coords.shape != truth_coords.shape or not np.allclose(
        pred_coords, truth_coords, atol=LOCATION_TOL, rtol=0.0
    ):
        msg = (
            f"Orte der Vorhersagen ({pred_coords.shape[0]}) und der Wahrheit "
            f"({truth_coords.shape[0]}) stimmen nicht ueberein"
        )
        raise InvalidParameterError(msg)
    report = DiagnosisReport(scores=score_report(truth, summary))
    if thresholds is not None:
        if z_obs is None:
            msg = "Threat-Score-Kurve braucht z_obs"
            raise InvalidParameterError(msg)
        curve = threat_curve(summary.mean, truth, thresholds, z_obs)
        report.z_obs = z_obs
        report.threat_curve = [ThreatPoint(threshold=t, threat_score=s) for t, s in curve]
    logger.info(
        "RMSPE %.4g, CRPS %.4g, IS %.4g (n=%d)",
        report.scores.rmspe, report.scores.crps, report.scores.is95, report.scores.n,
    )
    return report
