"""Diagnostiken fuer Vorhersagen: MAPE, RMSPE, CRPS, Intervall-Score, Threat Score."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field
from scipy.stats import norm

from deepwarp.domain.core import InvalidParameterError, PredictiveSummary

ALPHA: float = 0.05
"""Niveau des Intervall-Scores (95%-Intervall)."""


class ScoreReport(BaseModel):
    """Vorhersage-Diagnostiken in Beobachtungseinheiten."""

    mape: float = Field(ge=0.0)
    rmspe: float = Field(ge=0.0)
    crps: float = Field(ge=0.0)
    is95: float = Field(ge=0.0)
    n: int = 0


def _check_pair(a: NDArray[np.float64], b: NDArray[np.float64]) -> None:
    if a.shape != b.shape:
        msg = f"Laengen passen nicht: {a.shape} vs. {b.shape}"
        raise InvalidParameterError(msg)
    if a.size == 0:
        msg = "Leere Vektoren koennen nicht bewertet werden"
        raise InvalidParameterError(msg)


def mape(truth: NDArray[np.float64], mean: NDArray[np.float64]) -> float:
    """Mittlerer absoluter Vorhersagefehler."""
    truth, mean = np.asarray(truth, float), np.asarray(mean, float)
    _check_pair(truth, mean)
    return float(np.mean(np.abs(truth - mean)))


def rmspe(truth: NDArray[np.float64], mean: NDArray[np.float64]) -> float:
    """Wurzel des mittleren quadratischen Vorhersagefehlers."""
    truth, mean = np.asarray(truth, float), np.asarray(mean, float)
    _check_pair(truth, mean)
    return float(np.sqrt(np.mean((truth - mean) ** 2)))


def crps_gaussian(
    mean: NDArray[np.float64], sd: NDArray[np.float64], truth: NDArray[np.float64]
) -> float:
    """Geschlossene CRPS-Form fuer Gauss-Vorhersagen, gemittelt ueber Orte.

    sd = 0 wird als Punktvorhersage behandelt (CRPS = |y - mu|).
    """
    mean, sd, truth = (np.asarray(v, float) for v in (mean, sd, truth))
    _check_pair(mean, truth)
    if np.any(sd < 0):
        msg = "Standardabweichungen muessen nichtnegativ sein"
        raise InvalidParameterError(msg)
    safe = np.where(sd > 0, sd, 1.0)
    z = (truth - mean) / safe
    scores = safe * (z * (2.0 * norm.cdf(z) - 1.0) + 2.0 * norm.pdf(z) - 1.0 / math.sqrt(math.pi))
    scores = np.where(sd > 0, scores, np.abs(truth - mean))
    return float(np.mean(scores))


def crps_samples(samples: NDArray[np.float64], truth: NDArray[np.float64]) -> float:
    """Stichproben-CRPS (1/M) sum|x_i - y| - (1/2M^2) sum sum|x_i - x_j|, gemittelt.

    Der Doppelsummen-Term wird ueber die sortierten Ziehungen in O(M log M) berechnet.
    """
    samples = np.atleast_2d(np.asarray(samples, float))
    truth = np.asarray(truth, float)
    if samples.shape[1] < 2:
        msg = f"Mindestens 2 Ziehungen je Ort noetig, erhalten: {samples.shape[1]}"
        raise InvalidParameterError(msg)
    if samples.shape[0] != truth.shape[0]:
        msg = f"{samples.shape[0]} Orte mit Ziehungen, aber {truth.shape[0]} Wahrheitswerte"
        raise InvalidParameterError(msg)
    m = samples.shape[1]
    accuracy = np.mean(np.abs(samples - truth[:, None]), axis=1)
    ordered = np.sort(samples, axis=1)
    weights = 2.0 * np.arange(1, m + 1) - m - 1.0
    spread = (ordered @ weights) / m**2
    return float(np.mean(accuracy - spread))


def interval_score95(
    lower: NDArray[np.float64], upper: NDArray[np.float64], truth: NDArray[np.float64]
) -> float:
    """Intervall-Score des 95%-Intervalls, gemittelt ueber Orte."""
    lower, upper, truth = (np.asarray(v, float) for v in (lower, upper, truth))
    _check_pair(lower, truth)
    _check_pair(upper, truth)
    if np.any(lower > upper):
        msg = "Untere Intervallgrenze liegt ueber der oberen"
        raise InvalidParameterError(msg)
    penalty = 2.0 / ALPHA
    scores = (
        (upper - lower)
        + penalty * (lower - truth) * (truth < lower)
        + penalty * (truth - upper) * (truth > upper)
    )
    return float(np.mean(scores))


def threat_score(
    pred_field: NDArray[np.float64],
    true_field: NDArray[np.float64],
    z_th_pred: float,
    z_th_obs: float,
) -> float:
    """TP / (TP + FP + FN); positiv heisst Wert strikt unter dem Schwellwert."""
    pred_field, true_field = np.asarray(pred_field, float), np.asarray(true_field, float)
    if pred_field.shape != true_field.shape:
        msg = f"Feldgroessen passen nicht: {pred_field.shape} vs. {true_field.shape}"
        raise InvalidParameterError(msg)
    pred_pos = pred_field < z_th_pred
    true_pos = true_field < z_th_obs
    tp = int(np.sum(pred_pos & true_pos))
    fp = int(np.sum(pred_pos & ~true_pos))
    fn = int(np.sum(~pred_pos & true_pos))
    total = tp + fp + fn
    return tp / total if total else 0.0


def threat_curve(
    pred_field: NDArray[np.float64],
    true_field: NDArray[np.float64],
    thresholds: NDArray[np.float64],
    z_th_obs: float,
) -> list[tuple[float, float]]:
    """Threat Score ueber ein Gitter von Vorhersage-Schwellwerten."""
    return [
        (float(t), threat_score(pred_field, true_field, float(t), z_th_obs)) for t in thresholds
    ]


def score_report(truth: NDArray[np.float64], summary: PredictiveSummary) -> ScoreReport:
    """Alle Diagnostiken; CRPS aus Ziehungen, falls die Vorhersage eine Mischung ist."""
    truth = np.asarray(truth, float)
    if summary.samples is not None and summary.samples.shape[1] >= 2:
        crps = crps_samples(summary.samples, truth)
    else:
        crps = crps_gaussian(summary.mean, summary.sd, truth)
    return ScoreReport(
        mape=mape(truth, summary.mean),
        rmspe=rmspe(truth, summary.mean),
        crps=max(crps, 0.0),
        is95=interval_score95(summary.lower, summary.upper, truth),
        n=int(truth.shape[0]),
    )
