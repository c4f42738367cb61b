"""CSV-Dateiformate fuer Beobachtungen, Vorhersageorte, Vorhersagen, Wahrheit und Szenen.

Schemata (Kopfzeile Pflicht):
    Daten:       s1[,s2],z
    Orte:        s1[,s2]
    Vorhersagen: s1[,s2],pred_mean,pred_sd,lower95,upper95
    Wahrheit:    s1[,s2],y
    Szene:       row,col,value
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from deepwarp.domain.core import (
    Dataset,
    DeepwarpError,
    LocationSet,
    PredictiveSummary,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
"""Ausgabeformat fuer Gleitkommazahlen (byte-identische Dateien bei gleichem Seed)."""

PREDICTION_COLUMNS = ["pred_mean", "pred_sd", "lower95", "upper95"]


class DataFormatError(DeepwarpError):
    """Fehlerhafte Eingabedatei; ``line`` ist 1-basiert (Kopfzeile = 1)."""

    def __init__(self, message: str, path: str | Path, line: int | None = None) -> None:
        super().__init__(message)
        self.path = str(path)
        self.line = line


# --- Lesen ---


def _read_frame(path: str | Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, skipinitialspace=True, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError as e:
        msg = f"{path}: Datei ist leer (Kopfzeile fehlt)"
        raise DataFormatError(msg, path, line=1) from e
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        msg = f"{path}: CSV nicht lesbar ({e})"
        raise DataFormatError(msg, path) from e


def _coordinate_columns(frame: pd.DataFrame, path: str | Path) -> list[str]:
    columns = [c for c in ("s1", "s2") if c in frame.columns]
    if columns not in (["s1"], ["s1", "s2"]):
        msg = f"{path}: Spalten s1[,s2] erwartet, gefunden: {list(frame.columns)}"
        raise DataFormatError(msg, path, line=1)
    return columns


def _numeric(frame: pd.DataFrame, columns: list[str], path: str | Path) -> NDArray[np.float64]:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        msg = f"{path}: Spalten fehlen: {missing}"
        raise DataFormatError(msg, path, line=1)
    values = frame[columns].apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if np.any(bad):
        row, col = np.argwhere(bad)[0]
        line = int(row) + 2
        msg = f"{path}:{line}: Wert '{frame[columns[col]].iloc[row]}' in Spalte {columns[col]}"
        raise DataFormatError(msg, path, line=line)
    return values


def read_dataset_csv(path: str | Path, *, noise_var: float = 1.0, seed: int = 0) -> Dataset:
    """Beobachtungsdatei s1[,s2],z einlesen.

    Raises:
        DataFormatError: Fehlende Spalten, nicht-numerische Werte, keine Datenzeilen.
    """
    frame = _read_frame(path)
    coords_cols = _coordinate_columns(frame, path)
    values = _numeric(frame, [*coords_cols, "z"], path)
    if values.shape[0] == 0:
        msg = f"{path}: keine Datenzeilen"
        raise DataFormatError(msg, path, line=2)
    logger.info("%d Beobachtungen aus %s gelesen", values.shape[0], path)
    return Dataset(
        locations=LocationSet(values[:, :-1]), z=values[:, -1], noise_var=noise_var, seed=seed
    )


def read_locations_csv(path: str | Path) -> NDArray[np.float64]:
    """Vorhersageorte s1[,s2]; leere Dateien (nur Kopfzeile) ergeben ein (0, d)-Array."""
    frame = _read_frame(path)
    return _numeric(frame, _coordinate_columns(frame, path), path)


def read_truth_csv(path: str | Path) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Wahre Prozesswerte s1[,s2],y auf dem Validierungsgitter."""
    frame = _read_frame(path)
    cols = _coordinate_columns(frame, path)
    values = _numeric(frame, [*cols, "y"], path)
    return values[:, :-1], values[:, -1]


def read_predictions_csv(
    path: str | Path,
) -> tuple[NDArray[np.float64], PredictiveSummary]:
    """Vorhersagedatei einlesen (Orte und Gauss-Zusammenfassung)."""
    frame = _read_frame(path)
    cols = _coordinate_columns(frame, path)
    values = _numeric(frame, [*cols, *PREDICTION_COLUMNS], path)
    d = len(cols)
    summary = PredictiveSummary(
        mean=values[:, d], sd=values[:, d + 1], lower=values[:, d + 2], upper=values[:, d + 3]
    )
    return values[:, :d], summary


def read_scene_csv(path: str | Path) -> NDArray[np.float64]:
    """Vorgerasterte Szene row,col,value als (rows x cols)-Matrix.

    Raises:
        DataFormatError: Zellen fehlen oder sind doppelt.
    """
    frame = _read_frame(path)
    values = _numeric(frame, ["row", "col", "value"], path)
    if values.shape[0] == 0:
        msg = f"{path}: keine Rasterzellen"
        raise DataFormatError(msg, path, line=2)
    idx = values[:, :2].astype(np.intp)
    if np.any(idx < 0) or np.any(idx != values[:, :2]):
        msg = f"{path}: row/col muessen nichtnegative ganze Zahlen sein"
        raise DataFormatError(msg, path)
    rows, cols = int(idx[:, 0].max()) + 1, int(idx[:, 1].max()) + 1
    flat = idx[:, 0] * cols + idx[:, 1]
    if np.unique(flat).shape[0] != flat.shape[0] or flat.shape[0] != rows * cols:
        msg = f"{path}: unvollstaendiges oder doppeltes Raster ({flat.shape[0]} von {rows * cols})"
        raise DataFormatError(msg, path)
    grid = np.empty(rows * cols)
    grid[flat] = values[:, 2]
    return grid.reshape(rows, cols)


# --- Schreiben ---


def _coordinate_frame(coords: NDArray[np.float64]) -> pd.DataFrame:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim == 1:
        coords = coords[:, None]
    return pd.DataFrame({f"s{k + 1}": coords[:, k] for k in range(coords.shape[1])})


def _write(frame: pd.DataFrame, path: str | Path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info("%d Zeilen nach %s geschrieben", len(frame), path)


def write_dataset_csv(path: str | Path, data: Dataset) -> None:
    frame = _coordinate_frame(data.locations.coords)
    frame["z"] = data.z
    _write(frame, path)


def write_truth_csv(
    path: str | Path, coords: NDArray[np.float64], y: NDArray[np.float64]
) -> None:
    frame = _coordinate_frame(coords)
    frame["y"] = y
    _write(frame, path)


def write_predictions_csv(
    path: str | Path, coords: NDArray[np.float64], summary: PredictiveSummary | None
) -> None:
    """Vorhersagen schreiben; ohne Zusammenfassung (keine Orte) nur die Kopfzeile."""
    frame = _coordinate_frame(coords)
    if summary is None:
        for name in PREDICTION_COLUMNS:
            frame[name] = np.empty(0)
    else:
        frame["pred_mean"] = summary.mean
        frame["pred_sd"] = summary.sd
        frame["lower95"] = summary.lower
        frame["upper95"] = summary.upper
    _write(frame, path)


def write_scene_csv(path: str | Path, values: NDArray[np.float64]) -> None:
    rows, cols = values.shape
    r, c = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    _write(pd.DataFrame({"row": r.ravel(), "col": c.ravel(), "value": values.ravel()}), path)


def write_warp_csv(
    path: str | Path, inputs: NDArray[np.float64], outputs: NDArray[np.float64]
) -> None:
    """Koordinatenpaare (Eingabe s, Ausgabe f(s)) eines Exportgitters."""
    frame = _coordinate_frame(inputs)
    for k in range(outputs.shape[1]):
        frame[f"f{k + 1}"] = outputs[:, k]
    _write(frame, path)
