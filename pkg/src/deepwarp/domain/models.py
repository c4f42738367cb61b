"""Pydantic-Modelle fuer Laufkonfiguration, Modell-Artefakt und Berichte.

Die Modelle sind reine Datencontainer (Serialisierung via Pydantic) und
haben keine Abhaengigkeiten zu Infrastruktur oder CLI.
"""

from __future__ import annotations

import logging
from enum import StrEnum
from typing import Annotated, Literal

from pydantic import BaseModel, Field, field_validator

from deepwarp.domain.core import InvalidParameterError
from deepwarp.domain.simulate import SimProcess
from deepwarp.domain.warp import DEFAULT_STEEPNESS

logger = logging.getLogger(__name__)


class ModelKind(StrEnum):
    SIWGP = "siwgp"
    SDSP = "sdsp"
    GP = "gp"
    FRK = "frk"


# --- Architektur-Einheiten ---


class AwuUnit(BaseModel):
    """Axiale Warping-Einheit; r zaehlt den linearen Term mit (r - 1 Sigmoide)."""

    unit: Literal["awu"] = "awu"
    axis: int = Field(0, ge=0)
    r: int = Field(51, ge=1)
    steepness: float = Field(DEFAULT_STEEPNESS, gt=0)


class SrRbfUnit(BaseModel):
    """SR-RBF(l): 3^l x 3^l RBF-Layer."""

    unit: Literal["sr_rbf"] = "sr_rbf"
    l: int = Field(1, ge=1, le=3)  # noqa: E741


class MobiusUnit(BaseModel):
    unit: Literal["mobius"] = "mobius"


UnitSpec = Annotated[AwuUnit | SrRbfUnit | MobiusUnit, Field(discriminator="unit")]


def parse_architecture(
    code: str, dim: int, *, awu_r: int = 51, steepness: float = DEFAULT_STEEPNESS
) -> list[AwuUnit | SrRbfUnit | MobiusUnit]:
    """Kurzschreibweise wie "A+S+M" in Einheiten uebersetzen.

    A = je eine AWU pro Achse, S = SR-RBF(1), M = Moebius; "" = keine Einheit.
    """
    units: list[AwuUnit | SrRbfUnit | MobiusUnit] = []
    for token in filter(None, (t.strip().upper() for t in code.split("+"))):
        if token == "A":
            units.extend(AwuUnit(axis=k, r=awu_r, steepness=steepness) for k in range(dim))
        elif token == "S":
            units.append(SrRbfUnit(l=1))
        elif token == "M":
            units.append(MobiusUnit())
        else:
            msg = f"Unbekannte Einheit '{token}' in Architektur '{code}'"
            raise InvalidParameterError(msg)
    return units


def architecture_label(units: list[AwuUnit | SrRbfUnit | MobiusUnit]) -> str:
    """Kurzbezeichnung einer Architektur ("" fuer das Modell ohne Warping)."""
    labels: list[str] = []
    for unit in units:
        label = {"awu": "A", "sr_rbf": "S", "mobius": "M"}[unit.unit]
        if not (label == "A" and labels and labels[-1] == "A"):
            labels.append(label)
    return "+".join(labels)


# --- Simulation ---

PresetName = Literal["Y21", "Y22"]


class SimulationConfig(BaseModel):
    """Parameter fuer ``deepwarp simulate``."""

    process: SimProcess = SimProcess.Y11
    n: int = Field(300, ge=1)
    noise_var: float = Field(0.01, ge=0.0)
    lower: list[float] = [-0.5]
    upper: list[float] = [0.5]
    grid_per_dim: int | None = Field(None, ge=2)

    # SIWGP_DRAW
    preset: PresetName | None = None
    truth_architecture: list[UnitSpec] = []
    truth_per_dim: int = Field(20, ge=1)
    truth_sigma2: float = Field(1.0, gt=0)
    truth_lengthscale: float = Field(0.04, gt=0)
    random_warp: bool = True

    # MATERN
    matern_variance: float = Field(1.0, gt=0)
    matern_range: float = Field(0.05, gt=0)

    # SCENE
    rows: int = Field(136, ge=2)
    cols: int = Field(203, ge=2)
    n_train: int = Field(4000, ge=1)
    scene_path: str | None = None

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def effective_grid_per_dim(self) -> int:
        """1001 Punkte in 1D, 50 x 50 in 2D, falls nicht gesetzt."""
        if self.grid_per_dim is not None:
            return self.grid_per_dim
        return 1001 if self.dim == 1 else 50


# --- Laufkonfiguration ---


class SweepConfig(BaseModel):
    """Architekturen und AWU-Groessen fuer ``deepwarp sweep``."""

    architectures: list[str] = ["", "A", "S", "M", "A+S", "A+S+M"]
    awu_sizes: list[int] = []


class PathsConfig(BaseModel):
    data: str = "data.csv"
    truth: str = "truth.csv"
    model: str = "model.json"
    predictions: str = "predictions.csv"


class RunConfig(BaseModel):
    """Inhalt der JSON-Konfigurationsdatei (``--config``)."""

    model: ModelKind = ModelKind.SIWGP
    architecture: list[UnitSpec] = []
    top_per_dim: int = Field(50, ge=1)
    n_mc: int = Field(10, ge=1)
    schedule: tuple[int, int, int] = (100, 100, 100)
    seed: int = 0
    covariance: Literal["full", "diagonal"] = "diagonal"
    center_data: bool = True
    retry_on_decrease: bool = False
    gp_steps: int = Field(500, ge=0)
    simulation: SimulationConfig = SimulationConfig()
    sweep: SweepConfig = SweepConfig()
    paths: PathsConfig = PathsConfig()

    @field_validator("schedule")
    @classmethod
    def _non_negative_schedule(cls, value: tuple[int, int, int]) -> tuple[int, int, int]:
        if any(n < 0 for n in value):
            msg = f"Schrittzahlen muessen >= 0 sein, erhalten: {value}"
            raise ValueError(msg)
        return value

    def effective_architecture(self) -> list[AwuUnit | SrRbfUnit | MobiusUnit]:
        """FRK und GP verwenden kein Warping."""
        if self.model in (ModelKind.FRK, ModelKind.GP):
            return []
        return list(self.architecture)

    def check_dimension(self, dim: int) -> None:
        """Architektur gegen die Datendimension pruefen.

        Raises:
            InvalidParameterError: AWU-Achse >= d oder 2D-Einheit bei 1D-Daten.
        """
        for i, unit in enumerate(self.effective_architecture()):
            if isinstance(unit, AwuUnit) and unit.axis >= dim:
                msg = f"Einheit {i}: AWU-Achse {unit.axis} bei {dim}D-Daten"
                raise InvalidParameterError(msg)
            if not isinstance(unit, AwuUnit) and dim != 2:
                msg = f"Einheit {i}: {unit.unit} ist nur in 2D definiert"
                raise InvalidParameterError(msg)

    def warnings(self) -> list[str]:
        """Hinweise zu aufeinanderfolgenden Moebius-Einheiten."""
        result: list[str] = []
        units = self.effective_architecture()
        for i in range(1, len(units)):
            if isinstance(units[i], MobiusUnit) and isinstance(units[i - 1], MobiusUnit):
                result.append(
                    f"Einheiten {i - 1} und {i}: aufeinanderfolgende Moebius-Einheiten "
                    "sind wieder eine Moebius-Abbildung"
                )
        return result


# --- Artefakt und Berichte ---


class VariationalBlockModel(BaseModel):
    mean: list[float]
    eta: list[list[float]]


class ModelArtifact(BaseModel):
    """Persistierter Fit (``model.json``).

    ``params`` enthaelt die Stack-Parameter gefolgt von log sigma^2, log l und
    log sigma^2_eps; beim GP die drei log-Parameter (sigma^2, rho, sigma^2_eps).
    Die Beobachtungen sind zentriert gespeichert, ``z_offset`` wird bei der
    Vorhersage wieder addiert.
    """

    format_version: int = 1
    model: ModelKind
    lower: list[float]
    upper: list[float]
    architecture: list[UnitSpec] = []
    top_per_dim: int = 50
    params: list[float]
    knots: list[list[float]] = []
    locations: list[list[float]]
    z: list[float]
    z_offset: float = 0.0
    n_mc: int = 10
    full_cov: bool = False
    prior_var: float = 10.0
    variational: list[VariationalBlockModel] = []
    seed: int = 0

    @property
    def dim(self) -> int:
        return len(self.lower)


class FitReport(BaseModel):
    """Zusammenfassung eines Fits (``fit_report.json``)."""

    model: ModelKind
    architecture: str = ""
    n_obs: int
    n_params: int
    wall_time_s: float = Field(ge=0.0)
    trace: list[float] = []
    parameters: dict[str, float] = {}
    warnings: list[str] = []
