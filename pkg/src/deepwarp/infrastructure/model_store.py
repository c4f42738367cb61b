"""JSON-Persistenz fuer Modell-Artefakte, Berichte und Laufkonfigurationen."""

from __future__ import annotations

import logging
from pathlib import Path

from pydantic import BaseModel, ValidationError

from deepwarp.domain.models import ModelArtifact, RunConfig
from deepwarp.infrastructure.csv_io import DataFormatError

logger = logging.getLogger(__name__)


def save_json(path: str | Path, model: BaseModel) -> None:
    """Pydantic-Modell als eingerueckte JSON-Datei schreiben."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logger.info("%s nach %s geschrieben", type(model).__name__, target)


def save_model(path: str | Path, artifact: ModelArtifact) -> None:
    save_json(path, artifact)


def load_model(path: str | Path) -> ModelArtifact:
    """Artefakt laden.

    Raises:
        DataFormatError: Datei ist kein gueltiges Artefakt.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        return ModelArtifact.model_validate_json(text)
    except ValidationError as e:
        msg = f"{path}: kein gueltiges Modell-Artefakt ({e.error_count()} Fehler)"
        raise DataFormatError(msg, path) from e


def load_run_config(path: str | Path | None) -> RunConfig:
    """Konfigurationsdatei laden; ohne Pfad gelten die Standardwerte."""
    if path is None:
        return RunConfig()
    text = Path(path).read_text(encoding="utf-8")
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(p) for p in first["loc"])
        msg = f"{path}: ungueltige Konfiguration bei '{location}': {first['msg']}"
        raise DataFormatError(msg, path) from e
