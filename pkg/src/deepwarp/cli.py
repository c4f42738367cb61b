"""Kommandozeile: deepwarp simulate|fit|predict|diagnose|warp-export|sweep.

Usage:
    deepwarp simulate --config y11.json --seed 1 --out run/
    deepwarp fit run/data.csv --config y11.json --out run/
    deepwarp predict run/model.json run/truth.csv --out run/
    deepwarp diagnose run/predictions.csv run/truth.csv --out run/
    deepwarp warp-export run/model.json --grid-per-dim 21 --out run/

Exit-Codes: 0 Erfolg, 1 Fehler (JSON-Objekt auf stderr), 2 Aufruf-Fehler.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Callable
from pathlib import Path

import numpy as np

from deepwarp.config import Settings
from deepwarp.domain.core import DegenerateWarpError, DeepwarpError
from deepwarp.domain.models import RunConfig
from deepwarp.infrastructure.csv_io import (
    DataFormatError,
    read_dataset_csv,
    read_locations_csv,
    read_predictions_csv,
    read_scene_csv,
    read_truth_csv,
    write_dataset_csv,
    write_predictions_csv,
    write_scene_csv,
    write_truth_csv,
    write_warp_csv,
)
from deepwarp.infrastructure.model_store import load_model, load_run_config, save_json, save_model
from deepwarp.infrastructure.svg_export import write_warp_svg
from deepwarp.use_cases.diagnose import diagnose
from deepwarp.use_cases.fit import fit_model
from deepwarp.use_cases.predict import predict_artifact
from deepwarp.use_cases.simulate import run_simulation
from deepwarp.use_cases.sweep import run_sweep
from deepwarp.use_cases.warp_export import export_stack, warp_grid

logger = logging.getLogger(__name__)

_HANDLER_NAME = "deepwarp-cli"

Handler = Callable[[argparse.Namespace, RunConfig, Settings], list[Path]]


def configure_logging(level: str = "INFO") -> None:
    """Strukturiertes Logging mit Zeitstempel, Level und Modul-Name (idempotent)."""
    log_format = "%(asctime)s | %(levelname)-8s | %(name)s | %(message)s"
    date_format = "%Y-%m-%d %H:%M:%S"

    root = logging.getLogger("deepwarp")
    root.setLevel(level.upper())
    for existing in root.handlers:
        if existing.get_name() == _HANDLER_NAME and isinstance(existing, logging.StreamHandler):
            existing.setStream(sys.stderr)
            return
    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(_HANDLER_NAME)
    handler.setFormatter(logging.Formatter(log_format, datefmt=date_format))
    root.addHandler(handler)
    root.propagate = False


# --- Kommandos ---


def cmd_simulate(args: argparse.Namespace, config: RunConfig, settings: Settings) -> list[Path]:
    sim = config.simulation
    scene = read_scene_csv(sim.scene_path) if sim.scene_path else None
    result = run_simulation(sim, config.seed, scene=scene)
    out: Path = args.out
    written = [out / config.paths.data, out / config.paths.truth]
    write_dataset_csv(written[0], result.data)
    write_truth_csv(written[1], result.truth_coords, result.truth)
    if result.scene is not None:
        written.append(out / "scene.csv")
        write_scene_csv(written[-1], result.scene)
    return written


def cmd_fit(args: argparse.Namespace, config: RunConfig, settings: Settings) -> list[Path]:
    data = read_dataset_csv(args.data, seed=config.seed)
    artifact, report = fit_model(config, data, settings=settings)
    out: Path = args.out
    written = [out / config.paths.model, out / "fit_report.json"]
    save_model(written[0], artifact)
    save_json(written[1], report)
    return written


def cmd_predict(args: argparse.Namespace, config: RunConfig, settings: Settings) -> list[Path]:
    artifact = load_model(args.model)
    coords = read_locations_csv(args.locations)
    summary = predict_artifact(
        artifact, coords, settings=settings, include_noise=args.include_noise
    )
    target = args.out / config.paths.predictions
    write_predictions_csv(target, coords, summary)
    return [target]


def cmd_diagnose(args: argparse.Namespace, config: RunConfig, settings: Settings) -> list[Path]:
    pred_coords, summary = read_predictions_csv(args.predictions)
    truth_coords, truth = read_truth_csv(args.truth)
    thresholds = None
    if args.thresholds is not None:
        lo, hi, step = args.thresholds
        thresholds = np.arange(lo, hi + 0.5 * step, step)
    report = diagnose(
        pred_coords, summary, truth_coords, truth, thresholds=thresholds, z_obs=args.z_obs
    )
    target = args.out / "scores.json"
    save_json(target, report)
    return [target]


def cmd_warp_export(
    args: argparse.Namespace, config: RunConfig, settings: Settings
) -> list[Path]:
    artifact = load_model(args.model)
    export = warp_grid(export_stack(artifact), args.grid_per_dim or settings.export_grid_per_dim)
    out: Path = args.out
    written = [out / "warp.csv", out / "warp.svg"]
    write_warp_csv(written[0], export.inputs, export.outputs)
    labels = ("s1", "f1") if artifact.dim == 1 else ("f1", "f2")
    write_warp_svg(written[1], export.lines, title=f"{artifact.model}", labels=labels)
    return written


def cmd_sweep(args: argparse.Namespace, config: RunConfig, settings: Settings) -> list[Path]:
    data = read_dataset_csv(args.data, seed=config.seed)
    truth_coords, truth = read_truth_csv(args.truth)
    report = run_sweep(config, data, truth_coords, truth, settings=settings)
    target = args.out / "sweep.json"
    save_json(target, report)
    return [target]


# --- Parser ---


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON-Laufkonfiguration")
    common.add_argument("--seed", type=int, default=None, help="Master-Seed (ueberschreibt config)")
    common.add_argument("--out", type=Path, default=Path("."), help="Ausgabeverzeichnis")
    common.add_argument(
        "--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Log-Level (Standard: DEEPWARP_LOG_LEVEL bzw. INFO)",
    )

    parser = argparse.ArgumentParser(
        prog="deepwarp", description="Tiefe kompositionelle raeumliche Modelle"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Testdaten erzeugen")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="Modell fitten")
    p.add_argument("data", type=Path, help="Beobachtungen s1[,s2],z")
    p.set_defaults(handler=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="Vorhersagen berechnen")
    p.add_argument("model", type=Path, help="Modell-Artefakt (model.json)")
    p.add_argument("locations", type=Path, help="Vorhersageorte s1[,s2]")
    p.add_argument("--include-noise", action="store_true", help="Vorhersage fuer Z statt Y")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("diagnose", parents=[common], help="Vorhersagen bewerten")
    p.add_argument("predictions", type=Path)
    p.add_argument("truth", type=Path)
    p.add_argument(
        "--thresholds", type=float, nargs=3, metavar=("LO", "HI", "STEP"), default=None,
        help="Schwellwertgitter fuer die Threat-Score-Kurve",
    )
    p.add_argument("--z-obs", type=float, default=None, help="Schwellwert im wahren Feld")
    p.set_defaults(handler=cmd_diagnose)

    p = sub.add_parser("warp-export", parents=[common], help="Warping als CSV und SVG")
    p.add_argument("model", type=Path)
    p.add_argument("--grid-per-dim", type=int, default=None)
    p.set_defaults(handler=cmd_warp_export)

    p = sub.add_parser("sweep", parents=[common], help="Architekturen vergleichen")
    p.add_argument("data", type=Path)
    p.add_argument("truth", type=Path)
    p.set_defaults(handler=cmd_sweep)
    return parser


def _error_payload(error: Exception) -> dict[str, object]:
    payload: dict[str, object] = {"error": type(error).__name__, "message": str(error)}
    if isinstance(error, DataFormatError):
        payload["path"] = error.path
        payload["line"] = error.line
    elif isinstance(error, DegenerateWarpError):
        payload["layer_index"] = error.layer_index
    elif isinstance(error, OSError) and error.filename is not None:
        payload["path"] = str(error.filename)
    return payload


def main(argv: list[str] | None = None) -> int:
    """Einstiegspunkt; gibt den Exit-Code zurueck."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    settings = Settings()
    configure_logging(args.log_level or settings.log_level)

    handler: Handler = args.handler
    try:
        config = load_run_config(args.config)
        if args.seed is not None:
            config = config.model_copy(update={"seed": args.seed})
        elif args.config is None:
            config = config.model_copy(update={"seed": settings.default_seed})
        written = handler(args, config, settings)
    except (DeepwarpError, OSError) as e:
        logger.error("%s fehlgeschlagen: %s", args.command, e)
        print(json.dumps(_error_payload(e)), file=sys.stderr)
        return 1
    print(json.dumps({"command": args.command, "written": [str(p) for p in written]}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
