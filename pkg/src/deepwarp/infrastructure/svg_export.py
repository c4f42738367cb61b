"""SVG-Ausgabe verzerrter Gitterlinien (matplotlib, Agg-Backend)."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from numpy.typing import NDArray  # noqa: E402

logger = logging.getLogger(__name__)

LINE_COLORS = ("#1f4e79", "#c55a11")
"""Farben fuer Linien konstanter s1 bzw. s2."""


def write_warp_svg(
    path: str | Path,
    lines: Sequence[tuple[int, NDArray[np.float64]]],
    *,
    title: str = "",
    labels: tuple[str, str] = ("f1", "f2"),
) -> None:
    """Polylinien (Familie, Punkte k x 2) als SVG schreiben.

    Metadaten ohne Datum und ein fester Hash-Salt machen die Datei bei gleichen
    Eingaben byte-identisch.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "deepwarp", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 6))
        for family, points in lines:
            ax.plot(points[:, 0], points[:, 1], color=LINE_COLORS[family % 2], linewidth=0.8)
        ax.set_aspect("equal")
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        if title:
            ax.set_title(title)
        fig.savefig(target, format="svg", metadata={"Date": None}, bbox_inches="tight")
        plt.close(fig)
    logger.info("Warping-Grafik nach %s geschrieben (%d Linien)", target, len(lines))
