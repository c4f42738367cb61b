"""Warping-Export: Bild eines regulaeren Karogitters unter dem gefitteten Warping."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from deepwarp.domain.core import KnotSet, LocationSet
from deepwarp.domain.models import ModelArtifact, ModelKind
from deepwarp.domain.sdsp import SdspFit
from deepwarp.domain.warp import WarpStack, warp_forward
from deepwarp.use_cases._helpers import artifact_domain, restore_sdsp, restore_siwgp

logger = logging.getLogger(__name__)

LINE_RESOLUTION: int = 10
"""Zwischenpunkte je Gitterzelle entlang einer Polylinie."""


@dataclass(frozen=True, slots=True, eq=False)
class WarpExport:
    """Exportgitter: Punktpaare und Polylinien (Familie 0 = s1 konstant, 1 = s2 konstant)."""

    inputs: NDArray[np.float64]
    outputs: NDArray[np.float64]
    lines: list[tuple[int, NDArray[np.float64]]]


def export_stack(artifact: ModelArtifact) -> WarpStack:
    """Gefittetes Warping; beim SDSP mit Gewichten = Variationserwartung."""
    if artifact.model is ModelKind.GP:
        logger.info("GP ohne Warping - exportiere Identitaet")
        corners = KnotSet(np.array([artifact.lower, artifact.upper]))
        return WarpStack(layers=(), knots=corners, domain=artifact_domain(artifact))
    if artifact.model is ModelKind.SDSP:
        sdsp: SdspFit = restore_sdsp(artifact)
        return sdsp.mean_stack()
    return restore_siwgp(artifact).stack


def warp_grid(stack: WarpStack, grid_per_dim: int) -> WarpExport:
    """Knotenpunkte des Gitters und verzerrte Gitterlinien berechnen."""
    dom = stack.domain
    axes = [np.linspace(lo, hi, grid_per_dim) for lo, hi in zip(dom.lower, dom.upper, strict=True)]
    if dom.dim == 1:
        fine = np.linspace(dom.lower[0], dom.upper[0], grid_per_dim * LINE_RESOLUTION)
        out, _ = warp_forward(stack, LocationSet(axes[0]))
        curve, _ = warp_forward(stack, LocationSet(fine))
        line = np.column_stack([fine, curve.coords[:, 0]])
        return WarpExport(inputs=axes[0][:, None], outputs=out.coords, lines=[(0, line)])

    gx, gy = np.meshgrid(axes[0], axes[1])
    inputs = np.column_stack([gx.ravel(), gy.ravel()])
    out, _ = warp_forward(stack, LocationSet(inputs))
    n_fine = (grid_per_dim - 1) * LINE_RESOLUTION + 1
    fine = [np.linspace(lo, hi, n_fine) for lo, hi in zip(dom.lower, dom.upper, strict=True)]
    lines: list[tuple[int, NDArray[np.float64]]] = []
    for family, (fixed_axis, free_axis) in enumerate(((0, 1), (1, 0))):
        for value in axes[fixed_axis]:
            pts = np.empty((n_fine, 2))
            pts[:, fixed_axis] = value
            pts[:, free_axis] = fine[free_axis]
            warped, _ = warp_forward(stack, LocationSet(pts))
            lines.append((family, warped.coords))
    return WarpExport(inputs=inputs, outputs=out.coords, lines=lines)
