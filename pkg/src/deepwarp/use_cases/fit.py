"""Fit: SIWGP, SDSP, FRK (SIWGP ohne Warping) oder stationaerer GP."""

from __future__ import annotations

import logging
import time

import numpy as np

from deepwarp.config import Settings
from deepwarp.domain.baseline import gp_fit_ml
from deepwarp.domain.core import Dataset, Domain, make_knots
from deepwarp.domain.models import (
    FitReport,
    ModelArtifact,
    ModelKind,
    RunConfig,
    architecture_label,
)
from deepwarp.domain.sdsp import default_priors, fit_sdsp
from deepwarp.domain.siwgp import fit_siwgp
from deepwarp.use_cases._helpers import (
    artifact_from_gp,
    artifact_from_sdsp,
    artifact_from_siwgp,
    build_process,
    build_stack,
    center,
)

logger = logging.getLogger(__name__)


def fit_model(
    config: RunConfig,
    data: Dataset,
    *,
    settings: Settings | None = None,
) -> tuple[ModelArtifact, FitReport]:
    """Modell nach ``config.model`` fitten und als Artefakt plus Bericht zurueckgeben.

    Raises:
        DegenerateDataError: weniger als 2 eindeutige Orte.
        DegenerateWarpError: kollabierende Knotenbilder (mit Layer-Index).
    """
    if settings is None:
        settings = Settings()
    config.check_dimension(data.dim)
    warnings = config.warnings()
    for w in warnings:
        logger.warning(w)

    centered, offset = center(data, config.center_data)
    knots = make_knots(centered, settings.knot_cap)
    domain = Domain.bounding_box(data.locations.coords)
    units = config.effective_architecture()
    started = time.perf_counter()

    if config.model is ModelKind.GP:
        params = gp_fit_ml(centered, n_steps=config.gp_steps, lr=settings.top_lr)
        artifact = artifact_from_gp(params, centered, domain, offset, config.seed)
        trace: list[float] = []
        parameters: dict[str, float] = {
            "sigma2": params.variance, "range": params.range, "noise_var": params.noise_var,
        }
    else:
        stack = build_stack(units, domain, knots)
        process = build_process(stack, config.top_per_dim)
        if config.model is ModelKind.SDSP:
            sdsp = fit_sdsp(
                centered, stack, process,
                priors=default_priors(stack, var=settings.prior_var),
                n_mc=config.n_mc, schedule=config.schedule, seed=config.seed,
                full_cov=config.covariance == "full", workers=settings.mc_workers,
                warp_lr=settings.warp_lr, top_lr=settings.top_lr, beta1=settings.adam_beta1,
                beta2=settings.adam_beta2, eps=settings.adam_eps,
            )
            artifact = artifact_from_sdsp(
                sdsp, units, config.top_per_dim, offset,
                n_mc=config.n_mc, prior_var=settings.prior_var,
            )
            trace = sdsp.trace
            fitted_process, noise_var = sdsp.process, sdsp.noise_var
        else:
            siwgp = fit_siwgp(
                centered, stack, process, schedule=config.schedule,
                retry_on_decrease=config.retry_on_decrease,
                warp_lr=settings.warp_lr, top_lr=settings.top_lr, beta1=settings.adam_beta1,
                beta2=settings.adam_beta2, eps=settings.adam_eps,
            )
            artifact = artifact_from_siwgp(
                siwgp, config.model, units, config.top_per_dim, offset, config.seed
            )
            trace = siwgp.trace
            fitted_process, noise_var = siwgp.process, siwgp.noise_var
        parameters = {
            "sigma2": fitted_process.sigma2,
            "lengthscale": fitted_process.lengthscale,
            "noise_var": noise_var,
        }

    wall = time.perf_counter() - started
    parameters["z_offset"] = offset
    report = FitReport(
        model=config.model,
        architecture=architecture_label(units),
        n_obs=data.n,
        n_params=len(artifact.params) + sum(
            _extra_variational(len(b.mean), artifact.full_cov) for b in artifact.variational
        ),
        wall_time_s=wall,
        trace=[float(v) for v in np.asarray(trace)],
        parameters={k: float(v) for k, v in parameters.items()},
        warnings=warnings,
    )
    logger.info(
        "Fit %s [%s] in %.1f s (N=%d)", config.model, report.architecture, wall, data.n
    )
    return artifact, report


def _extra_variational(k: int, full: bool) -> int:
    """Variationsparameter zusaetzlich zu den Erwartungen (Streuungen, ggf. Kovarianzen)."""
    return k + (k * (k - 1) // 2 if full else 0)
