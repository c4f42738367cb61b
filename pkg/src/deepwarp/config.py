"""Zentrale Konfiguration via Pydantic Settings."""

from __future__ import annotations

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Laufzeit-Einstellungen, geladen aus Umgebung / .env-Datei (Prefix DEEPWARP_)."""

    # Logging
    log_level: str = "INFO"

    # Knoten und Monte Carlo
    knot_cap: int = 2000
    mc_workers: int = 1
    per_component: int = 100
    default_seed: int = 0

    # Adam (zwei Lernraten: Warping vs. Top-Layer)
    warp_lr: float = 0.01
    top_lr: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    # SDSP-Priors
    prior_var: float = 10.0

    # Export
    export_grid_per_dim: int = 21

    model_config = SettingsConfigDict(
        env_prefix="DEEPWARP_", env_file=".env", env_file_encoding="utf-8", extra="ignore"
    )

    @property
    def parallel_mc(self) -> bool:
        """Monte-Carlo-Samples parallel auswerten (ThreadPool)."""
        return self.mc_workers > 1
