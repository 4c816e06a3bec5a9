"""Bundled example instances."""

from __future__ import annotations

from pathlib import Path

from .config import ExperimentConfig, load_config


def seven_providers_path() -> Path:
    """Path of the bundled seven-provider instance: seven providers with
    failure odds from 7% down to 1%, three servers each, and four service
    chain types between three and six functions long."""
    return Path(__file__).with_name("data") / "seven_providers.json"


def seven_providers() -> ExperimentConfig:
    return load_config(seven_providers_path())
