"""Reproducibility: the ERUPT_SEED environment variable fixes every stochastic
seed the CLI and server draw."""

from __future__ import annotations

import os

SEED_ENV_VAR = "ERUPT_SEED"


def env_seed(default: int | None = None) -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"{SEED_ENV_VAR} must be an integer, got {raw!r}")
