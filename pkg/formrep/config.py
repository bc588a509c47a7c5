"""Configuration loading utilities for the form toolkit."""

from __future__ import annotations

import logging
import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError

_TRUE = {"1", "true", "yes", "on"}


class LinearizeConfig(BaseModel):
    """Basis extraction and linearization tolerances."""

    basis_rank_threshold: float = Field(
        default=1e-8,
        gt=0,
        lt=1,
        description="Relative smallest singular value required for numerical independence.",
    )
    residual_tol: float = Field(default=1e-8, gt=0, description="Tolerance of the final verification.")
    max_candidates: Optional[int] = Field(
        default=None,
        ge=1,
        description="Candidate budget per basis extension; None means n + 50.",
    )
    halvings: int = Field(default=60, ge=1, le=200)
    oracle_roundtrip_tol: float = Field(default=1e-8, gt=0)
    self_test_trials: int = Field(default=20, ge=1, le=10_000)
    parallel_vertices: bool = Field(
        default=False,
        description="Extract basis pairs of different vertices concurrently; oracles must be thread-safe.",
    )
    max_workers: int = Field(default=4, ge=1, le=64)

    def candidate_budget(self, n: int) -> int:
        return self.max_candidates if self.max_candidates is not None else n + 50


class CanonicalConfig(BaseModel):
    """Rank, clustering and certificate settings for canonical block recovery."""

    rank_threshold: float = Field(default=1e-8, gt=0, lt=1)
    param_tol: float = Field(default=1e-6, gt=0, lt=1)
    ambiguity_band: float = Field(
        default=10.0,
        ge=1.0,
        description="Singular values within this factor of a rank cut are reported as ill-conditioned.",
    )
    certificate_max_dim: int = Field(default=4, ge=0, le=16)
    certificate_restarts: int = Field(default=1000, ge=1)


class GeneratorConfig(BaseModel):
    """Defaults for seeded test-input construction."""

    cond_max: float = Field(default=1e3, ge=1.0)
    witness_cond_max: float = Field(
        default=10.0,
        ge=1.0,
        description="Condition bound of the linear parts of generated witnesses.",
    )
    witness_samples: int = Field(default=50, ge=1)
    witness_tol: float = Field(default=1e-9, gt=0)
    null_threshold: float = Field(default=1e-10, gt=0)


class Settings(BaseModel):
    """Aggregated settings for every command."""

    seed: int = 0
    log_level: str = "INFO"
    linearize: LinearizeConfig = LinearizeConfig()
    canonical: CanonicalConfig = CanonicalConfig()
    generators: GeneratorConfig = GeneratorConfig()


def _optional_float(env, key: str, default: float) -> float:
    return float(env[key]) if key in env else default


@lru_cache(maxsize=1)
def load_settings() -> Settings:
    """Load settings from FORMREP_* environment variables and .env files."""

    load_dotenv()

    env = os.environ
    try:
        linearize_cfg = LinearizeConfig(
            basis_rank_threshold=_optional_float(env, "FORMREP_BASIS_RANK_THRESHOLD", 1e-8),
            residual_tol=_optional_float(env, "FORMREP_RESIDUAL_TOL", 1e-8),
            max_candidates=(
                int(env["FORMREP_MAX_CANDIDATES"]) if "FORMREP_MAX_CANDIDATES" in env else None
            ),
            halvings=int(env.get("FORMREP_HALVINGS", "60")),
            oracle_roundtrip_tol=_optional_float(env, "FORMREP_ORACLE_ROUNDTRIP_TOL", 1e-8),
            self_test_trials=int(env.get("FORMREP_SELF_TEST_TRIALS", "20")),
            parallel_vertices=env.get("FORMREP_PARALLEL_VERTICES", "false").lower() in _TRUE,
            max_workers=int(env.get("FORMREP_MAX_WORKERS", "4")),
        )
        canonical_cfg = CanonicalConfig(
            rank_threshold=_optional_float(env, "FORMREP_RANK_THRESHOLD", 1e-8),
            param_tol=_optional_float(env, "FORMREP_PARAM_TOL", 1e-6),
            ambiguity_band=_optional_float(env, "FORMREP_AMBIGUITY_BAND", 10.0),
            certificate_max_dim=int(env.get("FORMREP_CERTIFICATE_MAX_DIM", "4")),
            certificate_restarts=int(env.get("FORMREP_CERTIFICATE_RESTARTS", "1000")),
        )
        generator_cfg = GeneratorConfig(
            cond_max=_optional_float(env, "FORMREP_COND_MAX", 1e3),
            witness_cond_max=_optional_float(env, "FORMREP_WITNESS_COND_MAX", 10.0),
            witness_samples=int(env.get("FORMREP_WITNESS_SAMPLES", "50")),
            witness_tol=_optional_float(env, "FORMREP_WITNESS_TOL", 1e-9),
        )
        if "FORMREP_SEED" not in env:
            logging.debug("FORMREP_SEED not set; using seed 0.")
        return Settings(
            seed=int(env.get("FORMREP_SEED", "0")),
            log_level=env.get("FORMREP_LOG_LEVEL", "INFO"),
            linearize=linearize_cfg,
            canonical=canonical_cfg,
            generators=generator_cfg,
        )
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise RuntimeError(f"Configuration invalid: {exc}") from exc
        raise RuntimeError(f"Configuration value could not be parsed: {exc}") from exc
