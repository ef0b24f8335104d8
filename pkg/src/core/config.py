"""
Runtime configuration for the spectral lab.
Tolerances and solver settings are read from SPECLAB_* environment variables
(a .env file is honoured) and fall back to the defaults below.
"""

import logging
import os
from functools import lru_cache
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

# Load environment variables
load_dotenv()


class Tolerances(BaseModel):
    """Every numeric tolerance used by the lab, in one place."""
    symmetry: float = Field(default=1e-12, gt=0, description="Max |w_ij - w_ji| for a valid graph")
    eigh_symmetry: float = Field(default=1e-10, gt=0, description="Symmetry precondition for eigh")
    mass: float = Field(default=1e-10, gt=0, description="Total-mass-one tolerance")
    row_sum: float = Field(default=1e-12, gt=0, description="Posterior / transition row sums")
    class_balance: float = Field(default=1e-9, gt=0)
    spectrum_bound: float = Field(default=1e-9, gt=0, description="Slack on eigenvalues in [0, 1]")
    eigh_offdiag_rel: float = Field(default=1e-12, gt=0)
    eigh_rotation_factor: int = Field(default=100, ge=1, description="Rotation cap = factor * n^2")
    sign_threshold: float = Field(default=1e-12, gt=0)
    rho_slack: float = Field(default=1e-9, ge=0)
    degenerate_denominator: float = Field(default=1e-12, gt=0)
    endpoint_violation: float = Field(default=1e-12, ge=0)
    singular_condition: float = Field(default=1e14, gt=1)
    max_vertices: int = Field(default=2048, ge=1)


class Settings(BaseModel):
    """Process-wide settings."""
    tolerances: Tolerances = Field(default_factory=Tolerances)
    eigen_method: Literal["auto", "jacobi", "lapack"] = "auto"
    jacobi_max_n: int = Field(default=256, ge=1)
    log_level: str = "INFO"
    output_dir: str = "runs"


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, "") else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, "") else default


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Build settings from the environment (cached)."""
    defaults = Tolerances()
    tolerances = Tolerances(
        symmetry=_env_float("SPECLAB_SYMMETRY_TOL", defaults.symmetry),
        eigh_symmetry=_env_float("SPECLAB_EIGH_SYMMETRY_TOL", defaults.eigh_symmetry),
        mass=_env_float("SPECLAB_MASS_TOL", defaults.mass),
        class_balance=_env_float("SPECLAB_BALANCE_TOL", defaults.class_balance),
        eigh_offdiag_rel=_env_float("SPECLAB_EIGH_OFFDIAG_TOL", defaults.eigh_offdiag_rel),
        rho_slack=_env_float("SPECLAB_RHO_SLACK", defaults.rho_slack),
        max_vertices=_env_int("SPECLAB_MAX_VERTICES", defaults.max_vertices),
    )
    return Settings(
        tolerances=tolerances,
        eigen_method=os.getenv("SPECLAB_EIGEN_METHOD", "auto"),
        jacobi_max_n=_env_int("SPECLAB_JACOBI_MAX_N", 256),
        log_level=os.getenv("SPECLAB_LOG_LEVEL", "INFO"),
        output_dir=os.getenv("SPECLAB_OUTPUT_DIR", "runs"),
    )


def resolve_tolerances(tol: Optional[Tolerances] = None) -> Tolerances:
    return tol if tol is not None else get_settings().tolerances


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging for CLI runs."""
    logging.basicConfig(
        level=(level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
