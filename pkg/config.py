import logging
import os
from typing import Literal, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import ConfigError

# Load environment variables from .env file (real environment wins)
load_dotenv(override=False)

logger = logging.getLogger(__name__)


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}")


def _env_int(name: str, default: Optional[int]) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


# ==============================
# Defaults (CLI > env > built-in)
# ==============================

def default_seed() -> int:
    return _env_int("QSPHERE_SEED", 0)


def default_cond_limit() -> float:
    return _env_float("QSPHERE_COND_LIMIT", 1e12)


def default_pair_tol() -> float:
    return _env_float("QSPHERE_PAIR_TOL", 1e-6)


def default_quad_tol() -> float:
    return _env_float("QSPHERE_QUAD_TOL", 1e-10)


def default_selfdual_tol() -> float:
    return _env_float("QSPHERE_SELFDUAL_TOL", 1e-10)


def default_out_dir() -> str:
    return os.getenv("QSPHERE_OUT", ".")


def log_level() -> str:
    return os.getenv("QSPHERE_LOG_LEVEL", "INFO").upper()


def max_threads() -> int:
    """Worker cap for batch runs; QSPHERE_THREADS unset means all cores."""
    threads = _env_int("QSPHERE_THREADS", None)
    if threads is None:
        return os.cpu_count() or 1
    if threads < 1:
        raise ConfigError(f"QSPHERE_THREADS must be >= 1, got {threads}")
    return threads


# ==============================
# Ensemble configuration
# ==============================

class EnsembleConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    beta: Literal[1, 2, 4] = 4
    n: int = Field(10, ge=1)
    count: int = Field(1, ge=1)
    master_seed: int = Field(default_factory=default_seed, ge=0, lt=2**64)
    cond_limit: float = Field(default_factory=default_cond_limit, gt=1)
    pair_tol: float = Field(default_factory=default_pair_tol, gt=0)


def make_config(**kwargs) -> EnsembleConfig:
    """Build an EnsembleConfig, dropping None values so env defaults apply."""
    clean = {k: v for k, v in kwargs.items() if v is not None}
    try:
        return EnsembleConfig(**clean)
    except ValidationError as e:
        raise ConfigError(f"Invalid ensemble configuration: {e}") from e
