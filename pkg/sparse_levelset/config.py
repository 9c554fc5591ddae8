"""Environment-driven defaults.

Values are read from the process environment, optionally populated from a
``.env`` file in the working directory. Command-line flags take precedence
over anything set here.
"""
import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

from sparse_levelset.errors import ConfigError

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def load_environment() -> None:
    """Load a ``.env`` file if present; existing variables win."""
    load_dotenv(override=False)


def env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")


def env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name} must be a number, got {raw!r}")


def env_bool(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    value = raw.strip().lower()
    if value in _TRUE:
        return True
    if value in _FALSE:
        return False
    raise ConfigError(f"{name} must be a boolean, got {raw!r}")


def env_log_level(name: str, default: str) -> str:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    level = raw.strip().upper()
    # getLevelName maps known names to ints and unknown ones to "Level X"
    if not isinstance(logging.getLevelName(level), int):
        raise ConfigError(f"{name} must be a logging level name, got {raw!r}")
    return level


@dataclass
class SolverSettings:
    max_iters: int = 10000
    opt_tol: float = 1e-6
    ls_memory: int = 10
    ftol_rel: float = 1e-3
    max_root_iter: int = 200
    warm_start: bool = True
    log_level: str = "WARNING"

    @classmethod
    def from_env(cls) -> "SolverSettings":
        defaults = cls()
        return cls(
            max_iters=env_int("LEVELSET_MAX_ITERS", defaults.max_iters),
            opt_tol=env_float("LEVELSET_OPT_TOL", defaults.opt_tol),
            ls_memory=env_int("LEVELSET_LS_MEMORY", defaults.ls_memory),
            ftol_rel=env_float("LEVELSET_FTOL_REL", defaults.ftol_rel),
            max_root_iter=env_int("LEVELSET_MAX_ROOT_ITER", defaults.max_root_iter),
            warm_start=env_bool("LEVELSET_WARM_START", defaults.warm_start),
            log_level=env_log_level("LEVELSET_LOG_LEVEL", defaults.log_level),
        )
