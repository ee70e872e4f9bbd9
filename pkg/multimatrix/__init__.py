import logging
import os
from dataclasses import dataclass

from dotenv import load_dotenv

from multimatrix.errors import ConfigError

# Load environment variables
load_dotenv()

__version__ = "0.1.0"

logging.getLogger(__name__).addHandler(logging.NullHandler())


@dataclass(frozen=True)
class Config:
    """Runtime settings, read from the environment (and a .env file if present)"""

    log_level: str = "WARNING"
    seed: int = 20240101
    fit_max_iterations: int = 2000
    fit_tolerance: float = 1e-8
    fit_restarts: int = 3
    quad_tolerance: float = 1e-8

    @classmethod
    def from_env(cls) -> "Config":
        try:
            return cls._read_env()
        except ValueError as exc:
            raise ConfigError(f"invalid MULTIMATRIX_* setting: {exc}") from exc

    @classmethod
    def _read_env(cls) -> "Config":
        return cls(
            log_level=os.getenv("MULTIMATRIX_LOG_LEVEL", "WARNING").upper(),
            seed=int(os.getenv("MULTIMATRIX_SEED", 20240101)),
            fit_max_iterations=int(os.getenv("MULTIMATRIX_FIT_MAX_ITERATIONS", 2000)),
            fit_tolerance=float(os.getenv("MULTIMATRIX_FIT_TOLERANCE", 1e-8)),
            fit_restarts=int(os.getenv("MULTIMATRIX_FIT_RESTARTS", 3)),
            quad_tolerance=float(os.getenv("MULTIMATRIX_QUAD_TOLERANCE", 1e-8)),
        )


def configure_logging(config: Config) -> None:
    """Send package logs to stderr at the configured level"""
    logging.basicConfig(
        level=getattr(logging, config.log_level, logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
