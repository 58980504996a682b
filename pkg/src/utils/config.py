"""Runtime configuration."""
import os
from dataclasses import dataclass
from pathlib import Path
from dotenv import load_dotenv

from src.utils.logging_setup import LOG_LEVELS


@dataclass
class Config:
    """Runtime settings (process-level, independent of the scenario file)."""

    # Logging
    log_level: str = "INFO"

    # Process pool size for sweeps and Monte Carlo batches
    workers: int = 1

    # Samples per Monte Carlo batch
    mc_batch: int = 100_000

    # Coefficient cache; empty disables the file cache
    coefficient_cache: str = ".ftr_coefficients.json"

    # Redis
    redis_url: str = "redis://localhost:6379/0"
    use_redis: bool = False

    @classmethod
    def from_env(cls) -> "Config":
        """Load configuration from environment variables."""
        # Try to load from .env file in project root
        env_path = Path(__file__).parent.parent.parent / ".env"
        if env_path.exists():
            load_dotenv(env_path)
        else:
            load_dotenv()  # Try to load from current directory

        return cls(
            log_level=os.getenv("FTRSEC_LOG_LEVEL", "INFO").upper(),
            workers=_int_env("FTRSEC_WORKERS", 1),
            mc_batch=_int_env("FTRSEC_MC_BATCH", 100_000),
            coefficient_cache=os.getenv("FTRSEC_COEFF_CACHE", ".ftr_coefficients.json"),
            redis_url=os.getenv("FTRSEC_REDIS_URL", "redis://localhost:6379/0"),
            use_redis=os.getenv("FTRSEC_USE_REDIS", "false").lower() in ("true", "1", "yes"),
        )

    def validate(self) -> list[str]:
        """Validate configuration and return list of errors."""
        errors = []

        if self.log_level not in LOG_LEVELS:
            errors.append(f"FTRSEC_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}")

        if self.workers < 1:
            errors.append("FTRSEC_WORKERS must be positive")

        if self.mc_batch < 1:
            errors.append("FTRSEC_MC_BATCH must be positive")

        if self.use_redis and not self.redis_url:
            errors.append("FTRSEC_REDIS_URL is required when FTRSEC_USE_REDIS is set")

        return errors


def _int_env(name: str, default: int) -> int:
    # Malformed values surface through validate() as a nonpositive setting.
    raw = os.getenv(name, str(default))
    try:
        return int(raw)
    except ValueError:
        return 0
