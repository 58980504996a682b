"""Storage backends for memoized FTR series coefficients (ln d_j)."""
import json
import threading
from abc import ABC, abstractmethod
from datetime import datetime
from pathlib import Path
from typing import Optional

import structlog

logger = structlog.get_logger(__name__)


class CoefficientStore(ABC):
    """Abstract base class for coefficient storage.

    Keys identify a fading parameter set (m, K, Delta) at full precision;
    values are the ln d_j computed so far, in order from j = 0.
    """

    @abstractmethod
    def get(self, key: str) -> list[float]:
        """Return the stored ln d_j list for ``key`` (empty if unknown)."""
        pass

    @abstractmethod
    def put(self, key: str, log_d: list[float]) -> None:
        """Store ``log_d`` unless a longer list is already stored."""
        pass

    @abstractmethod
    def save(self) -> None:
        """Persist the storage (if needed)."""
        pass

    @abstractmethod
    def load(self) -> None:
        """Load from persistent storage (if needed)."""
        pass

    def __len__(self) -> int:
        return 0


class MemoryCoefficientStore(CoefficientStore):
    """Process-local store; safe to share across threads."""

    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict[str, list[float]] = {}

    def get(self, key: str) -> list[float]:
        with self._lock:
            return list(self._values.get(key, ()))

    def put(self, key: str, log_d: list[float]) -> None:
        with self._lock:
            if len(log_d) > len(self._values.get(key, ())):
                self._values[key] = list(log_d)

    def save(self) -> None:
        pass

    def load(self) -> None:
        pass

    def __len__(self) -> int:
        with self._lock:
            return len(self._values)


class JSONCoefficientStore(MemoryCoefficientStore):
    """JSON file-backed store, loaded on construction and saved explicitly."""

    def __init__(self, db_path: str):
        super().__init__()
        self.db_path = Path(db_path)
        self.load()

    def save(self) -> None:
        """Save coefficients to the JSON file."""
        try:
            with self._lock:
                data = {
                    "coefficients": self._values,
                    "last_updated": datetime.now().isoformat(),
                }
                with open(self.db_path, "w") as f:
                    json.dump(data, f, indent=2)
            logger.debug(f"Saved coefficients for {len(self)} parameter sets to {self.db_path}")
        except OSError as e:
            logger.error(f"Error saving coefficient cache: {e}")

    def load(self) -> None:
        """Load coefficients from the JSON file."""
        if not self.db_path.exists():
            logger.debug(f"No existing coefficient cache at {self.db_path}")
            return

        try:
            with open(self.db_path, "r") as f:
                data = json.load(f)
            with self._lock:
                self._values = {
                    key: [float(v) for v in values]
                    for key, values in data.get("coefficients", {}).items()
                }
            logger.debug(f"Loaded coefficients for {len(self)} parameter sets from {self.db_path}")
        except (OSError, ValueError) as e:
            logger.error(f"Error loading coefficient cache: {e}")
            with self._lock:
                self._values = {}


class RedisCoefficientStore(CoefficientStore):
    """Redis-based store; each parameter key maps to a JSON-encoded list."""

    def __init__(self, redis_url: str, key_prefix: str = "ftrsec"):
        try:
            import redis
            self.redis = redis.from_url(redis_url, decode_responses=True)
            self.key = f"{key_prefix}:coefficients"
            self._test_connection()
            logger.info(f"Connected to Redis at {redis_url}")
        except ImportError:
            raise ImportError("redis package not installed. Run: pip install redis")
        except Exception as e:
            logger.error(f"Failed to connect to Redis: {e}")
            raise

    def _test_connection(self) -> None:
        """Test Redis connection."""
        try:
            self.redis.ping()
        except Exception as e:
            raise ConnectionError(f"Cannot connect to Redis: {e}")

    def get(self, key: str) -> list[float]:
        raw = self.redis.hget(self.key, key)
        if raw is None:
            return []
        return [float(v) for v in json.loads(raw)]

    def put(self, key: str, log_d: list[float]) -> None:
        if len(log_d) > len(self.get(key)):
            self.redis.hset(self.key, key, json.dumps(list(log_d)))
            logger.debug(f"Stored {len(log_d)} coefficients for {key} in Redis")

    def save(self) -> None:
        """Redis persists on its own (no-op for compatibility)."""
        pass

    def load(self) -> None:
        """Redis loads on its own (no-op for compatibility)."""
        pass

    def __len__(self) -> int:
        try:
            return self.redis.hlen(self.key)
        except Exception as e:
            logger.error(f"Error counting coefficient sets in Redis: {e}")
            return 0


def create_coefficient_store(config) -> CoefficientStore:
    """Factory function to create the appropriate storage backend.

    Args:
        config: Config object with use_redis, redis_url and coefficient_cache

    Returns:
        CoefficientStore instance (Redis, JSON or in-memory based on config)
    """
    if config.use_redis:
        logger.info("Using Redis for the coefficient cache")
        try:
            return RedisCoefficientStore(config.redis_url)
        except Exception as e:
            logger.warning(f"Failed to initialize Redis storage: {e}")
            logger.warning("Falling back to file storage")

    if config.coefficient_cache:
        logger.debug(f"Using JSON file {config.coefficient_cache} for the coefficient cache")
        return JSONCoefficientStore(config.coefficient_cache)

    return MemoryCoefficientStore()


_default_store: Optional[CoefficientStore] = None


def default_store() -> CoefficientStore:
    """Process-wide store used when callers do not pass one."""
    global _default_store
    if _default_store is None:
        _default_store = MemoryCoefficientStore()
    return _default_store


def set_default_store(store: Optional[CoefficientStore]) -> None:
    """Replace the process-wide store; None restores a fresh in-memory one on next use."""
    global _default_store
    _default_store = store
