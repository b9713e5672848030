"""Runtime settings using Pydantic Settings."""

from functools import lru_cache
from typing import Optional

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


class Settings(BaseSettings):
    """Process settings loaded from PADEIT_* environment variables.

    Anything that changes simulation results belongs in ExperimentConfig,
    not here.
    """

    model_config = SettingsConfigDict(
        env_prefix="PADEIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    log_level: str = "INFO"

    # Output
    output_dir: str = "output"

    # Workers
    threads: int = 1

    # Golden meshes shipped with the test suite
    mesh_dir: Optional[str] = None

    # Placement retries before RelocationExhaustedError
    relocation_max_retries: int = 100

    @field_validator("log_level")
    @classmethod
    def normalize_log_level(cls, value: str) -> str:
        normalized = (value or "INFO").strip().upper()
        if normalized not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError("log_level must be a standard logging level name")
        return normalized

    @field_validator("threads")
    @classmethod
    def validate_threads(cls, value: int) -> int:
        if value < 1:
            raise ValueError("threads must be at least 1")
        return value


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
