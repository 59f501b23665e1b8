from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class GuidenetSettings(BaseSettings):
    """Process-wide knobs, read from GUIDENET_* variables or a local .env file."""

    model_config = SettingsConfigDict(env_prefix="GUIDENET_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    progress: bool = True
    output_dir: Path = Path("runs")


@lru_cache(maxsize=1)
def get_settings() -> GuidenetSettings:
    return GuidenetSettings()
