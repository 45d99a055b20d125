"""
Runtime settings and pipeline configuration loading.

Environment settings come from COGPLAY_* variables (a .env file is honoured);
pipeline runs are described by a single JSON document parsed into PipelineConfig.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ArtifactIOError, LogValidationError
from .models.pipeline import PipelineConfig

load_dotenv()

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="COGPLAY_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    output_dir: str = "./cogplay-out"
    default_seed: Optional[int] = None
    sample_period_ms: int = 50
    env_period_ms: int = 1000


settings = Settings()


def load_pipeline_config(
    path: Optional[str | Path] = None, overrides: Optional[Dict[str, Any]] = None
) -> PipelineConfig:
    """
    Read a pipeline config JSON file (or start from defaults) and apply CLI overrides.

    Overrides use dotted keys ("cleaning.max_cutoff") and skip None values,
    so unset flags never clobber the file.
    """
    raw: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ArtifactIOError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ArtifactIOError(f"cannot read config {path}: {e}")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        target = raw
        parts = key.split(".")
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value

    try:
        config = PipelineConfig(**raw)
    except ValidationError as e:
        raise LogValidationError(f"invalid pipeline config {path}: {e}")

    logger.debug(f"Loaded pipeline config from {path}")
    return config
