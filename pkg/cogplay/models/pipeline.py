from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Optional

from .cleaning import CleaningConfig
from .endpoints import EndpointOptions
from .stats import PairingSpec
from .trajectory import ClusterParams, EmbedParams


class PipelineConfig(BaseModel):
    """A complete, reproducible description of one pipeline run."""
    log_paths: List[str] = Field(default_factory=list)  # explicit .pxlog inputs
    log_dir: Optional[str] = None  # or every .pxlog under this directory
    cohort_path: Optional[str] = None  # simulate first from this cohort spec
    external_scores: Optional[str] = None  # CSV of external task endpoints
    output_dir: str = "./cogplay-out"
    cleaning: CleaningConfig = Field(default_factory=CleaningConfig)
    endpoints: EndpointOptions = Field(default_factory=EndpointOptions)
    pairing: PairingSpec = Field(default_factory=PairingSpec)
    embed: EmbedParams = Field(default_factory=EmbedParams)
    cluster: ClusterParams = Field(default_factory=ClusterParams)
    lateral_threshold: float = Field(default=0.5, gt=0.0)
    resample_length: int = Field(default=120, ge=2)
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_paths(self):
        paths = [p for p in [*self.log_paths, self.log_dir, self.cohort_path,
                             self.external_scores, self.output_dir] if p]
        if len(paths) != len(set(paths)):
            raise ValueError("configured paths must be distinct")
        if self.cohort_path and self.seed is None:
            raise ValueError("seed is required when simulating a cohort")
        return self


class RunManifest(BaseModel):
    """What a bundle was computed from; enough to reproduce it."""
    version: str
    config_hash: Optional[str] = None  # SHA-256 of the canonical config JSON, output_dir excluded
    seed: Optional[int] = None
    sessions: int = 0
    config: Optional[dict] = None
    files: Dict[str, str] = Field(default_factory=dict)  # artifact name -> SHA-256
