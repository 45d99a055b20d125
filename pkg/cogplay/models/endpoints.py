from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Literal, Optional

from .cleaning import CleaningResult

EndpointKind = Literal["RT", "gRT", "theta"]


class PsychFit(BaseModel):
    theta: float  # difficulty at 50% success
    sigma: float = Field(gt=0.0)  # spread
    rmse: float
    capped: bool = False
    retried: bool = False
    n_levels: int = 0


class EndpointRow(BaseModel):
    participant: str
    session: str
    game: str  # NK/DD/BB/RR or an external task name
    kind: EndpointKind
    value: float
    n_trials: int = 0
    form: Optional[str] = None  # external task form (e.g. "Form 1")
    source: Literal["game", "external"] = "game"

    @model_validator(mode="after")
    def positive_times(self):
        if self.kind in ("RT", "gRT") and self.value <= 0:
            raise ValueError(f"{self.kind} endpoint must be positive, got {self.value}")
        return self


class EndpointOptions(BaseModel):
    correct_only: bool = True
    implausible_rt: float = 0.1  # seconds; flagged, never dropped here
    rr_max_difficulty: int = 10


class GazeResult(BaseModel):
    seconds: float
    fixated: bool


class ExternalIngest(BaseModel):
    rows: List[EndpointRow] = Field(default_factory=list)
    rejected: List[str] = Field(default_factory=list)  # one message per rejected CSV row


class EndpointBuild(BaseModel):
    """Endpoint rows plus the cleaning results they were computed from."""
    rows: List[EndpointRow] = Field(default_factory=list)
    rt_cleaning: Optional[CleaningResult] = None
    grt_cleaning: Optional[CleaningResult] = None
    fits: Dict[str, PsychFit] = Field(default_factory=dict)  # session_id -> RR fit
    implausible: int = 0  # fast responses flagged (kept)
