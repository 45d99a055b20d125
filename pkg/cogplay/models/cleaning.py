from pydantic import BaseModel, Field
from typing import Dict, List

MAD_NORMAL_CONSISTENCY = 1.4826
MEANAD_NORMAL_CONSISTENCY = 1.253314


class CleaningConfig(BaseModel):
    max_cutoff: float = Field(default=10.0, gt=0.0)  # seconds
    session_loss_threshold: float = Field(default=0.25, gt=0.0)
    log_mad_multiplier: float = Field(default=3.0, gt=0.0)
    participant_mad_ratio: float = Field(default=3.5, gt=0.0)
    participant_filter: bool = True


class SessionValues(BaseModel):
    """Per-trial endpoint values of one session (seconds)."""
    participant: str
    session_id: str
    game: str
    values: List[float]
    trial_indices: List[int] = Field(default_factory=list)

    def model_post_init(self, __context) -> None:
        if not self.trial_indices:
            self.trial_indices = list(range(len(self.values)))


class ExclusionRow(BaseModel):
    assessment: str
    trials_total: int
    trials_lost: int
    trials_lost_pct: float
    sessions_total: int
    sessions_lost: int
    sessions_lost_pct: float


class ExclusionReport(BaseModel):
    rows: List[ExclusionRow] = Field(default_factory=list)
    # tallies per step: cutoff, session, log_mad
    step_counts: Dict[str, int] = Field(default_factory=dict)

    def row(self, assessment: str) -> ExclusionRow:
        for r in self.rows:
            if r.assessment == assessment:
                return r
        raise KeyError(assessment)


class CleaningResult(BaseModel):
    kept: List[SessionValues]
    report: ExclusionReport
    dropped_sessions: List[str] = Field(default_factory=list)
    excluded: Dict[str, List[int]] = Field(default_factory=dict)  # session_id -> trial indices


class SalvageRow(BaseModel):
    assessment: str
    trials_salvaged: int
    trials_salvaged_pct: float
    sessions_salvaged: int
