from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Literal, Optional

from .logfile import GameCode, LogFile
from .trajectory import TrialType


class AgentParams(BaseModel):
    """Behavioural parameters of a synthetic player."""
    latency_mu: float = 6.802394763324311  # log(900 ms)
    latency_sigma: float = Field(default=0.4, ge=0.0)
    error_rate: float = Field(default=0.05, ge=0.0, le=1.0)
    move_speed: float = Field(default=4.3, gt=0.0)  # blocks/s
    path_style: Literal["direct", "indirect"] = "direct"
    lateral_amplitude: float = Field(default=2.0, ge=0.0)  # blocks, indirect paths only
    gaze_policy: Literal["early_fix", "late_fix", "no_fix"] = "early_fix"
    lapse_rate: float = Field(default=0.0, ge=0.0, le=1.0)
    turn_speed: float = Field(default=300.0, gt=0.0)  # deg/s
    late_lead_ms: int = Field(default=300, ge=0)
    approach_distance: float = Field(default=1.5, ge=0.0)
    span_capacity: float = Field(default=5.0, gt=0.0)  # RR size at 50% pass
    span_spread: float = Field(default=1.0, gt=0.0)
    # Per-trial NK style weights over DG/IG/DN/IN; overrides path_style and gaze_policy
    style_mix: Optional[Dict[TrialType, float]] = None

    @model_validator(mode="after")
    def check_style_mix(self):
        if self.style_mix is not None:
            if any(w < 0 for w in self.style_mix.values()) or sum(self.style_mix.values()) <= 0:
                raise ValueError("style_mix weights must be nonnegative with a positive sum")
        return self


class TrialTruth(BaseModel):
    trial_index: int
    decision_ms: float  # decision latency from trial onset
    response_ms: float  # decision + motor time from trial onset
    gaze_commit_ms: Optional[float] = None
    trial_type: Optional[TrialType] = None  # NK only
    correct: bool
    lapse: bool = False
    lateral_amplitude: float = 0.0

    @model_validator(mode="after")
    def commit_before_response(self):
        if self.gaze_commit_ms is not None and self.gaze_commit_ms > self.response_ms:
            raise ValueError("gaze commit must not follow the response")
        return self


class GroundTruth(BaseModel):
    """Planted per-trial quantities, written as a sidecar next to each log."""
    session_id: str
    player: str
    game: GameCode
    seed: int
    trials: List[TrialTruth] = Field(default_factory=list)


class CohortMember(BaseModel):
    player_id: str
    params: AgentParams = Field(default_factory=AgentParams)
    sessions: int = Field(default=2, ge=1)
    game: GameCode = "NK"


class CohortSpec(BaseModel):
    players: List[CohortMember] = Field(min_length=1)
    seed: int = 0

    @model_validator(mode="after")
    def unique_players(self):
        ids = [p.player_id for p in self.players]
        if len(ids) != len(set(ids)):
            raise ValueError("player ids must be unique within a cohort")
        return self


class SimulatedSession(BaseModel):
    """One generated session: the log plus its sidecar."""
    logfile: LogFile
    truth: GroundTruth


AGENT_STYLES: Dict[str, Dict[str, str]] = {
    "DG": {"path_style": "direct", "gaze_policy": "early_fix"},
    "IG": {"path_style": "indirect", "gaze_policy": "early_fix"},
    "DN": {"path_style": "direct", "gaze_policy": "no_fix"},
    "IN": {"path_style": "indirect", "gaze_policy": "no_fix"},
}
