from pydantic import BaseModel, Field, field_validator, model_validator
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

GameCode = Literal["NK", "DD", "BB", "RR"]
Outcome = Literal["correct", "incorrect", "timeout"]
EventKind = Literal[
    "click_select", "door_enter", "shot", "block_place", "block_break", "trial_feedback", "skip_phase"
]

# Payload keys are fixed per event kind
EVENT_PAYLOAD_KEYS: Dict[str, frozenset] = {
    "click_select": frozenset({"target"}),
    "door_enter": frozenset({"door"}),
    "shot": frozenset({"side"}),
    "block_place": frozenset({"cell", "color"}),
    "block_break": frozenset({"cell"}),
    "trial_feedback": frozenset({"trial_index", "outcome"}),
    "skip_phase": frozenset({"phase"}),
}

# Event that carries the player's choice, per game
RESPONSE_EVENT: Dict[str, str] = {
    "NK": "click_select",
    "DD": "door_enter",
    "BB": "shot",
}

RESPONSE_KEY: Dict[str, str] = {
    "click_select": "target",
    "door_enter": "door",
    "shot": "side",
}

# Decimal places kept for state samples, on the model and on disk
POSITION_DECIMALS = 4
ANGLE_DECIMALS = 2


class StateSample(BaseModel):
    """
    High-frequency player state (position, orientation, view).

    Values are held at log resolution: positions to POSITION_DECIMALS and
    angles to ANGLE_DECIMALS. A yaw that rounds up to 180 wraps to -180.
    """
    rec: Literal["state"] = "state"
    t: int = Field(ge=0)  # ms since session start
    x: float = Field(allow_inf_nan=False)
    y: float = Field(allow_inf_nan=False)
    z: float = Field(allow_inf_nan=False)
    yaw: float = Field(ge=-180.0, lt=180.0)  # 0 = facing +z, positive toward +x
    pitch: float = Field(ge=-90.0, le=90.0)
    viewed_target: Optional[str] = None

    @field_validator("x", "y", "z")
    @classmethod
    def quantize_position(cls, v: float) -> float:
        return round(v, POSITION_DECIMALS) + 0.0

    @field_validator("yaw")
    @classmethod
    def quantize_yaw(cls, v: float) -> float:
        v = round(v, ANGLE_DECIMALS) + 0.0
        return -180.0 if v >= 180.0 else v

    @field_validator("pitch")
    @classmethod
    def quantize_pitch(cls, v: float) -> float:
        return round(v, ANGLE_DECIMALS) + 0.0


class EnvSample(BaseModel):
    """Low-frequency environment snapshot."""
    rec: Literal["env"] = "env"
    t: int = Field(ge=0)
    blocks: List[Tuple[Tuple[int, int, int], str]] = Field(default_factory=list)


class GameEvent(BaseModel):
    rec: Literal["event"] = "event"
    t: int = Field(ge=0)
    kind: EventKind
    payload: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_payload_keys(self):
        expected = EVENT_PAYLOAD_KEYS[self.kind]
        if set(self.payload) != expected:
            raise ValueError(
                f"payload keys for {self.kind} must be {sorted(expected)}, got {sorted(self.payload)}"
            )
        return self


LogRecord = Annotated[Union[StateSample, EnvSample, GameEvent], Field(discriminator="rec")]

# Tie order for records sharing a timestamp
RECORD_RANK: Dict[str, int] = {"state": 0, "env": 1, "event": 2}


class TrialRecord(BaseModel):
    rec: Literal["trial"] = "trial"
    game: GameCode
    trial_index: int = Field(ge=0)
    start_t: int = Field(ge=0)
    end_t: int = Field(ge=0)  # response / feedback onset; feedback period excluded
    stimulus: Dict[str, Any] = Field(default_factory=dict)
    correct_answer: str
    response: Optional[str] = None
    outcome: Outcome

    @model_validator(mode="after")
    def check_outcome(self):
        if self.start_t >= self.end_t:
            raise ValueError(f"trial {self.trial_index}: start_t must precede end_t")
        if self.outcome == "timeout":
            if self.response is not None:
                raise ValueError(f"trial {self.trial_index}: timeout trials carry no response")
        elif (self.response == self.correct_answer) != (self.outcome == "correct"):
            raise ValueError(
                f"trial {self.trial_index}: outcome '{self.outcome}' inconsistent with response"
            )
        return self

    @property
    def duration_ms(self) -> int:
        return self.end_t - self.start_t


class LogHeader(BaseModel):
    rec: Literal["hdr"] = "hdr"
    session_id: str
    player: str  # nickname, stable across sessions
    game: GameCode
    state_rate_hz: int = 20
    env_rate_hz: int = 1
    seed: Optional[int] = None

    @field_validator("state_rate_hz", "env_rate_hz")
    @classmethod
    def positive_rate(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("sampling rates must be positive")
        return v


class LogFile(BaseModel):
    """Session header + time-ordered log sequence + trial summary."""
    header: LogHeader
    log_sequence: List[LogRecord] = Field(default_factory=list)
    trial_summary: List[TrialRecord] = Field(default_factory=list)

    def states(self) -> List[StateSample]:
        return [r for r in self.log_sequence if isinstance(r, StateSample)]

    def events(self) -> List[GameEvent]:
        return [r for r in self.log_sequence if isinstance(r, GameEvent)]

    def trial(self, trial_index: int) -> Optional[TrialRecord]:
        for record in self.trial_summary:
            if record.trial_index == trial_index:
                return record
        return None


class TrialSegment(BaseModel):
    """Samples and events of one trial window."""
    trial: TrialRecord
    states: List[StateSample] = Field(default_factory=list)
    events: List[GameEvent] = Field(default_factory=list)

    def response_event(self) -> Optional[GameEvent]:
        kind = RESPONSE_EVENT.get(self.trial.game)
        for event in reversed(self.events):
            if event.kind == kind:
                return event
        return None
