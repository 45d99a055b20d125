from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Literal, Tuple

Color = Literal["RED", "BLUE", "GREEN", "YELLOW"]
COLORS: Tuple[str, ...] = ("RED", "BLUE", "GREEN", "YELLOW")
Shape = Literal["circle", "square", "triangle", "plus"]
SHAPES: Tuple[str, ...] = ("circle", "square", "triangle", "plus")
QUANTITIES: Tuple[int, ...] = (1, 2, 3, 4)
DDRule = Literal["color", "shape", "quantity"]
DD_RULES: Tuple[str, ...] = ("color", "shape", "quantity")
NKRule = Literal["semantic", "color"]

GAME_NAMES: Dict[str, str] = {
    "NK": "Nether Knight",
    "DD": "Door Decipher",
    "BB": "Barnyard Blast",
    "RR": "Rainbow Random",
}
Side = Literal["left", "right"]

# RR block colours (up to three per pattern)
RR_COLORS: Tuple[str, ...] = ("red", "green", "blue")
RR_MAX_SIZE = 10
RR_GRID = 5

# Arena layout in the x-z plane (blocks); every trial starts at the origin facing +z
START_POSITION: Tuple[float, float] = (0.0, 0.0)
NK_KNIGHT_POSITIONS: Dict[str, Tuple[float, float]] = {"left": (-3.0, 10.0), "right": (3.0, 10.0)}
DD_DOOR_POSITIONS: Tuple[Tuple[float, float], ...] = ((-4.5, 10.0), (-1.5, 10.0), (1.5, 10.0), (4.5, 10.0))
BB_TARGET_POSITIONS: Dict[str, Tuple[float, float]] = {"left": (-3.0, 8.0), "right": (3.0, 8.0)}


class ScheduleTiming(BaseModel):
    """Timing metadata shared by schedules and the synthetic player (ms)."""
    stimulus_ms: int = 5000
    timeout_ms: int = 10000
    feedback_ms: int = 1500
    rr_preparation_ms: int = 5000
    rr_observation_ms: int = 60000
    rr_build_ms: int = 60000
    rr_judging_ms: int = 5000


class NKStimulus(BaseModel):
    word: Color
    ink: Color
    rule: NKRule

    @model_validator(mode="after")
    def incongruent(self):
        if self.word == self.ink:
            raise ValueError("Nether Knight stimuli are always incongruent (word != ink)")
        return self


class DDCard(BaseModel):
    color: Color
    shape: Shape
    quantity: int = Field(ge=1, le=4)

    def attribute(self, rule: str):
        return getattr(self, rule)


class DDTrial(BaseModel):
    key: DDCard
    doors: List[DDCard] = Field(min_length=4, max_length=4)
    active_rule: DDRule

    @model_validator(mode="after")
    def single_match(self):
        matches = [d for d in self.doors if d.attribute(self.active_rule) == self.key.attribute(self.active_rule)]
        if len(matches) != 1:
            raise ValueError(f"exactly one door must match the key on {self.active_rule}")
        return self


class BBStimulus(BaseModel):
    species: Literal["cow", "pig"]
    center_dir: Side
    congruent: bool  # flankers face the same way as the centre animal


class RRBlock(BaseModel):
    cell: Tuple[int, int]
    color: str

    def key(self) -> Tuple[int, int, str]:
        return (self.cell[0], self.cell[1], self.color)


class RRState(BaseModel):
    """Staircase state of a Rainbow Random run."""
    current_size: int = Field(default=1, ge=1, le=RR_MAX_SIZE)
    fail_counts: Dict[int, int] = Field(default_factory=dict)
    finished: bool = False
    history: List[Tuple[int, bool]] = Field(default_factory=list)  # (size, passed)
