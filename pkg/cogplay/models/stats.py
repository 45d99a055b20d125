from pydantic import BaseModel, Field
from typing import List, Literal, Optional

BayesFactorMethod = Literal["jeffreys", "uniform", "jzs"]


class CorrResult(BaseModel):
    label: str = ""
    r: float = Field(ge=-1.0, le=1.0)
    n: int = Field(ge=3)
    p: float = Field(ge=0.0, le=1.0)
    bf10: float = Field(gt=0.0)
    rmse: float
    slope: float
    intercept: float
    p_limit: bool = False  # |r| = 1, p returned as its limit


class ICCResult(BaseModel):
    label: str = ""
    icc: float = Field(le=1.0)
    n: int = Field(ge=2)
    k: int = Field(ge=2)
    p: float
    f: Optional[float] = None
    msr: float
    msc: float
    mse: float


class Pairing(BaseModel):
    """One correlation: game endpoint vs external (or another game) endpoint."""
    label: str
    x_game: str
    x_kind: str
    y_game: str
    y_kind: str
    x_form: Optional[str] = None
    y_form: Optional[str] = None


class PairingSpec(BaseModel):
    pairings: List[Pairing] = Field(default_factory=list)
    bf_method: BayesFactorMethod = "jeffreys"
    bf_scale: float = 0.7071067811865476
