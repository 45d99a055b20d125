from pydantic import BaseModel, Field, model_validator
from typing import Dict, List, Literal, Optional, Tuple

TrialType = Literal["DG", "IG", "DN", "IN"]
TRIAL_TYPES: Tuple[str, ...] = ("DG", "IG", "DN", "IN")

FEATURE_NAMES: Tuple[str, ...] = (
    "min_x", "max_x", "final_x",
    "min_z", "max_z", "final_z",
    "net_displacement", "path_length", "straightness",
    "max_lateral_deviation", "t_max_lateral_deviation",
    "mean_speed", "std_speed", "max_speed", "t_max_speed",
    "mean_abs_heading", "std_heading", "min_abs_heading", "max_abs_heading", "t_peak_abs_heading",
    "mean_sin_heading", "mean_cos_heading",
    "heading_sign_changes", "aligned_fraction", "t_first_alignment", "final_aligned_run",
    "mean_abs_yaw_rate", "max_abs_yaw_rate",
)


class Trajectory(BaseModel):
    """Per-trial movement/orientation series in the x-z plane."""
    session_id: str
    player: str
    trial_index: int
    t: List[float]  # ms
    x: List[float]
    z: List[float]
    yaw: List[float]
    target: Tuple[float, float]  # (x, z) of the selected knight
    selected_side: Literal["left", "right"]
    viewed: List[Optional[str]] = Field(default_factory=list)
    fixated: bool = False
    reflected: bool = False

    @model_validator(mode="after")
    def aligned_channels(self):
        n = len(self.t)
        if not (len(self.x) == len(self.z) == len(self.yaw) == n):
            raise ValueError("trajectory channels must share one length")
        if self.viewed and len(self.viewed) != n:
            raise ValueError("gaze channel length must match samples")
        return self

    def __len__(self) -> int:
        return len(self.t)


class HeadingSeries(BaseModel):
    heading: List[float]  # deg, signed gaze-minus-target-direction
    sin: List[float]
    cos: List[float]


class SessionProfile(BaseModel):
    session_id: str
    player: str
    proportions: Tuple[float, float, float, float]  # DG, IG, DN, IN
    n_trials: int

    @model_validator(mode="after")
    def normalized(self):
        if any(p < 0 for p in self.proportions) or abs(sum(self.proportions) - 1.0) > 1e-9:
            raise ValueError("profile proportions must be nonnegative and sum to 1")
        return self


class EmbedParams(BaseModel):
    n_neighbors: int = Field(default=5, gt=0)
    min_dist: float = Field(default=0.005, gt=0.0)
    spread: float = Field(default=1.0, gt=0.0)
    metric: Literal["euclidean"] = "euclidean"
    n_epochs: int = Field(default=200, gt=0)
    negative_sample_rate: int = Field(default=5, gt=0)
    learning_rate: float = Field(default=1.0, gt=0.0)


class ClusterParams(BaseModel):
    eps: float = Field(default=1.1, gt=0.0)
    min_samples: int = Field(default=30, gt=0)


class ConfusionMatrix(BaseModel):
    """Row-normalized identification votes (percent), rows = true player."""
    players: List[str]
    votes: List[List[float]]
    percent: List[List[float]]
    ties: List[str] = Field(default_factory=list)  # session ids resolved by tie-break
    unscored: List[str] = Field(default_factory=list)  # single-session players, rows left empty

    def diagonal(self) -> List[float]:
        return [self.percent[i][i] for i in range(len(self.players))]

    def mean_diagonal(self) -> Optional[float]:
        """Mean diagonal percentage over scored players; None when no player could be scored."""
        scored = [d for p, d in zip(self.players, self.diagonal()) if p not in self.unscored]
        return sum(scored) / len(scored) if scored else None


class JSDSummary(BaseModel):
    within: List[float]
    between: List[float]
    mean_within: Optional[float] = None
    mean_between: Optional[float] = None


class TrajectoryOutputs(BaseModel):
    """Everything the trajectory stage emits."""
    feature_rows: List[Dict] = Field(default_factory=list)
    embedding: List[Tuple[float, float]] = Field(default_factory=list)
    labels: List[int] = Field(default_factory=list)
    trial_types: List[TrialType] = Field(default_factory=list)
    profiles: List[SessionProfile] = Field(default_factory=list)
    confusion: Optional[ConfusionMatrix] = None
    jsd_summary: Optional[JSDSummary] = None
    cluster_trajectories: List[Dict] = Field(default_factory=list)
    rejected: int = 0
