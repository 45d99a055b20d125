"""
Service for Nether Knight trajectory analysis.

Trials are canonicalized (left selections mirrored so every target sits on the
right), resampled to a fixed length, summarised by movement and orientation
features, embedded in 2-D and clustered. Each trial is also typed by path
directness and gaze fixation; per-session type profiles feed player
identification by Jensen-Shannon distance.
"""
import logging
from collections import Counter, OrderedDict
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import jensenshannon
from sklearn.preprocessing import StandardScaler

from ..errors import LogValidationError, StatsPreconditionError
from ..models.logfile import LogFile, TrialSegment
from ..models.tasks import NK_KNIGHT_POSITIONS
from ..models.trajectory import (
    FEATURE_NAMES,
    TRIAL_TYPES,
    ClusterParams,
    ConfusionMatrix,
    EmbedParams,
    HeadingSeries,
    JSDSummary,
    SessionProfile,
    Trajectory,
    TrajectoryOutputs,
)
from ..utils.geometry import bearings, wrap_angle, wrap_angles
from .embedding_service import dbscan, embed_2d
from .endpoint_service import gaze_rt
from .logfile_codec import iter_trial_segments

logger = logging.getLogger(__name__)

ALIGNMENT_DEG = 10.0
RESAMPLE_LENGTH = 120
RANK_VOTES = (1.0, 0.5, 0.3)  # rank-1 vote; partial credit when the true player ranks 2nd or 3rd
TIE_TOLERANCE = 1e-12


# ----------------------------------------------------------------------
# Canonicalization and resampling
# ----------------------------------------------------------------------

def _selected_position(segment: TrialSegment) -> Optional[Tuple[float, float]]:
    trial = segment.trial
    positions = trial.stimulus.get("positions") or {}
    if trial.response in positions:
        x, z = positions[trial.response]
        return float(x), float(z)
    for side in ("left", "right"):
        if trial.stimulus.get(side) == trial.response:
            return NK_KNIGHT_POSITIONS[side]
    return None


def reflect(trajectory: Trajectory) -> Trajectory:
    """Mirror about the z-axis; applying it twice returns the original trajectory."""
    tx, tz = trajectory.target
    return trajectory.model_copy(update={
        "x": [-v for v in trajectory.x],
        "yaw": [wrap_angle(-v) for v in trajectory.yaw],
        "target": (-tx, tz),
        "selected_side": "left" if trajectory.selected_side == "right" else "right",
        "reflected": not trajectory.reflected,
    })


def canonicalize(segment: TrialSegment, fixated: Optional[bool] = None) -> Optional[Trajectory]:
    """
    Trajectory of one Nether Knight trial, mirrored to a right-side target.

    Returns None for rejected trials: timeouts, unknown selections and
    windows with fewer than two samples. Without an explicit `fixated` flag,
    the gaze-response fixation flag is used.

    Raises:
        LogValidationError: the segment is not a Nether Knight trial
    """
    trial = segment.trial
    if trial.game != "NK":
        raise LogValidationError(f"trial {trial.trial_index}: trajectories are defined for NK trials, got {trial.game}")
    if trial.outcome == "timeout" or trial.response is None:
        logger.debug(f"Trial {trial.trial_index}: rejected (no selection)")
        return None

    target = _selected_position(segment)
    if target is None:
        logger.debug(f"Trial {trial.trial_index}: rejected (selected target '{trial.response}' has no position)")
        return None

    samples = []
    for sample in segment.states:
        if samples and sample.t <= samples[-1].t:
            continue
        samples.append(sample)
    if len(samples) < 2:
        logger.debug(f"Trial {trial.trial_index}: rejected (fewer than two valid samples)")
        return None

    if fixated is None:
        fixated = gaze_rt(segment, trial.response).fixated

    trajectory = Trajectory(
        session_id="",
        player="",
        trial_index=trial.trial_index,
        t=[float(s.t) for s in samples],
        x=[s.x for s in samples],
        z=[s.z for s in samples],
        yaw=[s.yaw for s in samples],
        target=target,
        selected_side="left" if target[0] < 0 else "right",
        viewed=[s.viewed_target for s in samples],
        fixated=fixated,
    )
    return reflect(trajectory) if trajectory.selected_side == "left" else trajectory


def resample(trajectory: Trajectory, length: int = RESAMPLE_LENGTH) -> Trajectory:
    """
    Linear interpolation onto `length` points uniformly spaced in normalized time.

    Yaw is interpolated on its unwrapped series; the gaze channel takes the
    nearest earlier sample. First and last samples are kept exactly.
    """
    if len(trajectory) < 2:
        raise StatsPreconditionError("resampling needs at least two samples")
    if length < 2:
        raise StatsPreconditionError(f"resample length must be at least 2, got {length}")

    t = np.asarray(trajectory.t, dtype=float)
    u = (t - t[0]) / (t[-1] - t[0])
    grid = np.linspace(0.0, 1.0, length)

    def channel(values: np.ndarray, wrap: bool = False) -> List[float]:
        out = np.interp(grid, u, values)
        if wrap:
            out = wrap_angles(out)
        out[0], out[-1] = values[0], values[-1]
        return out.tolist()

    yaw = np.asarray(trajectory.yaw, dtype=float)
    unwrapped = np.unwrap(yaw, period=360.0)
    new_yaw = channel(unwrapped, wrap=True)
    new_yaw[0], new_yaw[-1] = float(yaw[0]), float(yaw[-1])

    viewed = []
    if trajectory.viewed:
        idx = np.clip(np.searchsorted(u, grid, side="right") - 1, 0, len(u) - 1)
        viewed = [trajectory.viewed[i] for i in idx]

    return trajectory.model_copy(update={
        "t": channel(t),
        "x": channel(np.asarray(trajectory.x, dtype=float)),
        "z": channel(np.asarray(trajectory.z, dtype=float)),
        "yaw": new_yaw,
        "viewed": viewed,
    })


# ----------------------------------------------------------------------
# Features
# ----------------------------------------------------------------------

def heading_series(trajectory: Trajectory) -> HeadingSeries:
    """Signed angle (deg) between the view direction and the direction to the target, per sample."""
    tx, tz = trajectory.target
    heading = wrap_angles(np.asarray(trajectory.yaw) - bearings(trajectory.x, trajectory.z, tx, tz))
    radians = np.radians(heading)
    return HeadingSeries(heading=heading.tolist(), sin=np.sin(radians).tolist(), cos=np.cos(radians).tolist())


def lateral_deviation(trajectory: Trajectory) -> np.ndarray:
    """Signed distance from the start->target line; positive to the left of the direction of travel."""
    x = np.asarray(trajectory.x, dtype=float)
    z = np.asarray(trajectory.z, dtype=float)
    dx, dz = trajectory.target[0] - x[0], trajectory.target[1] - z[0]
    norm = np.hypot(dx, dz)
    if norm == 0:
        return np.zeros_like(x)
    return (x - x[0]) * (-dz / norm) + (z - z[0]) * (dx / norm)


def features27(trajectory: Trajectory, heading: Optional[HeadingSeries] = None) -> np.ndarray:
    """
    Movement and orientation summary of a canonicalized, resampled trajectory.

    Values follow FEATURE_NAMES. Time indices are fractions of the resampled
    length (0 to 1); speeds are blocks/s and yaw rates deg/s.
    """
    heading = heading or heading_series(trajectory)
    n = len(trajectory)
    last = max(n - 1, 1)
    x = np.asarray(trajectory.x, dtype=float)
    z = np.asarray(trajectory.z, dtype=float)
    dt = np.diff(np.asarray(trajectory.t, dtype=float)) / 1000.0
    dt[dt <= 0] = np.inf

    steps = np.hypot(np.diff(x), np.diff(z))
    path = float(steps.sum())
    net = float(np.hypot(x[-1] - x[0], z[-1] - z[0]))
    speed = steps / dt
    lateral = lateral_deviation(trajectory)

    h = np.asarray(heading.heading, dtype=float)
    abs_h = np.abs(h)
    signs = np.sign(h)
    signs = signs[signs != 0]
    aligned = abs_h < ALIGNMENT_DEG
    trailing = int(np.argmin(aligned[::-1])) if not aligned.all() else n
    yaw_rate = np.abs(np.diff(np.unwrap(np.asarray(trajectory.yaw, dtype=float), period=360.0)) / dt)

    values = {
        "min_x": x.min(), "max_x": x.max(), "final_x": x[-1],
        "min_z": z.min(), "max_z": z.max(), "final_z": z[-1],
        "net_displacement": net,
        "path_length": path,
        "straightness": net / path if path > 0 else 0.0,
        "max_lateral_deviation": lateral.max(),
        "t_max_lateral_deviation": int(np.argmax(lateral)) / last,
        "mean_speed": speed.mean() if speed.size else 0.0,
        "std_speed": speed.std() if speed.size else 0.0,
        "max_speed": speed.max() if speed.size else 0.0,
        "t_max_speed": int(np.argmax(speed)) / last if speed.size else 0.0,
        "mean_abs_heading": abs_h.mean(),
        "std_heading": h.std(),
        "min_abs_heading": abs_h.min(),
        "max_abs_heading": abs_h.max(),
        "t_peak_abs_heading": int(np.argmax(abs_h)) / last,
        "mean_sin_heading": float(np.mean(heading.sin)),
        "mean_cos_heading": float(np.mean(heading.cos)),
        "heading_sign_changes": int((signs[1:] != signs[:-1]).sum()),
        "aligned_fraction": aligned.mean(),
        "t_first_alignment": int(np.argmax(aligned)) / last if aligned.any() else 1.0,
        "final_aligned_run": trailing / n,
        "mean_abs_yaw_rate": yaw_rate.mean() if yaw_rate.size else 0.0,
        "max_abs_yaw_rate": yaw_rate.max() if yaw_rate.size else 0.0,
    }
    return np.array([float(values[name]) for name in FEATURE_NAMES])


def classify_trial(trajectory: Trajectory, lateral_threshold: float = 0.5, fixated: Optional[bool] = None) -> str:
    """DG/IG/DN/IN from the largest signed lateral deviation and the fixation flag."""
    direct = float(lateral_deviation(trajectory).max()) <= lateral_threshold
    gaze = trajectory.fixated if fixated is None else fixated
    return ("D" if direct else "I") + ("G" if gaze else "N")


# ----------------------------------------------------------------------
# Profiles and identification
# ----------------------------------------------------------------------

def session_profile(types: Sequence[str], session_id: str = "", player: str = "") -> SessionProfile:
    """
    Proportion of the session's trials in each of DG, IG, DN, IN.

    Raises:
        StatsPreconditionError: no classified trials
    """
    if not types:
        raise StatsPreconditionError(f"session {session_id or '?'}: no classified trials for a profile")
    counts = Counter(types)
    unknown = set(counts) - set(TRIAL_TYPES)
    if unknown:
        raise StatsPreconditionError(f"unknown trial types: {', '.join(sorted(unknown))}")
    total = len(types)
    return SessionProfile(
        session_id=session_id,
        player=player,
        proportions=tuple(counts[t] / total for t in TRIAL_TYPES),
        n_trials=total,
    )


def jsd(p: Sequence[float], q: Sequence[float]) -> float:
    """Jensen-Shannon distance with base-2 logarithms, in [0, 1]."""
    p_arr = p.proportions if isinstance(p, SessionProfile) else p
    q_arr = q.proportions if isinstance(q, SessionProfile) else q
    value = float(jensenshannon(np.asarray(p_arr, dtype=float), np.asarray(q_arr, dtype=float), base=2))
    return 0.0 if np.isnan(value) else value


def _player_sessions(profiles: Sequence[SessionProfile]) -> "OrderedDict[str, List[SessionProfile]]":
    grouped: "OrderedDict[str, List[SessionProfile]]" = OrderedDict()
    for player in sorted({p.player for p in profiles}):
        grouped[player] = [p for p in profiles if p.player == player]
    return grouped


def identify(profiles: Sequence[SessionProfile]) -> ConfusionMatrix:
    """
    Rank every player's average profile by JSD to each session and tally weighted votes.

    The session's own player is averaged over its other sessions only, so a
    player with a single session cannot be scored: it stays a candidate for
    everyone else and is listed in `unscored` with an empty row. Equal
    distances are ordered by player id and the session is listed in `ties`.
    """
    if not profiles:
        raise StatsPreconditionError("identification needs at least one session profile")

    grouped = _player_sessions(profiles)
    players = list(grouped)
    index = {p: i for i, p in enumerate(players)}
    full_means = {p: np.mean([s.proportions for s in sessions], axis=0) for p, sessions in grouped.items()}
    votes = np.zeros((len(players), len(players)))
    ties: List[str] = []
    unscored = [p for p in players if len(grouped[p]) < 2]
    if unscored:
        logger.info(f"{len(unscored)} single-session players kept as references only")

    for profile in profiles:
        own = grouped[profile.player]
        if len(own) < 2:
            continue
        distances = []
        for player in players:
            if player == profile.player:
                mean = np.mean([s.proportions for s in own if s is not profile], axis=0)
            else:
                mean = full_means[player]
            distances.append((jsd(profile.proportions, mean), index[player], player))
        distances.sort()

        ranked = [player for _, _, player in distances]
        top = [d for d, _, _ in distances[: len(RANK_VOTES) + 1]]
        if any(abs(a - b) <= TIE_TOLERANCE for a, b in zip(top, top[1:])):
            ties.append(profile.session_id)
            logger.warning(f"Session {profile.session_id}: JSD tie resolved by player order")

        row = index[profile.player]
        votes[row, index[ranked[0]]] += RANK_VOTES[0]
        for rank, weight in enumerate(RANK_VOTES[1:], start=1):
            if rank < len(ranked) and ranked[rank] == profile.player:
                votes[row, row] += weight

    totals = votes.sum(axis=1, keepdims=True)
    percent = np.divide(100.0 * votes, totals, out=np.zeros_like(votes), where=totals > 0)
    matrix = ConfusionMatrix(
        players=players, votes=votes.tolist(), percent=percent.tolist(), ties=ties, unscored=unscored
    )
    if matrix.mean_diagonal() is not None:
        logger.info(f"Identification over {len(profiles)} sessions: mean diagonal {matrix.mean_diagonal():.1f}%")
    return matrix


def within_between_jsd(profiles: Sequence[SessionProfile]) -> JSDSummary:
    """JSD over all session pairs, split by whether both sessions belong to one player."""
    within, between = [], []
    for a, b in combinations(profiles, 2):
        (within if a.player == b.player else between).append(jsd(a.proportions, b.proportions))
    return JSDSummary(
        within=within,
        between=between,
        mean_within=float(np.mean(within)) if within else None,
        mean_between=float(np.mean(between)) if between else None,
    )


# ----------------------------------------------------------------------
# Cluster summaries
# ----------------------------------------------------------------------

def cluster_mean_trajectories(trajectories: Sequence[Trajectory], labels: Sequence[int]) -> List[Dict]:
    """Per cluster and resampled step: mean x/z with 25th and 75th percentiles. Noise is skipped."""
    labels = np.asarray(labels)
    rows = []
    for label in sorted(set(labels.tolist()) - {-1}):
        members = [t for t, l in zip(trajectories, labels) if l == label]
        x = np.array([t.x for t in members])
        z = np.array([t.z for t in members])
        p25_x, p75_x = np.percentile(x, [25, 75], axis=0)
        p25_z, p75_z = np.percentile(z, [25, 75], axis=0)
        mean_x, mean_z = x.mean(axis=0), z.mean(axis=0)
        for step in range(x.shape[1]):
            rows.append({
                "cluster": int(label),
                "step": step,
                "n": len(members),
                "mean_x": float(mean_x[step]),
                "mean_z": float(mean_z[step]),
                "p25_x": float(p25_x[step]),
                "p75_x": float(p75_x[step]),
                "p25_z": float(p25_z[step]),
                "p75_z": float(p75_z[step]),
            })
    return rows


def map_clusters_to_types(labels: Sequence[int], types: Sequence[str]) -> Tuple[Dict[int, str], float]:
    """
    Majority trial type per cluster and the share of non-noise trials whose
    cluster's majority type is their own.
    """
    by_cluster: Dict[int, Counter] = {}
    for label, trial_type in zip(labels, types):
        if label == -1:
            continue
        by_cluster.setdefault(int(label), Counter())[trial_type] += 1

    mapping = {label: sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
               for label, counter in sorted(by_cluster.items())}
    clustered = sum(sum(c.values()) for c in by_cluster.values())
    matched = sum(counter[mapping[label]] for label, counter in by_cluster.items())
    return mapping, (matched / clustered if clustered else 0.0)


# ----------------------------------------------------------------------
# Orchestration
# ----------------------------------------------------------------------

def run_trajectory_analysis(
    logfiles: Iterable[LogFile],
    embed: Optional[EmbedParams] = None,
    cluster: Optional[ClusterParams] = None,
    lateral_threshold: float = 0.5,
    resample_length: int = RESAMPLE_LENGTH,
    seed: int = 0,
) -> Tuple[TrajectoryOutputs, List[Trajectory]]:
    """
    Canonicalize, type and featurize every NK trial, then embed, cluster and profile.

    Returns the outputs and the resampled trajectories in feature-row order.

    Raises:
        StatsPreconditionError: no usable NK trials, or too few trials to embed
    """
    sessions = sorted((log for log in logfiles if log.header.game == "NK"), key=lambda log: log.header.session_id)
    outputs = TrajectoryOutputs()
    resampled: List[Trajectory] = []
    features = []
    session_types: "OrderedDict[Tuple[str, str], List[str]]" = OrderedDict()

    for log in sessions:
        header = log.header
        session_types[(header.session_id, header.player)] = []
        for segment in iter_trial_segments(log):
            trajectory = canonicalize(segment)
            if trajectory is None:
                outputs.rejected += 1
                continue
            trajectory = trajectory.model_copy(update={"session_id": header.session_id, "player": header.player})
            trial_type = classify_trial(trajectory, lateral_threshold)
            fixed = resample(trajectory, resample_length)
            vector = features27(fixed)

            resampled.append(fixed)
            features.append(vector)
            outputs.trial_types.append(trial_type)
            session_types[(header.session_id, header.player)].append(trial_type)
            outputs.feature_rows.append({
                "session_id": header.session_id,
                "player": header.player,
                "trial_index": trajectory.trial_index,
                "reflected": trajectory.reflected,
                "fixated": trajectory.fixated,
                "trial_type": trial_type,
                **dict(zip(FEATURE_NAMES, vector.tolist())),
            })

    if not features:
        raise StatsPreconditionError("no usable Nether Knight trials for trajectory analysis")
    logger.info(f"Trajectory features for {len(features)} trials ({outputs.rejected} rejected)")

    scaled = StandardScaler().fit_transform(np.vstack(features))
    embedding = embed_2d(scaled, embed, seed)
    labels = dbscan(embedding, cluster)
    outputs.embedding = [(float(a), float(b)) for a, b in embedding]
    outputs.labels = [int(label) for label in labels]

    for (session_id, player), types in session_types.items():
        if not types:
            logger.warning(f"Session {session_id}: no classified trials, left out of profiles")
            continue
        outputs.profiles.append(session_profile(types, session_id, player))

    if outputs.profiles:
        outputs.confusion = identify(outputs.profiles)
        outputs.jsd_summary = within_between_jsd(outputs.profiles)
    outputs.cluster_trajectories = cluster_mean_trajectories(resampled, labels)
    return outputs, resampled
