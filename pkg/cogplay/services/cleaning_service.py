"""
Service for outlier exclusion.

Per assessment: drop trials over the maximum cutoff, drop sessions losing too
many trials to the cutoff, drop log-MAD outliers within each remaining
session, then optionally drop sessions whose mean is an outlier among the
participant's own sessions. Every step is tallied for the exclusion report.
"""
import io
import logging
from collections import OrderedDict
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import StatsPreconditionError
from ..models.cleaning import (
    MAD_NORMAL_CONSISTENCY,
    MEANAD_NORMAL_CONSISTENCY,
    CleaningConfig,
    CleaningResult,
    ExclusionReport,
    ExclusionRow,
    SalvageRow,
    SessionValues,
)
from ..models.tasks import GAME_NAMES

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "Assessment", "Trials Total", "Trials Lost", "Trials Lost %",
    "Sessions Total", "Sessions Lost", "Sessions Lost %",
]


def robust_scale(values: Sequence[float]) -> Tuple[float, float]:
    """
    Median and normal-consistent spread of `values`.

    The spread is 1.4826 x MAD; a zero MAD falls back to 1.2533 x the mean
    absolute deviation about the median, which is zero only for constant data.
    """
    x = np.asarray(values, dtype=float)
    median = float(np.median(x))
    deviations = np.abs(x - median)
    spread = MAD_NORMAL_CONSISTENCY * float(np.median(deviations))
    if spread == 0.0:
        spread = MEANAD_NORMAL_CONSISTENCY * float(np.mean(deviations))
    return median, spread


def outlier_mask(values: Sequence[float], multiplier: float) -> np.ndarray:
    """True where |v - median| exceeds `multiplier` robust spreads; all False for a zero spread."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return np.zeros(0, dtype=bool)
    median, spread = robust_scale(x)
    if spread == 0.0:
        return np.zeros(x.size, dtype=bool)
    return np.abs(x - median) > multiplier * spread


def participant_outlier_filter(
    values_by_participant: Dict[str, List[float]], ratio: float = 3.5
) -> Dict[str, List[float]]:
    """
    Remove values more than `ratio` robust spreads from their participant's median.

    Participants with fewer than three values are returned unchanged.
    """
    kept = {}
    for participant, values in values_by_participant.items():
        if len(values) < 3:
            kept[participant] = list(values)
            continue
        mask = outlier_mask(values, ratio)
        kept[participant] = [v for v, out in zip(values, mask) if not out]
        if mask.any():
            logger.debug(f"Participant filter removed {int(mask.sum())} values for {participant}")
    return kept


def _assessment_name(game: str) -> str:
    return GAME_NAMES.get(game, game)


def clean_sessions(sessions: List[SessionValues], config: CleaningConfig = None) -> CleaningResult:
    """
    Run the exclusion procedure over per-trial endpoint values (seconds).

    Raises:
        StatsPreconditionError: no sessions, or a non-positive endpoint value
    """
    config = config or CleaningConfig()
    if not sessions:
        raise StatsPreconditionError("no sessions to clean")

    games = list(OrderedDict.fromkeys(s.game for s in sessions))
    logger.info(f"Cleaning {len(sessions)} sessions for {', '.join(games)}")

    kept: List[SessionValues] = []
    dropped: List[str] = []
    excluded: Dict[str, List[int]] = {}
    steps = {"cutoff": 0, "session": 0, "session_trials": 0, "log_mad": 0, "participant": 0}
    per_game = {g: {"trials_total": 0, "trials_lost": 0, "sessions_total": 0, "sessions_lost": 0} for g in games}

    for session in sessions:
        values = np.asarray(session.values, dtype=float)
        indices = np.asarray(session.trial_indices, dtype=int)
        if np.any(values <= 0):
            raise StatsPreconditionError(f"session {session.session_id}: endpoint values must be positive")
        tally = per_game[session.game]
        tally["trials_total"] += values.size
        tally["sessions_total"] += 1

        # Step 1: maximum cutoff
        over = values > config.max_cutoff
        steps["cutoff"] += int(over.sum())

        # Step 2: session loss
        if values.size and over.sum() / values.size > config.session_loss_threshold:
            steps["session"] += 1
            steps["session_trials"] += int((~over).sum())
            tally["trials_lost"] += values.size
            tally["sessions_lost"] += 1
            dropped.append(session.session_id)
            excluded[session.session_id] = indices.tolist()
            logger.debug(
                f"Dropped session {session.session_id}: {int(over.sum())}/{values.size} trials over "
                f"{config.max_cutoff} s"
            )
            continue

        # Step 3: log-MAD within the session
        remaining = ~over
        mad_out = np.zeros(values.size, dtype=bool)
        mad_out[remaining] = outlier_mask(np.log(values[remaining]), config.log_mad_multiplier)
        steps["log_mad"] += int(mad_out.sum())

        keep = remaining & ~mad_out
        tally["trials_lost"] += int((~keep).sum())
        excluded[session.session_id] = indices[~keep].tolist()
        kept.append(session.model_copy(update={
            "values": values[keep].tolist(),
            "trial_indices": indices[keep].tolist(),
        }))

    if config.participant_filter:
        kept = _filter_session_means(kept, config, steps, per_game, dropped, excluded)

    rows = []
    for game in games:
        tally = per_game[game]
        rows.append(ExclusionRow(
            assessment=_assessment_name(game),
            trials_total=tally["trials_total"],
            trials_lost=tally["trials_lost"],
            trials_lost_pct=_pct(tally["trials_lost"], tally["trials_total"]),
            sessions_total=tally["sessions_total"],
            sessions_lost=tally["sessions_lost"],
            sessions_lost_pct=_pct(tally["sessions_lost"], tally["sessions_total"]),
        ))

    logger.info(
        f"Cleaning removed {steps['cutoff']} trials over cutoff, {steps['session']} sessions, "
        f"{steps['log_mad']} log-MAD outliers"
    )
    return CleaningResult(
        kept=kept,
        report=ExclusionReport(rows=rows, step_counts=steps),
        dropped_sessions=dropped,
        excluded=excluded,
    )


def _pct(part: int, total: int) -> float:
    return 100.0 * part / total if total else 0.0


def _filter_session_means(kept, config, steps, per_game, dropped, excluded) -> List[SessionValues]:
    """Participant-level step over each participant's session means, per game."""
    groups: Dict[Tuple[str, str], List[SessionValues]] = OrderedDict()
    for session in kept:
        groups.setdefault((session.game, session.participant), []).append(session)

    survivors = []
    for (game, participant), group in groups.items():
        means = [float(np.mean(s.values)) if s.values else 0.0 for s in group]
        mask = outlier_mask(means, config.participant_mad_ratio) if len(group) >= 3 else np.zeros(len(group), bool)
        for session, out in zip(group, mask):
            if out:
                steps["participant"] += 1
                per_game[game]["sessions_lost"] += 1
                per_game[game]["trials_lost"] += len(session.values)
                dropped.append(session.session_id)
                excluded[session.session_id] = sorted(excluded[session.session_id] + session.trial_indices)
                logger.debug(f"Participant filter dropped session {session.session_id} of {participant}")
            else:
                survivors.append(session)

    order = {s.session_id: i for i, s in enumerate(kept)}
    return sorted(survivors, key=lambda s: order[s.session_id])


def compare_reports(rt_report: ExclusionReport, grt_report: ExclusionReport) -> List[SalvageRow]:
    """Trials and sessions kept by the gaze-based endpoint that the classical RT lost."""
    rows = []
    for rt_row in rt_report.rows:
        try:
            grt_row = grt_report.row(rt_row.assessment)
        except KeyError:
            continue
        salvaged = rt_row.trials_lost - grt_row.trials_lost
        rows.append(SalvageRow(
            assessment=rt_row.assessment,
            trials_salvaged=salvaged,
            trials_salvaged_pct=_pct(salvaged, rt_row.trials_total),
            sessions_salvaged=rt_row.sessions_lost - grt_row.sessions_lost,
        ))
    return rows


def report_frame(report: ExclusionReport) -> pd.DataFrame:
    """The report as a table with the exclusion-accounting column headers."""
    return pd.DataFrame(
        [
            [
                r.assessment,
                r.trials_total,
                r.trials_lost,
                f"{r.trials_lost_pct:.1f}%",
                r.sessions_total,
                r.sessions_lost,
                f"{r.sessions_lost_pct:.0f}%",
            ]
            for r in report.rows
        ],
        columns=REPORT_COLUMNS,
    )


def report_csv(report: ExclusionReport) -> str:
    buffer = io.StringIO()
    report_frame(report).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()
