"""
Service for per-session endpoints.

Classical response time (RT), gaze response time (gRT) and the Rainbow Random
threshold (theta), plus ingestion of externally scored tasks so they can be
paired with game endpoints.
"""
import io
import logging
from pathlib import Path
from typing import Iterable, List, Optional, Union

import numpy as np
import pandas as pd

from ..errors import ArtifactIOError, LogValidationError, NoResponseTimeError, StatsPreconditionError
from ..models.cleaning import CleaningConfig, SessionValues
from ..models.endpoints import (
    EndpointBuild,
    EndpointOptions,
    EndpointRow,
    ExternalIngest,
    GazeResult,
    PsychFit,
)
from ..models.logfile import RESPONSE_KEY, LogFile, TrialRecord, TrialSegment
from .cleaning_service import clean_sessions
from .logfile_codec import iter_trial_segments
from .psychometric_service import fit_2pl

logger = logging.getLogger(__name__)

RT_GAMES = ("NK", "DD", "BB")
ENDPOINT_COLUMNS = ["participant", "session", "game", "kind", "value", "n_trials", "form", "source"]
EXTERNAL_COLUMNS = ["participant", "task", "form", "kind", "value"]
ENDPOINT_KINDS = ("RT", "gRT", "theta")


def trial_rt(trial: TrialRecord, implausible_rt: float = 0.1) -> float:
    """
    Seconds from trial onset to the response.

    Raises:
        NoResponseTimeError: timeout trials have no response time
    """
    if trial.outcome == "timeout":
        raise NoResponseTimeError(f"trial {trial.trial_index} timed out; no response time")
    seconds = trial.duration_ms / 1000.0
    if seconds < implausible_rt:
        logger.warning(f"Trial {trial.trial_index}: implausibly fast response ({seconds:.3f} s)")
    return seconds


def _selected_target(segment: TrialSegment) -> Optional[str]:
    if segment.trial.response is not None:
        return segment.trial.response
    event = segment.response_event()
    if event is None:
        return None
    return str(event.payload[RESPONSE_KEY[event.kind]])


def gaze_rt(segment: TrialSegment, selected: Optional[str] = None) -> GazeResult:
    """
    Earliest sample from which the view stays on the selected target through the response.

    Without such a sample the trial's RT is returned with fixated=False.

    Raises:
        LogValidationError: the segment has no state samples to read the gaze channel from
    """
    trial = segment.trial
    if not segment.states:
        raise LogValidationError(f"trial {trial.trial_index}: no state samples, gaze channel missing")

    selected = selected if selected is not None else _selected_target(segment)
    fallback = GazeResult(seconds=trial.duration_ms / 1000.0, fixated=False)
    if selected is None:
        return fallback

    onset = None
    for sample in reversed(segment.states):
        if sample.t > trial.end_t:
            continue
        if sample.viewed_target != selected:
            break
        onset = sample.t
    if onset is None:
        return fallback
    return GazeResult(seconds=(onset - trial.start_t) / 1000.0, fixated=True)


def session_trial_values(logfile: LogFile, kind: str = "RT") -> SessionValues:
    """
    Per-trial endpoint values (seconds) of one session, the input to cleaning.

    Timeout trials contribute their window duration as RT, which always lies
    beyond the 10 s cutoff. A gRT of zero (target already in view at onset)
    is raised to one state-sample period, never beyond the trial's RT.
    """
    sample_period = 1.0 / logfile.header.state_rate_hz
    values, indices = [], []
    floored = 0
    for segment in iter_trial_segments(logfile):
        trial = segment.trial
        if kind == "RT":
            value = trial.duration_ms / 1000.0 if trial.outcome == "timeout" else trial_rt(trial)
        elif kind == "gRT":
            value = gaze_rt(segment).seconds
            if value <= 0.0:
                value = min(sample_period, trial.duration_ms / 1000.0)
                floored += 1
        else:
            raise StatsPreconditionError(f"no per-trial values for endpoint kind '{kind}'")
        values.append(value)
        indices.append(trial.trial_index)

    header = logfile.header
    if floored:
        logger.debug(f"Session {header.session_id}: {floored} onset fixations floored to {sample_period:.3f} s")
    return SessionValues(
        participant=header.player,
        session_id=header.session_id,
        game=header.game,
        values=values,
        trial_indices=indices,
    )


def rr_theta(logfile: LogFile, max_difficulty: int = 10) -> PsychFit:
    """2PL threshold over the pattern sizes and pass/fail outcomes of one Rainbow Random run."""
    levels = [int(t.stimulus["size"]) for t in logfile.trial_summary]
    outcomes = [t.outcome == "correct" for t in logfile.trial_summary]
    return fit_2pl(levels, outcomes, max_difficulty=max_difficulty)


def build_endpoint_table(
    logfiles: Iterable[LogFile],
    cleaning: Optional[CleaningConfig] = None,
    options: Optional[EndpointOptions] = None,
) -> EndpointBuild:
    """Clean RT and gRT separately, then average the kept trials per session; fit theta for RR runs."""
    options = options or EndpointOptions()
    logfiles = list(logfiles)
    rows: List[EndpointRow] = []
    build = EndpointBuild()

    timed = [log for log in logfiles if log.header.game in RT_GAMES]
    if timed:
        by_session = {log.header.session_id: log for log in timed}
        rt_values = [session_trial_values(log, "RT") for log in timed]
        build.implausible = sum(v < options.implausible_rt for s in rt_values for v in s.values)
        if build.implausible:
            logger.warning(f"{build.implausible} responses faster than {options.implausible_rt} s (kept)")

        build.rt_cleaning = clean_sessions(rt_values, cleaning)
        build.grt_cleaning = clean_sessions([session_trial_values(log, "gRT") for log in timed], cleaning)

        for kind, result in (("RT", build.rt_cleaning), ("gRT", build.grt_cleaning)):
            for kept in result.kept:
                outcomes = {t.trial_index: t.outcome for t in by_session[kept.session_id].trial_summary}
                values = [
                    v for v, i in zip(kept.values, kept.trial_indices)
                    if not options.correct_only or outcomes[i] == "correct"
                ]
                if not values:
                    logger.warning(f"Session {kept.session_id}: no usable trials for {kind}")
                    continue
                rows.append(EndpointRow(
                    participant=kept.participant,
                    session=kept.session_id,
                    game=kept.game,
                    kind=kind,
                    value=float(np.mean(values)),
                    n_trials=len(values),
                ))

    for log in logfiles:
        if log.header.game != "RR":
            continue
        try:
            fit = rr_theta(log, options.rr_max_difficulty)
        except StatsPreconditionError as e:
            logger.warning(f"Session {log.header.session_id}: no threshold ({e.detail})")
            continue
        build.fits[log.header.session_id] = fit
        rows.append(EndpointRow(
            participant=log.header.player,
            session=log.header.session_id,
            game="RR",
            kind="theta",
            value=fit.theta,
            n_trials=len(log.trial_summary),
        ))

    build.rows = sorted(rows, key=lambda r: (r.game, r.kind, r.participant, r.session))
    logger.info(f"Computed {len(build.rows)} endpoint rows from {len(logfiles)} sessions")
    return build


def ingest_external_scores(source: Union[str, Path, io.StringIO]) -> ExternalIngest:
    """
    Read externally scored task endpoints from CSV (participant, task, form, kind, value).

    Rows with a missing or invalid value are rejected with a message; an
    optional `session` column defaults to "1".

    Raises:
        ArtifactIOError: the file cannot be read
        LogValidationError: missing columns or a duplicate (participant, task, form)
    """
    try:
        frame = pd.read_csv(source, dtype={"participant": str, "task": str, "form": str, "kind": str, "session": str})
    except FileNotFoundError:
        raise ArtifactIOError(f"external scores not found: {source}")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactIOError(f"cannot read external scores {source}: {e}")

    missing = [c for c in EXTERNAL_COLUMNS if c not in frame.columns]
    if missing:
        raise LogValidationError(f"external scores missing columns: {', '.join(missing)}")

    frame["form"] = frame["form"].fillna("")
    duplicated = frame.duplicated(subset=["participant", "task", "form"], keep=False)
    if duplicated.any():
        first = frame[duplicated].iloc[0]
        raise LogValidationError(
            f"duplicate external score for participant {first['participant']}, "
            f"task {first['task']}, form '{first['form']}'"
        )

    result = ExternalIngest()
    for position, record in enumerate(frame.to_dict("records")):
        line = position + 2  # header is line 1
        if pd.isna(record["value"]) or pd.isna(record["participant"]) or pd.isna(record["task"]):
            result.rejected.append(f"row {line}: missing participant, task or value")
            continue
        if record["kind"] not in ENDPOINT_KINDS:
            result.rejected.append(f"row {line}: unknown endpoint kind '{record['kind']}'")
            continue
        session = record.get("session")
        try:
            result.rows.append(EndpointRow(
                participant=record["participant"],
                session=session if isinstance(session, str) and session else "1",
                game=record["task"],
                kind=record["kind"],
                value=float(record["value"]),
                n_trials=0,
                form=record["form"] or None,
                source="external",
            ))
        except (ValueError, TypeError) as e:
            result.rejected.append(f"row {line}: {e}")

    for message in result.rejected:
        logger.warning(f"External scores: {message}")
    logger.info(f"Ingested {len(result.rows)} external endpoint rows ({len(result.rejected)} rejected)")
    return result


def endpoint_frame(rows: List[EndpointRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=ENDPOINT_COLUMNS)


def endpoint_csv(rows: List[EndpointRow]) -> str:
    buffer = io.StringIO()
    endpoint_frame(rows).to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


def read_endpoint_table(source: Union[str, Path, io.StringIO]) -> List[EndpointRow]:
    """Parse an endpoints CSV written by endpoint_csv."""
    try:
        frame = pd.read_csv(source, dtype={"participant": str, "session": str, "game": str, "form": str})
    except FileNotFoundError:
        raise ArtifactIOError(f"endpoint table not found: {source}")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactIOError(f"cannot read endpoint table {source}: {e}")

    missing = [c for c in ENDPOINT_COLUMNS if c not in frame.columns]
    if missing:
        raise LogValidationError(f"endpoint table missing columns: {', '.join(missing)}")

    rows = []
    for record in frame.to_dict("records"):
        record["form"] = None if pd.isna(record["form"]) else record["form"]
        record["n_trials"] = int(record["n_trials"])
        try:
            rows.append(EndpointRow(**record))
        except ValueError as e:
            raise LogValidationError(f"invalid endpoint row: {e}")
    return rows
