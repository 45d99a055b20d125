"""
Service for validating log files.
Checks the cross-record invariants pydantic cannot see on a single record:
stream ordering, sampling cadence, trial coverage and trial/event agreement.
"""
import logging
from typing import List, Optional, Tuple

from ..models.logfile import (
    EnvSample,
    GameEvent,
    LogFile,
    RECORD_RANK,
    RESPONSE_EVENT,
    RESPONSE_KEY,
    StateSample,
)
from ..models.tasks import ScheduleTiming

logger = logging.getLogger(__name__)

SPACING_TOLERANCE_MS = 1


class LogFileValidator:
    """
    Validates a LogFile as a whole.

    Returns every violation found so callers can either report all of them
    or stop at the first one (the `validate` subcommand does the latter).
    """

    def __init__(self, timing: Optional[ScheduleTiming] = None):
        self.timing = timing or ScheduleTiming()

    def validate(self, logfile: LogFile) -> Tuple[bool, List[str]]:
        errors: List[str] = []
        errors.extend(self._validate_order(logfile))
        errors.extend(self._validate_cadence(logfile))
        errors.extend(self._validate_trials(logfile))
        return (len(errors) == 0, errors)

    def _validate_order(self, logfile: LogFile) -> List[str]:
        """Global time order, ties ordered state < env < event."""
        errors = []
        previous = None
        for i, record in enumerate(logfile.log_sequence):
            if previous is not None:
                if record.t < previous.t:
                    errors.append(
                        f"record {i}: time {record.t} ms precedes previous record at {previous.t} ms"
                    )
                elif record.t == previous.t and RECORD_RANK[record.rec] < RECORD_RANK[previous.rec]:
                    errors.append(
                        f"record {i}: {record.rec} at {record.t} ms must precede {previous.rec} at the same time"
                    )
            previous = record
        return errors

    def _validate_cadence(self, logfile: LogFile) -> List[str]:
        errors = []
        period = round(1000 / logfile.header.state_rate_hz)
        env_period = round(1000 / logfile.header.env_rate_hz)

        last_state: Optional[StateSample] = None
        last_env: Optional[EnvSample] = None
        for record in logfile.log_sequence:
            if isinstance(record, StateSample):
                if last_state is not None:
                    gap = record.t - last_state.t
                    if abs(gap - period) > SPACING_TOLERANCE_MS:
                        errors.append(
                            f"state samples at {last_state.t} and {record.t} ms are {gap} ms apart "
                            f"(expected {period} ± {SPACING_TOLERANCE_MS})"
                        )
                last_state = record
            elif isinstance(record, EnvSample):
                if last_env is not None and record.t - last_env.t < env_period:
                    errors.append(
                        f"environment samples at {last_env.t} and {record.t} ms closer than {env_period} ms"
                    )
                last_env = record
        return errors

    def _validate_trials(self, logfile: LogFile) -> List[str]:
        errors = []
        states = logfile.states()
        first_t = states[0].t if states else None
        last_t = states[-1].t if states else None
        events = logfile.events()

        seen = set()
        previous_end = None
        for trial in logfile.trial_summary:
            if trial.trial_index in seen:
                errors.append(f"trial {trial.trial_index}: duplicate trial index")
            seen.add(trial.trial_index)

            if trial.game != logfile.header.game:
                errors.append(f"trial {trial.trial_index}: game {trial.game} differs from header")

            if previous_end is not None and trial.start_t <= previous_end:
                errors.append(f"trial {trial.trial_index}: window overlaps the previous trial")
            previous_end = trial.end_t

            if first_t is None or first_t > trial.start_t or last_t < trial.end_t:
                errors.append(
                    f"trial {trial.trial_index}: window [{trial.start_t}, {trial.end_t}] not covered by state samples"
                )

            errors.extend(self._validate_response(trial, events))
        return errors

    def _validate_response(self, trial, events: List[GameEvent]) -> List[str]:
        """The summary's response must agree with the logged response event."""
        kind = RESPONSE_EVENT.get(trial.game)
        if kind is None:
            return []

        in_window = [e for e in events if e.kind == kind and trial.start_t <= e.t <= trial.end_t]
        if trial.outcome == "timeout":
            on_time = [e for e in in_window if e.t - trial.start_t <= self.timing.timeout_ms]
            if on_time:
                return [f"trial {trial.trial_index}: timeout recorded but a response arrived in time"]
            return []

        if not in_window:
            return [f"trial {trial.trial_index}: no {kind} event inside the trial window"]

        response = in_window[-1]
        errors = []
        if response.t != trial.end_t:
            errors.append(f"trial {trial.trial_index}: response event at {response.t} ms, end_t is {trial.end_t}")
        logged = str(response.payload[RESPONSE_KEY[kind]])
        if logged != trial.response:
            errors.append(
                f"trial {trial.trial_index}: summary response '{trial.response}' but event logged '{logged}'"
            )
        return errors


# Singleton instance
log_validator = LogFileValidator()


def validate_logfile(logfile: LogFile) -> List[str]:
    """Every invariant violation in `logfile`; empty when valid."""
    return log_validator.validate(logfile)[1]
