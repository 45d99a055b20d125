"""
Canonical serialization of log files.

One JSON object per line with a "rec" discriminator: the header first, then
the time-ordered log sequence, then the trial summary. State samples are
quantized on the model to the precision written here, so parse(write(L)) == L
for any valid L and write(parse(f)) is byte-identical.
"""
import bisect
import json
import logging
from pathlib import Path
from typing import Any, Dict, List

from pydantic import ValidationError

from ..errors import ArtifactIOError, LogParseError, LogValidationError, TrialNotFoundError
from ..models.logfile import (
    ANGLE_DECIMALS,
    POSITION_DECIMALS,
    EnvSample,
    GameEvent,
    LogFile,
    LogHeader,
    StateSample,
    TrialRecord,
    TrialSegment,
)
from .log_validator import log_validator as _validator

logger = logging.getLogger(__name__)

LOG_EXTENSION = ".pxlog"


def _dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _pos(value: float) -> str:
    return f"{value:.{POSITION_DECIMALS}f}"


def _ang(value: float) -> str:
    return f"{value:.{ANGLE_DECIMALS}f}"


def _encode_header(h: LogHeader) -> str:
    return (
        f'{{"rec":"hdr","session_id":{_dumps(h.session_id)},"player":{_dumps(h.player)},'
        f'"game":"{h.game}","state_rate_hz":{h.state_rate_hz},"env_rate_hz":{h.env_rate_hz},'
        f'"seed":{_dumps(h.seed)}}}'
    )


def _encode_state(s: StateSample) -> str:
    return (
        f'{{"rec":"state","t":{s.t},"x":{_pos(s.x)},"y":{_pos(s.y)},"z":{_pos(s.z)},'
        f'"yaw":{_ang(s.yaw)},"pitch":{_ang(s.pitch)},"viewed":{_dumps(s.viewed_target)}}}'
    )


def _encode_env(e: EnvSample) -> str:
    blocks = [[list(pos), kind] for pos, kind in e.blocks]
    return f'{{"rec":"env","t":{e.t},"blocks":{_dumps(blocks)}}}'


def _encode_event(e: GameEvent) -> str:
    return f'{{"rec":"event","t":{e.t},"kind":"{e.kind}","payload":{_dumps(e.payload)}}}'


def _encode_trial(r: TrialRecord) -> str:
    return (
        f'{{"rec":"trial","game":"{r.game}","trial_index":{r.trial_index},'
        f'"start_t":{r.start_t},"end_t":{r.end_t},"stimulus":{_dumps(r.stimulus)},'
        f'"correct_answer":{_dumps(r.correct_answer)},"response":{_dumps(r.response)},'
        f'"outcome":"{r.outcome}"}}'
    )


def _decode(obj: Dict[str, Any]):
    rec = obj.get("rec")
    if rec == "hdr":
        return LogHeader(**obj)
    if rec == "state":
        data = dict(obj)
        data["viewed_target"] = data.pop("viewed", None)
        return StateSample(**data)
    if rec == "env":
        blocks = [(tuple(pos), kind) for pos, kind in obj.get("blocks", [])]
        return EnvSample(t=obj["t"], blocks=blocks)
    if rec == "event":
        return GameEvent(**obj)
    if rec == "trial":
        return TrialRecord(**obj)
    raise ValueError(f"unknown record type {rec!r}")


def write_logfile(logfile: LogFile) -> bytes:
    """Serialize a valid LogFile to its canonical bytes; invalid files are refused."""
    is_valid, errors = _validator.validate(logfile)
    if not is_valid:
        raise LogValidationError(f"refusing to serialize invalid log: {errors[0]}")

    lines: List[str] = [_encode_header(logfile.header)]
    for record in logfile.log_sequence:
        if isinstance(record, StateSample):
            lines.append(_encode_state(record))
        elif isinstance(record, EnvSample):
            lines.append(_encode_env(record))
        else:
            lines.append(_encode_event(record))
    lines.extend(_encode_trial(r) for r in logfile.trial_summary)
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_logfile(data: bytes) -> LogFile:
    """
    Parse canonical log bytes.

    Raises:
        LogParseError: malformed line or record-level invariant, with its line number
        LogValidationError: cross-record invariant (ordering, cadence, coverage)
    """
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise LogParseError(f"not UTF-8: {e}", line_number=1)

    header = None
    sequence = []
    trials = []
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = _decode(json.loads(line))
        except json.JSONDecodeError as e:
            raise LogParseError(f"invalid JSON: {e.msg}", line_number)
        except (ValidationError, ValueError, KeyError, TypeError) as e:
            raise LogParseError(str(e), line_number)

        if header is None:
            if not isinstance(record, LogHeader):
                raise LogParseError("first record must be the header", line_number)
            header = record
        elif isinstance(record, LogHeader):
            raise LogParseError("duplicate header record", line_number)
        elif isinstance(record, TrialRecord):
            trials.append(record)
        else:
            sequence.append(record)

    if header is None:
        raise LogParseError("empty log file", 1)

    logfile = LogFile(header=header, log_sequence=sequence, trial_summary=trials)
    is_valid, errors = _validator.validate(logfile)
    if not is_valid:
        raise LogValidationError(errors[0])
    return logfile


def _segment(logfile: LogFile, times: List[int], trial: TrialRecord) -> TrialSegment:
    lo = bisect.bisect_left(times, trial.start_t)
    hi = bisect.bisect_right(times, trial.end_t)
    window = logfile.log_sequence[lo:hi]
    return TrialSegment(
        trial=trial,
        states=[r for r in window if isinstance(r, StateSample)],
        events=[r for r in window if isinstance(r, GameEvent)],
    )


def extract_trial_segment(logfile: LogFile, trial_index: int) -> TrialSegment:
    """Return the trial record with the state samples and events inside [start_t, end_t]."""
    trial = logfile.trial(trial_index)
    if trial is None:
        raise TrialNotFoundError(f"trial {trial_index} not in session {logfile.header.session_id}")

    return _segment(logfile, [r.t for r in logfile.log_sequence], trial)


def iter_trial_segments(logfile: LogFile) -> List[TrialSegment]:
    """All trial segments of a session, in trial-summary order."""
    times = [r.t for r in logfile.log_sequence]
    return [_segment(logfile, times, trial) for trial in logfile.trial_summary]


def read_logfile(path: str | Path) -> LogFile:
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise ArtifactIOError(f"log file not found: {path}")
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path}: {e}")
    return parse_logfile(data)


def save_logfile(logfile: LogFile, path: str | Path) -> Path:
    path = Path(path)
    data = write_logfile(logfile)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}")
    logger.debug(f"Wrote {len(data)} bytes to {path}")
    return path
