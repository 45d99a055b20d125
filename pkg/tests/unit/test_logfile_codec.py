"""
Tests for log serialization, validation and trial segmentation.
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError

from cogplay.errors import ArtifactIOError, LogParseError, LogValidationError, TrialNotFoundError
from cogplay.models.logfile import GameEvent, LogFile, LogHeader, StateSample
from cogplay.services.log_validator import validate_logfile
from cogplay.services.logfile_codec import (
    extract_trial_segment,
    iter_trial_segments,
    parse_logfile,
    read_logfile,
    save_logfile,
    write_logfile,
)

from tests.factories import build_nk_log, nk_trial


class TestRoundTrip:
    """write(parse(f)) is byte-identical and parse(write(L)) equals L."""

    def test_generated_session_is_byte_identical(self, nk_session):
        data = write_logfile(nk_session.logfile)
        assert write_logfile(parse_logfile(data)) == data

    def test_parse_restores_structure(self, nk_log):
        parsed = parse_logfile(write_logfile(nk_log))
        assert parsed == nk_log

    def test_write_is_deterministic(self, nk_session):
        assert write_logfile(nk_session.logfile) == write_logfile(nk_session.logfile)

    def test_header_only_file(self):
        logfile = LogFile(header=LogHeader(session_id="S0", player="P01", game="NK"))
        data = write_logfile(logfile)

        assert data.count(b"\n") == 1
        assert data.startswith(b'{"rec":"hdr"')
        assert parse_logfile(data) == logfile

    def test_save_and_read(self, tmp_path, nk_log):
        path = save_logfile(nk_log, tmp_path / "nested" / "S1.pxlog")
        assert read_logfile(path) == nk_log


class TestQuantization:
    """State samples hold exactly what the log can represent."""

    def state(self, **overrides):
        values = {"t": 0, "x": 0.0, "y": 0.0, "z": 0.0, "yaw": 0.0, "pitch": 0.0}
        values.update(overrides)
        return StateSample(**values)

    def test_position_rounded_to_log_precision(self):
        assert self.state(x=1.23456).x == 1.2346
        assert self.state(z=-0.00001).z == 0.0
        assert str(self.state(z=-0.00001).z) == "0.0"

    @pytest.mark.parametrize("yaw,expected", [
        (179.996, -180.0),
        (179.994, 179.99),
        (-179.996, -180.0),
        (-180.0, -180.0),
        (12.345678, 12.35),
    ])
    def test_yaw_near_the_seam(self, yaw, expected):
        assert self.state(yaw=yaw).yaw == expected

    def test_yaw_range_still_enforced(self):
        with pytest.raises(ValidationError):
            self.state(yaw=180.0)
        with pytest.raises(ValidationError):
            self.state(yaw=250.0)

    def test_non_finite_position_rejected(self):
        with pytest.raises(ValidationError):
            self.state(x=math.nan)
        with pytest.raises(ValidationError):
            self.state(y=math.inf)

    def test_seam_yaw_survives_round_trip(self):
        logfile = build_nk_log(pose=lambda t: (1.23456, -7.654321, 179.996, None))
        data = write_logfile(logfile)

        parsed = parse_logfile(data)
        assert parsed == logfile
        assert parsed.states()[0].yaw == -180.0
        assert write_logfile(parsed) == data

    @pytest.mark.parametrize("seed", range(5))
    def test_random_off_grid_poses_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        poses = {
            t: (float(rng.uniform(-50, 50)), float(rng.uniform(-50, 50)), float(rng.uniform(-180, 180)), None)
            for t in range(0, 3501, 50)
        }
        poses[0] = (poses[0][0], poses[0][1], 179.999, None)
        poses[50] = (poses[50][0], poses[50][1], -179.9951, None)
        logfile = build_nk_log(pose=poses.__getitem__)
        data = write_logfile(logfile)

        parsed = parse_logfile(data)
        assert parsed == logfile
        assert write_logfile(parsed) == data


class TestParseErrors:
    """Malformed input is reported with the offending line."""

    def test_yaw_out_of_range(self, nk_log):
        data = write_logfile(nk_log).replace(b'"yaw":0.00', b'"yaw":250.00', 1)
        with pytest.raises(LogParseError) as exc_info:
            parse_logfile(data)
        assert exc_info.value.line_number == 2
        assert "yaw" in exc_info.value.detail

    def test_invalid_json(self, nk_log):
        lines = write_logfile(nk_log).split(b"\n")
        lines[3] = b"{not json"
        with pytest.raises(LogParseError) as exc_info:
            parse_logfile(b"\n".join(lines))
        assert exc_info.value.line_number == 4

    def test_missing_header(self, nk_log):
        data = write_logfile(nk_log).split(b"\n", 1)[1]
        with pytest.raises(LogParseError, match="header"):
            parse_logfile(data)

    def test_empty_file(self):
        with pytest.raises(LogParseError, match="empty"):
            parse_logfile(b"")

    def test_unknown_event_payload(self, nk_log):
        data = write_logfile(nk_log).replace(b'{"target":"BLUE"}', b'{"knight":"BLUE"}')
        with pytest.raises(LogParseError, match="payload keys"):
            parse_logfile(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ArtifactIOError, match="not found"):
            read_logfile(tmp_path / "absent.pxlog")


class TestValidation:
    """Cross-record invariants."""

    def test_valid_log_has_no_errors(self, nk_log, nk_session):
        assert validate_logfile(nk_log) == []
        assert validate_logfile(nk_session.logfile) == []

    def test_out_of_order_records(self, nk_log):
        sequence = list(nk_log.log_sequence)
        sequence[4], sequence[5] = sequence[5], sequence[4]
        broken = nk_log.model_copy(update={"log_sequence": sequence})

        errors = validate_logfile(broken)
        assert any("precedes" in e for e in errors)

    def test_sample_gap(self, nk_log):
        sequence = [r for r in nk_log.log_sequence if not (r.rec == "state" and r.t == 500)]
        errors = validate_logfile(nk_log.model_copy(update={"log_sequence": sequence}))
        assert any("100 ms apart" in e for e in errors)

    def test_trial_not_covered(self):
        logfile = build_nk_log(trials=[nk_trial(start_t=1000, end_t=3000)], duration_ms=2500)
        errors = validate_logfile(logfile)
        assert any("not covered" in e for e in errors)

    def test_summary_disagrees_with_event(self, nk_log):
        sequence = [
            GameEvent(t=r.t, kind="click_select", payload={"target": "RED"})
            if r.rec == "event" and r.kind == "click_select" else r
            for r in nk_log.log_sequence
        ]
        errors = validate_logfile(nk_log.model_copy(update={"log_sequence": sequence}))
        assert any("event logged 'RED'" in e for e in errors)

    def test_write_refuses_invalid_log(self, nk_log):
        sequence = list(reversed(nk_log.log_sequence))
        with pytest.raises(LogValidationError, match="refusing"):
            write_logfile(nk_log.model_copy(update={"log_sequence": sequence}))


class TestTrialSegments:
    """Trial windows are cut from the log sequence inclusively."""

    def test_twenty_hz_window_sample_count(self, nk_log):
        segment = extract_trial_segment(nk_log, 0)
        assert len(segment.states) == 41
        assert segment.states[0].t == 1000
        assert segment.states[-1].t == 3000

    def test_events_inside_window(self, nk_log):
        segment = extract_trial_segment(nk_log, 0)
        assert [e.kind for e in segment.events] == ["click_select", "trial_feedback"]
        assert segment.response_event().payload == {"target": "BLUE"}

    def test_window_without_events(self):
        logfile = build_nk_log(trials=[nk_trial(response=None)], feedback=False)
        segment = extract_trial_segment(logfile, 0)
        assert segment.events == []
        assert segment.response_event() is None

    def test_last_trial_has_no_trailing_samples(self, nk_session):
        last = nk_session.logfile.trial_summary[-1]
        segment = extract_trial_segment(nk_session.logfile, last.trial_index)
        assert segment.states[-1].t <= last.end_t
        assert segment.states[0].t >= last.start_t

    def test_generated_trials_are_fully_sampled(self, nk_session):
        segments = iter_trial_segments(nk_session.logfile)
        assert len(segments) == 40
        for segment in segments:
            assert len(segment.states) >= segment.trial.duration_ms // 50

    def test_iterated_segments_match_single_extraction(self, nk_session):
        logfile = nk_session.logfile
        for segment in iter_trial_segments(logfile):
            single = extract_trial_segment(logfile, segment.trial.trial_index)
            assert single.states == segment.states
            assert single.events == segment.events

    def test_unknown_trial(self, nk_log):
        with pytest.raises(TrialNotFoundError):
            extract_trial_segment(nk_log, 99)
