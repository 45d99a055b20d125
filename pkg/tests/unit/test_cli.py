"""
Tests for the cogplay command line and pipeline config loading.
"""
import json

import pytest

from cogplay.config import load_pipeline_config
from cogplay.errors import ArtifactIOError, LogValidationError
from cogplay.main import main
from cogplay.services.logfile_codec import save_logfile

from tests.conftest import write_cohort
from tests.factories import build_nk_log

STAGE_FILES = ["exclusion_report.csv", "exclusion_report_grt.csv", "endpoints.csv", "correlations.csv", "icc.csv"]


@pytest.fixture(scope="module")
def simulated_logs(tmp_path_factory):
    """Logs written by `cogplay simulate` for the four-player test cohort."""
    root = tmp_path_factory.mktemp("cli")
    cohort = write_cohort(root / "cohort.json")
    assert main(["simulate", "--cohort", str(cohort), "--seed", "7", "-o", str(root / "logs")]) == 0
    return root / "logs"


class TestSimulate:
    def test_seed_is_required(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["simulate", "--game", "NK"])
        assert exc_info.value.code == 2

    def test_cohort_logs_and_sidecars(self, simulated_logs):
        assert len(list(simulated_logs.glob("*.pxlog"))) == 8
        assert len(list(simulated_logs.glob("*.truth.json"))) == 8

    def test_single_player(self, tmp_path):
        args = ["simulate", "--seed", "3", "--game", "DD", "--player", "P09", "--sessions", "2", "-o", str(tmp_path)]
        assert main(args) == 0
        assert sorted(p.name for p in tmp_path.glob("*.pxlog")) == ["P09-S1.pxlog", "P09-S2.pxlog"]

    def test_schedule_only(self, tmp_path):
        assert main(["simulate", "--seed", "5", "--game", "BB", "--schedule-only", "-o", str(tmp_path)]) == 0
        schedule = json.loads((tmp_path / "schedule-BB-5.json").read_text())
        assert len(schedule["trials"]) == 48


class TestValidate:
    def test_valid_log(self, tmp_path, capsys):
        path = save_logfile(build_nk_log(), tmp_path / "ok.pxlog")
        assert main(["validate", str(path)]) == 0
        assert "1 trials, valid" in capsys.readouterr().out

    def test_corrupt_log(self, tmp_path, capsys):
        path = tmp_path / "corrupt.pxlog"
        path.write_text("not json\n")
        assert main(["validate", str(path)]) == 2
        assert "line 1" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.pxlog")]) == 4

    def test_unreadable_path(self, tmp_path, capsys):
        folder = tmp_path / "folder.pxlog"
        folder.mkdir()
        assert main(["validate", str(folder)]) == 4
        assert "cannot read" in capsys.readouterr().err


class TestStagewise:
    """Subcommands run one at a time produce the files of a full run."""

    def test_matches_full_run(self, simulated_logs, tmp_path):
        out = tmp_path / "stages"
        logs = str(simulated_logs)
        assert main(["clean", "--log-dir", logs, "-o", str(out)]) == 0
        assert main(["endpoints", "--log-dir", logs, "-o", str(out)]) == 0
        assert main(["stats", "-o", str(out)]) == 0

        config = tmp_path / "pipeline.json"
        config.write_text(json.dumps({"log_dir": logs, "output_dir": str(tmp_path / "bundle"), "seed": 7}))
        assert main(["run", "--config", str(config)]) == 0

        for name in STAGE_FILES:
            assert (out / name).read_bytes() == (tmp_path / "bundle" / name).read_bytes(), name

    def test_trajectory_and_report(self, simulated_logs, tmp_path, capsys):
        out = tmp_path / "out"
        assert main(["trajectory", "--log-dir", str(simulated_logs), "--seed", "7", "-o", str(out)]) == 0
        assert "Identification mean diagonal" in capsys.readouterr().out
        assert main(["report", "-o", str(out)]) == 0

        report = (out / "report.md").read_text()
        assert "## Trajectories" in report
        assert "No endpoints." in report
        assert (out / "manifest.json").exists()

    def test_stats_without_endpoint_table(self, tmp_path):
        assert main(["stats", "-o", str(tmp_path)]) == ArtifactIOError.exit_code

    def test_no_logs_given(self, tmp_path):
        assert main(["endpoints", "-o", str(tmp_path)]) == LogValidationError.exit_code

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "absent.json")]) == 4


class TestPipelineConfig:
    def test_defaults(self):
        config = load_pipeline_config()
        assert config.cleaning.max_cutoff == 10.0
        assert config.endpoints.correct_only
        assert config.seed is None

    def test_dotted_overrides(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({"seed": 1, "cleaning": {"max_cutoff": 8.0}, "cluster": {"eps": 0.9}}))
        config = load_pipeline_config(path, {"cluster.min_samples": 12, "seed": None, "pairing.bf_method": "jzs"})

        assert config.seed == 1
        assert config.cleaning.max_cutoff == 8.0
        assert config.cluster.eps == 0.9
        assert config.cluster.min_samples == 12
        assert config.pairing.bf_method == "jzs"

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text(json.dumps({"lateral_threshold": -1}))
        with pytest.raises(LogValidationError):
            load_pipeline_config(path)

    def test_unreadable_config(self, tmp_path):
        path = tmp_path / "pipeline.json"
        path.write_text("{broken")
        with pytest.raises(ArtifactIOError):
            load_pipeline_config(path)
