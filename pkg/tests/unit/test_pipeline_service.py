"""
Tests for the pipeline stages, the report and the run manifest.
"""
import json

import pytest

from cogplay.errors import ArtifactIOError, LogValidationError, StageError
from cogplay.models.pipeline import PipelineConfig, RunManifest
from cogplay.services import pipeline_service
from cogplay.services.logfile_codec import save_logfile
from cogplay.services.pipeline_service import (
    MANIFEST_FILE,
    REPORT_FILE,
    build_report_context,
    collect_log_paths,
    load_logs,
    run_pipeline,
    write_report,
    write_trajectory_artifacts,
)
from cogplay.services.storage import LocalArtifactStore
from cogplay.utils.checksums import sha256_bytes

from tests.conftest import write_cohort
from tests.factories import build_nk_log

BUNDLE_FILES = {
    "exclusion_report.csv",
    "exclusion_report_grt.csv",
    "endpoints.csv",
    "correlations.csv",
    "icc.csv",
    "features.csv",
    "embedding.csv",
    "clusters.csv",
    "profiles.json",
    "confusion_matrix.csv",
    "cluster_trajectories.csv",
    "report.md",
    "manifest.json",
}


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    """One full run from a simulated four-player cohort."""
    root = tmp_path_factory.mktemp("bundle")
    config = PipelineConfig(
        cohort_path=str(write_cohort(root / "cohort.json")),
        output_dir=str(root / "out"),
        seed=7,
    )
    manifest = run_pipeline(config)
    return config, manifest, LocalArtifactStore(root / "out")


class TestInputs:
    def test_collect_sorts_and_deduplicates(self, tmp_path):
        first = save_logfile(build_nk_log(session_id="B"), tmp_path / "logs" / "B.pxlog")
        second = save_logfile(build_nk_log(session_id="A"), tmp_path / "logs" / "nested" / "A.pxlog")
        (tmp_path / "logs" / "notes.txt").write_text("not a log")

        paths = collect_log_paths([str(first)], str(tmp_path / "logs"))
        assert paths == sorted([first, second])

    def test_missing_inputs(self, tmp_path):
        with pytest.raises(ArtifactIOError, match="log file not found"):
            collect_log_paths([str(tmp_path / "absent.pxlog")])
        with pytest.raises(ArtifactIOError, match="log directory not found"):
            collect_log_paths([], str(tmp_path / "absent"))

    def test_duplicate_sessions_refused(self, tmp_path):
        a = save_logfile(build_nk_log(session_id="S1"), tmp_path / "a.pxlog")
        b = save_logfile(build_nk_log(session_id="S1"), tmp_path / "b.pxlog")
        with pytest.raises(LogValidationError, match="appears in both"):
            load_logs([a, b])

    def test_invalid_log_names_the_file(self, tmp_path):
        path = tmp_path / "broken.pxlog"
        path.write_text('{"rec": "header"}\n')
        with pytest.raises(LogValidationError, match="broken.pxlog"):
            load_logs([path])


class TestFullRun:
    """End-to-end runs from a pipeline config."""

    def test_bundle_contents(self, bundle):
        _, manifest, store = bundle
        names = set(store.list("**/*"))
        assert BUNDLE_FILES <= names
        assert len([n for n in names if n.endswith(".pxlog")]) == 8
        assert len([n for n in names if n.endswith(".truth.json")]) == 8
        assert set(manifest.files) == names - {MANIFEST_FILE}

    def test_manifest_checksums(self, bundle):
        config, manifest, store = bundle
        recorded = RunManifest.model_validate_json(store.read_text(MANIFEST_FILE))
        assert recorded == manifest
        assert manifest.seed == 7
        assert manifest.sessions == 8
        assert "output_dir" not in manifest.config
        for name, digest in manifest.files.items():
            assert sha256_bytes(store.read_bytes(name)) == digest

    def test_same_config_same_bytes(self, bundle, tmp_path):
        config, _, store = bundle
        rerun = config.model_copy(update={"output_dir": str(tmp_path / "rerun")})
        run_pipeline(rerun)

        other = LocalArtifactStore(tmp_path / "rerun")
        assert other.list("**/*") == store.list("**/*")
        for name in store.list("**/*"):
            assert other.read_bytes(name) == store.read_bytes(name), name

    def test_missing_log_aborts_and_cleans_up(self, cohort_file, tmp_path):
        missing = tmp_path / "missing.pxlog"
        config = PipelineConfig(
            cohort_path=str(cohort_file),
            log_paths=[str(missing)],
            output_dir=str(tmp_path / "out"),
            seed=7,
        )
        with pytest.raises(StageError) as exc_info:
            run_pipeline(config)

        assert exc_info.value.stage == "validate"
        assert str(missing) in str(exc_info.value)
        assert exc_info.value.exit_code == ArtifactIOError.exit_code
        assert LocalArtifactStore(tmp_path / "out").list("**/*") == []

    def test_duplicate_session_ids_across_inputs(self, cohort_file, tmp_path):
        save_logfile(build_nk_log(session_id="P01-S1"), tmp_path / "logs" / "extra.pxlog")
        config = PipelineConfig(
            cohort_path=str(cohort_file),
            log_dir=str(tmp_path / "logs"),
            output_dir=str(tmp_path / "out"),
            seed=7,
        )
        with pytest.raises(StageError, match="duplicate session ids"):
            run_pipeline(config)

    def test_cohort_requires_seed(self, cohort_file, tmp_path):
        with pytest.raises(ValueError, match="seed"):
            PipelineConfig(cohort_path=str(cohort_file), output_dir=str(tmp_path / "out"))


class TestReport:
    def test_report_reflects_stage_files(self, bundle):
        _, manifest, store = bundle
        report = store.read_text(REPORT_FILE)
        assert f"Config hash: `{manifest.config_hash}`" in report
        assert "| NK | RT |" in report
        assert "NK RT vs gRT" in report
        assert "Identification mean diagonal" in report

    def test_context_from_existing_outputs(self, bundle):
        _, _, store = bundle
        context = build_report_context(store)
        assert context["manifest"] is None
        assert {(e["game"], e["kind"]) for e in context["endpoints"]} == {("NK", "RT"), ("NK", "gRT")}
        assert all(0 < e["n"] <= 8 for e in context["endpoints"])
        assert context["trajectory"]["n_trials"] > 0
        assert [r["label"] for r in context["icc"]] == ["NK RT", "NK gRT"]

    def test_empty_bundle(self, store):
        manifest = write_report(store)
        report = store.read_text(REPORT_FILE)
        assert "No endpoints." in report
        assert "No trajectory analysis." in report
        assert manifest.config_hash is None
        assert set(manifest.files) == {REPORT_FILE}

    def test_header_only_trajectory_tables(self, store):
        names = write_trajectory_artifacts(None, store)
        assert store.read_text(pipeline_service.FEATURES_FILE).startswith("session_id,player,trial_index,")
        assert json.loads(store.read_text(pipeline_service.PROFILES_FILE))["profiles"] == []
        assert len(names) == 6
