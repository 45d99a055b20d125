"""
End-to-end integration test.

Runs the whole analysis over a simulated cohort:
1. Simulate ten players, two NK sessions each
2. Write and re-validate every log
3. Clean RT and gRT trials
4. Build the endpoint table
5. Correlations and test-retest reliability
6. Trajectory typing, clustering and player identification
7. Report and manifest

Each step checks its outputs against the planted ground truth where one exists.
"""
import numpy as np
import pytest

from cogplay.models.pipeline import PipelineConfig
from cogplay.services import pipeline_service
from cogplay.services.endpoint_service import build_endpoint_table
from cogplay.services.logfile_codec import LOG_EXTENSION
from cogplay.services.storage import LocalArtifactStore
from cogplay.services.synth_player import save_session, simulate_cohort
from cogplay.services.trajectory_service import map_clusters_to_types, run_trajectory_analysis

from tests.conftest import COHORT_SEED, cohort_spec


class TestCompleteWorkflow:
    """
    A single test running every stage in order, each step feeding the next.
    """

    @pytest.mark.slow
    def test_complete_workflow(self, tmp_path):
        store = LocalArtifactStore(tmp_path / "bundle")
        config = PipelineConfig(output_dir=str(tmp_path / "bundle"), seed=COHORT_SEED)

        # ====================================================================
        # STEP 1: Simulate the cohort
        # ====================================================================
        print("\n📝 STEP 1: Simulating cohort...")
        sessions = simulate_cohort(cohort_spec())

        assert len(sessions) == 20, f"Expected 20 sessions, got {len(sessions)}"
        planted = {
            (s.logfile.header.session_id, t.trial_index): t.trial_type
            for s in sessions for t in s.truth.trials
        }
        print(f"✅ {len(sessions)} sessions, {len(planted)} planted trials")

        # ====================================================================
        # STEP 2: Write and re-validate every log
        # ====================================================================
        print("\n📝 STEP 2: Writing and validating logs...")
        for session in sessions:
            save_session(session, store, prefix=f"{pipeline_service.LOG_DIR}/")

        paths = pipeline_service.collect_log_paths([], str(store.get_full_path(pipeline_service.LOG_DIR)))
        logfiles = pipeline_service.load_logs(paths)

        assert len(paths) == 20, f"Expected 20 {LOG_EXTENSION} files, got {len(paths)}"
        assert [log.header.session_id for log in logfiles] == sorted(s.logfile.header.session_id for s in sessions)
        by_id = {s.logfile.header.session_id: s.logfile for s in sessions}
        assert all(log == by_id[log.header.session_id] for log in logfiles), "Logs changed on a write/read cycle"
        print(f"✅ {len(logfiles)} logs validated")

        # ====================================================================
        # STEP 3: Clean RT and gRT trials
        # ====================================================================
        print("\n📝 STEP 3: Cleaning trials...")
        build = build_endpoint_table(logfiles, config.cleaning, config.endpoints)
        pipeline_service.write_cleaning_artifacts(build, store)

        rt_report = build.rt_cleaning.report.rows[0]
        grt_report = build.grt_cleaning.report.rows[0]
        assert 0 < rt_report.trials_total <= 20 * 40
        assert rt_report.trials_lost < rt_report.trials_total / 2, "Cleaning removed most trials"
        assert grt_report.sessions_total == 20
        print(f"✅ RT lost {rt_report.trials_lost} trials, gRT lost {grt_report.trials_lost}")

        # ====================================================================
        # STEP 4: Endpoint table
        # ====================================================================
        print("\n📝 STEP 4: Building endpoint table...")
        pipeline_service.write_endpoint_artifacts(build.rows, store)
        rt_rows = [r for r in build.rows if r.kind == "RT"]
        grt_rows = {(r.participant, r.session): r.value for r in build.rows if r.kind == "gRT"}

        assert len(rt_rows) >= 18, f"Too few sessions kept: {len(rt_rows)}"
        for row in rt_rows:
            if (row.participant, row.session) in grt_rows:
                assert grt_rows[(row.participant, row.session)] <= row.value, f"gRT above RT for {row.session}"
        print(f"✅ {len(build.rows)} endpoint rows")

        # ====================================================================
        # STEP 5: Correlations and reliability
        # ====================================================================
        print("\n📝 STEP 5: Computing statistics...")
        correlations, iccs = pipeline_service.compute_stats(build.rows, config)
        pipeline_service.write_stats_artifacts(correlations, iccs, store)

        assert [c.label for c in correlations] == ["NK RT vs gRT"]
        assert correlations[0].r > 0, "RT and gRT should move together"
        assert {i.label for i in iccs} == {"NK RT", "NK gRT"}
        print(f"✅ r={correlations[0].r:.2f}, BF10={correlations[0].bf10:.3g}")

        # ====================================================================
        # STEP 6: Trajectories and identification
        # ====================================================================
        print("\n📝 STEP 6: Trajectory analysis...")
        outputs, _ = run_trajectory_analysis(logfiles, config.embed, config.cluster, seed=COHORT_SEED)
        pipeline_service.write_trajectory_artifacts(outputs, store)

        planted_types = [planted[(row["session_id"], row["trial_index"])] for row in outputs.feature_rows]
        agreement = np.mean([p == row["trial_type"] for p, row in zip(planted_types, outputs.feature_rows)])
        diagonal = outputs.confusion.mean_diagonal()
        _, cluster_recovery = map_clusters_to_types(outputs.labels, planted_types)

        assert agreement >= 0.9, f"Trial typing recovered only {agreement:.1%} of planted types"
        assert cluster_recovery >= 0.9, f"Clusters recovered only {cluster_recovery:.1%} of planted types"
        assert outputs.confusion.unscored == []
        assert diagonal > 50.0, f"Identification mean diagonal {diagonal:.1f}% is too low"
        assert outputs.jsd_summary.mean_within < outputs.jsd_summary.mean_between
        print(f"✅ typing {agreement:.1%}, identification {diagonal:.1f}%, cluster/type {cluster_recovery:.1%}")

        # ====================================================================
        # STEP 7: Report and manifest
        # ====================================================================
        print("\n📝 STEP 7: Writing report...")
        manifest = pipeline_service.write_report(store, config, len(logfiles))

        report = store.read_text(pipeline_service.REPORT_FILE)
        assert "NK RT vs gRT" in report
        assert "Identification mean diagonal" in report
        assert len([n for n in manifest.files if n.endswith(LOG_EXTENSION)]) == 20
        assert pipeline_service.CONFUSION_FILE in manifest.files
        print(f"✅ Report and manifest with {len(manifest.files)} files")

        print("\n🎉 COMPLETE WORKFLOW PASSED")
