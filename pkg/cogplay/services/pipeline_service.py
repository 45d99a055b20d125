"""
Pipeline service.

Runs simulate -> validate -> clean -> endpoints -> stats -> trajectory -> report
for one PipelineConfig and writes the bundle through an artifact store. The
per-stage writers are shared with the CLI subcommands, so running the stages
one by one produces the same files as a full run.
"""
import io
import json
import logging
from collections import Counter
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .. import __version__
from ..config import settings
from ..errors import ArtifactIOError, CogplayError, LogValidationError, StageError
from ..models.endpoints import EndpointBuild, EndpointRow
from ..models.logfile import LogFile
from ..models.pipeline import PipelineConfig, RunManifest
from ..models.stats import CorrResult, ICCResult
from ..models.trajectory import FEATURE_NAMES, TrajectoryOutputs
from ..utils.checksums import config_hash, sha256_bytes
from . import stats_service
from .cleaning_service import REPORT_COLUMNS, report_csv
from .endpoint_service import (
    RT_GAMES,
    build_endpoint_table,
    endpoint_csv,
    ingest_external_scores,
)
from .logfile_codec import LOG_EXTENSION, read_logfile
from .report_renderer import report_renderer
from .storage import ArtifactStore, LocalArtifactStore
from .synth_player import load_cohort_spec, save_session, simulate_cohort
from .trajectory_service import run_trajectory_analysis

logger = logging.getLogger(__name__)

EXCLUSION_FILE = "exclusion_report.csv"
EXCLUSION_GRT_FILE = "exclusion_report_grt.csv"
ENDPOINTS_FILE = "endpoints.csv"
CORRELATIONS_FILE = "correlations.csv"
ICC_FILE = "icc.csv"
FEATURES_FILE = "features.csv"
EMBEDDING_FILE = "embedding.csv"
CLUSTERS_FILE = "clusters.csv"
PROFILES_FILE = "profiles.json"
CONFUSION_FILE = "confusion_matrix.csv"
CLUSTER_TRAJECTORIES_FILE = "cluster_trajectories.csv"
REPORT_FILE = "report.md"
MANIFEST_FILE = "manifest.json"
LOG_DIR = "logs"

TRIAL_KEY = ["session_id", "player", "trial_index"]
CLUSTER_TRAJECTORY_COLUMNS = ["cluster", "step", "n", "mean_x", "mean_z", "p25_x", "p75_x", "p25_z", "p75_z"]


def _csv(frame: pd.DataFrame) -> str:
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    return buffer.getvalue()


# ----------------------------------------------------------------------
# Inputs
# ----------------------------------------------------------------------

def collect_log_paths(log_paths: List[str], log_dir: Optional[str] = None) -> List[Path]:
    """
    Explicit log paths plus every log file under `log_dir`, sorted and de-duplicated.

    Raises:
        ArtifactIOError: a named file or the directory does not exist
    """
    paths = []
    for raw in log_paths:
        path = Path(raw)
        if not path.is_file():
            raise ArtifactIOError(f"log file not found: {path}")
        paths.append(path)
    if log_dir:
        directory = Path(log_dir)
        if not directory.is_dir():
            raise ArtifactIOError(f"log directory not found: {directory}")
        paths.extend(sorted(directory.rglob(f"*{LOG_EXTENSION}")))
    return sorted(set(paths))


def load_logs(paths: List[Path]) -> List[LogFile]:
    """
    Parse and validate every log; duplicate session ids are refused.

    Raises:
        ArtifactIOError: unreadable file
        LogValidationError: any invariant violation, prefixed with the file name
    """
    logfiles, seen = [], {}
    for path in paths:
        try:
            logfile = read_logfile(path)
        except LogValidationError as e:
            raise LogValidationError(f"{path}: {e.detail}")
        session_id = logfile.header.session_id
        if session_id in seen:
            raise LogValidationError(f"session {session_id} appears in both {seen[session_id]} and {path}")
        seen[session_id] = path
        logfiles.append(logfile)
    logger.info(f"Loaded {len(logfiles)} log files")
    return logfiles


# ----------------------------------------------------------------------
# Stage writers
# ----------------------------------------------------------------------

def write_cleaning_artifacts(build: EndpointBuild, store: ArtifactStore) -> List[str]:
    empty = _csv(pd.DataFrame(columns=REPORT_COLUMNS))
    store.write_text(EXCLUSION_FILE, report_csv(build.rt_cleaning.report) if build.rt_cleaning else empty)
    store.write_text(EXCLUSION_GRT_FILE, report_csv(build.grt_cleaning.report) if build.grt_cleaning else empty)
    return [EXCLUSION_FILE, EXCLUSION_GRT_FILE]


def write_endpoint_artifacts(rows: List[EndpointRow], store: ArtifactStore) -> List[str]:
    store.write_text(ENDPOINTS_FILE, endpoint_csv(rows))
    return [ENDPOINTS_FILE]


def compute_stats(rows: List[EndpointRow], config: PipelineConfig) -> Tuple[List[CorrResult], List[ICCResult]]:
    """Configured pairings (RT vs gRT per game when none are configured) and per-endpoint ICCs."""
    spec = config.pairing
    if not spec.pairings:
        spec = stats_service.default_pairings(rows).model_copy(
            update={"bf_method": spec.bf_method, "bf_scale": spec.bf_scale}
        )
    return stats_service.pair_endpoints(rows, spec), stats_service.icc_table(rows)


def write_stats_artifacts(correlations: List[CorrResult], iccs: List[ICCResult], store: ArtifactStore) -> List[str]:
    store.write_text(CORRELATIONS_FILE, stats_service.correlations_csv(correlations))
    store.write_text(ICC_FILE, stats_service.icc_csv(iccs))
    return [CORRELATIONS_FILE, ICC_FILE]


def write_trajectory_artifacts(outputs: Optional[TrajectoryOutputs], store: ArtifactStore) -> List[str]:
    """Plot-ready trajectory tables; header-only tables when there was nothing to analyse."""
    outputs = outputs or TrajectoryOutputs()
    features = pd.DataFrame(
        outputs.feature_rows,
        columns=TRIAL_KEY + ["reflected", "fixated", "trial_type", *FEATURE_NAMES],
    )
    keys = features[TRIAL_KEY]

    embedding = keys.copy()
    coords = np.asarray(outputs.embedding, dtype=float).reshape(-1, 2)
    embedding["x"], embedding["y"] = coords[:, 0], coords[:, 1]

    clusters = keys.copy()
    clusters["cluster"] = outputs.labels
    clusters["trial_type"] = outputs.trial_types

    confusion = outputs.confusion
    if confusion is not None:
        confusion_frame = pd.DataFrame(confusion.percent, columns=confusion.players)
        confusion_frame.insert(0, "player", confusion.players)
    else:
        confusion_frame = pd.DataFrame(columns=["player"])

    profiles = {
        "profiles": [p.model_dump(mode="json") for p in outputs.profiles],
        "jsd": outputs.jsd_summary.model_dump(mode="json") if outputs.jsd_summary else None,
        "ties": confusion.ties if confusion else [],
        "unscored_players": confusion.unscored if confusion else [],
        "rejected_trials": outputs.rejected,
    }

    store.write_text(FEATURES_FILE, _csv(features))
    store.write_text(EMBEDDING_FILE, _csv(embedding))
    store.write_text(CLUSTERS_FILE, _csv(clusters))
    store.write_text(PROFILES_FILE, json.dumps(profiles, indent=2, sort_keys=True) + "\n")
    store.write_text(CONFUSION_FILE, _csv(confusion_frame))
    store.write_text(
        CLUSTER_TRAJECTORIES_FILE,
        _csv(pd.DataFrame(outputs.cluster_trajectories, columns=CLUSTER_TRAJECTORY_COLUMNS)),
    )
    return [FEATURES_FILE, EMBEDDING_FILE, CLUSTERS_FILE, PROFILES_FILE, CONFUSION_FILE, CLUSTER_TRAJECTORIES_FILE]


# ----------------------------------------------------------------------
# Report
# ----------------------------------------------------------------------

def _read_frame(store: ArtifactStore, name: str, dtype: Optional[Dict] = None) -> Optional[pd.DataFrame]:
    if not store.exists(name):
        return None
    try:
        return pd.read_csv(io.StringIO(store.read_text(name)), dtype=dtype)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ArtifactIOError(f"cannot read {name}: {e}")


def _records(frame: Optional[pd.DataFrame]) -> list:
    if frame is None or frame.empty:
        return []
    return frame.astype(object).where(frame.notna(), None).to_dict("records")


def build_report_context(store: ArtifactStore, manifest: Optional[RunManifest] = None) -> Dict:
    """Read whatever stage outputs exist in `store` into the report template context."""
    endpoints = _read_frame(store, ENDPOINTS_FILE, dtype={"participant": str, "session": str})
    endpoint_summary = []
    if endpoints is not None and not endpoints.empty:
        grouped = endpoints.groupby(["game", "kind"], sort=True)["value"].agg(["count", "mean"]).reset_index()
        endpoint_summary = [
            {"game": r["game"], "kind": r["kind"], "n": int(r["count"]), "mean": float(r["mean"])}
            for r in grouped.to_dict("records")
        ]

    trajectory = None
    clusters = _read_frame(store, CLUSTERS_FILE, dtype={"session_id": str, "player": str})
    if clusters is not None and not clusters.empty:
        labels = clusters["cluster"].astype(int)
        type_counts = Counter(clusters["trial_type"])
        trajectory = {
            "n_trials": len(clusters),
            "n_clusters": int(labels[labels >= 0].nunique()),
            "n_noise": int((labels == -1).sum()),
            "type_counts": sorted(type_counts.items()),
            "mean_diagonal": None,
            "mean_within": None,
            "mean_between": None,
        }
        confusion = _read_frame(store, CONFUSION_FILE, dtype={"player": str})
        if confusion is not None and not confusion.empty:
            players = confusion["player"].astype(str).tolist()
            matrix = confusion[confusion.columns[1:]].to_numpy(dtype=float)
            # unscored players have all-zero rows
            scored = matrix[: len(players)].sum(axis=1) > 0
            if scored.any():
                trajectory["mean_diagonal"] = float(np.mean(np.diag(matrix)[: len(players)][scored]))
        if store.exists(PROFILES_FILE):
            jsd = json.loads(store.read_text(PROFILES_FILE)).get("jsd") or {}
            trajectory["mean_within"] = jsd.get("mean_within")
            trajectory["mean_between"] = jsd.get("mean_between")

    return {
        "manifest": manifest.model_dump() if manifest else None,
        "exclusion": _records(_read_frame(store, EXCLUSION_FILE)),
        "exclusion_grt": _records(_read_frame(store, EXCLUSION_GRT_FILE)),
        "endpoints": endpoint_summary,
        "correlations": _records(_read_frame(store, CORRELATIONS_FILE)),
        "icc": _records(_read_frame(store, ICC_FILE)),
        "trajectory": trajectory,
    }


def write_report(
    store: ArtifactStore,
    config: Optional[PipelineConfig] = None,
    sessions: int = 0,
) -> RunManifest:
    """Render report.md from existing stage outputs and write manifest.json with file checksums."""
    recorded = config.model_dump(mode="json", exclude={"output_dir"}) if config else None
    manifest = RunManifest(
        version=__version__,
        config_hash=config_hash(recorded) if recorded is not None else None,
        seed=config.seed if config else None,
        sessions=sessions,
        config=recorded,
    )
    store.write_text(REPORT_FILE, report_renderer.render("summary.md.j2", build_report_context(store, manifest)))

    names = [n for n in store.list("**/*") if n != MANIFEST_FILE]
    manifest.files = {name: sha256_bytes(store.read_bytes(name)) for name in names}
    store.write_text(MANIFEST_FILE, manifest.model_dump_json(indent=2) + "\n")
    return manifest


# ----------------------------------------------------------------------
# Full run
# ----------------------------------------------------------------------

class PipelineRun:
    """One end-to-end run; every stage failure removes the partial outputs."""

    def __init__(self, config: PipelineConfig, store: Optional[ArtifactStore] = None):
        self.config = config
        self.store = store or LocalArtifactStore(config.output_dir)
        self.logfiles: List[LogFile] = []
        self.rows: List[EndpointRow] = []

    def _stage(self, name: str, action):
        logger.info(f"Stage: {name}")
        try:
            return action()
        except CogplayError as e:
            self.store.rollback()
            raise StageError(name, e)
        except Exception:
            self.store.rollback()
            raise

    def _seed(self) -> Optional[int]:
        return self.config.seed if self.config.seed is not None else settings.default_seed

    def simulate(self) -> List[str]:
        spec = load_cohort_spec(self.config.cohort_path)
        written = []
        for session in simulate_cohort(spec, self._seed()):
            written.append(save_session(session, self.store, prefix=f"{LOG_DIR}/"))
            self.logfiles.append(session.logfile)
        return written

    def validate(self):
        paths = collect_log_paths(self.config.log_paths, self.config.log_dir)
        self.logfiles.extend(load_logs(paths))
        if not self.logfiles:
            raise ArtifactIOError("no log files to analyse")
        ids = [log.header.session_id for log in self.logfiles]
        if len(ids) != len(set(ids)):
            raise LogValidationError("duplicate session ids across simulated and supplied logs")

    def endpoints(self) -> EndpointBuild:
        build = build_endpoint_table(self.logfiles, self.config.cleaning, self.config.endpoints)
        self.rows = list(build.rows)
        if self.config.external_scores:
            self.rows.extend(ingest_external_scores(self.config.external_scores).rows)
        write_cleaning_artifacts(build, self.store)
        write_endpoint_artifacts(self.rows, self.store)
        return build

    def stats(self):
        correlations, iccs = compute_stats(self.rows, self.config)
        write_stats_artifacts(correlations, iccs, self.store)

    def trajectory(self):
        outputs = None
        if any(log.header.game == "NK" for log in self.logfiles):
            seed = self._seed()
            if seed is None:
                raise LogValidationError("a seed is required for trajectory analysis")
            outputs, _ = run_trajectory_analysis(
                self.logfiles,
                embed=self.config.embed,
                cluster=self.config.cluster,
                lateral_threshold=self.config.lateral_threshold,
                resample_length=self.config.resample_length,
                seed=seed,
            )
        write_trajectory_artifacts(outputs, self.store)

    def run(self) -> RunManifest:
        if self.config.cohort_path:
            self._stage("simulate", self.simulate)
        self._stage("validate", self.validate)
        self._stage("endpoints", self.endpoints)
        self._stage("stats", self.stats)
        self._stage("trajectory", self.trajectory)
        manifest = self._stage("report", lambda: write_report(self.store, self.config, len(self.logfiles)))
        timed = sum(log.header.game in RT_GAMES for log in self.logfiles)
        logger.info(
            f"Run complete: {len(self.logfiles)} sessions ({timed} timed), "
            f"{len(manifest.files) + 1} artifacts in {self.config.output_dir}"
        )
        return manifest


def run_pipeline(config: PipelineConfig, store: Optional[ArtifactStore] = None) -> RunManifest:
    """
    Execute every stage for `config` and return the written manifest.

    Raises:
        StageError: the failing stage's name and its cause; partial outputs are removed
    """
    return PipelineRun(config, store).run()
