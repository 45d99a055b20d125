#!/usr/bin/env python3
"""
cogplay command line.
Usage: cogplay --help
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .config import load_pipeline_config, settings
from .errors import ArtifactIOError, CogplayError, LogValidationError
from .models.agents import AgentParams, CohortMember, CohortSpec
from .models.pipeline import PipelineConfig
from .services import pipeline_service
from .services.cleaning_service import compare_reports
from .services.endpoint_service import build_endpoint_table, ingest_external_scores, read_endpoint_table
from .services.log_validator import validate_logfile
from .services.logfile_codec import LOG_EXTENSION, read_logfile
from .services.storage import LocalArtifactStore
from .services.synth_player import load_cohort_spec, save_session, simulate_cohort
from .services.task_engine import export_schedule
from .services.trajectory_service import map_clusters_to_types, run_trajectory_analysis

EXIT_INTERRUPTED = 130


class Colors:
    GREEN = '\033[92m'
    RED = '\033[91m'
    YELLOW = '\033[93m'
    BLUE = '\033[94m'
    RESET = '\033[0m'
    BOLD = '\033[1m'


def print_success(message: str):
    print(f"{Colors.GREEN}✓ {message}{Colors.RESET}")


def print_error(message: str):
    print(f"{Colors.RED}✗ {message}{Colors.RESET}", file=sys.stderr)


def print_info(message: str):
    print(f"{Colors.BLUE}ℹ {message}{Colors.RESET}")


def print_warning(message: str):
    print(f"{Colors.YELLOW}⚠ {message}{Colors.RESET}")


# ============================================================================
# Config resolution
# ============================================================================

def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    """Dotted config keys for every analysis flag the user actually set."""
    logs = getattr(args, "logs", None)
    correct_only = getattr(args, "correct_only", None)
    return {
        "log_paths": [str(p) for p in logs] if logs else None,
        "log_dir": getattr(args, "log_dir", None),
        "output_dir": getattr(args, "output", None),
        "external_scores": getattr(args, "external", None),
        "seed": getattr(args, "seed", None),
        "cleaning.max_cutoff": getattr(args, "max_cutoff", None),
        "endpoints.correct_only": correct_only,
        "pairing.bf_method": getattr(args, "bf_method", None),
        "cluster.eps": getattr(args, "eps", None),
        "cluster.min_samples": getattr(args, "min_samples", None),
        "lateral_threshold": getattr(args, "lateral_threshold", None),
    }


def _config(args: argparse.Namespace) -> PipelineConfig:
    return load_pipeline_config(getattr(args, "config", None), _overrides(args))


def _store(config: PipelineConfig) -> LocalArtifactStore:
    return LocalArtifactStore(config.output_dir)


def _logs(config: PipelineConfig):
    paths = pipeline_service.collect_log_paths(config.log_paths, config.log_dir)
    if not paths:
        raise LogValidationError("no log files given (pass paths or --log-dir)")
    return pipeline_service.load_logs(paths)


# ============================================================================
# Subcommands
# ============================================================================

def cmd_simulate(args: argparse.Namespace) -> int:
    output = Path(args.output or settings.output_dir)
    if args.schedule_only:
        schedule = export_schedule(args.game, args.seed, args.rule)
        path = output / f"schedule-{args.game}-{args.seed}.json"
        LocalArtifactStore(output).write_text(path.name, json.dumps(schedule, indent=2) + "\n")
        print_success(f"Schedule for {args.game} written to {path}")
        return 0

    if args.cohort:
        spec = load_cohort_spec(args.cohort)
    else:
        params = AgentParams(**json.loads(args.params)) if args.params else AgentParams()
        spec = CohortSpec(
            players=[CohortMember(player_id=args.player, params=params, sessions=args.sessions, game=args.game)],
            seed=args.seed,
        )

    store = LocalArtifactStore(output)
    sessions = simulate_cohort(spec, args.seed)
    for session in sessions:
        name = save_session(session, store)
        print_info(f"{name}: {len(session.logfile.trial_summary)} trials")
    print_success(f"Simulated {len(sessions)} sessions into {output}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    failed = 0
    for path in args.logs:
        try:
            logfile = read_logfile(path)
        except ArtifactIOError as e:
            print_error(f"{path}: {e.detail}")
            return e.exit_code
        except CogplayError as e:
            print_error(f"{path}: {e.detail}")
            failed += 1
            continue
        errors = validate_logfile(logfile)
        if errors:
            print_error(f"{path}: {errors[0]}")
            failed += 1
            continue
        print_success(f"{path}: {len(logfile.trial_summary)} trials, valid")
    return LogValidationError.exit_code if failed else 0


def cmd_clean(args: argparse.Namespace) -> int:
    config = _config(args)
    build = build_endpoint_table(_logs(config), config.cleaning, config.endpoints)
    store = _store(config)
    for name in pipeline_service.write_cleaning_artifacts(build, store):
        print_success(f"Wrote {store.get_full_path(name)}")
    if build.rt_cleaning and build.grt_cleaning:
        for row in compare_reports(build.rt_cleaning.report, build.grt_cleaning.report):
            print_info(
                f"{row.assessment}: gRT keeps {row.trials_salvaged} trials "
                f"({row.trials_salvaged_pct:.1f}%) and {row.sessions_salvaged} sessions RT loses"
            )
    return 0


def cmd_endpoints(args: argparse.Namespace) -> int:
    config = _config(args)
    build = build_endpoint_table(_logs(config), config.cleaning, config.endpoints)
    rows = list(build.rows)
    if config.external_scores:
        ingest = ingest_external_scores(config.external_scores)
        rows.extend(ingest.rows)
        for message in ingest.rejected:
            print_warning(f"External scores: {message}")
    store = _store(config)
    pipeline_service.write_endpoint_artifacts(rows, store)
    print_success(f"{len(rows)} endpoint rows written to {store.get_full_path(pipeline_service.ENDPOINTS_FILE)}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    config = _config(args)
    store = _store(config)
    source = args.endpoints or store.get_full_path(pipeline_service.ENDPOINTS_FILE)
    rows = read_endpoint_table(source)
    correlations, iccs = pipeline_service.compute_stats(rows, config)
    pipeline_service.write_stats_artifacts(correlations, iccs, store)
    for result in correlations:
        print_info(f"{result.label}: r={result.r:.2f} n={result.n} p={result.p:.2g} BF10={result.bf10:.3g}")
    for result in iccs:
        print_info(f"ICC {result.label}: {result.icc:.2f} (n={result.n})")
    print_success(f"Statistics written to {store.base_path}")
    return 0


def cmd_trajectory(args: argparse.Namespace) -> int:
    config = _config(args)
    outputs, _ = run_trajectory_analysis(
        _logs(config),
        embed=config.embed,
        cluster=config.cluster,
        lateral_threshold=config.lateral_threshold,
        resample_length=config.resample_length,
        seed=config.seed,
    )
    store = _store(config)
    pipeline_service.write_trajectory_artifacts(outputs, store)

    n_clusters = len(set(outputs.labels) - {-1})
    _, recovery = map_clusters_to_types(outputs.labels, outputs.trial_types)
    print_info(f"{len(outputs.labels)} trials, {outputs.rejected} rejected, {n_clusters} clusters")
    print_info(f"Cluster/type agreement: {100 * recovery:.1f}%")
    mean_diagonal = outputs.confusion.mean_diagonal() if outputs.confusion is not None else None
    if mean_diagonal is not None:
        print_info(f"Identification mean diagonal: {mean_diagonal:.1f}%")
    print_success(f"Trajectory outputs written to {store.base_path}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _config(args) if args.config else None
    store = LocalArtifactStore(args.output or (config.output_dir if config else settings.output_dir))
    manifest = pipeline_service.write_report(store, config)
    print_success(f"Report written to {store.get_full_path(pipeline_service.REPORT_FILE)} ({len(manifest.files)} files)")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _config(args)
    manifest = pipeline_service.run_pipeline(config)
    print_success(f"Bundle written to {config.output_dir} (config {manifest.config_hash[:12]}, seed {manifest.seed})")
    return 0


# ============================================================================
# Parser
# ============================================================================

def _add_inputs(parser: argparse.ArgumentParser):
    parser.add_argument('logs', nargs='*', help=f'Log files ({LOG_EXTENSION})')
    parser.add_argument('--log-dir', help='Directory searched recursively for log files')
    parser.add_argument('--config', '-c', help='Pipeline config JSON; flags override its fields')
    parser.add_argument('--output', '-o', help='Output directory')


def _add_cleaning(parser: argparse.ArgumentParser):
    parser.add_argument('--max-cutoff', type=float, help='Maximum trial endpoint in seconds (default 10)')
    trials = parser.add_mutually_exclusive_group()
    trials.add_argument('--correct-only', dest='correct_only', action='store_true', default=None,
                        help='Average correct trials only (default)')
    trials.add_argument('--all-trials', dest='correct_only', action='store_false',
                        help='Average every kept trial')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='cogplay',
        description='Gameplay telemetry logs, synthetic players and cognitive endpoint analysis',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  cogplay simulate --cohort cohort.json --seed 7 -o logs/
  cogplay validate logs/*.pxlog
  cogplay clean --log-dir logs/ -o out/
  cogplay endpoints --log-dir logs/ -o out/
  cogplay stats -o out/
  cogplay trajectory --log-dir logs/ --seed 7 -o out/
  cogplay report -o out/
  cogplay run --config pipeline.json
""",
    )
    parser.add_argument('--verbose', '-v', action='store_true', help='Debug logging')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    subparsers = parser.add_subparsers(dest='command', help='Commands')

    # Simulate
    simulate = subparsers.add_parser('simulate', help='Generate synthetic sessions')
    simulate.add_argument('--seed', type=int, required=True, help='Master seed')
    simulate.add_argument('--cohort', help='Cohort spec JSON')
    simulate.add_argument('--game', choices=['NK', 'DD', 'BB', 'RR'], default='NK')
    simulate.add_argument('--player', default='P01', help='Player id (without --cohort)')
    simulate.add_argument('--sessions', type=int, default=1, help='Sessions to play (without --cohort)')
    simulate.add_argument('--params', help='Agent parameters as a JSON object (without --cohort)')
    simulate.add_argument('--rule', choices=['semantic', 'color'], default='semantic', help='NK rule')
    simulate.add_argument('--schedule-only', action='store_true', help='Write the trial schedule only')
    simulate.add_argument('--output', '-o', help='Output directory')

    # Validate
    validate = subparsers.add_parser('validate', help='Check log files against the format invariants')
    validate.add_argument('logs', nargs='+', help='Log files')

    # Clean
    clean = subparsers.add_parser('clean', help='Exclusion reports for RT and gRT')
    _add_inputs(clean)
    _add_cleaning(clean)

    # Endpoints
    endpoints = subparsers.add_parser('endpoints', help='Per-session RT, gRT and RR threshold table')
    _add_inputs(endpoints)
    _add_cleaning(endpoints)
    endpoints.add_argument('--external', help='CSV of externally scored task endpoints')

    # Stats
    stats = subparsers.add_parser('stats', help='Correlations and test-retest ICC from an endpoint table')
    stats.add_argument('--endpoints', help='Endpoint CSV (default: <output>/endpoints.csv)')
    stats.add_argument('--config', '-c', help='Pipeline config JSON with pairings')
    stats.add_argument('--output', '-o', help='Output directory')
    stats.add_argument('--bf-method', choices=['jeffreys', 'uniform', 'jzs'], help='Bayes factor method')

    # Trajectory
    trajectory = subparsers.add_parser('trajectory', help='Nether Knight trajectory features, clusters and profiles')
    _add_inputs(trajectory)
    trajectory.add_argument('--seed', type=int, required=True, help='Embedding seed')
    trajectory.add_argument('--eps', type=float, help='DBSCAN eps')
    trajectory.add_argument('--min-samples', type=int, help='DBSCAN min_samples')
    trajectory.add_argument('--lateral-threshold', type=float, help='Blocks of lateral deviation for an indirect path')

    # Report
    report = subparsers.add_parser('report', help='Render report.md and manifest.json from existing outputs')
    report.add_argument('--output', '-o', help='Bundle directory')
    report.add_argument('--config', '-c', help='Pipeline config JSON recorded in the manifest')

    # Run
    run_parser = subparsers.add_parser('run', help='Full pipeline from one config')
    run_parser.add_argument('--config', '-c', required=True, help='Pipeline config JSON')
    run_parser.add_argument('--seed', type=int, help='Override the config seed')
    run_parser.add_argument('--output', '-o', help='Override the output directory')
    run_parser.add_argument('--max-cutoff', type=float)
    run_parser.add_argument('--eps', type=float)
    run_parser.add_argument('--min-samples', type=int)
    run_parser.add_argument('--lateral-threshold', type=float)

    return parser


COMMANDS = {
    'simulate': cmd_simulate,
    'validate': cmd_validate,
    'clean': cmd_clean,
    'endpoints': cmd_endpoints,
    'stats': cmd_stats,
    'trajectory': cmd_trajectory,
    'report': cmd_report,
    'run': cmd_run,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    level = logging.DEBUG if args.verbose else getattr(logging, settings.log_level.upper(), logging.INFO)
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s')

    if not args.command:
        parser.print_help()
        return 0

    try:
        return COMMANDS[args.command](args)
    except CogplayError as e:
        print_error(str(e))
        return e.exit_code
    except KeyboardInterrupt:
        print_warning("Interrupted")
        return EXIT_INTERRUPTED


def run():
    sys.exit(main())


if __name__ == '__main__':
    run()
