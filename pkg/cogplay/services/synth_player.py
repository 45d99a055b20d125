"""
Synthetic players.

simulate_session plays one minigame session with a parameterized agent and
returns the log together with the planted per-trial quantities (decision and
response times, gaze commit, trial type, correctness) that the analysis
stages are expected to recover.
"""
import json
import logging
import math
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from ..config import settings
from ..errors import ArtifactIOError, LogValidationError, TaskRuleError
from ..models.agents import (
    AGENT_STYLES,
    AgentParams,
    CohortSpec,
    GroundTruth,
    SimulatedSession,
    TrialTruth,
)
from ..models.logfile import (
    RECORD_RANK,
    EnvSample,
    GameEvent,
    LogFile,
    LogHeader,
    StateSample,
    TrialRecord,
)
from ..models.tasks import (
    BB_TARGET_POSITIONS,
    DD_DOOR_POSITIONS,
    NK_KNIGHT_POSITIONS,
    RR_COLORS,
    START_POSITION,
    RRBlock,
    RRState,
    ScheduleTiming,
)
from ..utils.geometry import bearing, wrap_angle
from . import task_engine
from .logfile_codec import LOG_EXTENSION, write_logfile
from .storage import ArtifactStore

logger = logging.getLogger(__name__)

FIRST_TRIAL_MS = 1000
VIEW_HALF_ANGLE = 3.0  # 6 degree view cone
BB_AIM_MS = 250.0
LAPSE_RANGE_MS = (10500.0, 15000.0)
RR_BLOCK_INTERVAL_MS = 600.0
RR_BUILD_TAIL_MS = 400.0
RR_OBSERVE_PER_BLOCK_MS = 400.0
RR_MAX_TRIALS = 40

Point = Tuple[float, float]
Pose = Tuple[float, float, float, Optional[str]]  # x, z, yaw, viewed target


class _Walk:
    """Constant-speed walk through waypoints, leaving the first one at t0 (trial-relative ms)."""

    def __init__(self, points: Sequence[Point], t0: float, speed: float):
        self.points = np.asarray(points, dtype=float)
        segments = np.hypot(np.diff(self.points[:, 0]), np.diff(self.points[:, 1]))
        self.length = float(segments.sum())
        self.times = t0 + np.concatenate([[0.0], np.cumsum(segments)]) * 1000.0 / speed

    def position(self, t: float) -> Point:
        return (
            float(np.interp(t, self.times, self.points[:, 0])),
            float(np.interp(t, self.times, self.points[:, 1])),
        )


def walk_points(target: Point, path_style: str, amplitude: float, approach_distance: float) -> List[Point]:
    """
    Waypoints from the start position to `approach_distance` short of the target.

    Indirect paths pass through one waypoint displaced `amplitude` blocks from the
    midpoint of the straight line, on the side away from the target.
    """
    sx, sz = START_POSITION
    tx, tz = target
    distance = math.hypot(tx - sx, tz - sz)
    ux, uz = (tx - sx) / distance, (tz - sz) / distance
    reach = max(distance - approach_distance, 0.0)
    stop = (sx + ux * reach, sz + uz * reach)
    if path_style == "direct" or amplitude == 0:
        return [START_POSITION, stop]

    away = 1.0 if tx >= sx else -1.0
    nx, nz = -uz * away, ux * away
    waypoint = ((sx + stop[0]) / 2 + amplitude * nx, (sz + stop[1]) / 2 + amplitude * nz)
    return [START_POSITION, waypoint, stop]


def viewed_target(x: float, z: float, yaw: float, targets: Dict[str, Point]) -> Optional[str]:
    """The target inside the view cone closest to the line of sight, if any."""
    best, best_diff = None, VIEW_HALF_ANGLE
    for target_id, (tx, tz) in targets.items():
        diff = abs(wrap_angle(bearing(x, z, tx, tz) - yaw))
        if diff <= best_diff:
            best, best_diff = target_id, diff
    return best


def derive_session_seed(master_seed: int, player_index: int, session_index: int) -> int:
    sequence = np.random.SeedSequence(master_seed, spawn_key=(player_index, session_index))
    return int(sequence.generate_state(1)[0])


class SessionSimulator:
    """Plays one session and accumulates its log streams."""

    def __init__(
        self,
        game: str,
        params: AgentParams,
        seed: int,
        player: str,
        session_id: str,
        nk_rule: str = "semantic",
        timing: Optional[ScheduleTiming] = None,
    ):
        self.game = game
        self.params = params
        self.seed = seed
        self.player = player
        self.session_id = session_id
        self.nk_rule = nk_rule
        self.timing = timing or ScheduleTiming()
        self.rng = np.random.default_rng(seed)
        self.period = settings.sample_period_ms
        self.env_period = settings.env_period_ms

        self._states: List[StateSample] = []
        self._envs: List[EnvSample] = []
        self._events: List[GameEvent] = []
        self._trials: List[TrialRecord] = []
        self._truths: List[TrialTruth] = []
        self._clock = 0
        self._env_clock = 0

    # ------------------------------------------------------------------
    # Streams
    # ------------------------------------------------------------------

    def _grid(self, t: float) -> int:
        return int(math.ceil(t / self.period)) * self.period

    def _emit(self, pose: Callable[[int], Pose], blocks: Callable[[int], list], until: int):
        for t in range(self._clock, until, self.period):
            x, z, yaw, viewed = pose(t)
            self._states.append(StateSample(
                t=t, x=x, y=0.0, z=z, yaw=wrap_angle(yaw), pitch=0.0, viewed_target=viewed,
            ))
        self._clock = until

        for t in range(self._env_clock, until, self.env_period):
            self._envs.append(EnvSample(t=t, blocks=blocks(t)))
        self._env_clock = -(-until // self.env_period) * self.env_period

    def _event(self, t: int, kind: str, payload: Dict):
        self._events.append(GameEvent(t=t, kind=kind, payload=payload))

    @staticmethod
    def _idle(t: int) -> Pose:
        return START_POSITION[0], START_POSITION[1], 0.0, None

    # ------------------------------------------------------------------
    # Agent decisions
    # ------------------------------------------------------------------

    def _child_seed(self) -> int:
        return int(self.rng.integers(2**31 - 1))

    def _choose(self, correct: str, options: Sequence[str]) -> str:
        if self.rng.random() < self.params.error_rate:
            others = [o for o in options if o != correct]
            return others[int(self.rng.integers(len(others)))]
        return correct

    def _style(self) -> Tuple[str, str]:
        mix = self.params.style_mix
        if not mix:
            return self.params.path_style, self.params.gaze_policy
        types = sorted(mix)
        weights = np.array([mix[t] for t in types], dtype=float)
        chosen = types[int(self.rng.choice(len(types), p=weights / weights.sum()))]
        style = AGENT_STYLES[chosen]
        return style["path_style"], style["gaze_policy"]

    def _gaze_plan(self, policy: str, walk: _Walk, target: Point, decision: float, response: float):
        """
        Yaw as a function of (trial-relative time, x, z) plus the planted commit time.

        Fixating agents sweep from straight ahead toward the target at the turn
        speed and then keep tracking it; no_fix agents keep looking ahead.
        """
        if policy == "no_fix":
            return (lambda rel, x, z: 0.0), None

        tx, tz = target
        turn = self.params.turn_speed / 1000.0  # deg/ms
        if policy == "early_fix":
            sweep_start = decision
        else:
            lead_at = response - self.params.late_lead_ms
            estimate = abs(bearing(*walk.position(lead_at), tx, tz)) / turn
            sweep_start = max(decision, lead_at - estimate)
        aim = bearing(*walk.position(sweep_start), tx, tz)
        commit = min(sweep_start + abs(aim) / turn, response)

        def yaw_at(rel: float, x: float, z: float) -> float:
            if rel < sweep_start:
                return 0.0
            if rel < commit:
                return math.copysign(min(abs(aim), turn * (rel - sweep_start)), aim)
            return bearing(x, z, tx, tz)

        return yaw_at, commit

    # ------------------------------------------------------------------
    # Trials
    # ------------------------------------------------------------------

    def _choice_trial(
        self,
        index: int,
        stimulus: Dict,
        targets: Dict[str, Point],
        correct_answer: str,
        chosen: str,
        event_kind: str,
        payload_key: str,
        walking: bool = True,
        typed: bool = False,
    ):
        """One NK/DD/BB trial: decide, move or aim, respond, then sit through feedback."""
        p = self.params
        path_style, gaze_policy = self._style()
        lapse = bool(self.rng.random() < p.lapse_rate)
        decision = float(self.rng.lognormal(p.latency_mu, p.latency_sigma))
        target = targets[chosen]

        amplitude = p.lateral_amplitude if (walking and path_style == "indirect") else 0.0
        points = walk_points(target, path_style, amplitude, p.approach_distance) if walking else [START_POSITION]
        motor = _Walk(points, 0.0, p.move_speed).length * 1000.0 / p.move_speed if walking else BB_AIM_MS

        if lapse:
            response = float(self.rng.uniform(*LAPSE_RANGE_MS))
            decision = response - motor
        else:
            response = decision + motor

        walk = _Walk(points, decision, p.move_speed)
        yaw_at, commit = self._gaze_plan(gaze_policy, walk, target, decision, response)

        start = self._clock
        end_rel = max(1, int(round(response)))
        end_t = start + end_rel
        if end_rel > self.timing.timeout_ms:
            outcome, logged_response = "timeout", None
        else:
            outcome = "correct" if chosen == correct_answer else "incorrect"
            logged_response = chosen

        self._event(end_t, event_kind, {payload_key: chosen})
        self._event(end_t, "trial_feedback", {"trial_index": index, "outcome": outcome})
        self._trials.append(TrialRecord(
            game=self.game,
            trial_index=index,
            start_t=start,
            end_t=end_t,
            stimulus={**stimulus, "positions": {k: list(v) for k, v in targets.items()}},
            correct_answer=correct_answer,
            response=logged_response,
            outcome=outcome,
        ))

        trial_type = None
        if typed:
            trial_type = ("D" if path_style == "direct" else "I") + ("N" if gaze_policy == "no_fix" else "G")
        self._truths.append(TrialTruth(
            trial_index=index,
            decision_ms=decision,
            response_ms=response,
            gaze_commit_ms=commit,
            trial_type=trial_type,
            correct=chosen == correct_answer,
            lapse=lapse,
            lateral_amplitude=amplitude,
        ))

        def pose(t: int) -> Pose:
            rel = t - start
            x, z = walk.position(rel)
            yaw = yaw_at(rel, x, z)
            return x, z, yaw, viewed_target(x, z, yaw, targets)

        self._emit(pose, lambda t: [], self._grid(end_t + self.timing.feedback_ms))

    def _play_nk(self):
        for index, stim in enumerate(task_engine.nk_schedule(self.nk_rule, self._child_seed())):
            if self.rng.random() < 0.5:
                left, right = stim.word, stim.ink
            else:
                left, right = stim.ink, stim.word
            targets = {left: NK_KNIGHT_POSITIONS["left"], right: NK_KNIGHT_POSITIONS["right"]}
            correct = task_engine.nk_correct_target(stim)
            self._choice_trial(
                index,
                {**stim.model_dump(), "left": left, "right": right},
                targets,
                correct,
                self._choose(correct, [left, right]),
                "click_select",
                "target",
                typed=True,
            )

    def _play_dd(self):
        for index, trial in enumerate(task_engine.dd_schedule(self._child_seed())):
            targets = {str(k): DD_DOOR_POSITIONS[k] for k in range(len(trial.doors))}
            correct = str(task_engine.dd_correct_door(trial))
            self._choice_trial(
                index, trial.model_dump(), targets, correct,
                self._choose(correct, list(targets)), "door_enter", "door",
            )

    def _play_bb(self):
        for index, stim in enumerate(task_engine.bb_schedule(self._child_seed())):
            targets = dict(BB_TARGET_POSITIONS)
            correct = task_engine.bb_correct_side(stim)
            self._choice_trial(
                index, stim.model_dump(), targets, correct,
                self._choose(correct, list(targets)), "shot", "side", walking=False,
            )

    def _corrupt(self, pattern: List[RRBlock]) -> List[RRBlock]:
        """Recolour enough blocks that accuracy drops to 80% or below."""
        wrong = max(1, math.ceil(0.2 * len(pattern) - 1e-9))
        picked = set(int(i) for i in self.rng.choice(len(pattern), size=wrong, replace=False))
        built = []
        for i, block in enumerate(pattern):
            if i in picked:
                others = [c for c in RR_COLORS if c != block.color]
                block = RRBlock(cell=block.cell, color=others[int(self.rng.integers(len(others)))])
            built.append(block)
        return built

    def _play_rr(self):
        p = self.params
        t = self.timing
        state = RRState()
        index = 0
        while not state.finished and index < RR_MAX_TRIALS:
            size = state.current_size
            pass_probability = 1.0 / (1.0 + math.exp((size - p.span_capacity) / p.span_spread))
            will_pass = bool(self.rng.random() < pass_probability)
            decision = float(self.rng.lognormal(p.latency_mu, p.latency_sigma))
            pattern = task_engine.rr_generate_pattern(size, self._child_seed())
            built = list(pattern) if will_pass else self._corrupt(pattern)
            accuracy, passed = task_engine.rr_judge(pattern, built)

            start = self._clock
            observe = min(float(t.rr_observation_ms), decision + RR_OBSERVE_PER_BLOCK_MS * size)
            build_start = t.rr_preparation_ms + observe
            place_times = [start + int(round(build_start + (j + 1) * RR_BLOCK_INTERVAL_MS)) for j in range(len(built))]
            end_t = start + int(round(build_start + len(built) * RR_BLOCK_INTERVAL_MS + RR_BUILD_TAIL_MS))
            outcome = "correct" if passed else "incorrect"

            if observe < t.rr_observation_ms:
                self._event(start + int(round(build_start)), "skip_phase", {"phase": "observation"})
            for when, block in zip(place_times, built):
                self._event(when, "block_place", {"cell": list(block.cell), "color": block.color})
            self._event(end_t, "skip_phase", {"phase": "build"})
            self._event(end_t, "trial_feedback", {"trial_index": index, "outcome": outcome})

            self._trials.append(TrialRecord(
                game="RR",
                trial_index=index,
                start_t=start,
                end_t=end_t,
                stimulus={
                    "size": size,
                    "pattern": [[*b.cell, b.color] for b in pattern],
                    "built": [[*b.cell, b.color] for b in built],
                    "accuracy": round(accuracy, 4),
                },
                correct_answer="pass",
                response="pass" if passed else "fail",
                outcome=outcome,
            ))
            self._truths.append(TrialTruth(
                trial_index=index,
                decision_ms=observe,
                response_ms=float(end_t - start),
                correct=passed,
            ))

            def blocks(now: int, placed=tuple(zip(place_times, built))) -> list:
                return [((b.cell[0], 0, b.cell[1]), b.color) for when, b in placed if when <= now]

            self._emit(self._idle, blocks, self._grid(end_t + t.rr_judging_ms))
            state = task_engine.rr_step(state, passed)
            index += 1

    # ------------------------------------------------------------------

    def run(self) -> SimulatedSession:
        self._emit(self._idle, lambda t: [], self._grid(FIRST_TRIAL_MS))
        players = {"NK": self._play_nk, "DD": self._play_dd, "BB": self._play_bb, "RR": self._play_rr}
        if self.game not in players:
            raise TaskRuleError(f"unknown game '{self.game}'")
        players[self.game]()

        header = LogHeader(
            session_id=self.session_id,
            player=self.player,
            game=self.game,
            state_rate_hz=round(1000 / self.period),
            env_rate_hz=max(1, round(1000 / self.env_period)),
            seed=self.seed,
        )
        sequence = sorted(
            [*self._states, *self._envs, *self._events],
            key=lambda r: (r.t, RECORD_RANK[r.rec]),
        )
        logfile = LogFile(header=header, log_sequence=sequence, trial_summary=self._trials)
        truth = GroundTruth(
            session_id=self.session_id,
            player=self.player,
            game=self.game,
            seed=self.seed,
            trials=self._truths,
        )
        logger.debug(
            f"Simulated {len(self._trials)} {self.game} trials for {self.player} "
            f"({self.session_id}, {len(self._states)} state samples)"
        )
        return SimulatedSession(logfile=logfile, truth=truth)


def simulate_session(
    game: str,
    params: AgentParams,
    seed: int,
    player: str = "P01",
    session_id: Optional[str] = None,
    nk_rule: str = "semantic",
) -> SimulatedSession:
    """Play one session; the same (game, params, seed) always yields the same log."""
    session_id = session_id or f"{player}-{game}-{seed}"
    return SessionSimulator(game, params, seed, player, session_id, nk_rule=nk_rule).run()


def simulate_cohort(spec: CohortSpec, seed: Optional[int] = None) -> List[SimulatedSession]:
    """
    Simulate every session of every player.

    Session seeds derive from (master seed, player position, session number), and
    each player's nickname is their player id in every session.
    """
    master = spec.seed if seed is None else seed
    sessions = []
    for player_index, member in enumerate(spec.players):
        for session_index in range(member.sessions):
            sessions.append(simulate_session(
                member.game,
                member.params,
                derive_session_seed(master, player_index, session_index),
                player=member.player_id,
                session_id=f"{member.player_id}-S{session_index + 1}",
            ))
    logger.info(f"Simulated {len(sessions)} sessions for {len(spec.players)} players")
    return sessions


def load_cohort_spec(path: str | Path) -> CohortSpec:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArtifactIOError(f"cohort spec not found: {path}")
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactIOError(f"cannot read cohort spec {path}: {e}")
    try:
        return CohortSpec(**raw)
    except ValidationError as e:
        raise LogValidationError(f"invalid cohort spec {path}: {e}")


def save_session(session: SimulatedSession, store: ArtifactStore, prefix: str = "") -> str:
    """Write the log and its ground-truth sidecar under `prefix`; returns the log's artifact name."""
    session_id = session.logfile.header.session_id
    name = f"{prefix}{session_id}{LOG_EXTENSION}"
    store.write_bytes(name, write_logfile(session.logfile))
    store.write_text(f"{prefix}{session_id}.truth.json", session.truth.model_dump_json(indent=2))
    return name
