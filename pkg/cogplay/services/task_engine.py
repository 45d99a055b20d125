"""
Stimulus generation, correctness rules and trial scheduling for the four minigames.

Every schedule is a pure function of its parameters and seed.
"""
import logging
from typing import Dict, Iterable, List, Optional, Set, Tuple

import numpy as np

from ..errors import TaskRuleError
from ..models.tasks import (
    COLORS,
    DD_RULES,
    QUANTITIES,
    RR_COLORS,
    RR_GRID,
    RR_MAX_SIZE,
    SHAPES,
    BBStimulus,
    DDCard,
    DDTrial,
    NKStimulus,
    RRBlock,
    RRState,
    ScheduleTiming,
)

logger = logging.getLogger(__name__)

NK_TRIALS = 40
DD_TRIALS = 42
DD_BLOCK = 7
BB_TRIALS_PER_CELL = 12
RR_PASS_ACCURACY = 0.80
RR_FAILS_TO_FINISH = 2

_ATTRIBUTE_VALUES = {"color": COLORS, "shape": SHAPES, "quantity": QUANTITIES}


# ============================================================================
# Nether Knight
# ============================================================================

def nk_correct_target(stimulus: NKStimulus) -> str:
    """Semantic rule -> the knight named by the word; color rule -> the ink colour."""
    return stimulus.word if stimulus.rule == "semantic" else stimulus.ink


def nk_schedule(rule: str, seed: int) -> List[NKStimulus]:
    rng = np.random.default_rng(seed)
    schedule = []
    for _ in range(NK_TRIALS):
        word, ink = rng.choice(len(COLORS), size=2, replace=False)
        schedule.append(NKStimulus(word=COLORS[word], ink=COLORS[ink], rule=rule))
    return schedule


# ============================================================================
# Door Decipher
# ============================================================================

def _other_value(rng: np.random.Generator, attribute: str, exclude):
    choices = [v for v in _ATTRIBUTE_VALUES[attribute] if v != exclude]
    return choices[int(rng.integers(len(choices)))]


def dd_generate_trial(active_rule: str, seed: int) -> DDTrial:
    """
    Build a key card and four doors: one door shares only the key's colour,
    one only its shape, one only its quantity, and one shares nothing.
    """
    if active_rule not in DD_RULES:
        raise TaskRuleError(f"unknown Door Decipher rule '{active_rule}'")
    rng = np.random.default_rng(seed)
    key = DDCard(
        color=COLORS[int(rng.integers(4))],
        shape=SHAPES[int(rng.integers(4))],
        quantity=QUANTITIES[int(rng.integers(4))],
    )

    doors = []
    for matching in (*DD_RULES, None):
        card = {}
        for attribute in DD_RULES:
            if attribute == matching:
                card[attribute] = key.attribute(attribute)
            else:
                card[attribute] = _other_value(rng, attribute, key.attribute(attribute))
        doors.append(DDCard(**card))

    order = rng.permutation(4)
    return DDTrial(key=key, doors=[doors[i] for i in order], active_rule=active_rule)


def dd_correct_door(trial: DDTrial) -> int:
    rule = trial.active_rule
    for i, door in enumerate(trial.doors):
        if door.attribute(rule) == trial.key.attribute(rule):
            return i
    raise TaskRuleError("no door matches the key on the active rule")


def dd_schedule(seed: int) -> List[DDTrial]:
    """Six blocks of seven trials; the rule changes at every block boundary."""
    rng = np.random.default_rng(seed)
    trials = []
    rule = None
    for _ in range(DD_TRIALS // DD_BLOCK):
        choices = [r for r in DD_RULES if r != rule]
        rule = choices[int(rng.integers(len(choices)))]
        for _ in range(DD_BLOCK):
            trials.append(dd_generate_trial(rule, int(rng.integers(2**31 - 1))))
    return trials


# ============================================================================
# Barnyard Blast
# ============================================================================

def bb_correct_side(stimulus: BBStimulus) -> str:
    """Cows: the centre animal's direction; pigs: the opposite. Flankers never matter."""
    if stimulus.species == "cow":
        return stimulus.center_dir
    return "left" if stimulus.center_dir == "right" else "right"


def bb_schedule(seed: int) -> List[BBStimulus]:
    rng = np.random.default_rng(seed)
    trials = []
    for species in ("cow", "pig"):
        for congruent in (True, False):
            half = BB_TRIALS_PER_CELL // 2
            directions = ["left"] * half + ["right"] * (BB_TRIALS_PER_CELL - half)
            for direction in directions:
                trials.append(BBStimulus(species=species, center_dir=direction, congruent=congruent))
    order = rng.permutation(len(trials))
    return [trials[i] for i in order]


# ============================================================================
# Rainbow Random
# ============================================================================

def rr_step(state: RRState, passed: bool) -> RRState:
    """
    Advance the staircase by one judged trial.

    Pass raises the pattern size (finishing after a size-10 pass); fail lowers it
    and counts a failure at that size, finishing once any size has two failures.
    """
    if state.finished:
        raise TaskRuleError("Rainbow Random run already finished")

    size = state.current_size
    fail_counts = dict(state.fail_counts)
    history = [*state.history, (size, passed)]
    finished = False

    if passed:
        if size >= RR_MAX_SIZE:
            finished = True
            next_size = RR_MAX_SIZE
        else:
            next_size = size + 1
    else:
        fail_counts[size] = fail_counts.get(size, 0) + 1
        finished = fail_counts[size] >= RR_FAILS_TO_FINISH
        next_size = max(1, size - 1)

    return RRState(current_size=next_size, fail_counts=fail_counts, finished=finished, history=history)


def rr_run(outcomes: Iterable[bool]) -> RRState:
    state = RRState()
    for passed in outcomes:
        if state.finished:
            break
        state = rr_step(state, passed)
    return state


def _as_set(pattern: Iterable) -> Set[Tuple[int, int, str]]:
    result = set()
    for block in pattern:
        if isinstance(block, RRBlock):
            result.add(block.key())
        else:
            (cx, cy), color = block
            result.add((int(cx), int(cy), str(color)))
    return result


def rr_judge(target: Iterable, built: Iterable) -> Tuple[float, bool]:
    """Accuracy = matching (cell, colour) blocks / max(|target|, |built|); pass iff > 80%."""
    target_set = _as_set(target)
    built_set = _as_set(built)
    if not target_set:
        raise TaskRuleError("Rainbow Random target pattern is empty")
    matched = len(target_set & built_set)
    accuracy = matched / max(len(target_set), len(built_set))
    return accuracy, accuracy > RR_PASS_ACCURACY


def rr_generate_pattern(size: int, seed: int, n_colors: int = 3) -> List[RRBlock]:
    if not 1 <= size <= RR_GRID * RR_GRID:
        raise TaskRuleError(f"pattern size {size} out of range")
    rng = np.random.default_rng(seed)
    cells = rng.choice(RR_GRID * RR_GRID, size=size, replace=False)
    palette = RR_COLORS[:max(1, min(n_colors, len(RR_COLORS)))]
    return [
        RRBlock(cell=(int(c) // RR_GRID, int(c) % RR_GRID), color=palette[int(rng.integers(len(palette)))])
        for c in sorted(cells)
    ]


# ============================================================================
# Export
# ============================================================================

def export_schedule(game: str, seed: int, rule: Optional[str] = "semantic") -> Dict:
    """JSON-ready schedule with its timing metadata."""
    timing = ScheduleTiming().model_dump()
    if game == "NK":
        trials = [s.model_dump() for s in nk_schedule(rule or "semantic", seed)]
    elif game == "DD":
        trials = [t.model_dump() for t in dd_schedule(seed)]
    elif game == "BB":
        trials = [s.model_dump() for s in bb_schedule(seed)]
    elif game == "RR":
        trials = [[b.model_dump() for b in rr_generate_pattern(size, seed + size)] for size in range(1, RR_MAX_SIZE + 1)]
    else:
        raise TaskRuleError(f"unknown game '{game}'")
    logger.debug(f"Exported {len(trials)} {game} schedule entries for seed {seed}")
    return {"game": game, "seed": seed, "timing": timing, "trials": trials}
