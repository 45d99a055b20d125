"""
Tests for minigame rules and schedules.
"""
from collections import Counter

import pytest

from cogplay.errors import TaskRuleError
from cogplay.models.tasks import BBStimulus, DDCard, DDTrial, NKStimulus, RRBlock, RRState
from cogplay.services import task_engine


class TestNetherKnight:
    def test_semantic_rule_follows_word(self):
        stimulus = NKStimulus(word="BLUE", ink="RED", rule="semantic")
        assert task_engine.nk_correct_target(stimulus) == "BLUE"

    def test_color_rule_follows_ink(self):
        assert task_engine.nk_correct_target(NKStimulus(word="BLUE", ink="RED", rule="color")) == "RED"
        assert task_engine.nk_correct_target(NKStimulus(word="GREEN", ink="YELLOW", rule="color")) == "YELLOW"

    def test_congruent_stimulus_rejected(self):
        with pytest.raises(ValueError):
            NKStimulus(word="RED", ink="RED", rule="semantic")

    def test_schedule(self):
        schedule = task_engine.nk_schedule("semantic", seed=3)
        assert len(schedule) == 40
        assert all(s.word != s.ink for s in schedule)
        assert schedule == task_engine.nk_schedule("semantic", seed=3)
        assert schedule != task_engine.nk_schedule("semantic", seed=4)


class TestDoorDecipher:
    def test_one_door_per_attribute(self):
        for seed in range(1000):
            trial = task_engine.dd_generate_trial("color", seed)
            for rule in ("color", "shape", "quantity"):
                matches = [i for i, d in enumerate(trial.doors) if d.attribute(rule) == trial.key.attribute(rule)]
                assert len(matches) == 1, f"seed {seed}: {rule} matched doors {matches}"

            matching_doors = {
                rule: next(i for i, d in enumerate(trial.doors) if d.attribute(rule) == trial.key.attribute(rule))
                for rule in ("color", "shape", "quantity")
            }
            assert len(set(matching_doors.values())) == 3

    def test_quantity_rule_picks_quantity_match(self):
        key = DDCard(color="RED", shape="circle", quantity=2)
        doors = [
            DDCard(color="RED", shape="square", quantity=1),
            DDCard(color="BLUE", shape="circle", quantity=3),
            DDCard(color="GREEN", shape="plus", quantity=2),
            DDCard(color="YELLOW", shape="triangle", quantity=4),
        ]
        trial = DDTrial(key=key, doors=doors, active_rule="quantity")
        assert task_engine.dd_correct_door(trial) == 2

    def test_unknown_rule(self):
        with pytest.raises(TaskRuleError):
            task_engine.dd_generate_trial("size", seed=0)

    def test_schedule_blocks(self):
        schedule = task_engine.dd_schedule(seed=11)
        assert len(schedule) == 42

        rules = [t.active_rule for t in schedule]
        blocks = [rules[i:i + 7] for i in range(0, 42, 7)]
        assert len(blocks) == 6
        for block in blocks:
            assert len(set(block)) == 1
        for previous, current in zip(blocks, blocks[1:]):
            assert previous[0] != current[0]

        assert schedule == task_engine.dd_schedule(seed=11)


class TestBarnyardBlast:
    @pytest.mark.parametrize("species,direction,congruent,expected", [
        ("cow", "right", True, "right"),
        ("pig", "right", False, "left"),
        ("cow", "right", False, "right"),
        ("pig", "left", True, "right"),
    ])
    def test_correct_side(self, species, direction, congruent, expected):
        stimulus = BBStimulus(species=species, center_dir=direction, congruent=congruent)
        assert task_engine.bb_correct_side(stimulus) == expected

    def test_schedule_is_balanced(self):
        schedule = task_engine.bb_schedule(seed=5)
        assert len(schedule) == 48
        cells = Counter((s.species, s.congruent) for s in schedule)
        assert set(cells.values()) == {12}
        assert schedule == task_engine.bb_schedule(seed=5)


class TestRainbowRandom:
    def test_staircase_trace(self):
        state = task_engine.rr_run([True, True, False])
        assert state.current_size == 2
        assert not state.finished
        assert state.history == [(1, True), (2, True), (3, False)]

    def test_pass_at_ten_finishes(self):
        state = task_engine.rr_step(RRState(current_size=10), passed=True)
        assert state.finished
        assert state.current_size == 10

    def test_two_failures_at_one_size_finish(self):
        state = task_engine.rr_run([True, False, True, False])
        assert state.finished
        assert state.fail_counts == {2: 2}

    def test_failure_at_one_stays_at_one(self):
        state = task_engine.rr_step(RRState(), passed=False)
        assert state.current_size == 1
        assert not state.finished

    def test_step_after_finish(self):
        with pytest.raises(TaskRuleError):
            task_engine.rr_step(RRState(finished=True), passed=True)

    def test_run_ignores_outcomes_after_finish(self):
        state = task_engine.rr_run([False, False, True, True])
        assert state.finished
        assert len(state.history) == 2

    def test_judge_exact_copy(self):
        pattern = task_engine.rr_generate_pattern(5, seed=1)
        assert task_engine.rr_judge(pattern, pattern) == (1.0, True)

    def test_judge_boundary_is_not_a_pass(self):
        pattern = task_engine.rr_generate_pattern(5, seed=1)
        accuracy, passed = task_engine.rr_judge(pattern, pattern[:4])
        assert accuracy == pytest.approx(0.8)
        assert not passed

    def test_judge_extra_block_counts_in_denominator(self):
        pattern = [RRBlock(cell=(0, i), color="red") for i in range(5)]
        built = pattern + [RRBlock(cell=(4, 4), color="blue")]
        accuracy, passed = task_engine.rr_judge(pattern, built)
        assert accuracy == pytest.approx(5 / 6)
        assert passed

    def test_judge_accepts_tuples(self):
        target = [((0, 0), "red"), ((1, 1), "green")]
        assert task_engine.rr_judge(target, [((1, 1), "green"), ((0, 0), "red")]) == (1.0, True)

    def test_empty_target(self):
        with pytest.raises(TaskRuleError):
            task_engine.rr_judge([], [])


class TestExport:
    def test_export_carries_timing(self):
        exported = task_engine.export_schedule("BB", seed=2)
        assert exported["game"] == "BB"
        assert exported["timing"]["timeout_ms"] == 10000
        assert len(exported["trials"]) == 48

    def test_unknown_game(self):
        with pytest.raises(TaskRuleError):
            task_engine.export_schedule("XX", seed=2)
