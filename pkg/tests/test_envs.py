"""Tests for the vocabulary, task generators, verifier and rewards."""

import dataclasses
import json

import pytest

from rlvr_lab.envs.rewards import ShapingConfig, reward
from rlvr_lab.envs.task_io import TaskMixEntry, export_task_set, import_task_set, make_task_set
from rlvr_lab.envs.tasks import TaskError, TaskKind, generate_instance, solve
from rlvr_lab.envs.verifier import canonicalize, extract_answer, is_equivalent, random_guess_baseline
from rlvr_lab.envs.vocab import VOCAB


def _transcript(text: str) -> list:
    return VOCAB.encode(text)


class TestVocabulary:
    def test_size(self):
        assert len(VOCAB) == 32

    def test_special_tokens(self):
        assert VOCAB.encode("<bos>1+2=3<stop>") == [
            VOCAB.bos_id, VOCAB.id("1"), VOCAB.id("+"), VOCAB.id("2"),
            VOCAB.delimiter_id, VOCAB.id("3"), VOCAB.stop_id,
        ]

    def test_decode_inverts_encode(self):
        text = "<bos>^dcb=bcd<stop>"
        assert VOCAB.decode(VOCAB.encode(text)) == text

    def test_unknown_symbol(self):
        with pytest.raises(KeyError):
            VOCAB.encode("z")


class TestGenerateInstance:
    def test_addition_fixed_seed(self):
        inst = generate_instance(TaskKind.ADDITION, 2, 7)
        a, b = inst.operands
        assert 10 <= a <= 99 and 10 <= b <= 99
        assert inst.ground_truth == str(a + b)
        assert inst.prompt_text == f"<bos>{a}+{b}="
        assert generate_instance("addition", 2, 7) == inst

    def test_sort_three_symbols(self):
        inst = generate_instance(TaskKind.SORT, 3, 1)
        assert len(inst.operands) == 3
        assert len(set(inst.operands)) == 3
        assert inst.ground_truth == "".join(sorted(inst.operands))
        assert inst.prompt_text.startswith("<bos>^")

    def test_reverse(self):
        inst = generate_instance(TaskKind.REVERSE, 4, 2)
        assert inst.ground_truth == "".join(reversed(inst.operands))

    def test_unknown_kind(self):
        with pytest.raises(TaskError):
            generate_instance("division", 2, 0)

    @pytest.mark.parametrize("kind,difficulty", [("addition", 0), ("addition", 5), ("multiplication", 4), ("sort", 9)])
    def test_difficulty_out_of_range(self, kind, difficulty):
        with pytest.raises(TaskError):
            generate_instance(kind, difficulty, 0)

    @pytest.mark.parametrize("kind,difficulty", [
        (TaskKind.ADDITION, 2), (TaskKind.MULTIPLICATION, 2), (TaskKind.SORT, 5), (TaskKind.REVERSE, 5),
    ])
    def test_ground_truth_against_prompt_text(self, kind, difficulty):
        # evaluate the rendered prompt independently of the generator's operands
        for seed in range(2500):
            inst = generate_instance(kind, difficulty, seed)
            body = inst.prompt_text[len("<bos>"):-1]
            if kind is TaskKind.ADDITION:
                left, right = body.split("+")
                expected = str(int(left) + int(right))
            elif kind is TaskKind.MULTIPLICATION:
                left, right = body.split("*")
                expected = str(int(left) * int(right))
            elif kind is TaskKind.SORT:
                expected = "".join(sorted(body[1:]))
            else:
                expected = body[1:][::-1]
            assert inst.ground_truth == expected

    def test_solve_oracle(self):
        assert solve("addition", (27, 58)) == "85"
        assert solve("multiplication", (12, 0)) == "0"
        assert solve("sort", ("c", "a", "b")) == "abc"


class TestVerifier:
    def test_exact_answer(self):
        assert is_equivalent(_transcript("<bos>27+58=85<stop>"), "85")

    def test_leading_zero(self):
        assert is_equivalent(_transcript("<bos>27+58=085<stop>"), "85")

    def test_no_delimiter(self):
        assert not is_equivalent(VOCAB.encode("85<stop>"), "85")

    def test_last_delimiter_wins(self):
        assert is_equivalent(_transcript("<bos>27+58=12=85<stop>"), "85")

    def test_text_after_stop_ignored(self):
        assert is_equivalent(_transcript("<bos>27+58=85<stop>99"), "85")

    def test_whitespace_ignored(self):
        assert is_equivalent(_transcript("<bos>27+58= 8 5<stop>"), "85")

    def test_empty_answer_is_wrong(self):
        assert not is_equivalent(_transcript("<bos>27+58=<stop>"), "85")

    def test_extract_answer(self):
        assert extract_answer(_transcript("<bos>1+1=2<stop>")) == "2"
        assert extract_answer(_transcript("12")) is None

    @pytest.mark.parametrize("raw,expected", [("085", "85"), ("000", "0"), ("0", "0"), (" 1 2", "12"), ("", "")])
    def test_canonicalize(self, raw, expected):
        assert canonicalize(raw) == expected


class TestRandomGuessBaseline:
    @staticmethod
    def _brute_force(instance, max_new_tokens):
        """Sum uniform-policy probability over every completion."""
        v = len(VOCAB)
        total = 0.0

        def walk(prefix):
            nonlocal total
            ended = prefix and prefix[-1] == VOCAB.stop_id
            if ended or len(prefix) == max_new_tokens:
                if is_equivalent(list(instance.prompt) + prefix, instance.ground_truth):
                    total += (1.0 / v) ** len(prefix)
                return
            for tok in range(v):
                walk(prefix + [tok])

        walk([])
        return total

    @pytest.mark.parametrize("seed", [0, 3])
    def test_matches_enumeration(self, seed):
        inst = generate_instance(TaskKind.ADDITION, 1, seed)
        assert random_guess_baseline(inst, 3) == pytest.approx(self._brute_force(inst, 3), rel=1e-9)

    def test_zero_answer(self):
        inst = generate_instance(TaskKind.MULTIPLICATION, 1, 0)
        inst = dataclasses.replace(inst, ground_truth="0")
        assert random_guess_baseline(inst, 3) == pytest.approx(self._brute_force(inst, 3), rel=1e-9)

    def test_in_unit_interval(self):
        inst = generate_instance(TaskKind.ADDITION, 2, 1)
        assert 0.0 < random_guess_baseline(inst, 6) < 0.01


class TestReward:
    def test_correct(self):
        assert reward(_transcript("<bos>1+1=2<stop>"), "2", truncated=False).reward == 1.0

    def test_incorrect(self):
        assert reward(_transcript("<bos>1+1=3<stop>"), "2", truncated=False).reward == 0.0

    def test_truncated_without_shaping(self):
        assert reward(_transcript("<bos>1+1=2"), "2", truncated=True).reward == 1.0

    def test_truncated_with_full_overrun(self):
        shaping = ShapingConfig(enabled=True, max_penalty=0.5)
        outcome = reward(_transcript("<bos>1+1=2"), "2", truncated=True, shaping=shaping,
                         completion_length=8, max_length=8)
        assert outcome.reward == 0.5
        assert outcome.truncated_penalty_applied

    def test_penalty_never_below_minus_one(self):
        shaping = ShapingConfig(enabled=True, max_penalty=1.0)
        outcome = reward(_transcript("<bos>1+1=3"), "2", truncated=True, shaping=shaping)
        assert outcome.reward == -1.0

    def test_soft_length_scales_penalty(self):
        shaping = ShapingConfig(enabled=True, max_penalty=0.5, soft_length=4)
        outcome = reward(_transcript("<bos>1+1=2"), "2", truncated=True, shaping=shaping,
                         completion_length=6, max_length=8)
        assert outcome.reward == pytest.approx(0.75)


class TestTaskSets:
    def test_mix_rejects_out_of_range_difficulty(self):
        with pytest.raises(ValueError):
            TaskMixEntry(kind=TaskKind.MULTIPLICATION, difficulty=4)

    def test_make_task_set_reproducible(self):
        mix = [TaskMixEntry(kind=TaskKind.ADDITION, difficulty=2), TaskMixEntry(kind=TaskKind.SORT, difficulty=3)]
        assert make_task_set(mix, 20, 5) == make_task_set(mix, 20, 5)
        kinds = {inst.task_kind for inst in make_task_set(mix, 50, 5)}
        assert kinds == {TaskKind.ADDITION, TaskKind.SORT}

    def test_export_import(self, tmp_path):
        mix = [TaskMixEntry(kind=TaskKind.REVERSE, difficulty=4)]
        instances = make_task_set(mix, 5, 1)
        path = export_task_set(instances, tmp_path / "tasks.jsonl")
        assert import_task_set(path) == instances

    def test_import_detects_tampering(self, tmp_path):
        path = export_task_set(make_task_set([TaskMixEntry(kind=TaskKind.ADDITION, difficulty=2)], 2, 0),
                               tmp_path / "tasks.jsonl")
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        rows[1]["ground_truth"] = "0"
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with pytest.raises(TaskError, match=":2:"):
            import_task_set(path)

