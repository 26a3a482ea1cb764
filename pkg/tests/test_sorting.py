import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from mrsim.apps.sorting import SORT_ROUNDS, SortPlan, ann_1d, fan_out, mr_sort, run_sort
from mrsim.engine import RoundConfig
from mrsim.oracles import ranks, successors


def cfg(B, seed=0, hard=False):
    return RoundConfig(buffer_capacity=B, seed=seed, enforcement="hard" if hard else "record")


def test_examples():
    out, m = mr_sort([9, 3, 7], 2, cfg(2))
    assert [r.rank for r in out] == [3, 1, 2]
    assert mr_sort([5], 2, cfg(2))[0][0].rank == 1
    out, _ = mr_sort([4, 4], 2, cfg(2))
    assert [r.rank for r in out] == [1, 2]
    assert mr_sort([], 4, cfg(4)) == ([], mr_sort([], 4, cfg(4))[1])


def test_ann_examples():
    out, _ = ann_1d([3, 9, 7], 2, cfg(2))
    assert [n.successor for n in out] == [7, None, 9]
    out, _ = ann_1d(["x"], 2, cfg(2))
    assert out[0].successor is None
    out, _ = ann_1d([1, 2, 3, 4], 2, cfg(2))
    assert [n.successor for n in out] == [2, 3, 4, None]


def test_fan_out():
    assert fan_out(1, 4) == 1
    assert fan_out(16, 4) == 2
    assert fan_out(17, 4) == 3


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=300), st.integers(2, 12), st.integers(0, 2**32))
def test_ranks_match_oracle(values, B, seed):
    out, m = mr_sort(values, B, cfg(B, seed))
    assert [r.rank for r in out] == ranks(values)
    assert [r.value for r in out] == values
    assert sum(r.rank for r in out) == len(values) * (len(values) + 1) // 2
    assert m.rounds == SORT_ROUNDS
    m.check()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 20), min_size=1, max_size=200), st.integers(2, 10), st.integers(0, 2**32))
def test_successors_match_oracle(values, B, seed):
    out, m = ann_1d(values, B, cfg(B, seed))
    assert [n.successor_index for n in out] == successors(values)
    assert m.rounds == SORT_ROUNDS + 1


@pytest.mark.parametrize("N", [512, 4096])
def test_hard_mode_regime(N):
    B = math.ceil(round(N ** (1 / 3), 9))
    rnd = random.Random(N)
    values = [rnd.randrange(10**6) for _ in range(N)]
    finals, m, attempts, _ = run_sort(values, B, cfg(B, 1, hard=True))
    assert attempts == 1
    assert m.max_io_words_overall <= 8 * B
    assert sorted(f.payload[2] for f in finals) == list(range(1, N + 1))


def test_string_values_and_plan():
    words = ["pear", "apple", "fig", "apple", "kiwi"]
    out, _ = mr_sort(words, 3, cfg(3, 5))
    assert [r.rank for r in out] == ranks(words)
    plan = SortPlan.for_size(1000, 10)
    assert (plan.k, plan.block, plan.chunk) == (5, 5, 10)
