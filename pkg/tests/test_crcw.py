import pytest
from hypothesis import given, settings, strategies as st

from mrsim.crcw import (
    MAX,
    MIN,
    SUM,
    CrcwMachine,
    CrcwProgram,
    RandomCrcwProgram,
    SemigroupOp,
    check_semigroup,
    rounds_per_step,
    simulate_crcw,
    simulate_crcw_step,
    step_schedule,
    tree_height,
)
from mrsim.engine import RoundConfig
from mrsim.errors import ContractViolation, NonSemigroupDetected
from mrsim.oracles import crcw_interpret


class WriteOwn(CrcwProgram):
    """Processor i writes values[i] to cell 0."""

    def __init__(self, values):
        self.values = values

    def step_compute(self, pid, data, value):
        return data, (0, self.values[pid]), True


class ReadCell(CrcwProgram):
    def __init__(self, cell):
        self.cell = cell

    def step_read(self, pid, data):
        return self.cell

    def step_compute(self, pid, data, value):
        return (value,), None, True


class ReadThenWrite(CrcwProgram):
    """Everyone reads cell 0 and writes pid+100 to it in the same step."""

    def step_read(self, pid, data):
        return 0

    def step_compute(self, pid, data, value):
        return (value,), (0, pid + 100), True


def run(prog, P, memory, f, steps=10, B=4):
    mach = CrcwMachine.create(prog, P, memory)
    return simulate_crcw(prog, mach, steps, f, RoundConfig(buffer_capacity=B))


def test_three_writers_sum():
    out, m = run(WriteOwn([4, 5, 6]), 3, [0], SUM)
    assert out.memory == [15]
    m.check()


def test_four_readers_see_same_value():
    out, _ = run(ReadCell(2), 4, [0, 0, 42], SUM)
    assert [d for d, _ in out.states] == [(42,)] * 4


def test_rounds_per_step_p16_b4():
    assert tree_height(4, 16) == 2
    assert len(step_schedule(2)) == rounds_per_step(4, 16) == 9
    out, m = run(WriteOwn(list(range(16))), 16, [0], MAX, B=4)
    assert out.memory == [15]
    assert m.rounds == 9 + 1
    assert m.rounds <= 6 * 2 + 4


def test_max_over_processors():
    vals = [3, 9, 1, 7, 2]
    out, _ = run(WriteOwn(vals), 5, [0], MAX)
    assert out.memory == [9]
    out, _ = run(WriteOwn(vals), 5, [0], MIN)
    assert out.memory == [1]


def test_histogram():
    data = [2, 0, 2, 1, 2, 0, 3]

    class Hist(CrcwProgram):
        def step_compute(self, pid, d, value):
            return d, (data[pid], 1), True

    out, _ = run(Hist(), len(data), [0, 0, 0, 0], SUM)
    assert out.memory == [2, 1, 3, 1]


def test_reads_see_pre_step_memory():
    out, _ = run(ReadThenWrite(), 5, [7], MAX)
    assert [d for d, _ in out.states] == [(7,)] * 5
    assert out.memory == [104]


def test_single_step_and_json():
    prog = RandomCrcwProgram(4, 6, 5, 3)
    mach = CrcwMachine.create(prog, 6, [1, 2, 3, 4, 5])
    out, m = simulate_crcw_step(mach, prog, SUM, RoundConfig(buffer_capacity=2))
    assert m.rounds == rounds_per_step(2, 6) + 1
    assert CrcwMachine.from_json(out.to_json()) == out
    states, memory, _ = crcw_interpret(prog, mach.states, mach.memory, 1, SUM)
    assert out.memory == memory and out.states == states


def test_out_of_range_cell():
    with pytest.raises(ContractViolation):
        run(ReadCell(5), 2, [0], SUM)


def test_non_semigroup_rejected():
    sub = SemigroupOp("sub", lambda a, b: a - b)
    with pytest.raises(NonSemigroupDetected):
        check_semigroup(sub, [1, 2, 3])
    with pytest.raises(NonSemigroupDetected):
        run(WriteOwn([1, 2]), 2, [0], sub)


def test_fan_in_bounded_by_slack():
    P, B = 64, 4
    out, m = run(WriteOwn([1] * P), P, [0], SUM, B=B)
    assert out.memory == [64]
    assert m.max_io_overall <= 8 * B


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([SUM, MIN, MAX]),
    st.sampled_from([1, 3, 8, 20]),
    st.sampled_from([1, 4, 9]),
    st.integers(1, 3),
    st.sampled_from([2, 3, 4]),
    st.integers(0, 2**32),
)
def test_random_programs_match_interpreter(f, P, N, T, B, seed):
    prog = RandomCrcwProgram(seed, P, N, T)
    mach = CrcwMachine.create(prog, P, [i * 3 % 7 for i in range(N)])
    out, m = simulate_crcw(prog, mach, T, f, RoundConfig(buffer_capacity=B, seed=seed))
    states, memory, steps = crcw_interpret(prog, mach.states, mach.memory, T, f)
    assert out.memory == memory
    assert out.states == states
    assert out.steps == steps
    assert m.rounds <= steps * (6 * tree_height(B, P) + 4)
    m.check()


@given(st.permutations([5, 3, 8, 1, 9, 2]))
def test_combine_order_independent(vals):
    out, _ = run(WriteOwn(list(vals)), 6, [0], SUM, B=2)
    assert out.memory == [28]
