import pytest
from hypothesis import given, settings, strategies as st

from mrsim.engine import (
    KeyedItem,
    RoundConfig,
    RoundMetrics,
    RunMetrics,
    Work,
    estimate_time,
    final,
    run_pipeline,
    run_round,
)
from mrsim.errors import BufferExceeded, StageDivergence


def wc_map(item):
    for w in item.payload[0].split():
        yield KeyedItem((w,), (1,))


def wc_reduce(key, values):
    yield final(key, (sum(v[0] for v in values),))


def identity_reduce(key, values):
    for v in values:
        yield KeyedItem(key, v)


def doc(text):
    return [KeyedItem(("doc",), (text,))]


def test_word_count_round():
    items = [KeyedItem((), (w,)) for w in "a b a".split()]
    out, rm = run_round(items, lambda it: [KeyedItem((it.payload[0],), (1,))], wc_reduce, RoundConfig())
    assert {o.key[0]: o.payload[0] for o in out} == {"a": 2, "b": 1}
    # 3 reducer inputs + 2 outputs
    assert rm.message_complexity == 5
    assert rm.reducer_io[("a",)].items == 3
    rm.check()


def test_empty_round():
    out, rm = run_round([], None, identity_reduce, RoundConfig())
    assert out == []
    assert rm.message_complexity == 0
    rm.check()


def test_pipeline_single_stage():
    finals, m = run_pipeline(doc("a b a"), [(wc_map, wc_reduce)], RoundConfig())
    assert m.rounds == 1
    assert sorted((f.key[0], f.payload[0]) for f in finals) == [("a", 2), ("b", 1)]


def test_pipeline_two_identity_stages():
    items = [KeyedItem((i,), (i,)) for i in range(3)]
    _, m = run_pipeline(items, [(None, identity_reduce)] * 2, RoundConfig())
    assert m.rounds == 2
    assert m.message_complexity == 12
    m.check()


def test_pipeline_zero_stages():
    items = [KeyedItem((1,), (2,))]
    finals, m = run_pipeline(items, [], RoundConfig())
    assert finals == items and m.rounds == 0


def test_pipeline_early_termination():
    def to_final(key, values):
        for v in values:
            yield final(key, v)

    _, m = run_pipeline([KeyedItem((0,), (0,))], [(None, to_final), (None, identity_reduce)], RoundConfig())
    assert m.rounds == 1


def test_round_cap():
    cfg = RoundConfig(max_rounds=2)
    with pytest.raises(StageDivergence):
        run_pipeline([KeyedItem((0,), (0,))], [(None, identity_reduce)] * 3, cfg)


def test_hard_buffer_violation():
    items = [KeyedItem((0,), (i,)) for i in range(20)]
    cfg = RoundConfig(buffer_capacity=2, slack_factor=4, enforcement="hard")
    with pytest.raises(BufferExceeded) as exc:
        run_round(items, None, identity_reduce, cfg)
    assert exc.value.key == (0,) and exc.value.size == 40 and exc.value.limit == 8
    # record-only mode completes and reports the size
    _, rm = run_round(items, None, identity_reduce, RoundConfig(buffer_capacity=2, slack_factor=4))
    assert rm.max_io_words == 40


def test_words_override():
    items = [KeyedItem((0,), ("tag", 7, 8), words=1)]
    _, rm = run_round(items, None, identity_reduce, RoundConfig())
    assert rm.reducer_io[(0,)] == (2, 4)


def test_declared_work_raises_internal_time():
    def busy(key, values):
        yield Work(100)
        yield from identity_reduce(key, values)

    _, rm = run_round([KeyedItem((0,), (1,))], None, busy, RoundConfig())
    assert rm.internal_time == 102 and rm.max_io == 2


def test_canonical_list_order_is_schedule_independent():
    seen = []

    def record(key, values):
        seen.append(list(values))
        return ()

    a = [KeyedItem((0,), (v,)) for v in (3, 1, 2)]
    run_round(a, None, record, RoundConfig())
    run_round(list(reversed(a)), None, record, RoundConfig())
    assert seen[0] == seen[1]


def test_mixed_key_types_sort():
    items = [KeyedItem((1,), (0,)), KeyedItem(("x",), (0,)), KeyedItem((0, "y"), (0,))]
    out, _ = run_round(items, None, identity_reduce, RoundConfig())
    assert len(out) == 3


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(-50, 50)), max_size=40), st.integers(0, 2**32))
def test_determinism_conservation_and_independence(pairs, seed):
    items = [KeyedItem((k,), (v,)) for k, v in pairs]

    def summarize(key, values):
        yield KeyedItem(key, (len(values), sum(v[0] for v in values)))

    out1, rm1 = run_round(items, None, summarize, RoundConfig())
    out2, rm2 = run_round(items, None, summarize, RoundConfig(), group_order_seed=seed)
    assert out1 == out2
    assert rm1 == rm2
    # conservation: every mapped item lands in exactly one list
    assert sum(o.payload[0] for o in out1) == len(items)
    rm1.check()


def test_estimate_time_examples():
    m = RunMetrics()
    m.append(RoundMetrics(0, message_complexity=5, internal_time=3))
    assert estimate_time(m, 2, 1) == 10

    m2 = RunMetrics()
    m2.append(RoundMetrics(0, message_complexity=4, internal_time=2))
    m2.append(RoundMetrics(0, message_complexity=6, internal_time=2))
    assert estimate_time(m2, 1, 2) == 11
    assert estimate_time(m2, 0, 1e9) == pytest.approx(m2.internal_time, abs=1e-6)
    with pytest.raises(ValueError):
        estimate_time(m2, 0, 0)


def test_config_validation():
    with pytest.raises(ValueError):
        RoundConfig(buffer_capacity=1)
    with pytest.raises(ValueError):
        RoundConfig(slack_factor=0)
