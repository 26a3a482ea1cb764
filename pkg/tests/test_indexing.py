import itertools
import math

import pytest
from hypothesis import given, settings, strategies as st

from mrsim.engine import RoundConfig
from mrsim.errors import LeafOverflow, OverflowUnsupported, RootHasNoParent
from mrsim.indexing import (
    NodeLabel,
    WeightedInput,
    ancestor,
    children,
    index_rounds,
    leaf_of,
    parent,
    random_index,
    random_index_retry,
    tiebreak,
    tree_params,
)


def scan_oracle(inputs, params, seed):
    """Inclusive prefix sums over the recorded random leaf order, by brute force."""
    order = sorted(
        range(len(inputs)),
        key=lambda a: (leaf_of(seed, a, params), tiebreak(seed, inputs[a].value, a)),
    )
    out = [None] * len(inputs)
    acc = 0
    for a in order:
        acc += inputs[a].weight
        out[a] = (inputs[a].value, acc)
    return out


def test_parent_examples():
    assert parent(NodeLabel(3, 5), 2) == (2, 2)
    assert parent(NodeLabel(2, 9), 4) == (1, 2)
    with pytest.raises(RootHasNoParent):
        parent(NodeLabel(0, 0), 4)


def test_children_inverse_of_parent():
    for B in (2, 3, 16):
        v = NodeLabel(2, 5)
        for c in children(v, B):
            assert parent(c, B) == v
        assert ancestor(NodeLabel(4, 1234), 1, B) == parent(parent(parent(NodeLabel(4, 1234), B), B), B)


@pytest.mark.parametrize(
    "B,nhat,L,leaves",
    [(4, 16, 6, 4096), (16, 4096, 9, 16**9), (2, 3, 5, 32)],
)
def test_tree_params_examples(B, nhat, L, leaves):
    p = tree_params(B, nhat)
    assert (p.L, p.leaf_count) == (L, leaves)
    assert p.leaf_count >= nhat**3


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 64), st.integers(2, 10**5))
def test_tree_params_is_ceil_three_log(B, nhat):
    p = tree_params(B, nhat)
    assert B**p.L >= nhat**3 > B ** (p.L - 1)
    # float cross-check away from exact powers
    x = 3 * math.log(nhat) / math.log(B)
    if abs(x - round(x)) > 1e-9:
        assert p.L == math.ceil(x)


def test_tree_params_overflow():
    with pytest.raises(OverflowUnsupported):
        tree_params(2, 2**30)


def test_unit_weights_permutation():
    cfg = RoundConfig(buffer_capacity=4, seed=11)
    out, m = random_index(["a", "b", "c"], tree_params(4, 3), cfg)
    assert [v for v, _ in out] == ["a", "b", "c"]
    assert sorted(p for _, p in out) == [1, 2, 3]
    m.check()


def test_weighted_example_from_recorded_order():
    # search for a seed whose leaf order is (b, c, a)
    inputs = [WeightedInput("a", 2), WeightedInput("b", 5), WeightedInput("c", 3)]
    params = tree_params(4, 3)
    for seed in itertools.count():
        leaves = [leaf_of(seed, a, params) for a in range(3)]
        if leaves[1] < leaves[2] < leaves[0]:
            break
    out, _ = random_index(inputs, params, RoundConfig(buffer_capacity=4, seed=seed))
    assert dict(out) == {"b": 5, "c": 8, "a": 10}


def test_rounds_formula_4096():
    params = tree_params(16, 4096)
    out, m = random_index(range(4096), params, RoundConfig(buffer_capacity=16, seed=3))
    assert m.rounds == index_rounds(params) == 19
    assert m.message_complexity <= 8 * 4096 * params.L


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.integers(0, 9), min_size=1, max_size=60),
    st.integers(2, 8),
    st.integers(0, 2**40),
)
def test_prefix_sums_match_scan_oracle(weights, B, seed):
    inputs = [WeightedInput(f"x{i}", w) for i, w in enumerate(weights)]
    params = tree_params(B, max(2, len(inputs)))
    out, m = random_index(inputs, params, RoundConfig(buffer_capacity=B, seed=seed))
    assert out == scan_oracle(inputs, params, seed)
    assert m.rounds == 2 * params.L + 1
    m.check()


def test_collisions_within_leaf_are_tolerated():
    # a 1-leaf-wide tree is impossible, so force collisions with a tiny nhat override
    from mrsim.indexing import TreeParams

    params = TreeParams(B=4, nhat=4, L=2, leaf_count=2)  # 4 inputs on 2 leaves
    inputs = [WeightedInput(i, 1) for i in range(4)]
    for seed in range(20):
        try:
            out, m = random_index(inputs, params, RoundConfig(buffer_capacity=4, seed=seed))
        except LeafOverflow:
            continue
        assert out == scan_oracle(inputs, params, seed)


def test_leaf_overflow_raised_and_retry():
    from mrsim.indexing import TreeParams

    params = TreeParams(B=2, nhat=8, L=1, leaf_count=1)
    with pytest.raises(LeafOverflow) as exc:
        random_index(range(3), params, RoundConfig(seed=1))
    assert exc.value.retryable and exc.value.count == 3
    out, _, seed = random_index_retry(range(20), tree_params(2, 20), RoundConfig(seed=1))
    assert sorted(p for _, p in out) == list(range(1, 21))


def test_nhat_overestimate():
    params = tree_params(8, 5 * 50)
    out, m = random_index(range(50), params, RoundConfig(seed=2))
    assert sorted(p for _, p in out) == list(range(1, 51))
    assert m.rounds == 2 * params.L + 1


def test_empty_and_singleton():
    out, m = random_index([], tree_params(2, 2), RoundConfig())
    assert out == [] and m.rounds == 1
    out, _ = random_index(["z"], tree_params(2, 2), RoundConfig())
    assert out == [("z", 1)]


def test_hard_mode_regime_b_cubed():
    # B = N^(1/3): reducers stay within 8B words
    params = tree_params(8, 512)
    _, m = random_index(range(512), params, RoundConfig(buffer_capacity=8, enforcement="hard", seed=9))
    assert m.max_io_words_overall <= 64
