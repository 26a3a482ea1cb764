"""Random indexing and prefix sums over an implicit B-ary tree.

Each input is dropped on a uniformly random leaf of a tree of height
``L = ceil(3 log_B Nhat)``.  ``L`` rounds carry subtree weight totals up to
the root and ``L + 1`` rounds carry "weight to my left" offsets back down, so
every leaf ends up knowing the inclusive prefix sum of its items in leaf
order.  With unit weights the prefix sums are a random permutation of
``1..N``.

Wire records (the tag is routing metadata and is not charged as data):

``raw``   an input on its leaf, first round only
``up``    a subtree total travelling to the parent, with the label of the
          lowest node that must receive the matching offset.  When that
          subtree holds a single input, the input itself rides along and no
          offset is ever sent down for it.
``h``     a child's ``up`` record held by a branching node until its down round
``off``   an offset on its way to (or waiting at) a branching node or leaf
``it``    an input parked on a leaf shared with other inputs
``done``  an input whose prefix sum is known, parked until the last round

Nodes with a single occupied child keep no state; their ``up`` record is
forwarded unchanged so the offset skips the chain.  Every input is exactly one
live record in every round.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, NamedTuple, Sequence

from . import rng
from .engine import KeyedItem, RoundConfig, RunMetrics, Runner, final, payload_words
from .errors import LeafOverflow, OverflowUnsupported, RetryExhausted, RootHasNoParent

LABEL_BITS = 64


class NodeLabel(NamedTuple):
    level: int
    index: int


def parent(label: NodeLabel, B: int) -> NodeLabel:
    level, index = label
    if level == 0:
        raise RootHasNoParent(f"{label} is the root")
    return NodeLabel(level - 1, index // B)


def children(label: NodeLabel, B: int) -> list[NodeLabel]:
    level, index = label
    return [NodeLabel(level + 1, index * B + k) for k in range(B)]


def ancestor(label: NodeLabel, level: int, B: int) -> NodeLabel:
    """The ancestor of ``label`` on ``level`` (``label`` itself if equal)."""
    return NodeLabel(level, label[1] // B ** (label[0] - level))


@dataclass(frozen=True)
class TreeParams:
    B: int
    nhat: int
    L: int
    leaf_count: int


def tree_params(B: int, nhat: int) -> TreeParams:
    """Height is the least ``L`` with ``B**L >= nhat**3``, i.e. ``ceil(3 log_B nhat)``."""
    if B < 2:
        raise ValueError("B must be >= 2")
    if nhat < 2:
        raise ValueError("nhat must be >= 2")
    target = nhat**3
    L, leaves = 0, 1
    while leaves < target:
        L += 1
        leaves *= B
    if (leaves - 1).bit_length() > LABEL_BITS:
        raise OverflowUnsupported(f"leaf labels need {(leaves - 1).bit_length()} bits > {LABEL_BITS}")
    return TreeParams(B, nhat, L, leaves)


@dataclass(frozen=True)
class WeightedInput:
    value: Any
    weight: int = 1

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")


def leaf_of(seed: int, arrival: int, params: TreeParams) -> int:
    return rng.randbelow(seed, params.leaf_count, "leaf", arrival)


def tiebreak(seed: int, value, arrival: int) -> tuple[int, int]:
    """Order of inputs that share a leaf."""
    return (rng.draw64(seed, "tie", repr(value)), arrival)


def _as_weighted(x) -> WeightedInput:
    return x if isinstance(x, WeightedInput) else WeightedInput(x, 1)


def _vw(value) -> int:
    if type(value) is tuple:
        return payload_words(value)
    return 0 if value is None else 1


_new = tuple.__new__


def _kv(key, payload, words):
    """Fast intermediate :class:`KeyedItem` with an explicit word count."""
    return _new(KeyedItem, (key, payload, False, words))


def _item_words(value) -> int:
    # value + weight + arrival index
    return _vw(value) + 2


class _Protocol:
    def __init__(self, params: TreeParams, seed: int):
        self.B = params.B
        self.L = params.L
        self.params = params
        self.seed = seed
        self.stage = 0

    def init_map(self, item: KeyedItem):
        arrival = item.key[0]
        _, value, weight = item.payload
        leaf = leaf_of(self.seed, arrival, self.params)
        tie = tiebreak(self.seed, value, arrival)[0]
        yield _kv((self.L, leaf), ("raw", tie, arrival, value, weight), _item_words(value))

    def child_rank(self, level: int, bl: int, bi: int) -> int:
        return bi // self.B ** (bl - level - 1)

    @staticmethod
    def _up_words(rec) -> int:
        item = rec[4]
        return 2 if item is None else 1 + _item_words(item[1])

    def _fire(self, key, level, recs, offset):
        """Hand each child its offset; complete inputs that rode up."""
        recs.sort(key=lambda r: self.child_rank(level, r[2], r[3]))
        acc = offset
        out = []
        for _, s, bl, bi, item in recs:
            if item is None:
                out.append(_kv((bl, bi), ("off", acc), 1))
            else:
                arrival, value, weight = item
                out.append(_kv(key, ("done", arrival, value, acc + weight), _item_words(value)))
            acc += s
        return out

    def reduce(self, key, values):
        level, index = key
        L, stage = self.L, self.stage
        last = stage == 2 * L + 1
        out: list = []
        if len(values) == 1:
            # fast paths for the two most common groups: a lone record climbing
            # (no sibling joined it) and a completed input waiting for the end
            v = values[0]
            if v[0] == "up" and level > 0:
                return [_kv((level - 1, index // self.B), v, self._up_words(v))]
            if v[0] == "done":
                if last:
                    return [final((v[1],), (v[2], v[3]), words=_vw(v[2]) + 1)]
                return [_kv(key, v, _item_words(v[2]))]
            by_tag = {v[0]: values}
        else:
            by_tag = {}
            for v in values:
                by_tag.setdefault(v[0], []).append(v)
        offs = by_tag.get("off")
        offset = sum(o[1] for o in offs) if offs else None

        for _, arrival, value, prefix in by_tag.get("done", ()):
            if last:
                out.append(final((arrival,), (value, prefix), words=_vw(value) + 1))
            else:
                out.append(_kv(key, ("done", arrival, value, prefix), _item_words(value)))

        raws = by_tag.get("raw")
        if raws:
            if len(raws) > self.B:
                raise LeafOverflow(key, len(raws), self.B)
            up_key = (level - 1, index // self.B)
            if len(raws) == 1:
                _, _, arrival, value, weight = raws[0]
                rec = ("up", weight, level, index, (arrival, value, weight))
                out.append(_kv(up_key, rec, self._up_words(rec)))
                return out
            raws.sort(key=lambda r: (r[1], r[2]))
            acc = 0
            for _, _, arrival, value, weight in raws:
                out.append(_kv(key, ("it", arrival, value, weight, acc, None), _item_words(value) + 1))
                acc += weight
            out.append(_kv(up_key, ("up", acc, level, index, None), 2))
            return out

        items = by_tag.get("it")
        if items:
            for _, arrival, value, weight, local, off in items:
                if offset is not None:
                    off = offset
                if last:
                    out.append(final((arrival,), (value, off + local + weight), words=_vw(value) + 1))
                else:
                    out.append(_kv(key, ("it", arrival, value, weight, local, off), _item_words(value) + 1))
            return out

        ups = by_tag.get("up")
        if ups:
            if level == 0:
                return out + self._fire(key, level, ups, 0)
            up_key = (level - 1, index // self.B)
            if len(ups) == 1:
                out.append(_kv(up_key, ups[0], self._up_words(ups[0])))
            else:
                for u in ups:
                    out.append(_kv(key, ("h",) + u[1:], self._up_words(u)))
                out.append(_kv(up_key, ("up", sum(u[1] for u in ups), level, index, None), 2))
            return out

        holds = by_tag.get("h")
        if holds:
            if stage == L + 1 + level:
                return out + self._fire(key, level, holds, offset)
            for h in holds:
                out.append(_kv(key, h, self._up_words(h)))
            if offs:
                out.append(_kv(key, ("off", offset), 1))
            return out

        if offs:  # pragma: no cover - offsets only target branching nodes and shared leaves
            raise AssertionError(f"orphan offset at {key}")
        return out


def random_index(
    inputs: Sequence,
    params: TreeParams,
    cfg: RoundConfig,
    metrics: RunMetrics | None = None,
) -> tuple[list[tuple[Any, int]], RunMetrics]:
    """Assign random prefix sums to ``inputs`` in ``2L + 1`` rounds.

    Returns ``(value, inclusive_prefix_sum)`` pairs in input order.  Raises
    :class:`LeafOverflow` when more than ``B`` inputs share a leaf.
    """
    weighted = [_as_weighted(x) for x in inputs]
    if len(weighted) > params.nhat:
        raise ValueError(f"N={len(weighted)} exceeds nhat={params.nhat}")
    proto = _Protocol(params, cfg.seed)
    runner = Runner(cfg, metrics)
    items = [KeyedItem((a,), ("in", w.value, w.weight), words=_vw(w.value) + 1) for a, w in enumerate(weighted)]
    start = len(runner.finals)
    for stage in range(1, 2 * params.L + 2):
        proto.stage = stage
        map_fn = proto.init_map if stage == 1 else None
        items = runner.round(items, map_fn, proto.reduce, label=f"index-{stage}")
        if not items:
            break
    out = sorted(runner.finals[start:], key=lambda f: f.key[0])
    return [f.payload for f in out], runner.metrics


def random_index_retry(
    inputs: Sequence,
    params: TreeParams,
    cfg: RoundConfig,
    attempts: int = 8,
) -> tuple[list[tuple[Any, int]], RunMetrics, int]:
    """:func:`random_index` with fresh seeds on :class:`LeafOverflow`.

    Returns the seed that succeeded as the third element.
    """
    for attempt in range(attempts):
        seed = cfg.seed if attempt == 0 else rng.draw64(cfg.seed, "retry", attempt)
        try:
            out, m = random_index(inputs, params, cfg.with_seed(seed))
            return out, m, seed
        except LeafOverflow:
            continue
    raise RetryExhausted(f"LeafOverflow on {attempts} seeds")


def index_rounds(params: TreeParams) -> int:
    return 2 * params.L + 1
