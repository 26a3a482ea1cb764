"""Map-shuffle-reduce rounds with complexity accounting.

A round maps every :class:`KeyedItem`, groups the mapped items by key,
hands each group to the reduce function and collects its outputs.  Every
reducer's input plus output size is recorded; in ``hard`` enforcement mode a
reducer whose size (in words) exceeds ``slack_factor * buffer_capacity``
aborts the run with :class:`~mrsim.errors.BufferExceeded`.

Sizes are tracked in two units.  *Items* is the number of key-value pairs and
is the unit of the message complexity ``M`` and the reducer I/O ``n``.
*Words* is the data payload carried by those items and is what the buffer
bound is checked against.
"""

from __future__ import annotations

import gc
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, NamedTuple, Sequence

from . import rng
from .errors import BufferExceeded, StageDivergence

log = logging.getLogger(__name__)


def payload_words(payload) -> int:
    """Count the leaf atoms of a payload (nested tuples are flattened)."""
    n = 0
    for x in payload:
        if isinstance(x, tuple):
            n += payload_words(x)
        elif x is not None:
            n += 1
    return n


class KeyedItem(NamedTuple):
    """A ``(key, payload)`` pair.

    ``key`` is a tuple of ints and short strings.  ``payload`` is a tuple of
    words.  ``words`` overrides the default size (leaf atoms of the payload);
    protocol layers use it so routing tags and addresses are not charged as
    data.  ``final`` marks reducer outputs that leave the pipeline.
    """

    key: tuple
    payload: tuple
    final: bool = False
    words: int | None = None

    def size(self) -> int:
        return payload_words(self.payload) if self.words is None else self.words


def final(key: tuple, payload: tuple, words: int | None = None) -> KeyedItem:
    return KeyedItem(key, payload, True, words)


class Work(NamedTuple):
    """Yielded by a reducer to declare extra internal work units."""

    units: int


MapFn = Callable[[KeyedItem], Iterable[KeyedItem]]
ReduceFn = Callable[[tuple, list], Iterable[Any]]


def identity_map(item: KeyedItem) -> tuple[KeyedItem]:
    return (item,)


class Enforcement(str, Enum):
    HARD = "hard"
    RECORD = "record"


@dataclass(frozen=True)
class RoundConfig:
    buffer_capacity: int = 64
    slack_factor: int = 8
    enforcement: Enforcement = Enforcement.RECORD
    seed: int = 0
    max_rounds: int = 100_000

    def __post_init__(self):
        if self.buffer_capacity < 2:
            raise ValueError("buffer_capacity must be >= 2")
        if self.slack_factor < 1:
            raise ValueError("slack_factor must be >= 1")
        object.__setattr__(self, "enforcement", Enforcement(self.enforcement))

    @property
    def limit(self) -> int:
        return self.slack_factor * self.buffer_capacity

    def with_seed(self, seed: int) -> "RoundConfig":
        return RoundConfig(self.buffer_capacity, self.slack_factor, self.enforcement, seed, self.max_rounds)


class ReducerIO(NamedTuple):
    items: int
    words: int


@dataclass
class RoundMetrics:
    round_index: int
    reducer_io: dict[tuple, ReducerIO] = field(default_factory=dict)
    message_complexity: int = 0
    message_words: int = 0
    max_io: int = 0
    max_io_words: int = 0
    internal_time: int = 0
    label: str = ""

    def check(self) -> None:
        """Assert the metric identities for this round."""
        assert self.message_complexity == sum(io.items for io in self.reducer_io.values())
        assert self.message_words == sum(io.words for io in self.reducer_io.values())
        top = max((io.items for io in self.reducer_io.values()), default=0)
        assert self.max_io == top
        assert self.internal_time >= top


@dataclass
class RunMetrics:
    per_round: list[RoundMetrics] = field(default_factory=list)

    @property
    def rounds(self) -> int:
        return len(self.per_round)

    @property
    def message_complexity(self) -> int:
        return sum(r.message_complexity for r in self.per_round)

    @property
    def message_words(self) -> int:
        return sum(r.message_words for r in self.per_round)

    @property
    def internal_time(self) -> int:
        return sum(r.internal_time for r in self.per_round)

    @property
    def max_io_overall(self) -> int:
        return max((r.max_io for r in self.per_round), default=0)

    @property
    def max_io_words_overall(self) -> int:
        return max((r.max_io_words for r in self.per_round), default=0)

    def append(self, rm: RoundMetrics) -> RoundMetrics:
        rm.round_index = len(self.per_round) + 1
        self.per_round.append(rm)
        return rm

    def extend(self, other: "RunMetrics") -> "RunMetrics":
        for rm in other.per_round:
            self.append(rm)
        return self

    def check(self) -> None:
        for rm in self.per_round:
            rm.check()
        assert self.rounds == len(self.per_round)
        assert self.message_complexity == sum(r.message_complexity for r in self.per_round)

    def summary(self) -> dict:
        return {
            "rounds": self.rounds,
            "M": self.message_complexity,
            "M_words": self.message_words,
            "r": self.internal_time,
            "max_io": self.max_io_overall,
            "max_io_words": self.max_io_words_overall,
        }


_new = tuple.__new__


def _canonical(payload) -> bytes:
    return repr(payload).encode()


def _sortable(key: tuple) -> tuple:
    return tuple((0, a, b"") if isinstance(a, int) else (1, 0, a.encode() if isinstance(a, str) else bytes(a)) for a in key)


def _sorted_keys(keys) -> list:
    try:
        return sorted(keys)
    except TypeError:
        return sorted(keys, key=_sortable)


def shuffle(mapped: Iterable[KeyedItem]) -> tuple[dict[tuple, list], dict[tuple, int]]:
    """Group payloads by key, then order each list canonically.

    Lists are sorted by payload value, or by payload bytes when the payloads
    are not mutually comparable.  Either order is a function of the list's
    contents only, so the result does not depend on how the map step was
    scheduled.
    """
    groups: dict[tuple, list] = {}
    sizes: dict[tuple, int] = {}
    for k, payload, _, w in mapped:
        if w is None:
            w = payload_words(payload)
        lst = groups.get(k)
        if lst is None:
            groups[k] = [payload]
            sizes[k] = w
        else:
            lst.append(payload)
            sizes[k] += w
    for k, lst in groups.items():
        if len(lst) > 1:
            try:
                lst.sort()
            except TypeError:
                lst.sort(key=_canonical)
    return groups, sizes


@contextmanager
def gc_paused():
    """Pause cyclic GC; a round allocates millions of acyclic tuples."""
    enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if enabled:
            gc.enable()


def run_round(
    items: Iterable[KeyedItem],
    map_fn: MapFn | None,
    reduce_fn: ReduceFn,
    cfg: RoundConfig,
    *,
    label: str = "",
    group_order_seed: int | None = None,
) -> tuple[list[KeyedItem], RoundMetrics]:
    """Execute one map-shuffle-reduce round.

    ``map_fn=None`` is the identity map.  ``group_order_seed`` processes the
    reduce lists in a seeded random order instead of key order; the outputs are
    reassembled in key order either way, which is what the reducer-independence
    property tests rely on.
    """
    with gc_paused():
        return _run_round(items, map_fn, reduce_fn, cfg, label, group_order_seed)


def _run_round(items, map_fn, reduce_fn, cfg, label, group_order_seed):
    if map_fn is None:
        mapped = items
    else:
        mapped = (out for it in items for out in map_fn(it))
    groups, in_words = shuffle(mapped)
    keys = _sorted_keys(groups)
    order = keys
    if group_order_seed is not None:
        order = sorted(keys, key=lambda k: rng.draw64(group_order_seed, repr(k)))

    rm = RoundMetrics(round_index=0, label=label)
    hard = cfg.enforcement is Enforcement.HARD
    limit = cfg.limit
    reducer_io = rm.reducer_io
    outputs: list[KeyedItem] = []
    produced: dict[tuple, list[KeyedItem]] = {}
    total_items = total_words = top_items = top_words = internal = 0
    for k in order:
        values = groups[k]
        outs: list[KeyedItem] = []
        extra = 0
        n_words = in_words[k]
        for o in reduce_fn(k, values):
            if type(o) is Work:
                extra += o[0]
                continue
            w = o[3]
            n_words += payload_words(o[1]) if w is None else w
            outs.append(o)
        n_items = len(values) + len(outs)
        if hard and n_words > limit:
            raise BufferExceeded(k, n_words, limit)
        reducer_io[k] = _new(ReducerIO, (n_items, n_words))
        total_items += n_items
        total_words += n_words
        if n_items > top_items:
            top_items = n_items
        if n_words > top_words:
            top_words = n_words
        if n_items + extra > internal:
            internal = n_items + extra
        if order is keys:
            outputs.extend(outs)
        else:
            produced[k] = outs

    if order is not keys:
        for k in keys:
            outputs.extend(produced[k])
        rm.reducer_io = {k: reducer_io[k] for k in keys}
    rm.message_complexity = total_items
    rm.message_words = total_words
    rm.max_io = top_items
    rm.max_io_words = top_words
    rm.internal_time = internal
    return outputs, rm


def split_final(outputs: Iterable[KeyedItem]) -> tuple[list[KeyedItem], list[KeyedItem]]:
    finals, inter = [], []
    for o in outputs:
        (finals if o[2] else inter).append(o)
    return finals, inter


class Runner:
    """Drives a data-dependent sequence of rounds and accumulates metrics.

    The layers above (indexing, BSP, CRCW, apps) decide the next stage from
    the intermediates of the previous one, so they drive rounds through this
    object rather than a fixed stage list.
    """

    def __init__(self, cfg: RoundConfig, metrics: RunMetrics | None = None):
        self.cfg = cfg
        self.metrics = metrics if metrics is not None else RunMetrics()
        self.finals: list[KeyedItem] = []

    def round(self, items, map_fn, reduce_fn, label: str = "") -> list[KeyedItem]:
        if self.metrics.rounds >= self.cfg.max_rounds:
            raise StageDivergence(f"exceeded max_rounds={self.cfg.max_rounds}")
        try:
            outputs, rm = run_round(items, map_fn, reduce_fn, self.cfg, label=label)
        except BufferExceeded as exc:
            exc.round_index = self.metrics.rounds + 1
            raise
        self.metrics.append(rm)
        finals, inter = split_final(outputs)
        self.finals.extend(finals)
        return inter


def run_pipeline(
    initial: Sequence[KeyedItem],
    stages: Sequence[tuple[MapFn | None, ReduceFn]],
    cfg: RoundConfig,
) -> tuple[list[KeyedItem], RunMetrics]:
    """Run ``stages`` in order, feeding intermediates forward.

    Stops early once a stage emits no intermediates.  Returns only
    final-flagged outputs; intermediates left after the last stage are
    dropped.  With no stages the initial items are returned unchanged.
    """
    if not stages:
        return list(initial), RunMetrics()
    if len(stages) > cfg.max_rounds:
        raise StageDivergence(f"{len(stages)} stages exceed max_rounds={cfg.max_rounds}")
    runner = Runner(cfg)
    items = list(initial)
    for map_fn, reduce_fn in stages:
        items = runner.round(items, map_fn, reduce_fn)
        if not items:
            break
    return runner.finals, runner.metrics


def estimate_time(m: RunMetrics, latency: float, bandwidth: float) -> float:
    """Sum over rounds of ``r_i + L + M_i / b``."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    if latency < 0:
        raise ValueError("latency must be nonnegative")
    return sum(r.internal_time + latency + r.message_complexity / bandwidth for r in m.per_round)
