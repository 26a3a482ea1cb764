"""Sorting and 1-D all nearest neighbors with a two-level sample sort.

Items are distinctified as ``(value, position)`` pairs, so duplicates are
ranked by input position.  The schedule is fixed (18 rounds for a sort, 19
for nearest neighbors) whatever ``N`` is:

==========  ==============================================================
1           level-1 sample reducer picks ``k-1`` splitters
2-4         the splitter table fans out to every block through a tree
5           blocks route items to child buckets and sample them
6-10        the same for every child bucket (level 2); items land in leaves
11          leaf slices count their items
12          leaf counters hand each slice its start position and report
            the leaf size upward
13          items take exact positions, hence exact chunks of ``B``
14          items copy themselves to their leaf's chunk-pair reducers
15          pair ``(a, b)`` counts, for each item of chunk ``a``, the items
            of chunk ``b`` that are not larger
16          items add up their counts: the rank inside the leaf
17-18       the leaf offset, computed by a two-level prefix sum over
            leaf sizes in rounds 13-15, reaches every item
==========  ==============================================================

The prefix sum over leaf sizes runs alongside the counting rounds.  Blocks
hold about ``B/2`` items and buckets split ``B/2`` ways, so with balanced
splitters every reducer moves ``O(B)`` words.  A distinctified item counts as
one word; bucket, slice and chunk numbers travel as addresses.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Any, Callable, Iterable, NamedTuple, Sequence

from .. import rng
from ..engine import Enforcement, KeyedItem, RoundConfig, RunMetrics, Runner, final, gc_paused
from ..errors import BufferExceeded, RetryExhausted


class RankedItem(NamedTuple):
    value: Any
    rank: int


class SortRun(NamedTuple):
    finals: list
    metrics: RunMetrics
    attempts: int
    pending: list  # intermediates emitted by the last round


class Neighbor(NamedTuple):
    value: Any
    successor: Any
    successor_index: int | None


@dataclass(frozen=True)
class SortPlan:
    N: int
    B: int
    k: int  # split arity per level
    block: int  # items per level-1 block; level-2 blocks hold about as many
    sample: int  # target size of the level-1 sample
    sample2: int  # target sample size per level-2 bucket
    chunk: int  # items per leaf chunk
    slice_blocks: int = 2  # level-2 blocks folded into one leaf slice
    hops: int = 4  # rounds a splitter table takes to reach the blocks

    @classmethod
    def for_size(cls, N: int, B: int) -> "SortPlan":
        half = max(1, B // 2)
        return cls(N=N, B=B, k=max(2, half), block=half, sample=max(2, 2 * B), sample2=max(2, B), chunk=max(1, B))

    def level1_blocks(self) -> int:
        return max(1, math.ceil(self.N / self.block))

    def level2_blocks(self, k1: int) -> int:
        return max(1, math.ceil(self.N / (k1 * self.block)))

    def rate1(self) -> float:
        return min(1.0, self.sample / max(1, self.N))

    def rate2(self, k1: int) -> float:
        return min(1.0, self.sample2 * k1 / max(1, self.N))


def fan_out(R: int, hops: int) -> int:
    """Least ``F`` with ``F**hops >= R``."""
    F = 1
    while F**hops < R:
        F += 1
    return F


def _words(v) -> int:
    tag = v[0]
    if tag == "T":
        return len(v[1]) + 1
    if tag == "L":
        return len(v[1])
    if tag in ("y", "o2"):
        return 2
    return 1


_new = tuple.__new__


def _kv(key, payload, words):
    """Fast intermediate :class:`KeyedItem` with an explicit word count."""
    return _new(KeyedItem, (key, payload, False, words))


def _carry(key, values):
    return [_kv(key, v, _words(v)) for v in values]


def _choose_splitters(sample: list, k: int) -> tuple:
    sample.sort()
    m = len(sample)
    parts = min(k, m + 1)
    cuts = sorted({(j * m) // parts for j in range(1, parts)})
    return tuple(sample[c] for c in cuts if c < m)


def schedule(plan: SortPlan) -> list[str]:
    phases = []
    for level in (1, 2):
        phases.append(f"sample{level}")
        phases += [f"hop{level}-{h}" for h in range(1, plan.hops)]
        phases.append(f"route{level}")
    return phases + ["count", "start", "place", "expand", "pairs", "sum", "relay", "finish"]


class _SampleSort:
    """One reduce function for every phase; dispatch is on the key's tag.

    Keys: ``b`` block, ``s`` sample reducer, ``h`` broadcast node, ``q`` leaf
    slice, ``n`` leaf counter, ``i`` single item, ``p`` chunk pair, ``f``
    chunk, ``g`` level-1 bucket, ``r`` root, ``a`` adjacency (nearest
    neighbors only).
    """

    def __init__(self, plan: SortPlan, seed: int, finish: Callable):
        self.plan = plan
        self.seed = seed
        self.finish = finish
        self.phase = ""

    def sampled(self, level: int, i: int, rate: float) -> bool:
        return rate >= 1.0 or rng.uniform(self.seed, "sample", level, i) < rate

    def __call__(self, key, values):
        return getattr(self, "on_" + key[0])(key, values)

    # splitter selection and broadcast ------------------------------------
    def send_table(self, level, bucket, hop, idx, table, R):
        H = self.plan.hops
        F = fan_out(R, H)
        span = F ** (H - hop - 1)
        out = []
        for c in range(F):
            j = idx * F + c
            if j * span >= R:
                break
            target = ("b", level, bucket, j) if hop + 1 == H else ("h", level, bucket, hop + 1, j)
            out.append(_kv(target, table, _words(table)))
        return out

    def on_s(self, key, values):
        _, level, bucket = key
        plan = self.plan
        splitters = _choose_splitters([(v[1], v[2]) for v in values], plan.k)
        k1 = values[0][3]
        R = plan.level1_blocks() if level == 1 else plan.level2_blocks(k1)
        return self.send_table(level, bucket, 0, 0, ("T", splitters, k1), R)

    def on_h(self, key, values):
        _, level, bucket, hop, idx = key
        if self.phase != f"hop{level}-{hop}":
            return _carry(key, values)
        (table,) = values
        R = self.plan.level1_blocks() if level == 1 else self.plan.level2_blocks(table[2])
        return self.send_table(level, bucket, hop, idx, table, R)

    def on_b(self, key, values):
        _, level, bucket, blk = key
        if self.phase != f"route{level}":
            return _carry(key, values)
        tables = [v for v in values if v[0] == "T"]
        splitters = tables[0][1] if tables else ()
        items = [v for v in values if v[0] == "x"]
        plan = self.plan
        out = []
        if level == 1:
            k1 = len(splitters) + 1
            R2 = plan.level2_blocks(k1)
            q2 = plan.rate2(k1)
            for _, v, i in items:
                c1 = bisect_left(splitters, (v, i))
                out.append(_kv(("b", 2, c1, rng.randbelow(self.seed, R2, "blk", i)), ("x", v, i), 1))
                if self.sampled(2, i, q2):
                    out.append(_kv(("s", 2, c1), ("z", v, i, k1), 1))
        else:
            K = plan.k
            sl = blk // plan.slice_blocks
            for _, v, i in items:
                leaf = bucket * K + bisect_left(splitters, (v, i))
                out.append(_kv(("q", leaf, sl), ("x", v, i), 1))
        return out

    # exact leaf positions ---------------------------------------------------
    def on_q(self, key, values):
        _, leaf, sl = key
        if self.phase == "count":
            out = _carry(key, values)
            out.append(_kv(("n", leaf), ("c", sl, len(values)), 1))
            return out
        if self.phase == "place":
            (start, C) = next(v[1:] for v in values if v[0] == "o2")
            items = sorted((v[1], v[2]) for v in values if v[0] == "x")
            chunk = self.plan.chunk
            return [
                _kv(("i", i), ("e", v, i, leaf, (start + j) // chunk, C), 1)
                for j, (v, i) in enumerate(items)
            ]
        return _carry(key, values)

    def on_n(self, key, values):
        leaf = key[1]
        K = self.plan.k
        if self.phase == "start":
            counts = sorted((v[1], v[2]) for v in values)
            total = sum(c for _, c in counts)
            C = max(1, math.ceil(total / self.plan.chunk))
            out = []
            start = 0
            for sl, c in counts:
                out.append(_kv(("q", leaf, sl), ("o2", start, C), 2))
                start += c
            out.append(_kv(("g", leaf // K), ("n", leaf % K, total), 1))
            out.append(_kv(key, ("C", C), 1))
            return out
        if self.phase == "sum":
            C = next(v[1] for v in values if v[0] == "C")
            off = next(v[1] for v in values if v[0] == "o")
            return [_kv(("f", leaf, a), ("o", off), 1) for a in range(C)]
        return _carry(key, values)

    # chunk-pair ranking --------------------------------------------------------
    def on_i(self, key, values):
        if self.phase == "expand":
            ((_, v, i, leaf, a, C),) = values
            out = [_kv(("p", leaf, a, a), ("d", v, i), 1)]
            for b in range(C):
                if b != a:
                    out.append(_kv(("p", leaf, a, b), ("r", v, i), 1))
                    out.append(_kv(("p", leaf, b, a), ("c", v, i), 1))
            return out
        if self.phase == "sum":
            rank = sum(v[1] for v in values if v[0] == "k")
            home = next(v for v in values if v[0] == "h")
            return [_kv(key, ("y", home[1], home[2], rank), 2)]
        if self.phase == "finish":
            y = next(v for v in values if v[0] == "y")
            off = next(v[1] for v in values if v[0] == "o")
            return list(self.finish([(y[1], y[2], off + y[3])]))
        return _carry(key, values)

    def on_p(self, key, values):
        _, leaf, a, b = key
        cols = sorted((v[1], v[2]) for v in values if v[0] in ("c", "d"))
        out = []
        for v in values:
            if v[0] == "c":
                continue
            cnt = bisect_right(cols, (v[1], v[2]))
            if v[0] == "d":
                out.append(_kv(("i", v[2]), ("h", v[1], v[2]), 1))
                out.append(_kv(("f", leaf, a), ("mb", v[2]), 1))
            if cnt:
                out.append(_kv(("i", v[2]), ("k", cnt), 1))
        return out

    def on_f(self, key, values):
        if self.phase != "relay":
            return _carry(key, values)
        off = next(v[1] for v in values if v[0] == "o")
        return [_kv(("i", v[1]), ("o", off), 1) for v in values if v[0] == "mb"]

    # prefix sum over leaf sizes -------------------------------------------
    def on_g(self, key, values):
        c1 = key[1]
        if self.phase == "place":
            total = sum(v[2] for v in values)
            children = tuple(sorted(v[1:] for v in values))
            return [
                _kv(("r", 0), ("t", c1, total), 1),
                _kv(key, ("L", children), len(children)),
            ]
        if self.phase == "pairs":
            offset = next(v[1] for v in values if v[0] == "o")
            (children,) = [v[1] for v in values if v[0] == "L"]
            K = self.plan.k
            out = []
            for c2, n in children:
                out.append(_kv(("n", c1 * K + c2), ("o", offset), 1))
                offset += n
            return out
        return _carry(key, values)

    def on_r(self, key, values):
        out = []
        offset = 0
        for _, c1, total in sorted(values):
            out.append(_kv(("g", c1), ("o", offset), 1))
            offset += total
        return out

    # nearest neighbors ---------------------------------------------------------
    def on_a(self, key, values):
        """Rank ``r`` meets rank ``r+1`` and learns its successor."""
        me = next((v for v in values if v[0] == "me"), None)
        if me is None:
            return []
        nx = next((v for v in values if v[0] == "nx"), None)
        succ = (None, None) if nx is None else (nx[1], nx[2])
        return [final(("ann", me[2]), (me[2], me[1]) + succ, words=2)]


SORT_ROUNDS = len(schedule(SortPlan.for_size(2, 2)))


def _rank_finish(records):
    for v, i, r in records:
        yield final(("rank", i), (i, v, r), words=2)


def _ann_finish(records):
    for v, i, r in records:
        yield _kv(("a", r), ("me", v, i), 1)
        if r > 1:
            yield _kv(("a", r - 1), ("nx", v, i), 1)


def _initial(values: Sequence, plan: SortPlan, sorter: _SampleSort) -> list[KeyedItem]:
    q1 = plan.rate1()
    items = []
    for i, v in enumerate(values):
        items.append(_kv(("b", 1, 0, i // plan.block), ("x", v, i), 1))
        if sorter.sampled(1, i, q1):
            items.append(_kv(("s", 1, 0), ("z", v, i, 1), 1))
    return items


def run_sort(
    values: Sequence,
    B: int,
    cfg: RoundConfig,
    finish: Callable[[list], Iterable[KeyedItem]] = _rank_finish,
    extra_phases: Sequence[str] = (),
    attempts: int = 5,
    plan: SortPlan | None = None,
) -> SortRun:
    """Run the fixed sort schedule.

    ``finish`` turns ``(value, position, rank)`` records into the outputs of
    the last scheduled round.  In hard enforcement mode an unbalanced
    splitter draw surfaces as :class:`BufferExceeded`; the sort is rerun with
    a fresh seed and the rounds of the failed attempt stay in the metrics.
    """
    with gc_paused():
        return _run_sort(values, B, cfg, finish, extra_phases, attempts, plan)


def _run_sort(values, B, cfg, finish, extra_phases, attempts, plan):
    plan = plan or SortPlan.for_size(len(values), B)
    metrics = RunMetrics()
    hard = cfg.enforcement is Enforcement.HARD
    for attempt in range(attempts):
        seed = cfg.seed if attempt == 0 else rng.draw64(cfg.seed, "sort-retry", attempt)
        sorter = _SampleSort(plan, seed, finish)
        runner = Runner(cfg, metrics)
        items = _initial(values, plan, sorter)
        try:
            for phase in schedule(plan) + list(extra_phases):
                sorter.phase = phase
                items = runner.round(items, None, sorter, label=f"sort-{phase}")
        except BufferExceeded:
            if not hard:
                raise
            continue
        return SortRun(runner.finals, metrics, attempt + 1, items)
    raise RetryExhausted(f"sort failed its balance check on {attempts} seeds")


def mr_sort(values: Sequence, B: int, cfg: RoundConfig) -> tuple[list[RankedItem], RunMetrics]:
    """Rank every item; duplicates are ordered by input position."""
    if not values:
        return [], RunMetrics()
    finals, metrics, _, _ = run_sort(values, B, cfg)
    out: list = [None] * len(values)
    for it in finals:
        i, v, r = it.payload
        out[i] = RankedItem(v, r)
    return out, metrics


def ann_1d(values: Sequence, B: int, cfg: RoundConfig) -> tuple[list[Neighbor], RunMetrics]:
    """Successor of every item in (value, position) order, or None for the last."""
    if not values:
        return [], RunMetrics()
    finals, metrics, _, _ = run_sort(values, B, cfg, finish=_ann_finish, extra_phases=("adjacent",))
    out: list = [None] * len(values)
    for it in finals:
        i, v, sv, si = it.payload
        out[i] = Neighbor(v, sv, si)
    return out, metrics
