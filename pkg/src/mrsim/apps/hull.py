"""2-D convex hull: sort by ``(x, y)``, hull each strip, merge up a tree.

After the sort, rank ``r`` goes to strip ``(r-1) // g``.  Each strip reducer
computes the hull of its points; hulls then merge ``f`` at a time until one
remains.  Merging recomputes the hull of the union of the child hull
vertices, which is the hull of all their points.  Orientation tests use
exact integer or :class:`~fractions.Fraction` arithmetic, and collinear
boundary points are dropped.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import NamedTuple, Sequence

from ..engine import KeyedItem, RoundConfig, RunMetrics, Runner, final, gc_paused
from .sorting import run_sort

Point2D = tuple  # (x, y) with int or Fraction coordinates


class HullVertex(NamedTuple):
    index: int
    point: Point2D


class HullOutput(NamedTuple):
    vertices: tuple[HullVertex, ...]

    def points(self) -> list[Point2D]:
        return [v.point for v in self.vertices]


def exact(p) -> Point2D:
    """Coerce coordinates to int or Fraction (strings like "0.5" allowed)."""
    return tuple(c if isinstance(c, (int, Fraction)) else Fraction(str(c)) for c in p)


def cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def chain_hull(pts: Sequence[tuple]) -> list[tuple]:
    """Strict hull of ``(x, y, index)`` records, ccw from the lowest-then-leftmost.

    Duplicate coordinates keep their smallest index.  Two or fewer distinct
    points come back in ``(x, y)`` order.
    """
    best: dict = {}
    for x, y, i in pts:
        if (x, y) not in best or i < best[(x, y)]:
            best[(x, y)] = i
    ordered = sorted((x, y, i) for (x, y), i in best.items())
    if len(ordered) <= 2:
        return ordered
    lower: list = []
    for p in ordered:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(ordered):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    start = min(range(len(hull)), key=lambda j: (hull[j][1], hull[j][0]))
    return hull[start:] + hull[:start]


def validate_hull(points: Sequence[Point2D], hull: Sequence[Point2D]) -> bool:
    """Independent check: strict left turns, and no input point strictly outside."""
    h = list(hull)
    if len(h) >= 3:
        for j in range(len(h)):
            if cross(h[j], h[(j + 1) % len(h)], h[(j + 2) % len(h)]) <= 0:
                return False
        edges = [(h[j], h[(j + 1) % len(h)]) for j in range(len(h))]
        return all(cross(a, b, p) >= 0 for p in points for a, b in edges)
    if len(h) == 2:
        return all(cross(h[0], h[1], p) == 0 for p in points)
    return len(set(map(tuple, points))) <= 1


class _HullMerge:
    def __init__(self, fan_in: int, levels: int):
        self.fan_in = fan_in
        self.levels = levels

    def __call__(self, key, values):
        level = 0 if key[0] == "hs" else key[1]
        pts = [(v[1], v[2], v[3]) for v in values]
        hull = chain_hull(pts)
        if level == self.levels:
            yield final(("hull",), tuple(hull), words=len(hull))
            return
        parent = key[-1] // self.fan_in
        for p in hull:
            yield KeyedItem(("hm", level + 1, parent), ("pt",) + p, words=1)


def hull_2d(points: Sequence, B: int, cfg: RoundConfig) -> tuple[HullOutput, RunMetrics]:
    """Convex hull of ``points`` (at least one), counter-clockwise."""
    if not points:
        raise ValueError("hull_2d needs at least one point")
    pts = [exact(p) for p in points]
    g = max(2, B // 2)
    fan_in = max(2, math.isqrt(2 * B))
    strips = math.ceil(len(pts) / g)
    levels = 0
    while strips > fan_in**levels:
        levels += 1

    def to_strip(records):
        for (x, y), i, r in records:
            yield KeyedItem(("hs", (r - 1) // g), ("pt", x, y, i), words=1)

    with gc_paused():
        run = run_sort(pts, B, cfg, finish=to_strip)
        runner = Runner(cfg, run.metrics)
        merge = _HullMerge(fan_in, levels)
        items = run.pending
        for level in range(levels + 1):
            items = runner.round(items, None, merge, label=f"hull-merge{level}")
    (hull,) = [it.payload for it in runner.finals]
    return HullOutput(tuple(HullVertex(i, (x, y)) for x, y, i in hull)), run.metrics
