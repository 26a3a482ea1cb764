"""Seeded synthetic inputs for the workloads."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import accumulate


def uniform_words(n: int, seed: int, universe: int = 10**9) -> list[int]:
    rnd = random.Random(seed)
    return [rnd.randrange(universe) for _ in range(n)]


def zipf_words(n: int, seed: int, vocabulary: int = 10_000, s: float = 1.0) -> list[str]:
    """Words ``w0, w1, ...`` with frequency of ``w_r`` proportional to ``1/(r+1)**s``."""
    rnd = random.Random(seed)
    cum = list(accumulate(1.0 / (r + 1) ** s for r in range(vocabulary)))
    ranks = rnd.choices(range(vocabulary), cum_weights=cum, k=n)
    return [f"w{r}" for r in ranks]


def uniform_points(n: int, seed: int, side: int = 10**6) -> list[tuple[int, int]]:
    rnd = random.Random(seed)
    return [(rnd.randrange(side), rnd.randrange(side)) for _ in range(n)]


def circle_points(n: int, seed: int) -> list[tuple[Fraction, Fraction]]:
    """Distinct rational points exactly on the unit circle (all are hull vertices)."""
    rnd = random.Random(seed)
    ts: set = set()
    while len(ts) < n:
        ts.add(Fraction(rnd.randrange(-(10**6), 10**6), rnd.randrange(1, 10**6)))
    out = []
    for t in ts:
        d = 1 + t * t
        out.append(((1 - t * t) / d, 2 * t / d))
    rnd.shuffle(out)
    return out


def square_with_interior(n: int, seed: int, side: int = 1000) -> list[tuple[int, int]]:
    """The four corners of a square plus ``n`` points inside or on its edges."""
    rnd = random.Random(seed)
    pts = [(0, 0), (side, 0), (side, side), (0, side)]
    pts += [(rnd.randint(0, side), rnd.randint(0, side)) for _ in range(n)]
    rnd.shuffle(pts)
    return pts


def collinear_points(n: int, seed: int) -> list[tuple[int, int]]:
    rnd = random.Random(seed)
    return [(x, 3 * x + 7) for x in (rnd.randrange(-(10**6), 10**6) for _ in range(n))]
