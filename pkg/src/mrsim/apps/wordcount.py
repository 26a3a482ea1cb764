"""Word count in one round: map ``w -> (w; 1)``, reduce by summing."""

from __future__ import annotations

from typing import Sequence

from ..engine import KeyedItem, RoundConfig, RunMetrics, final, run_pipeline


def _map(item: KeyedItem):
    (word,) = item.payload
    yield KeyedItem((word,), (1,))


def _reduce(key, values):
    yield final(key, (key[0], len(values)))


def word_count(document: str | Sequence[str], cfg: RoundConfig) -> tuple[dict, RunMetrics]:
    """Exact counts.  A string is split on whitespace.

    Every occurrence of a word meets at one reducer, so a frequent word's
    reducer sees as many items as the word has occurrences; in hard mode
    that raises :class:`~mrsim.errors.BufferExceeded`.
    """
    words = document.split() if isinstance(document, str) else list(document)
    initial = [KeyedItem(("doc", i), (w,)) for i, w in enumerate(words)]
    finals, metrics = run_pipeline(initial, [(_map, _reduce)], cfg)
    return {it.payload[0]: it.payload[1] for it in finals}, metrics
