"""Single-step CRCW PRAM programs: maximum and histogram."""

from __future__ import annotations

from typing import Hashable, Sequence

from ..crcw import MAX, SUM, CrcwMachine, CrcwProgram, simulate_crcw
from ..engine import RoundConfig, RunMetrics


class _WriteAll(CrcwProgram):
    """Processor ``i`` writes ``value(i)`` to ``cell(i)`` and halts."""

    state_words = 1

    def __init__(self, cells: Sequence[int], values: Sequence):
        self.cells = cells
        self.values = values

    def step_compute(self, pid, data, value):
        return data, (self.cells[pid], self.values[pid]), True


def crcw_max(values: Sequence, B: int, cfg: RoundConfig) -> tuple[object, RunMetrics]:
    """One PRAM step: every processor writes its value to cell 0 under Max."""
    if not values:
        raise ValueError("crcw_max needs at least one value")
    prog = _WriteAll([0] * len(values), list(values))
    mach = CrcwMachine.create(prog, len(values), [values[0]])
    out, metrics = simulate_crcw(prog, mach, 1, MAX, cfg, B=B)
    return out.memory[0], metrics


def crcw_histogram(values: Sequence, buckets: Sequence[Hashable], B: int, cfg: RoundConfig) -> tuple[tuple, RunMetrics]:
    """One PRAM step: each value adds 1 to its bucket's cell under Sum."""
    index = {b: j for j, b in enumerate(buckets)}
    memory = [0] * len(buckets)
    if not values:
        return tuple(memory), RunMetrics()
    prog = _WriteAll([index[v] for v in values], [1] * len(values))
    mach = CrcwMachine.create(prog, len(values), memory)
    out, metrics = simulate_crcw(prog, mach, 1, SUM, cfg, B=B)
    return tuple(out.memory), metrics
