"""Sequential reference implementations.

Nothing here touches the engine.  Each function computes the answer the
simulated algorithm must reproduce, directly and in the most obvious way.
"""

from __future__ import annotations

import copy
from collections import Counter
from fractions import Fraction


def word_count(words) -> dict:
    return dict(Counter(words))


def bsp_interpret(program, machine, max_supersteps: int):
    """Run a BSP program superstep by superstep on an in-memory machine."""
    from .bsp import BspMachine, ProcessorState

    states = {s.pid: s for s in copy.deepcopy(machine.states)}
    memory = [list(c) for c in machine.memory]
    pending = list(machine.pending)
    steps = 0
    for _ in range(max_supersteps):
        if all(s.halted for s in states.values()) and not pending:
            break
        inboxes: dict[int, list] = {pid: [] for pid in states}
        for msg in pending:
            inboxes[msg.dest].append(tuple(msg.content))
        pending = []
        for pid in sorted(states):
            st = states[pid]
            inbox = sorted(inboxes[pid])
            if st.halted and not inbox:
                continue
            new_state, cells, out = program.superstep(st, list(memory[pid - 1]), inbox)
            states[pid] = ProcessorState(pid, tuple(new_state.data), new_state.halted)
            memory[pid - 1] = list(cells)
            pending.extend(out)
        steps += 1
    pending.sort(key=lambda msg: (msg.dest, tuple(msg.content)))
    return BspMachine(
        machine.p,
        machine.m,
        [states[pid] for pid in sorted(states)],
        memory,
        pending,
        machine.supersteps + steps,
    )


def crcw_interpret(program, states, memory, max_steps: int, f):
    """Synchronous CRCW PRAM: all reads see pre-step memory, writes fold with ``f``."""
    states = [tuple(s) for s in states]
    memory = list(memory)
    steps = 0
    for _ in range(max_steps):
        if all(h for _, h in states):
            break
        reads = {}
        for pid, (data, halted) in enumerate(states):
            if not halted:
                cell = program.step_read(pid, data)
                reads[pid] = None if cell is None else memory[cell]
        writes: dict[int, list] = {}
        new_states = list(states)
        for pid, (data, halted) in enumerate(states):
            if halted:
                continue
            data2, write, h = program.step_compute(pid, data, reads[pid])
            new_states[pid] = (tuple(data2), bool(h))
            if write is not None:
                writes.setdefault(write[0], []).append(write[1])
        for cell, vals in writes.items():
            acc = vals[0]
            for v in vals[1:]:
                acc = f(acc, v)
            memory[cell] = acc
        states = new_states
        steps += 1
    return states, memory, steps


def ranks(values, tiebreak=None) -> list[int]:
    """Rank of each value (1-based) in the order ``(value, tiebreak)``."""
    tb = tiebreak if tiebreak is not None else list(range(len(values)))
    order = sorted(range(len(values)), key=lambda i: (values[i], tb[i]))
    out = [0] * len(values)
    for r, i in enumerate(order, start=1):
        out[i] = r
    return out


def successors(values, tiebreak=None) -> list:
    """Index of each element's successor in ``(value, tiebreak)`` order, or None."""
    tb = tiebreak if tiebreak is not None else list(range(len(values)))
    order = sorted(range(len(values)), key=lambda i: (values[i], tb[i]))
    out = [None] * len(values)
    for a, b in zip(order, order[1:]):
        out[a] = b
    return out


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def graham_hull(points) -> list:
    """Strict convex hull, counter-clockwise from the lowest-then-leftmost point.

    Collinear boundary points are dropped.  All-collinear input yields the two
    extreme points; a single distinct point yields itself.
    """
    pts = sorted(set((Fraction(x), Fraction(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    lower: list = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    start = min(range(len(hull)), key=lambda i: (hull[i][1], hull[i][0]))
    return hull[start:] + hull[:start]
