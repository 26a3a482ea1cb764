"""Simulating BSP programs, one MapReduce round per superstep.

Processor ``i`` owns ``m`` memory cells.  Every round the processor state,
its cells and the messages addressed to it are identity-mapped to key
``(i,)``; the reducer for that key runs the user's superstep and emits the
new state, the new cells and the outgoing messages.  A processor's inbox is
delivered sorted by message content so the program sees the same order no
matter how the shuffle interleaved the senders.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from . import rng
from .engine import KeyedItem, RoundConfig, RunMetrics, Runner, payload_words
from .errors import ContractViolation, FanOutViolation


class BspMessage(NamedTuple):
    dest: int
    content: tuple


@dataclass
class ProcessorState:
    pid: int
    data: tuple = ()
    halted: bool = False


class BspProgram:
    """Base class for BSP programs.

    Subclasses override :meth:`superstep`.  ``state_words`` and
    ``message_words`` are the constant bounds on a processor's state record
    and on one message's content.
    """

    state_words: int = 16
    message_words: int = 4

    def start(self, pid: int, p: int) -> tuple:
        return ()

    def superstep(
        self, state: ProcessorState, cells: list, inbox: list[tuple]
    ) -> tuple[ProcessorState, list, list[BspMessage]]:
        raise NotImplementedError


@dataclass
class BspMachine:
    p: int
    m: int
    states: list[ProcessorState]
    memory: list[list]
    pending: list[BspMessage] = field(default_factory=list)
    supersteps: int = 0

    def flat_memory(self) -> list:
        return [w for cells in self.memory for w in cells]

    def all_halted(self) -> bool:
        return all(s.halted for s in self.states) and not self.pending

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "m": self.m,
                "supersteps": self.supersteps,
                "states": [[s.pid, list(s.data), s.halted] for s in self.states],
                "memory": self.memory,
                "pending": [[msg.dest, list(msg.content)] for msg in self.pending],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "BspMachine":
        d = json.loads(text)
        return cls(
            p=d["p"],
            m=d["m"],
            states=[ProcessorState(pid, tuple(data), halted) for pid, data, halted in d["states"]],
            memory=[list(c) for c in d["memory"]],
            pending=[BspMessage(dest, tuple(c)) for dest, c in d["pending"]],
            supersteps=d["supersteps"],
        )


def distribute(cells: Sequence, p: int, program: BspProgram | None = None) -> BspMachine:
    """Owner-major placement: cell ``k`` (1-based) goes to processor ``ceil(k/m)``."""
    if p < 1:
        raise ValueError("p must be >= 1")
    n = len(cells)
    m = max(1, math.ceil(n / p))
    memory = [list(cells[i * m : (i + 1) * m]) for i in range(p)]
    program = program or BspProgram()
    states = [ProcessorState(pid, tuple(program.start(pid, p))) for pid in range(1, p + 1)]
    return BspMachine(p, m, states, memory)


def distribute_unindexed(values: Sequence, p: int, cfg: RoundConfig, program: BspProgram | None = None, B: int | None = None):
    """Index ``values`` with random prefix sums, then :func:`distribute` them.

    Returns ``(machine, metrics)``; the metrics hold the indexing rounds.
    """
    from .indexing import random_index_retry, tree_params

    if not values:
        return distribute([], p, program), RunMetrics()
    params = tree_params(B or cfg.buffer_capacity, max(2, len(values)))
    indexed, metrics, _ = random_index_retry(values, params, cfg)
    cells = [None] * len(values)
    for value, k in indexed:
        cells[k - 1] = value
    return distribute(cells, p, program), metrics


def _words(x) -> int:
    return payload_words((x,))


def _encode(machine: BspMachine) -> list[KeyedItem]:
    items = []
    for st in machine.states:
        items.append(KeyedItem((st.pid,), ("P", st.halted, st.data), words=payload_words(st.data) + 1))
    for pid, cells in enumerate(machine.memory, start=1):
        for j, w in enumerate(cells, start=1):
            items.append(KeyedItem((pid,), ("M", j, w), words=_words(w)))
    for msg in machine.pending:
        items.append(KeyedItem((msg.dest,), ("C", msg.content), words=payload_words(msg.content)))
    return items


def _decode(items: Sequence[KeyedItem], p: int, m: int, supersteps: int) -> BspMachine:
    states = [None] * p
    memory: list[list] = [[] for _ in range(p)]
    pending = []
    for it in items:
        pid = it.key[0]
        tag = it.payload[0]
        if tag == "P":
            states[pid - 1] = ProcessorState(pid, it.payload[2], it.payload[1])
        elif tag == "M":
            memory[pid - 1].append((it.payload[1], it.payload[2]))
        else:
            pending.append(BspMessage(pid, it.payload[1]))
    memory = [[w for _, w in sorted(cells, key=lambda c: c[0])] for cells in memory]
    return BspMachine(p, m, states, memory, pending, supersteps)


class _SuperstepReducer:
    def __init__(self, program: BspProgram, p: int, m: int):
        self.program = program
        self.p = p
        self.m = m

    def __call__(self, key, values):
        pid = key[0]
        state = None
        cells = []
        inbox = []
        for v in values:
            tag = v[0]
            if tag == "P":
                state = ProcessorState(pid, v[2], v[1])
            elif tag == "M":
                cells.append((v[1], v[2]))
            else:
                inbox.append(v[1])
        if state is None:
            raise ContractViolation(f"message sent to unknown processor {pid}")
        cells.sort(key=lambda c: c[0])
        words = [w for _, w in cells]
        if state.halted and not inbox:
            new_state, new_cells, outbox = state, words, []
        else:
            inbox.sort()
            new_state, new_cells, outbox = self.program.superstep(state, words, inbox)
            self._validate(pid, new_state, new_cells, outbox)
        yield KeyedItem((pid,), ("P", new_state.halted, tuple(new_state.data)), words=payload_words(new_state.data) + 1)
        for j, w in enumerate(new_cells, start=1):
            yield KeyedItem((pid,), ("M", j, w), words=_words(w))
        for msg in outbox:
            yield KeyedItem((msg.dest,), ("C", tuple(msg.content)), words=payload_words(msg.content))

    def _validate(self, pid, state, cells, outbox):
        prog = self.program
        if len(outbox) > self.m:
            raise FanOutViolation(pid, len(outbox), self.m)
        if len(cells) > self.m:
            raise ContractViolation(f"processor {pid} grew memory to {len(cells)} > m={self.m}")
        if payload_words(state.data) > prog.state_words:
            raise ContractViolation(f"processor {pid} state exceeds {prog.state_words} words")
        if state.pid != pid:
            raise ContractViolation(f"processor {pid} returned state for {state.pid}")
        for msg in outbox:
            if not 1 <= msg.dest <= self.p:
                raise ContractViolation(f"processor {pid} addressed nonexistent processor {msg.dest}")
            if payload_words(msg.content) > prog.message_words:
                raise ContractViolation(f"message from {pid} exceeds {prog.message_words} words")


def simulate_bsp(
    program: BspProgram,
    initial: BspMachine,
    max_supersteps: int,
    cfg: RoundConfig,
    metrics: RunMetrics | None = None,
) -> tuple[BspMachine, RunMetrics]:
    """Run up to ``max_supersteps`` supersteps, one engine round each.

    Stops early once every processor has halted and no message is in flight.
    """
    runner = Runner(cfg, metrics)
    reducer = _SuperstepReducer(program, initial.p, initial.m)
    machine = initial
    items = _encode(machine)
    steps = 0
    for _ in range(max_supersteps):
        if machine.all_halted():
            break
        items = runner.round(items, None, reducer, label=f"superstep-{machine.supersteps + 1}")
        steps += 1
        machine = _decode(items, initial.p, initial.m, initial.supersteps + steps)
    return machine, runner.metrics


def io_bound(m: int, program: BspProgram) -> int:
    """Per-reducer word budget: state in/out, m cells in/out, m messages in/out."""
    return 2 * program.state_words + 2 + 2 * m * 2 + 2 * m * program.message_words


class RandomBspProgram(BspProgram):
    """A seeded pseudo-random program used for equivalence testing.

    Each superstep a processor mixes its inbox into its cells and sends up to
    ``m`` messages to pseudo-random processors.  It halts after ``steps``
    supersteps.
    """

    state_words = 2
    message_words = 2

    def __init__(self, seed: int, steps: int, p: int, m: int):
        self.seed = seed
        self.steps = steps
        self.p = p
        self.m = m

    def start(self, pid, p):
        return (0,)

    def superstep(self, state, cells, inbox):
        (t,) = state.data
        pid = state.pid
        mix = sum(c[0] * 31 + c[1] for c in inbox) % 1_000_003
        new = [None if w is None else (w * 7 + mix + j) % 1_000_003 for j, w in enumerate(cells)]
        fan = rng.randbelow(self.seed, self.m + 1, "fan", pid, t)
        out = []
        for k in range(fan):
            dest = 1 + rng.randbelow(self.seed, self.p, "dest", pid, t, k)
            out.append(BspMessage(dest, (pid, (t + k + (new[0] or 0)) % 1000)))
        t += 1
        return ProcessorState(pid, (t,), t >= self.steps), new, out
