"""Simulating CRCW PRAM steps with invisible B-trees.

Every memory cell ``j`` has a conceptual B-ary tree of height
``L = ceil(log_B P)`` whose leaves are the processors.  Concurrent reads of
``j`` climb that tree, merging at each node, so the cell only ever answers a
single request; the answer then fans back down.  Concurrent writes climb the
same tree and are folded with a commutative semigroup operator on the way up.
No tree is ever stored: a node exists only as a reduce key while requests are
in flight through it.

Two kinds of keys share every round.  ``(j,)`` holds processor ``j``'s state
and cell ``j``'s contents; ``(j, level, index)`` is a node of cell ``j``'s tree.
One reducer dispatches on the key's length.

Round schedule of one PRAM step (``3L + 3`` rounds, the write-back of the
previous step shares the first round):

====================  ====================================================
seed                  install folded writes; processors issue read requests
read-up  x L          tree levels ``L-1 .. 0`` merge requests
reply                 cells answer their root
read-down x L         tree levels ``0 .. L-1`` fan the value out
compute               processors run their step and issue writes
write-up x L          tree levels ``L-1 .. 0`` fold writes with ``f``
====================  ====================================================
"""

from __future__ import annotations

import json
import operator
from dataclasses import dataclass
from typing import Any, Callable, Sequence

from . import rng
from .engine import KeyedItem, RoundConfig, RunMetrics, Runner, payload_words
from .errors import ContractViolation, NonSemigroupDetected


@dataclass(frozen=True)
class SemigroupOp:
    name: str
    f: Callable[[Any, Any], Any]
    identity: Any = None

    def __call__(self, a, b):
        return self.f(a, b)

    def fold(self, values: Sequence):
        it = iter(values)
        acc = next(it)
        for v in it:
            acc = self.f(acc, v)
        return acc


SUM = SemigroupOp("sum", operator.add, 0)
MIN = SemigroupOp("min", min)
MAX = SemigroupOp("max", max)
SEMIGROUPS = {op.name: op for op in (SUM, MIN, MAX)}


def check_semigroup(op: SemigroupOp, samples: Sequence, seed: int = 0, probes: int = 64) -> None:
    """Probe ``op`` for commutativity and associativity on sampled values."""
    pool = [s for s in samples if s is not None] or [0, 1, 2]
    pool = pool + [0, 1, -1, 2, 7]
    for t in range(probes):
        a, b, c = (pool[rng.randbelow(seed, len(pool), "probe", t, k)] for k in range(3))
        if op(a, b) != op(b, a):
            raise NonSemigroupDetected(f"{op.name} is not commutative on ({a!r}, {b!r})")
        if op(op(a, b), c) != op(a, op(b, c)):
            raise NonSemigroupDetected(f"{op.name} is not associative on ({a!r}, {b!r}, {c!r})")


class CrcwProgram:
    """Base class for PRAM programs.

    ``step_read`` names the cell a processor reads this step (or None).
    ``step_compute`` gets the value read (None if nothing was read) and
    returns ``(new_data, write, halted)`` where ``write`` is ``(cell, value)``
    or None.
    """

    state_words: int = 16

    def start(self, pid: int) -> tuple:
        return ()

    def step_read(self, pid: int, data: tuple) -> int | None:
        return None

    def step_compute(self, pid: int, data: tuple, value) -> tuple[tuple, tuple | None, bool]:
        raise NotImplementedError


@dataclass
class CrcwMachine:
    P: int
    N: int
    states: list[tuple]  # (data, halted) per processor
    memory: list
    steps: int = 0

    @classmethod
    def create(cls, program: CrcwProgram, P: int, memory: Sequence) -> "CrcwMachine":
        return cls(P, len(memory), [(tuple(program.start(i)), False) for i in range(P)], list(memory))

    def all_halted(self) -> bool:
        return all(h for _, h in self.states)

    def to_json(self) -> str:
        return json.dumps(
            {"P": self.P, "N": self.N, "steps": self.steps, "states": [[list(d), h] for d, h in self.states], "memory": self.memory},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "CrcwMachine":
        d = json.loads(text)
        return cls(d["P"], d["N"], [(tuple(s), h) for s, h in d["states"]], d["memory"], d["steps"])


def tree_height(B: int, P: int) -> int:
    """Least ``L`` with ``B**L >= P``."""
    L, span = 0, 1
    while span < P:
        L += 1
        span *= B
    return L


def _w(x) -> int:
    return payload_words((x,))


class _StepProtocol:
    def __init__(self, program: CrcwProgram, P: int, N: int, B: int, f: SemigroupOp):
        self.program = program
        self.P = P
        self.N = N
        self.B = B
        self.L = tree_height(B, P)
        self.f = f
        self.kind = "seed"
        self.level = 0

    def leaf_target(self, cell: int, pid: int) -> tuple:
        """Key that a processor's request enters the tree of ``cell`` at."""
        if not 0 <= cell < self.N:
            raise ContractViolation(f"processor {pid} addressed cell {cell} outside 0..{self.N - 1}")
        return (cell,) if self.L == 0 else (cell, self.L - 1, pid // self.B)

    def up_target(self, key: tuple) -> tuple:
        j, level, index = key
        return (j,) if level == 0 else (j, level - 1, index // self.B)

    def down_target(self, key: tuple, child: int) -> tuple:
        j, level, _ = key
        return (child,) if level + 1 == self.L else (j, level + 1, child)

    def __call__(self, key, values):
        if len(key) == 1:
            return self.reduce_cell(key, values)
        return self.reduce_node(key, values)

    def reduce_node(self, key, values):
        kind, level = self.kind, self.level
        node_level = key[1]
        out = []
        held = [v for v in values if v[0] == "H"]
        if kind == "read-up" and node_level == level:
            reqs = [v for v in values if v[0] == "R"]
            out.extend(KeyedItem(key, ("H", c), words=1) for _, c in reqs)
            out.append(KeyedItem(self.up_target(key), ("R", key[2]), words=1))
            return out
        if kind == "read-down" and node_level == level:
            (value,) = [v[1] for v in values if v[0] == "V"]
            return [KeyedItem(self.down_target(key, c), ("V", value), words=_w(value)) for _, c in held]
        if kind == "write-up" and node_level == level:
            folded = self.f.fold([v[1] for v in values if v[0] == "W"])
            return [KeyedItem(self.up_target(key), ("W", folded), words=_w(folded))]
        return [KeyedItem(key, v, words=_w(v[1])) for v in values]

    def reduce_cell(self, key, values):
        j = key[0]
        kind = self.kind
        state = None
        cell = None
        has_cell = j < self.N
        value_in = None
        got_value = False
        reqs = []
        writes = []
        for v in values:
            tag = v[0]
            if tag == "P":
                state = (v[2], v[1])
            elif tag == "M":
                cell = v[1]
            elif tag == "R":
                reqs.append(v[1])
            elif tag == "V":
                value_in = v[1]
                got_value = True
            elif tag == "W":
                writes.append(v[1])
        out = []
        if kind in ("seed", "install") and writes:
            cell = self.f.fold(writes)
            writes = []
        if kind == "reply":
            for c in reqs:
                target = (c,) if self.L == 0 else (j, 0, 0)
                out.append(KeyedItem(target, ("V", cell), words=_w(cell)))
            reqs = []
        if state is not None:
            data, halted = state
            if not halted and kind == "seed":
                target = self.program.step_read(j, data)
                if target is not None:
                    out.append(KeyedItem(self.leaf_target(target, j), ("R", j), words=1))
            elif not halted and kind == "compute":
                data, write, halted = self.program.step_compute(j, data, value_in if got_value else None)
                data = tuple(data)
                if payload_words(data) > self.program.state_words:
                    raise ContractViolation(f"processor {j} state exceeds {self.program.state_words} words")
                if write is not None:
                    wcell, wval = write
                    out.append(KeyedItem(self.leaf_target(wcell, j), ("W", wval), words=_w(wval)))
            out.append(KeyedItem(key, ("P", bool(halted), data), words=payload_words(data) + 1))
        if has_cell:
            out.append(KeyedItem(key, ("M", cell), words=_w(cell)))
        out.extend(KeyedItem(key, ("R", c), words=1) for c in reqs)
        out.extend(KeyedItem(key, ("W", w), words=_w(w)) for w in writes)
        return out


def _encode(machine: CrcwMachine) -> list[KeyedItem]:
    items = []
    for pid, (data, halted) in enumerate(machine.states):
        items.append(KeyedItem((pid,), ("P", halted, tuple(data)), words=payload_words(data) + 1))
    for j, v in enumerate(machine.memory):
        items.append(KeyedItem((j,), ("M", v), words=_w(v)))
    return items


def _decode(items, machine: CrcwMachine, steps: int) -> CrcwMachine:
    states = list(machine.states)
    memory = list(machine.memory)
    for it in items:
        if len(it.key) != 1:
            continue
        tag = it.payload[0]
        if tag == "P":
            states[it.key[0]] = (it.payload[2], it.payload[1])
        elif tag == "M":
            memory[it.key[0]] = it.payload[1]
    return CrcwMachine(machine.P, machine.N, states, memory, steps)


def step_schedule(L: int) -> list[tuple[str, int]]:
    """(kind, level) of each round in one PRAM step, starting with the seed round."""
    sched = [("seed", 0)]
    sched += [("read-up", lv) for lv in range(L - 1, -1, -1)]
    sched.append(("reply", 0))
    sched += [("read-down", lv) for lv in range(L)]
    sched.append(("compute", 0))
    sched += [("write-up", lv) for lv in range(L - 1, -1, -1)]
    return sched


def simulate_crcw(
    program: CrcwProgram,
    machine: CrcwMachine,
    max_steps: int,
    f: SemigroupOp,
    cfg: RoundConfig,
    B: int | None = None,
    metrics: RunMetrics | None = None,
    probe: bool = True,
) -> tuple[CrcwMachine, RunMetrics]:
    """Run up to ``max_steps`` PRAM steps (or until every processor halts).

    Uses ``3L + 3`` rounds per step plus one closing write-back round, with
    ``L = ceil(log_B P)`` and ``B`` defaulting to the buffer capacity.
    """
    B = B or cfg.buffer_capacity
    if probe:
        check_semigroup(f, machine.memory, seed=cfg.seed)
    proto = _StepProtocol(program, machine.P, machine.N, B, f)
    runner = Runner(cfg, metrics)
    items = _encode(machine)
    sched = step_schedule(proto.L)
    steps = machine.steps
    pending_writes = False
    for _ in range(max_steps):
        if machine.all_halted():
            break
        for kind, level in sched:
            proto.kind, proto.level = kind, level
            items = runner.round(items, None, proto, label=f"step{steps + 1}-{kind}-{level}")
        steps += 1
        machine = _decode(items, machine, steps)
        pending_writes = any(it.payload[0] == "W" for it in items)
    if pending_writes:
        proto.kind = "install"
        items = runner.round(items, None, proto, label=f"step{steps}-install")
        machine = _decode(items, machine, steps)
    return machine, runner.metrics


def simulate_crcw_step(machine: CrcwMachine, program: CrcwProgram, f: SemigroupOp, cfg: RoundConfig, B: int | None = None):
    """One PRAM step including its write-back; ``3L + 4`` rounds."""
    return simulate_crcw(program, machine, 1, f, cfg, B)


def rounds_per_step(B: int, P: int) -> int:
    return 3 * tree_height(B, P) + 3


class RandomCrcwProgram(CrcwProgram):
    """Seeded pseudo-random reads and writes for equivalence testing."""

    state_words = 3

    def __init__(self, seed: int, P: int, N: int, steps: int, write_range: int = 100):
        self.seed = seed
        self.P = P
        self.N = N
        self.steps = steps
        self.write_range = write_range

    def start(self, pid):
        return (0, 0)

    def step_read(self, pid, data):
        t, _ = data
        if rng.randbelow(self.seed, 4, "skip-read", pid, t) == 0:
            return None
        return rng.randbelow(self.seed, self.N, "read", pid, t)

    def step_compute(self, pid, data, value):
        t, acc = data
        acc = (acc * 3 + (0 if value is None else value) + pid) % 1_000_003
        write = None
        if rng.randbelow(self.seed, 3, "skip-write", pid, t):
            cell = rng.randbelow(self.seed, self.N, "write", pid, t)
            write = (cell, (acc + rng.randbelow(self.seed, self.write_range, "val", pid, t)) % self.write_range)
        t += 1
        return (t, acc), write, t >= self.steps
