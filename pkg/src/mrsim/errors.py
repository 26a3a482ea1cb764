"""Exception hierarchy shared by all simulation layers."""


class SimulationError(Exception):
    """Base class for every error raised by mrsim."""


class BufferExceeded(SimulationError):
    """A reducer's input+output size broke the memory-bound contract."""

    def __init__(self, key, size: int, limit: int, round_index: int | None = None):
        self.key = key
        self.size = size
        self.limit = limit
        self.round_index = round_index
        where = f" in round {round_index}" if round_index is not None else ""
        super().__init__(f"reducer {key!r} moved {size} words > limit {limit}{where}")


class StageDivergence(SimulationError):
    """A pipeline ran past its configured round cap."""


class RootHasNoParent(SimulationError):
    pass


class OverflowUnsupported(SimulationError):
    """Tree labels would not fit in the supported integer width."""


class LeafOverflow(SimulationError):
    """More than B inputs landed on one leaf; rerun with a fresh seed."""

    retryable = True

    def __init__(self, leaf, count: int, limit: int):
        self.leaf = leaf
        self.count = count
        self.limit = limit
        super().__init__(f"{count} inputs collided on leaf {leaf} (limit {limit})")


class FanOutViolation(SimulationError):
    """A BSP processor emitted more than m messages in one superstep."""

    def __init__(self, pid: int, count: int, limit: int):
        self.pid = pid
        self.count = count
        self.limit = limit
        super().__init__(f"processor {pid} sent {count} messages > m={limit}")


class ContractViolation(SimulationError):
    """A user program broke a size or shape contract (state, cells, message size)."""


class NonSemigroupDetected(SimulationError):
    """A declared semigroup operator failed a commutativity/associativity probe."""


class RetryExhausted(SimulationError):
    """A randomized step failed on every allowed seed."""


class InsufficientData(SimulationError):
    """Not enough distinct sweep points to fit a bound."""
