"""Deterministic message scheduler, distinguishers, transcripts and exact enumeration."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

from mevsim.ac.core import Context, Port, Wiring
from mevsim.ac.messages import Message, Qubit
from mevsim.ac.randomness import (
    ReplayPath,
    ReplayRandomness,
    SeededRandomness,
)
from mevsim.ac.register import QubitRegister
from mevsim.errors import DivergenceError, EnumerationTooLarge, ProtocolStateError, WiringError

DEFAULT_BUDGET = 10**6
DISTINGUISHER = "@distinguisher"


class Distinguisher:
    """Environment attached to every open port of a wiring.

    It addresses ports by label, may start by emitting messages, reacts to
    what arrives, and once the run is quiescent returns a guess bit from
    :meth:`decide`. ``ports`` may restrict the labels it is willing to face;
    ``None`` means any interface.
    """

    name = "distinguisher"
    ports: frozenset[str] | None = None

    def initial_state(self) -> dict:
        return {}

    def start(self, state, ctx: Context) -> list:
        return []

    def step(self, label: str, msg: Message, state, ctx: Context) -> list:
        return []

    def decide(self, state, ctx: Context) -> int:
        return 0

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class Event(NamedTuple):
    step: int
    label: str
    direction: str  # "in": distinguisher -> wiring, "out": wiring -> distinguisher
    msg: Message

    def line(self) -> str:
        return f"{self.step},{self.label}:{self.direction},{self.msg.tag},{self.msg.payload()}"


@dataclass
class Transcript:
    events: list[Event] = field(default_factory=list)

    def outputs(self) -> dict[str, list[Message]]:
        """Messages delivered to the distinguisher, per open-port label."""
        out: dict[str, list[Message]] = {}
        for e in self.events:
            if e.direction == "out":
                out.setdefault(e.label, []).append(e.msg)
        return out

    def at(self, label: str, direction: str = "out") -> list[Message]:
        return [e.msg for e in self.events if e.label == label and e.direction == direction]

    def dump(self) -> str:
        return "".join(e.line() + "\n" for e in self.events)

    def __len__(self) -> int:
        return len(self.events)


@dataclass(frozen=True, slots=True)
class Fault:
    step: int
    machine: str
    error: ProtocolStateError


@dataclass
class RunResult:
    guess: int
    transcript: Transcript
    faults: list[Fault]
    register: QubitRegister
    states: dict
    steps: int


def _execute(
    w: Wiring,
    d: Distinguisher,
    rng_factory: Callable[[str], object],
    budget: int,
) -> RunResult:
    if d.ports is not None and not set(w.open_labels) <= set(d.ports):
        missing = sorted(set(w.open_labels) - set(d.ports))
        raise WiringError(f"distinguisher does not cover open ports {missing}")
    register = QubitRegister()
    machines = {m.name: m for m in w.machines}
    states = {name: m.initial_state() for name, m in machines.items()}
    ctxs: dict[str, Context] = {}
    dctx = Context(DISTINGUISHER, register, rng_factory)
    dstate = d.initial_state()
    routes = w.routes
    open_by_label = w.open_labels
    halted: set[str] = set()
    faults: list[Fault] = []
    transcript = Transcript()
    queue: deque = deque()  # (destination machine or None, port or label, message, inbound label)

    push = queue.append
    events = transcript.events

    def emit_from_distinguisher(outputs) -> None:
        for label, msg in outputs or ():
            dst = open_by_label.get(label)
            if dst is None:
                raise WiringError(f"distinguisher wrote to {label!r}, which is not an open port")
            if type(msg) is Qubit:
                register.release(msg.handle, DISTINGUISHER)
            push((dst.machine, dst.port, msg, label))

    emit_from_distinguisher(d.start(dstate, dctx))
    steps = 0
    pop = queue.popleft
    while queue:
        dest, port, msg, label = pop()
        steps += 1
        if steps > budget:
            raise DivergenceError(f"message budget of {budget} exceeded")
        if dest is None:
            if type(msg) is Qubit:
                register.receive(msg.handle, DISTINGUISHER)
            events.append(Event(steps, port, "out", msg))
            emit_from_distinguisher(d.step(port, msg, dstate, dctx))
            continue
        if label is not None:
            events.append(Event(steps, label, "in", msg))
        if type(msg) is Qubit:
            register.receive(msg.handle, dest)
        if dest in halted:
            continue
        try:
            ctx = ctxs.get(dest)
            if ctx is None:
                ctx = ctxs[dest] = Context(dest, register, rng_factory)
            outputs = machines[dest].step(port, msg, states[dest], ctx)
        except ProtocolStateError as exc:
            halted.add(dest)
            faults.append(Fault(steps, dest, exc))
            continue
        for out_port, out_msg in outputs or ():
            route = routes.get((dest, out_port))
            if route is None:
                raise WiringError(f"{dest} emitted on undeclared port {out_port!r}")
            if type(out_msg) is Qubit:
                register.release(out_msg.handle, dest)
            push((route[0], route[1], out_msg, None))

    guess = d.decide(dstate, dctx)
    if guess not in (0, 1):
        raise WiringError(f"distinguisher guess must be 0 or 1, got {guess!r}")
    states[DISTINGUISHER] = dstate
    return RunResult(guess, transcript, faults, register, states, steps)


def seeded_factory(seed: int) -> Callable[[str], SeededRandomness]:
    """One independent stream per machine name, split off ``seed``.

    The stream key is the text ``"<seed>|<machine name>"``, so a machine's
    draws depend only on the run seed and its own name; attaching another
    machine never perturbs them.
    """
    prefix = f"{int(seed)}|".encode()
    return lambda name: SeededRandomness(prefix + name.encode())


def run(w: Wiring, d: Distinguisher, seed: int = 0, *, budget: int = DEFAULT_BUDGET) -> RunResult:
    """Execute ``d`` against ``w`` until quiescence; identical inputs give identical transcripts."""
    return _execute(w, d, seeded_factory(seed), budget)


def enumerate_runs(
    w: Wiring,
    d: Distinguisher,
    *,
    max_bits: float = 24,
    budget: int = DEFAULT_BUDGET,
) -> Iterator[tuple[float, RunResult]]:
    """Every path through the run's random choices, with its probability.

    All machines share one replayed choice sequence; zero-weight options are
    pruned. Raises EnumerationTooLarge when any path needs more than
    ``max_bits`` bits of randomness.
    """
    prefix: list[int] | None = []
    leaves = 0
    while prefix is not None:
        path = ReplayPath(prefix, max_bits)
        replay = ReplayRandomness(path)
        result = _execute(w, d, lambda _name: replay, budget)
        leaves += 1
        if leaves > 1 << int(max_bits):
            raise EnumerationTooLarge("too many leaves")
        yield path.prob, result
        prefix = path.next_prefix()


def exact_distribution(
    w: Wiring,
    d: Distinguisher,
    key: Callable[[RunResult], object] = lambda r: r.guess,
    **kwargs,
) -> dict:
    """Exact distribution of ``key(result)`` over the run's randomness."""
    dist: dict = {}
    for prob, result in enumerate_runs(w, d, **kwargs):
        k = key(result)
        dist[k] = dist.get(k, 0.0) + prob
    return dist


__all__ = [
    "DEFAULT_BUDGET",
    "Distinguisher",
    "EnumerationTooLarge",
    "Event",
    "Fault",
    "RunResult",
    "Transcript",
    "enumerate_runs",
    "exact_distribution",
    "run",
    "seeded_factory",
]
