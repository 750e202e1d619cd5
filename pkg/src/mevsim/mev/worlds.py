"""World builders and trial drivers.

Builders return :class:`~mevsim.ac.core.Wiring` objects whose party
interfaces are labelled ``party.1`` .. ``party.n``. A dishonest source leaves
the ``source`` interface open together with the classical leak interfaces
``leak.C``, ``leak.v`` and ``leak.ch.i.j``; the source itself is then played
by the distinguisher (see :class:`MevDriver`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from mevsim import qstate
from mevsim.ac.core import Wiring, attach, wire
from mevsim.ac.messages import START, Abort, Bit, Message, Qubit
from mevsim.ac.scheduler import Distinguisher, RunResult, run
from mevsim.errors import ProtocolStateError, RoundBudgetExhausted
from mevsim.mev.machines import (
    ClassicalChannel,
    CoinOracle,
    GHZResource,
    IdealMEV,
    MultiRound,
    PartyMachine,
    ProtocolParams,
    QuantumChannel,
    SimulatorSigmaC,
    SimulatorSigmaS,
    SourceBehavior,
    SourceMachine,
    StateGenerator,
    VerifierOracle,
    filter_bot,
    filter_bot_prime,
    leak_label,
    pair_name,
)

SOURCE = "source"


def party_label(i: int) -> str:
    return f"party.{i}"


def build_concrete(params: ProtocolParams, behavior: SourceBehavior | None = None) -> Wiring:
    """pi_[n] R, plus pi_S when the source is honest."""
    behavior = behavior or SourceBehavior.honest()
    n = params.n
    leaky = not behavior.is_honest
    machines = [StateGenerator(n), CoinOracle(n, params.p, leak=leaky), VerifierOracle(n, leak=leaky)]
    machines += [QuantumChannel(i) for i in params.parties]
    machines += [ClassicalChannel(i, j, leak=leaky) for i in params.parties for j in params.parties if i < j]
    machines += [PartyMachine(i, params) for i in params.parties]
    links = []
    labels = {"sg:src": SOURCE}
    if leaky:
        labels.update({"O_C:leak": "leak.C", "O_v:leak": "leak.v"})
    for i in params.parties:
        links += [
            (f"pi_{i}:sg", f"sg:req.{i}"),
            (f"sg:q.{i}", f"qch.{i}:a"),
            (f"qch.{i}:b", f"pi_{i}:q"),
            (f"pi_{i}:oc", f"O_C:q.{i}"),
            (f"pi_{i}:ov", f"O_v:q.{i}"),
        ]
        labels[f"pi_{i}:out"] = party_label(i)
        for j in params.parties:
            if j != i:
                links.append((f"pi_{i}:ch.{j}", f"{pair_name(i, j)}:p{i}"))
            if leaky and i < j:
                labels[f"{pair_name(i, j)}:leak"] = leak_label(i, j)
    w = wire(machines, links, labels)
    if behavior.is_honest:
        w = attach(w, SourceMachine(behavior, n), {"out": SOURCE})
    return w


def build_ideal(params: ProtocolParams, behavior: SourceBehavior | None = None, *, simulate: bool = True) -> Wiring:
    """MEV_C with the filter (honest source) or sigma_S (dishonest source).

    ``simulate=False`` with a dishonest source gives the bare resource with
    its source interface open.
    """
    behavior = behavior or SourceBehavior.honest()
    labels = {f"MEV_C:party.{i}": party_label(i) for i in params.parties}
    labels["MEV_C:source"] = SOURCE
    w = wire([IdealMEV(params)], labels=labels)
    if behavior.is_honest:
        return attach(w, filter_bot(params.n), {"in": SOURCE}, labels={"out": SOURCE})
    if not simulate:
        return w
    sim = SimulatorSigmaS(params)
    return attach(w, sim, {"in": SOURCE}, labels={p: (SOURCE if p == "out" else p) for p in sim.ports if p != "in"})


def _wrap_multiround(w: Wiring, params: ProtocolParams, max_rounds: int) -> Wiring:
    for i in params.parties:
        w = attach(w, MultiRound(i, max_rounds), {"in": party_label(i)}, labels={"out": party_label(i)})
    return w


def build_multiround_concrete(params: ProtocolParams, behavior: SourceBehavior | None = None, max_rounds: int = 1000) -> Wiring:
    """Pi_[n] pi_[n] R (pi_S)."""
    return _wrap_multiround(build_concrete(params, behavior), params, max_rounds)


def build_multiround_ideal(
    params: ProtocolParams,
    behavior: SourceBehavior | None = None,
    max_rounds: int = 1000,
    *,
    simulate: bool = True,
) -> Wiring:
    """Pi_[n] MEV_C with the filter, with sigma_S, or with the source interface open."""
    return _wrap_multiround(build_ideal(params, behavior, simulate=simulate), params, max_rounds)


def build_ghz(params: ProtocolParams, behavior: SourceBehavior | None = None, epsilon: float = 1.0, *, leaks: bool = True) -> Wiring:
    """The GHZ resource with filter bot' (honest) or sigma_C (dishonest)."""
    behavior = behavior or SourceBehavior.honest()
    labels = {f"GHZ:party.{i}": party_label(i) for i in params.parties}
    labels["GHZ:source"] = SOURCE
    w = wire([GHZResource(params, epsilon)], labels=labels)
    if behavior.is_honest:
        return attach(w, filter_bot_prime(params.n), {"in": SOURCE}, labels={"out": SOURCE})
    sim = SimulatorSigmaC(params, leaks=leaks)
    return attach(w, sim, {"in": SOURCE}, labels={p: (SOURCE if p == "out" else p) for p in sim.ports if p != "in"})


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------


class MevDriver(Distinguisher):
    """Starts every party and, for a dishonest source, plays the source.

    Everything delivered to the distinguisher is logged per label in
    ``state["seen"]``; leak copies are also shown to the source. Subclasses
    override :meth:`decide` (and optionally :meth:`react`).
    """

    name = "driver"

    def __init__(self, n: int, behavior: SourceBehavior | None = None):
        self.n = n
        self.behavior = behavior
        self.source = None if behavior is None or behavior.is_honest else SourceMachine(behavior, n, name="@source")

    def initial_state(self):
        return {"seen": {}, "source": self.source.initial_state() if self.source else None}

    def start(self, state, ctx):
        return [(party_label(i), START) for i in range(1, self.n + 1)]

    def react(self, label, msg, state, ctx) -> list:
        return []

    def step(self, label, msg, state, ctx):
        state["seen"].setdefault(label, []).append(msg)
        out = []
        if self.source is not None:
            if label == SOURCE:
                out += [(SOURCE, m) for _, m in self.source.step("out", msg, state["source"], ctx)]
            elif label.startswith("leak."):
                SourceMachine.observe(state["source"], label, msg)
        return out + self.react(label, msg, state, ctx)

    @staticmethod
    def party_view(state, i: int = 1) -> list[Message]:
        return state["seen"].get(party_label(i), [])


@dataclass(frozen=True)
class RoundResult:
    C: int
    handles: tuple[int, ...] | None
    b_out: int | None
    run: RunResult = field(repr=False, compare=False)

    @property
    def kind(self) -> str:
        return "qubits" if self.handles is not None else "verdict"

    @property
    def transcript(self):
        return self.run.transcript

    def leaks(self) -> dict:
        """Leaked verifier, instructions and outcomes, or {} when nothing leaked."""
        return parse_leaks(self.run.transcript.outputs())


def parse_leaks(outputs: dict) -> dict:
    """Collect the per-round tuple (C, v, X without x_v, Y without y_v, b_out) from leak ports."""
    out: dict = {}
    if "leak.C" in outputs:
        out["C"] = [m.b for m in outputs["leak.C"]]
    if "leak.v" in outputs:
        out["v"] = [m.v for m in outputs["leak.v"]]
    pairs = {k: [m.b for m in msgs] for k, msgs in outputs.items() if k.startswith("leak.ch.")}
    if pairs:
        out["channels"] = pairs
    return out


def _result_from_run(res: RunResult, n: int) -> RoundResult:
    outputs = res.transcript.outputs()
    views = [outputs.get(party_label(i), []) for i in range(1, n + 1)]
    if any(v != views[0] and not any(isinstance(m, Qubit) for m in v) for v in views):
        raise ProtocolStateError("party interfaces disagree on the round outcome")
    first = views[0]
    if not first or not isinstance(first[0], Bit):
        raise ProtocolStateError(f"round did not complete: {res.faults or 'no output'}")
    c = first[0].b
    if c == 0:
        handles = tuple(next(m.handle for m in v if isinstance(m, Qubit)) for v in views)
        return RoundResult(0, handles, None, res)
    return RoundResult(1, None, first[1].b, res)


WORLDS = ("concrete", "ideal")


def round_world(params: ProtocolParams, behavior: SourceBehavior | None, world: str) -> Wiring:
    if world == "concrete":
        return build_concrete(params, behavior)
    if world == "ideal":
        return build_ideal(params, behavior)
    raise ValueError(f"unknown world {world!r}; expected one of {WORLDS}")


def run_round(
    params: ProtocolParams,
    behavior: SourceBehavior | None = None,
    *,
    world: str = "concrete",
    seed: int | None = None,
    wiring: Wiring | None = None,
) -> RoundResult:
    """One round in the given world; the seed defaults to ``params.seed``."""
    w = wiring if wiring is not None else round_world(params, behavior, world)
    res = run(w, MevDriver(params.n, behavior), params.seed if seed is None else seed)
    return _result_from_run(res, params.n)


class Outcome(str, Enum):
    SHARED = "shared"
    ABORTED = "aborted"
    BUDGET = "budget"


@dataclass(frozen=True)
class MultiRoundResult:
    outcome: Outcome
    rounds_elapsed: int
    handles: tuple[int, ...] | None
    final_state: qstate.DensityMatrix | None
    verdicts: tuple[int, ...]
    run: RunResult = field(repr=False, compare=False)


MULTIROUND_WORLDS = ("concrete", "ideal", "ghz")


def multiround_world(params: ProtocolParams, behavior: SourceBehavior | None, world: str, max_rounds: int) -> Wiring:
    if world == "concrete":
        return build_multiround_concrete(params, behavior, max_rounds)
    if world == "ideal":
        return build_multiround_ideal(params, behavior, max_rounds)
    if world == "ghz":
        return build_ghz(params, behavior)
    raise ValueError(f"unknown world {world!r}; expected one of {MULTIROUND_WORLDS}")


def multiround_result(res: RunResult, n: int) -> MultiRoundResult:
    view = res.transcript.at(party_label(1))
    if "Pi_1" in res.states:
        rounds = res.states["Pi_1"]["rounds"]
        verdicts = tuple(res.states["Pi_1"]["verdicts"])
    else:
        rounds = res.states["GHZ"]["rounds"]
        verdicts = tuple(res.states["GHZ"]["verdicts"])
    if any(isinstance(f.error, RoundBudgetExhausted) for f in res.faults):
        return MultiRoundResult(Outcome.BUDGET, rounds, None, None, verdicts, res)
    if view and isinstance(view[-1], Qubit):
        handles = tuple(res.transcript.at(party_label(i))[-1].handle for i in range(1, n + 1))
        return MultiRoundResult(Outcome.SHARED, rounds, handles, res.register.state(list(handles)), verdicts, res)
    if view and isinstance(view[-1], Abort):
        return MultiRoundResult(Outcome.ABORTED, rounds, None, None, verdicts, res)
    raise ProtocolStateError(f"multi-round run ended without a decision: {res.faults or view}")


def run_multiround(
    params: ProtocolParams,
    behavior: SourceBehavior | None = None,
    *,
    max_rounds: int = 1000,
    world: str = "concrete",
    seed: int | None = None,
    wiring: Wiring | None = None,
) -> MultiRoundResult:
    w = wiring if wiring is not None else multiround_world(params, behavior, world, max_rounds)
    res = run(w, MevDriver(params.n, behavior), params.seed if seed is None else seed)
    return multiround_result(res, params.n)


__all__ = [
    "MevDriver",
    "MultiRoundResult",
    "Outcome",
    "RoundResult",
    "build_concrete",
    "build_ghz",
    "build_ideal",
    "build_multiround_concrete",
    "build_multiround_ideal",
    "multiround_result",
    "multiround_world",
    "parse_leaks",
    "party_label",
    "round_world",
    "run_multiround",
    "run_round",
]
