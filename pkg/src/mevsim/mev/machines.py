"""Machines of the concrete and ideal verification worlds.

Concrete resource: state generator ``sg``, quantum channels ``qch.i``,
authenticated classical channels ``ch.i.j`` between every pair of parties,
and the common-randomness oracles ``O_C`` and ``O_v``. Party converters
``pi_i`` run the one-round protocol on top of them.

Ideal side: the one-round resource ``MEV_C``, its honest filter ``bot``, the
source simulator ``sigma_S``; for the multi-round layer the converters
``Pi_i``, the resource ``GHZ``, its filter ``bot'`` and simulator ``sigma_C``.

Every party-facing interface speaks the same dialogue in both worlds: the
party sends Start; it then receives Bit(C) followed by either Qubit (C = 0)
or Bit(b_out) (C = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from mevsim import qstate
from mevsim.ac.core import Machine
from mevsim.ac.messages import (
    ABORT,
    BITS,
    CONTINUE,
    START,
    STOP,
    Abort,
    Bit,
    Continue,
    Message,
    PartyId,
    Qubit,
    Start,
    StateDesc,
    Stop,
)
from mevsim.errors import InvalidStateError, ProtocolStateError, RoundBudgetExhausted
from mevsim.qstate import DensityMatrix, PureState


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    p: float
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, int) or self.n < 2:
            raise ValueError(f"the protocol needs at least 2 parties, got n={self.n!r}")
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"p must lie in (0, 1), got {self.p!r}")

    @property
    def parties(self) -> range:
        return range(1, self.n + 1)


def pair_name(i: int, j: int) -> str:
    a, b = sorted((i, j))
    return f"ch.{a}.{b}"


def leak_label(i: int, j: int) -> str:
    return "leak." + pair_name(i, j)


def verdict(X: Sequence[int], Y: Sequence[int]) -> int:
    """0 iff sum(Y) = sum(X)/2 (mod 2); X must have even parity."""
    if len(X) != len(Y):
        raise ValueError(f"X and Y differ in length ({len(X)} vs {len(Y)})")
    sx = sum(X)
    if sx % 2:
        raise ValueError(f"instruction string {tuple(X)} has odd parity")
    return 0 if sum(Y) % 2 == (sx // 2) % 2 else 1


def sample_even_parity(n: int, rng) -> tuple[int, ...]:
    """n - 1 uniform bits, the last one fixing even parity."""
    head = rng.bits(n - 1)
    return (*head, sum(head) % 2)


def _unexpected(machine: Machine, port: str, msg: Message, phase: str) -> ProtocolStateError:
    return ProtocolStateError(f"{machine.name}: unexpected {msg!r} on {port!r} while {phase}")


def _checked_state(state, n: int) -> DensityMatrix:
    if isinstance(state, PureState):
        state = qstate.to_density(state)
    if not isinstance(state, DensityMatrix):
        raise InvalidStateError(f"source produced {type(state).__name__}, not a quantum state")
    if state.n != n:
        raise InvalidStateError(f"source produced a {state.n}-qubit state, expected {n}")
    return state


# ---------------------------------------------------------------------------
# concrete resource R
# ---------------------------------------------------------------------------


class StateGenerator(Machine):
    """SG_n, with the collective state request folded in.

    Once all n parties have asked for a state, Start goes out on ``src``;
    the classical description that comes back is turned into n qubits, one
    per quantum channel. Nothing about the state leaks.
    """

    kind = "resource"

    def __init__(self, n: int, name: str = "sg"):
        super().__init__(name, [f"req.{i}" for i in range(1, n + 1)] + ["src"] + [f"q.{i}" for i in range(1, n + 1)])
        self.n = n

    def initial_state(self):
        return {"requests": set(), "waiting": False}

    def step(self, port, msg, state, ctx):
        if port.startswith("req.") and isinstance(msg, Start):
            state["requests"].add(port)
            if len(state["requests"]) < self.n:
                return []
            state["requests"] = set()
            state["waiting"] = True
            return [("src", START)]
        if port == "src" and isinstance(msg, StateDesc):
            if not state["waiting"]:
                raise _unexpected(self, port, msg, "no state was requested")
            if msg.state.n != self.n:
                raise ProtocolStateError(f"{self.name}: got a {msg.state.n}-qubit state, expected {self.n}")
            state["waiting"] = False
            handles = ctx.register.allocate(msg.state, self.name)
            return [(f"q.{i}", Qubit(h)) for i, h in zip(range(1, self.n + 1), handles)]
        if port == "src":
            return []
        raise _unexpected(self, port, msg, "generating")


class QuantumChannel(Machine):
    """Perfect private quantum channel a -> b."""

    kind = "resource"

    def __init__(self, i: int):
        super().__init__(f"qch.{i}", ("a", "b"))

    def step(self, port, msg, state, ctx):
        if port == "a" and isinstance(msg, Qubit):
            return [("b", msg)]
        raise _unexpected(self, port, msg, "forwarding")


class ClassicalChannel(Machine):
    """Two-way authenticated channel between parties i and j.

    With ``leak`` set, every transiting message is also copied to ``leak``.
    """

    kind = "resource"

    def __init__(self, i: int, j: int, leak: bool = False):
        i, j = sorted((i, j))
        ports = [f"p{i}", f"p{j}"] + (["leak"] if leak else [])
        super().__init__(pair_name(i, j), ports)
        self.ends = {f"p{i}": f"p{j}", f"p{j}": f"p{i}"}
        self.leak = leak

    def step(self, port, msg, state, ctx):
        if port not in self.ends:
            return []
        out = [(self.ends[port], msg)]
        if self.leak:
            out.append(("leak", msg))
        return out


class _CollectiveOracle(Machine):
    kind = "resource"

    def __init__(self, name: str, n: int, leak: bool):
        super().__init__(name, [f"q.{i}" for i in range(1, n + 1)] + (["leak"] if leak else []))
        self.n = n
        self.leak = leak

    def initial_state(self):
        return {"queries": set()}

    def draw(self, ctx) -> Message:
        raise NotImplementedError

    def step(self, port, msg, state, ctx):
        if not (port.startswith("q.") and isinstance(msg, Start)):
            raise _unexpected(self, port, msg, "waiting for queries")
        if port in state["queries"]:
            raise _unexpected(self, port, msg, "already queried this round")
        state["queries"].add(port)
        if len(state["queries"]) < self.n:
            return []
        state["queries"] = set()
        value = self.draw(ctx)
        out = [(f"q.{i}", value) for i in range(1, self.n + 1)]
        if self.leak:
            out.append(("leak", value))
        return out


class CoinOracle(_CollectiveOracle):
    """O_C: common bit C, equal to 0 with probability p."""

    def __init__(self, n: int, p: float, leak: bool = False):
        super().__init__("O_C", n, leak)
        self.p = p

    def draw(self, ctx):
        return BITS[ctx.rng.bit(1.0 - self.p)]


class VerifierOracle(_CollectiveOracle):
    """O_v: common uniformly random party identifier."""

    def __init__(self, n: int, leak: bool = False):
        super().__init__("O_v", n, leak)

    def draw(self, ctx):
        return PartyId(1 + ctx.rng.uniform(self.n))


# ---------------------------------------------------------------------------
# party converter pi_i
# ---------------------------------------------------------------------------


class PartyMachine(Machine):
    """One honest party of the one-round protocol.

    The verifier (chosen by O_v) samples even-parity instructions, sends x_j
    to every other party, measures its own qubit, collects every y_j and
    broadcasts b_out. Other parties apply H (x_i = 0) or sqrt(X) (x_i = 1),
    measure, and report y_i.
    """

    kind = "converter"

    def __init__(self, i: int, params: ProtocolParams):
        if i not in params.parties:
            raise ValueError(f"party index {i} outside 1..{params.n}")
        self.i = i
        self.n = params.n
        self.others = [j for j in params.parties if j != i]
        super().__init__(f"pi_{i}", ["out", "sg", "q", "oc", "ov"] + [f"ch.{j}" for j in self.others])

    def initial_state(self):
        return {"phase": "idle"}

    def _reset(self, state):
        state.clear()
        state["phase"] = "idle"

    def _measure(self, state, x, ctx) -> int:
        return ctx.register.measure(state["handle"], ctx.rng, self.name, gate=qstate.gate_for(x))

    def step(self, port, msg, state, ctx):
        phase = state["phase"]
        if phase == "idle" and port == "out" and isinstance(msg, Start):
            state["phase"] = "await_qubit"
            return [("sg", START)]
        if phase == "await_qubit" and port == "q" and isinstance(msg, Qubit):
            state["handle"] = msg.handle
            state["phase"] = "await_c"
            return [("oc", START)]
        if phase == "await_c" and port == "oc" and isinstance(msg, Bit):
            if msg.b == 0:
                h = state["handle"]
                self._reset(state)
                return [("out", msg), ("out", Qubit(h))]
            state["phase"] = "await_v"
            return [("out", msg), ("ov", START)]
        if phase == "await_v" and port == "ov" and isinstance(msg, PartyId):
            state["v"] = msg.v
            if msg.v != self.i:
                state["phase"] = "await_x"
                return []
            X = sample_even_parity(self.n, ctx.rng)
            state["X"] = X
            out = [(f"ch.{j}", BITS[X[j - 1]]) for j in self.others]
            state["Y"] = {self.i: self._measure(state, X[self.i - 1], ctx)}
            state["phase"] = "await_ys"
            return out
        if phase == "await_x" and port == f"ch.{state.get('v')}" and isinstance(msg, Bit):
            y = self._measure(state, msg.b, ctx)
            state["phase"] = "await_bout"
            return [(port, BITS[y])]
        if phase == "await_ys" and port.startswith("ch.") and isinstance(msg, Bit):
            j = int(port[3:])
            if j in state["Y"]:
                raise _unexpected(self, port, msg, "already holding that outcome")
            state["Y"][j] = msg.b
            if len(state["Y"]) < self.n:
                return []
            Y = tuple(state["Y"][k] for k in range(1, self.n + 1))
            b = BITS[verdict(state["X"], Y)]
            self._reset(state)
            return [("out", b)] + [(f"ch.{j}", b) for j in self.others]
        if phase == "await_bout" and port == f"ch.{state.get('v')}" and isinstance(msg, Bit):
            self._reset(state)
            return [("out", msg)]
        raise _unexpected(self, port, msg, phase)


# ---------------------------------------------------------------------------
# sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SourceBehavior:
    """What the source sends each time it is asked for a state.

    ``honest`` always sends GHZ; ``fixed`` repeats one state; ``schedule``
    cycles through a list; ``adaptive`` calls ``callback(observed)`` where
    ``observed`` is the list of ``(label, message)`` pairs the source has
    seen so far (its own port plus the leak ports).
    """

    kind: str = "honest"
    states: tuple = ()
    callback: Callable | None = field(default=None, compare=False)

    @classmethod
    def honest(cls) -> "SourceBehavior":
        return cls("honest")

    @classmethod
    def fixed(cls, state) -> "SourceBehavior":
        return cls("fixed", (state,))

    @classmethod
    def schedule(cls, states) -> "SourceBehavior":
        states = tuple(states)
        if not states:
            raise ValueError("a schedule needs at least one state")
        return cls("schedule", states)

    @classmethod
    def adaptive(cls, callback: Callable) -> "SourceBehavior":
        return cls("adaptive", (), callback)

    @property
    def is_honest(self) -> bool:
        return self.kind == "honest"

    def __post_init__(self):
        if self.kind not in ("honest", "fixed", "schedule", "adaptive"):
            raise ValueError(f"unknown source behavior {self.kind!r}")
        if self.kind == "adaptive" and self.callback is None:
            raise ValueError("adaptive behavior needs a callback")


class SourceMachine(Machine):
    """pi_S for the honest behavior, or a stand-in for a noisy/malicious source.

    Answers every Start or Continue on ``out`` with a state description;
    everything else it receives is appended to its observation log.
    """

    kind = "converter"

    def __init__(self, behavior: SourceBehavior, n: int, name: str = "pi_S"):
        super().__init__(name, ("out",))
        self.behavior = behavior
        self.n = n
        self._fixed = tuple(_checked_state(s, n) for s in behavior.states)

    def initial_state(self):
        return {"served": 0, "observed": []}

    @staticmethod
    def observe(state, label: str, msg: Message) -> None:
        state["observed"].append((label, msg))

    def next_state(self, state) -> DensityMatrix:
        b = self.behavior
        if b.kind == "honest":
            rho = qstate.ghz_density(self.n)
        elif b.kind == "adaptive":
            rho = _checked_state(b.callback(list(state["observed"])), self.n)
        else:
            rho = self._fixed[state["served"] % len(self._fixed)]
        state["served"] += 1
        return rho

    def step(self, port, msg, state, ctx):
        if isinstance(msg, (Start, Continue)):
            self.observe(state, port, msg)
            return [("out", StateDesc(self.next_state(state)))]
        self.observe(state, port, msg)
        return []


def source_machine(behavior: SourceBehavior, n: int, name: str = "pi_S") -> SourceMachine:
    return SourceMachine(behavior, n, name)


# ---------------------------------------------------------------------------
# ideal one-round resource and its converters
# ---------------------------------------------------------------------------


class IdealMEV(Machine):
    """MEV_C: one round, rejection with probability tau**2 / 2.

    tau is the trace distance between the received state and GHZ. C and
    b_out are output on every interface, the source interface included.
    """

    kind = "resource"

    def __init__(self, params: ProtocolParams, name: str = "MEV_C"):
        super().__init__(name, [f"party.{i}" for i in params.parties] + ["source"])
        self.params = params

    def initial_state(self):
        return {"starts": set(), "waiting": False}

    def step(self, port, msg, state, ctx):
        n, p = self.params.n, self.params.p
        if port.startswith("party.") and isinstance(msg, Start):
            if port in state["starts"]:
                raise _unexpected(self, port, msg, "already started")
            state["starts"].add(port)
            if len(state["starts"]) < n:
                return []
            state["starts"] = set()
            state["waiting"] = True
            return [("source", START)]
        if port == "source" and isinstance(msg, StateDesc):
            if not state["waiting"]:
                raise _unexpected(self, port, msg, "no start received")
            rho = msg.state
            if rho.n != n:
                raise ProtocolStateError(f"{self.name}: got a {rho.n}-qubit state, expected {n}")
            state["waiting"] = False
            c = BITS[ctx.rng.bit(1.0 - p)]
            out = [(f"party.{i}", c) for i in self.params.parties] + [("source", c)]
            if c.b == 0:
                handles = ctx.register.allocate(rho, self.name)
                out += [(f"party.{i}", Qubit(h)) for i, h in zip(self.params.parties, handles)]
                return out
            tau = qstate.ghz_distance(rho)
            b = BITS[ctx.rng.bit(tau * tau / 2)]
            out += [(f"party.{i}", b) for i in self.params.parties] + [("source", b)]
            return out
        if port == "source":
            return []
        raise _unexpected(self, port, msg, "running")


class FilterBot(Machine):
    """Honest-source filter: answers Start with GHZ and blocks everything else."""

    kind = "filter"

    def __init__(self, n: int, name: str = "bot", answers=(Start,)):
        super().__init__(name, ("in", "out"))
        self.n = n
        self.answers = answers

    def step(self, port, msg, state, ctx):
        if port == "in" and isinstance(msg, self.answers):
            return [("in", StateDesc(qstate.ghz_density(self.n)))]
        return []


def filter_bot(n: int) -> FilterBot:
    return FilterBot(n)


def filter_bot_prime(n: int) -> FilterBot:
    """Like the one-round filter, but also answers every Continue with a fresh GHZ."""
    return FilterBot(n, name="bot'", answers=(Start, Continue))


def leak_ports(n: int) -> list[str]:
    return ["leak.C", "leak.v"] + [leak_label(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]


class _LeakEmulator:
    """Classical emulation of one tested round, as seen on the leak ports."""

    def __init__(self, n: int):
        self.n = n

    def tested_round(self, rho: DensityMatrix, ctx) -> tuple[int, list]:
        n = self.n
        v = 1 + ctx.rng.uniform(n)
        X = sample_even_parity(n, ctx.rng)
        dist = qstate.gated_outcome_distribution(rho, X)
        Y = qstate.index_to_bits(ctx.rng.choice(dist), n)
        others = [j for j in range(1, n + 1) if j != v]
        out = [("leak.C", BITS[1]), ("leak.v", PartyId(v))]
        out += [(leak_label(v, j), BITS[X[j - 1]]) for j in others]
        out += [(leak_label(v, j), BITS[Y[j - 1]]) for j in others]
        return v, out

    def verdict_copies(self, v: int, b: int) -> list:
        return [(leak_label(v, j), BITS[b]) for j in range(1, self.n + 1) if j != v]


class SimulatorSigmaS(Machine):
    """sigma_S: relays the source dialogue and fakes the classical leakage of a round.

    On C = 1 it draws the verifier and even-parity instructions itself,
    samples outcomes from the gated outcome table of the received state and
    emits everything except the verifier's own instruction and outcome.
    """

    kind = "simulator"

    def __init__(self, params: ProtocolParams, name: str = "sigma_S"):
        super().__init__(name, ["in", "out"] + leak_ports(params.n))
        self.params = params
        self._emu = _LeakEmulator(params.n)

    def initial_state(self):
        return {"rho": None, "v": None, "awaiting": "C"}

    def step(self, port, msg, state, ctx):
        if port == "in" and isinstance(msg, Start):
            return [("out", msg)]
        if port == "out" and isinstance(msg, StateDesc):
            state["rho"] = msg.state
            state["awaiting"] = "C"
            return [("in", msg)]
        if port == "in" and isinstance(msg, Bit):
            if state["awaiting"] == "C":
                if msg.b == 0:
                    return [("leak.C", msg)]
                v, out = self._emu.tested_round(state["rho"], ctx)
                state["v"] = v
                state["awaiting"] = "b"
                return out
            state["awaiting"] = "C"
            return self._emu.verdict_copies(state["v"], msg.b)
        return []


def simulator_sigma_s(params: ProtocolParams) -> SimulatorSigmaS:
    return SimulatorSigmaS(params)


# ---------------------------------------------------------------------------
# multi-round layer
# ---------------------------------------------------------------------------


class MultiRound(Machine):
    """Pi_i: repeat rounds until the qubit is kept (C = 0) or a round rejects.

    Emits the qubit or Abort on ``out``. Running past ``max_rounds``
    raises RoundBudgetExhausted, which is distinct from Abort.
    """

    kind = "converter"

    def __init__(self, i: int, max_rounds: int):
        if max_rounds < 1:
            raise ValueError(f"max_rounds must be at least 1, got {max_rounds}")
        super().__init__(f"Pi_{i}", ("out", "in"))
        self.max_rounds = max_rounds

    def initial_state(self):
        return {"phase": "idle", "rounds": 0, "verdicts": []}

    def step(self, port, msg, state, ctx):
        phase = state["phase"]
        if phase == "idle" and port == "out" and isinstance(msg, Start):
            state["rounds"] = 1
            state["phase"] = "await_c"
            return [("in", START)]
        if phase == "await_c" and port == "in" and isinstance(msg, Bit):
            state["phase"] = "await_qubit" if msg.b == 0 else "await_b"
            return []
        if phase == "await_qubit" and port == "in" and isinstance(msg, Qubit):
            state["phase"] = "shared"
            return [("out", msg)]
        if phase == "await_b" and port == "in" and isinstance(msg, Bit):
            state["verdicts"].append(msg.b)
            if msg.b == 1:
                state["phase"] = "aborted"
                return [("out", ABORT)]
            if state["rounds"] >= self.max_rounds:
                state["phase"] = "exhausted"
                raise RoundBudgetExhausted(f"{self.name}: no decision after {self.max_rounds} rounds")
            state["rounds"] += 1
            state["phase"] = "await_c"
            return [("in", START)]
        raise _unexpected(self, port, msg, phase)


def multi_round_machine(i: int, params: ProtocolParams, max_rounds: int) -> MultiRound:
    if i not in params.parties:
        raise ValueError(f"party index {i} outside 1..{params.n}")
    return MultiRound(i, max_rounds)


class GHZResource(Machine):
    """Verified GHZ sharing resource.

    Per received state: with probability p deliver its qubits and send Stop;
    otherwise test it, sending Abort everywhere with probability tau**2 / 2
    and Continue to the source otherwise. ``epsilon`` is the closeness the
    resource advertises; the decision rule depends on p and tau only.
    """

    kind = "resource"

    def __init__(self, params: ProtocolParams, epsilon: float = 1.0, name: str = "GHZ"):
        if not 0.0 < epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
        super().__init__(name, [f"party.{i}" for i in params.parties] + ["source"])
        self.params = params
        self.epsilon = epsilon

    def initial_state(self):
        return {"starts": set(), "phase": "idle", "rounds": 0, "verdicts": []}

    def step(self, port, msg, state, ctx):
        params = self.params
        if state["phase"] == "done":
            return []
        if port.startswith("party.") and isinstance(msg, Start) and state["phase"] == "idle":
            state["starts"].add(port)
            if len(state["starts"]) < params.n:
                return []
            state["phase"] = "await_state"
            return [("source", START)]
        if port == "source" and isinstance(msg, StateDesc) and state["phase"] == "await_state":
            rho = msg.state
            if rho.n != params.n:
                raise ProtocolStateError(f"{self.name}: got a {rho.n}-qubit state, expected {params.n}")
            state["rounds"] += 1
            if ctx.rng.bit(1.0 - params.p) == 0:
                state["phase"] = "done"
                handles = ctx.register.allocate(rho, self.name)
                return [(f"party.{i}", Qubit(h)) for i, h in zip(params.parties, handles)] + [("source", STOP)]
            tau = qstate.ghz_distance(rho)
            if ctx.rng.bit(tau * tau / 2):
                state["verdicts"].append(1)
                state["phase"] = "done"
                return [(f"party.{i}", ABORT) for i in params.parties] + [("source", ABORT)]
            state["verdicts"].append(0)
            return [("source", CONTINUE)]
        if port == "source":
            return []
        raise _unexpected(self, port, msg, state["phase"])


def ghz_resource_machine(params: ProtocolParams, epsilon: float = 1.0) -> GHZResource:
    return GHZResource(params, epsilon)


class SimulatorSigmaC(Machine):
    """sigma_C: turns the GHZ resource's source dialogue into per-round MEV_C traffic.

    Continue becomes a passed tested round, Abort a failed one, Stop a kept
    round. Without leaks, C and b_out appear on ``out`` as the bare one-round
    resource would show them. With leaks, they appear on the leak ports
    together with emulated verifier, instructions and outcomes.
    """

    kind = "simulator"

    def __init__(self, params: ProtocolParams, leaks: bool = True, name: str = "sigma_C"):
        super().__init__(name, ["in", "out"] + (leak_ports(params.n) if leaks else []))
        self.params = params
        self.leaks = leaks
        self._emu = _LeakEmulator(params.n)

    def initial_state(self):
        return {"rho": None}

    def _round(self, state, ctx, c: int, b: int | None) -> list:
        if not self.leaks:
            out = [("out", BITS[c])]
            if b is not None:
                out.append(("out", BITS[b]))
            return out
        if c == 0:
            return [("leak.C", BITS[0])]
        v, out = self._emu.tested_round(state["rho"], ctx)
        return out + self._emu.verdict_copies(v, b)

    def step(self, port, msg, state, ctx):
        if port == "in" and isinstance(msg, Start):
            return [("out", msg)]
        if port == "out" and isinstance(msg, StateDesc):
            state["rho"] = msg.state
            return [("in", msg)]
        if port == "in" and isinstance(msg, Continue):
            return self._round(state, ctx, 1, 0) + [("out", START)]
        if port == "in" and isinstance(msg, Abort):
            return self._round(state, ctx, 1, 1)
        if port == "in" and isinstance(msg, Stop):
            return self._round(state, ctx, 0, None)
        return []


def simulator_sigma_c(params: ProtocolParams, leaks: bool = True) -> SimulatorSigmaC:
    return SimulatorSigmaC(params, leaks)


def party_machine(i: int, params: ProtocolParams) -> PartyMachine:
    return PartyMachine(i, params)


def ideal_mev_machine(params: ProtocolParams) -> IdealMEV:
    return IdealMEV(params)
