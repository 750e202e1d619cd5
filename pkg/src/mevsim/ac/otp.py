"""One-time-pad worlds used to validate the kernel.

Three wirings with interfaces ``A`` (sender), ``B`` (receiver), ``E`` (eavesdropper):

* concrete: sender and receiver converters on a shared-key resource plus an
  authenticated channel, with an honest Eve converter blocking the leak;
* ideal: a private channel leaking only the length, its leak blocked by a filter;
* ideal with simulator: the private channel plus a simulator that turns the
  leaked length into a uniformly random string.

Removing the Eve converter from the concrete wiring (``detach(concrete,
"pi_E")``) yields the dishonest-Eve world that the simulator is matched against.
"""

from __future__ import annotations

from mevsim.ac.core import Machine, Wiring, attach, wire
from mevsim.ac.messages import START, Bit, BitString, Length, Start
from mevsim.ac.scheduler import Distinguisher
from mevsim.errors import ProtocolStateError


def _xor(a, b):
    return tuple(x ^ y for x, y in zip(a, b))


class SharedKey(Machine):
    """Uniform secret key delivered to both ends on the first request."""

    kind = "resource"

    def __init__(self, name: str = "key", length: int = 4):
        super().__init__(name, ("a", "b"))
        self.length = length

    def initial_state(self):
        return {"key": None}

    def step(self, port, msg, state, ctx):
        if not isinstance(msg, Start):
            return []
        if state["key"] is None:
            state["key"] = ctx.rng.bits(self.length)
        k = BitString(state["key"])
        return [("a", k), ("b", k)]


class AuthenticatedChannel(Machine):
    """Forwards a -> b; with a leak port, every transit is copied to it."""

    kind = "resource"

    def __init__(self, name: str = "auth", leak: bool = True):
        super().__init__(name, ("a", "b", "e") if leak else ("a", "b"))
        self.leak = leak

    def step(self, port, msg, state, ctx):
        if port != "a":
            return []
        out = [("b", msg)]
        if self.leak:
            out.append(("e", msg))
        return out


class OtpSender(Machine):
    kind = "converter"

    def __init__(self, name: str = "pi_A", max_length: int = 4):
        super().__init__(name, ("out", "key", "ch"))
        self.max_length = max_length

    def initial_state(self):
        return {"x": None}

    def step(self, port, msg, state, ctx):
        if port == "out" and isinstance(msg, BitString):
            if len(msg.bits) > self.max_length:
                raise ProtocolStateError(f"message longer than the {self.max_length}-bit key")
            state["x"] = msg.bits
            return [("key", START)]
        if port == "key" and isinstance(msg, BitString) and state["x"] is not None:
            x = state["x"]
            return [("ch", BitString(_xor(x, msg.bits[: len(x)])))]
        return []


class OtpReceiver(Machine):
    kind = "converter"

    def __init__(self, name: str = "pi_B"):
        super().__init__(name, ("out", "key", "ch"))

    def initial_state(self):
        return {"key": None, "pending": []}

    def step(self, port, msg, state, ctx):
        if port == "key" and isinstance(msg, BitString):
            state["key"] = msg.bits
        elif port == "ch" and isinstance(msg, BitString):
            state["pending"].append(msg.bits)
        if state["key"] is None:
            return []
        out = [("out", BitString(_xor(y, state["key"][: len(y)]))) for y in state["pending"]]
        state["pending"] = []
        return out


class Blocker(Machine):
    """Filter or honest-Eve converter: swallows everything on both sides."""

    kind = "filter"

    def __init__(self, name: str):
        super().__init__(name, ("in", "out"))

    def step(self, port, msg, state, ctx):
        return []


class PrivateChannel(Machine):
    kind = "resource"

    def __init__(self, name: str = "priv"):
        super().__init__(name, ("a", "b", "e"))

    def step(self, port, msg, state, ctx):
        if port == "a" and isinstance(msg, BitString):
            return [("b", msg), ("e", Length(len(msg.bits)))]
        return []


class LengthSimulator(Machine):
    """Answers a leaked length with a uniformly random string of that length."""

    kind = "simulator"

    def __init__(self, name: str = "sigma"):
        super().__init__(name, ("in", "out"))

    def step(self, port, msg, state, ctx):
        if port == "in" and isinstance(msg, Length):
            return [("out", BitString(ctx.rng.bits(msg.k)))]
        return []


def otp_demo_wirings(key_length: int = 4) -> tuple[Wiring, Wiring, Wiring]:
    """(concrete pi_A pi_B R pi_E, filtered private channel, private channel + simulator)."""
    core = wire(
        [OtpSender(max_length=key_length), OtpReceiver(), SharedKey(length=key_length), AuthenticatedChannel()],
        links=[
            ("pi_A:key", "key:a"),
            ("pi_B:key", "key:b"),
            ("pi_A:ch", "auth:a"),
            ("pi_B:ch", "auth:b"),
        ],
        labels={"pi_A:out": "A", "pi_B:out": "B", "auth:e": "E"},
    )
    concrete = attach(core, Blocker("pi_E"), {"in": "E"}, labels={"out": "E"})
    channel = wire([PrivateChannel()], labels={"priv:a": "A", "priv:b": "B", "priv:e": "E"})
    ideal = attach(channel, Blocker("bot"), {"in": "E"}, labels={"out": "E"})
    simulated = attach(channel, LengthSimulator(), {"in": "E"}, labels={"out": "E"})
    return concrete, ideal, simulated


# ---------------------------------------------------------------------------
# control pair: a one-bit channel that forwards vs one that flips
# ---------------------------------------------------------------------------


class OneBitChannel(Machine):
    kind = "resource"

    def __init__(self, name: str = "chan", flip: bool = False):
        super().__init__(name, ("a", "b"))
        self.flip = flip

    def step(self, port, msg, state, ctx):
        if port == "a" and isinstance(msg, Bit):
            return [("b", Bit(msg.b ^ int(self.flip)))]
        return []


def control_pair() -> tuple[Wiring, Wiring]:
    labels = {"chan:a": "A", "chan:b": "B"}
    return wire([OneBitChannel()], labels=labels), wire([OneBitChannel(flip=True)], labels=labels)


# ---------------------------------------------------------------------------
# canned distinguishers
# ---------------------------------------------------------------------------


class Silent(Distinguisher):
    """Sends nothing and guesses 0."""

    name = "silent"


class _SendsMessage(Distinguisher):
    length = 3

    def __init__(self, length: int = 3):
        self.length = length

    def initial_state(self):
        return {"x": None, "B": [], "E": []}

    def choose(self, ctx):
        return ctx.rng.bits(self.length)

    def start(self, state, ctx):
        state["x"] = tuple(self.choose(ctx))
        return [("A", BitString(state["x"]))]

    def step(self, label, msg, state, ctx):
        if label in ("B", "E"):
            state[label].append(msg)
        return []


class FixedInput(_SendsMessage):
    """Sends a fixed string; guesses 0 iff it comes out unchanged at B."""

    name = "fixed-input"

    def __init__(self, x=(1, 0, 1)):
        super().__init__(len(x))
        self.x = tuple(x)

    def choose(self, ctx):
        return self.x

    def decide(self, state, ctx):
        return 0 if [m.bits for m in state["B"]] == [state["x"]] else 1


class RandomInput(_SendsMessage):
    """Uniformly random input; guesses 0 iff B receives exactly it."""

    name = "random-input"

    def decide(self, state, ctx):
        return 0 if [m.bits for m in state["B"]] == [state["x"]] else 1


class ParityCheck(_SendsMessage):
    """Guesses the parity mismatch between the input and B's output."""

    name = "parity"

    def decide(self, state, ctx):
        if not state["B"]:
            return 1
        return (sum(state["x"]) + sum(state["B"][0].bits)) % 2


class LeakParity(_SendsMessage):
    """Guesses the parity of (input XOR whatever leaks at E), 0 if nothing leaks."""

    name = "leak-parity"

    def decide(self, state, ctx):
        leaks = [m for m in state["E"] if isinstance(m, BitString)]
        if not leaks:
            return 0
        return sum(_xor(state["x"], leaks[0].bits)) % 2


class LeakLength(_SendsMessage):
    """Guesses 0 iff the leak at E (if any) has the input's length."""

    name = "leak-length"

    def decide(self, state, ctx):
        for m in state["E"]:
            size = m.k if isinstance(m, Length) else len(m.bits)
            if size != len(state["x"]):
                return 1
        return 0


class ForwardCheck(Distinguisher):
    """Sends Bit(0) at A; guesses 0 iff B receives Bit(0)."""

    name = "forward"

    def initial_state(self):
        return {"B": []}

    def start(self, state, ctx):
        return [("A", Bit(0))]

    def step(self, label, msg, state, ctx):
        if label == "B":
            state["B"].append(msg)
        return []

    def decide(self, state, ctx):
        return 0 if state["B"] == [Bit(0)] else 1


def otp_library() -> dict[str, Distinguisher]:
    return {
        "silent": Silent(),
        "fixed-input": FixedInput(),
        "random-input": RandomInput(3),
        "parity": ParityCheck(3),
        "leak-parity": LeakParity(3),
        "leak-length": LeakLength(3),
        "empty-input": FixedInput(()),
    }
