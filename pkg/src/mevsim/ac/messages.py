"""Classical and quantum message vocabulary routed between machine ports."""

from __future__ import annotations

from dataclasses import dataclass

from mevsim.qstate import DensityMatrix


class Message:
    """Base class; every message has a tag (its class name) and a text payload."""

    __slots__ = ()

    @property
    def tag(self) -> str:
        return type(self).__name__

    def payload(self) -> str:
        return ""

    def __repr__(self) -> str:
        p = self.payload()
        return f"{self.tag}({p})" if p else self.tag


@dataclass(frozen=True, slots=True, repr=False)
class Start(Message):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Continue(Message):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Abort(Message):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Stop(Message):
    pass


@dataclass(frozen=True, slots=True, repr=False)
class Bit(Message):
    b: int

    def __post_init__(self):
        if self.b not in (0, 1):
            raise ValueError(f"Bit payload must be 0 or 1, got {self.b!r}")

    def payload(self) -> str:
        return str(self.b)


@dataclass(frozen=True, slots=True, repr=False)
class BitString(Message):
    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"BitString entries must be 0 or 1, got {self.bits!r}")

    def payload(self) -> str:
        return "".join(map(str, self.bits))


@dataclass(frozen=True, slots=True, repr=False)
class Length(Message):
    """Size of a message leaked by a private channel."""

    k: int

    def payload(self) -> str:
        return str(self.k)


@dataclass(frozen=True, slots=True, repr=False)
class PartyId(Message):
    v: int

    def payload(self) -> str:
        return str(self.v)


@dataclass(frozen=True, slots=True, repr=False)
class StateDesc(Message):
    state: DensityMatrix

    def payload(self) -> str:
        return f"n={self.state.n};sha256={self.state.digest()[:16]}"


@dataclass(frozen=True, slots=True, repr=False)
class Qubit(Message):
    """Handle into the run-owned qubit register."""

    handle: int

    def payload(self) -> str:
        return str(self.handle)


START = Start()
CONTINUE = Continue()
ABORT = Abort()
STOP = Stop()

# shared instances for hot paths; Bit is immutable, so BITS[b] == Bit(b)
BITS = (Bit(0), Bit(1))
