"""Machines, ports and wirings.

A :class:`Machine` is a reactive system with named ports. Its per-run state
is created by :meth:`Machine.initial_state` and owned by the scheduler; the
machine object itself is immutable and reusable across runs.

A :class:`Wiring` is a set of machines plus unordered links between their
ports. Unlinked ports are *open* and carry an external label; distinguishers
address open ports by label only, which lets two wirings built from
different machines expose the same interface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, NamedTuple

from mevsim.errors import WiringError


class Port(NamedTuple):
    machine: str
    port: str

    def __str__(self) -> str:
        return f"{self.machine}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "Port":
        machine, sep, port = text.partition(":")
        if not sep or not machine or not port:
            raise WiringError(f"port reference {text!r} is not of the form machine:port")
        return cls(machine, port)


class Context:
    """What a machine may touch while stepping: its rng stream and the qubit register."""

    __slots__ = ("name", "register", "_rng_factory", "_rng")

    def __init__(self, name, register, rng_factory):
        self.name = name
        self.register = register
        self._rng_factory = rng_factory
        self._rng = None

    @property
    def rng(self):
        if self._rng is None:
            self._rng = self._rng_factory(self.name)
        return self._rng


class Machine:
    """Base class for resources and converters.

    Subclasses set ``self.ports`` and implement :meth:`step`, which may
    mutate the state object it is given and returns the messages to emit as
    ``(port, message)`` pairs.
    """

    kind = "machine"

    def __init__(self, name: str, ports: Iterable[str]):
        self.name = name
        self.ports = tuple(ports)
        if len(set(self.ports)) != len(self.ports):
            raise WiringError(f"{name}: duplicate port names")

    def initial_state(self) -> dict:
        return {}

    def step(self, port: str, msg, state, ctx: Context) -> list:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, "ports": list(self.ports)}

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


PortRef = Port | str


@dataclass(frozen=True)
class Wiring:
    machines: tuple[Machine, ...]
    links: frozenset[frozenset[Port]] = frozenset()
    labels: Mapping[Port, str] = field(default_factory=dict)

    def __post_init__(self):
        names = [m.name for m in self.machines]
        if len(set(names)) != len(names):
            raise WiringError(f"duplicate machine names in {names}")
        declared = {Port(m.name, p) for m in self.machines for p in m.ports}
        seen: set[Port] = set()
        for link in self.links:
            if len(link) != 2:
                raise WiringError(f"link {set(link)} must join two distinct ports")
            for p in link:
                if p not in declared:
                    raise WiringError(f"link endpoint {p} is not a declared port")
                if p in seen:
                    raise WiringError(f"port {p} is in more than one link")
                seen.add(p)
        labels = {p: self.labels.get(p, str(p)) for p in self.ports()}
        object.__setattr__(self, "labels", labels)
        open_labels = [labels[p] for p in self.open_ports]
        if len(set(open_labels)) != len(open_labels):
            raise WiringError(f"open port labels must be unique: {sorted(open_labels)}")

    def ports(self) -> list[Port]:
        return [Port(m.name, p) for m in self.machines for p in m.ports]

    @cached_property
    def open_ports(self) -> tuple[Port, ...]:
        linked = {p for link in self.links for p in link}
        return tuple(p for p in self.ports() if p not in linked)

    @cached_property
    def open_labels(self) -> dict[str, Port]:
        return {self.labels[p]: p for p in self.open_ports}

    def machine(self, name: str) -> Machine:
        for m in self.machines:
            if m.name == name:
                return m
        raise KeyError(name)

    def peers(self) -> dict[Port, Port]:
        """Map from each linked port to the port at the other end (shared; do not mutate)."""
        return self._peers

    @cached_property
    def _peers(self) -> dict[Port, Port]:
        out = {}
        for link in self.links:
            a, b = tuple(link)
            out[a] = b
            out[b] = a
        return out

    @cached_property
    def routes(self) -> dict[tuple[str, str], tuple[str | None, str]]:
        """(machine, port) -> (peer machine, peer port), or (None, label) for open ports."""
        peers = self._peers
        out = {}
        for p in self.ports():
            q = peers.get(p)
            out[(p.machine, p.port)] = (None, self.labels[p]) if q is None else (q.machine, q.port)
        return out

    def resolve(self, ref: PortRef) -> Port:
        """Find an open port by label, ``machine:port`` text, or Port."""
        opened = self.open_labels
        if isinstance(ref, str) and ref in opened:
            return opened[ref]
        port = ref if isinstance(ref, Port) else Port.parse(ref)
        if port not in self.open_ports:
            raise WiringError(f"{ref} is not an open port")
        return port

    def to_document(self) -> str:
        doc = {
            "machines": [m.describe() for m in self.machines],
            "links": sorted(sorted(str(p) for p in link) for link in self.links),
            "open": {self.labels[p]: str(p) for p in self.open_ports},
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def wire(
    machines: Iterable[Machine],
    links: Iterable[tuple[PortRef, PortRef]] = (),
    labels: Mapping[PortRef, str] | None = None,
) -> Wiring:
    """Build a wiring; ports may be given as Port or ``"machine:port"`` strings."""

    def as_port(ref):
        return ref if isinstance(ref, Port) else Port.parse(ref)

    return Wiring(
        tuple(machines),
        frozenset(frozenset((as_port(a), as_port(b))) for a, b in links),
        {as_port(k): v for k, v in (labels or {}).items()},
    )


def parallel(*wirings: Wiring) -> Wiring:
    """Side-by-side composition; the result's open ports are the union."""
    labels: dict[Port, str] = {}
    for w in wirings:
        labels.update(w.labels)
    return Wiring(
        tuple(m for w in wirings for m in w.machines),
        frozenset().union(*(w.links for w in wirings)),
        labels,
    )


def connect(w: Wiring, a: PortRef, b: PortRef) -> Wiring:
    pa, pb = w.resolve(a), w.resolve(b)
    return Wiring(w.machines, w.links | {frozenset((pa, pb))}, w.labels)


def attach(
    w: Wiring,
    m: Machine,
    bindings: Mapping[str, PortRef],
    labels: Mapping[str, str] | None = None,
) -> Wiring:
    """Plug ``m`` into ``w``: each ``m`` port in ``bindings`` is linked to an open port of ``w``.

    Unbound ports of ``m`` become open, labelled by ``labels`` or by their
    ``machine:port`` name.
    """
    new_links = set(w.links)
    targets = set()
    for mport, target in bindings.items():
        if mport not in m.ports:
            raise WiringError(f"{m.name} has no port {mport!r}")
        p = w.resolve(target)
        if p in targets:
            raise WiringError(f"{target} bound twice")
        targets.add(p)
        new_links.add(frozenset((Port(m.name, mport), p)))
    new_labels = dict(w.labels)
    for mport, label in (labels or {}).items():
        if mport not in m.ports:
            raise WiringError(f"{m.name} has no port {mport!r}")
        new_labels[Port(m.name, mport)] = label
    return Wiring(w.machines + (m,), frozenset(new_links), new_labels)


def detach(w: Wiring, name: str) -> Wiring:
    """Remove a machine; ports it was linked to reopen under their old labels."""
    w.machine(name)
    machines = tuple(m for m in w.machines if m.name != name)
    links = frozenset(link for link in w.links if all(p.machine != name for p in link))
    labels = {p: lab for p, lab in w.labels.items() if p.machine != name}
    return Wiring(machines, links, labels)
