"""Run-owned table of qubits. Messages carry handles; the state lives here.

Every handle has exactly one owner at a time. Emitting a handle releases it
(the message is then the only carrier), delivery hands it to the receiver,
and measuring consumes it. Any second emission or use raises WiringError,
so a run cannot clone a qubit.
"""

from __future__ import annotations

import numpy as np

from mevsim import qstate
from mevsim.errors import DimensionError, WiringError
from mevsim.qstate import DensityMatrix, PureState

IN_TRANSIT = "<in transit>"


class QubitRegister:
    def __init__(self):
        self._systems: dict[int, np.ndarray] = {}
        self._sizes: dict[int, int] = {}
        self._where: dict[int, tuple[int, int]] = {}
        self._owner: dict[int, str] = {}
        self._consumed: set[int] = set()
        self._next = 0

    def __len__(self) -> int:
        return len(self._where) + len(self._consumed)

    def allocate(self, rho: DensityMatrix, owner: str) -> list[int]:
        sid = len(self._systems)
        self._systems[sid] = np.array(rho.data, dtype=complex, copy=True)
        self._sizes[sid] = rho.n
        handles = []
        for pos in range(rho.n):
            h = self._next
            self._next += 1
            self._where[h] = (sid, pos)
            self._owner[h] = owner
            handles.append(h)
        return handles

    def owner(self, h: int) -> str:
        self._known(h)
        return self._owner[h]

    def is_consumed(self, h: int) -> bool:
        self._known(h)
        return h in self._consumed

    def _known(self, h: int) -> None:
        if h not in self._where and h not in self._consumed:
            raise WiringError(f"unknown qubit handle {h}")

    def _check(self, h: int, by: str) -> None:
        self._known(h)
        if h in self._consumed:
            raise WiringError(f"qubit {h} was already consumed")
        if self._owner[h] != by:
            raise WiringError(f"{by} does not hold qubit {h} (owner: {self._owner[h]})")

    def release(self, h: int, by: str) -> None:
        self._check(h, by)
        self._owner[h] = IN_TRANSIT

    def receive(self, h: int, to: str) -> None:
        self._known(h)
        if self._owner[h] != IN_TRANSIT:
            raise WiringError(f"qubit {h} delivered twice")
        self._owner[h] = to

    def apply_gate(self, h: int, gate: np.ndarray, by: str) -> None:
        self._check(h, by)
        sid, pos = self._where[h]
        self._systems[sid] = qstate._apply_1q(self._systems[sid], self._sizes[sid], pos, gate)

    def measure(self, h: int, rng, by: str, gate: np.ndarray | None = None) -> int:
        """Optionally apply ``gate``, then measure in the computational basis.

        The measured qubit is left in a product state with the rest, so it is
        traced out and the remaining qubits of its system shift down.
        """
        self._check(h, by)
        sid, pos = self._where[h]
        n = self._sizes[sid]
        data = self._systems[sid]
        if gate is not None:
            data = qstate._apply_1q(data, n, pos, gate)
        a, b = 1 << pos, 1 << (n - 1 - pos)
        t = data.reshape(a, 2, b, a, 2, b)
        diag = np.einsum("ijkijk->j", t).real
        weights = (max(float(diag[0]), 0.0), max(float(diag[1]), 0.0))
        outcome = rng.choice(weights)
        # diag[o] is the trace of the unnormalized post-measurement block
        block = np.multiply(t[:, outcome, :, :, outcome, :], 1.0 / weights[outcome])
        self._systems[sid] = block.reshape(a * b, a * b)
        self._sizes[sid] = n - 1
        del self._where[h]
        for other, (s2, p2) in list(self._where.items()):
            if s2 == sid and p2 > pos:
                self._where[other] = (s2, p2 - 1)
        self._consumed.add(h)
        return outcome

    def _full_system(self, handles: list[int]) -> int:
        sids = {self._where[h][0] for h in handles}
        if len(sids) != 1:
            raise DimensionError("handles span more than one system")
        sid = sids.pop()
        if [self._where[h][1] for h in handles] != list(range(self._sizes[sid])):
            raise DimensionError("handles must cover their system in qubit order")
        return sid

    def project(self, handles: list[int], target: PureState, rng, by: str) -> int:
        """Two-outcome measurement {|t><t|, 1 - |t><t|}; returns 0 on the target."""
        for h in handles:
            self._check(h, by)
        sid = self._full_system(handles)
        data = self._systems[sid]
        if target.amps.shape[0] != data.shape[0]:
            raise DimensionError("target state has the wrong dimension")
        t = target.amps
        p0 = float(np.clip(np.vdot(t, data @ t).real, 0.0, 1.0))
        outcome = rng.choice((p0, 1.0 - p0))
        proj = np.outer(t, t.conj())
        if outcome:
            proj = np.eye(data.shape[0]) - proj
        data = proj @ data @ proj
        self._systems[sid] = data / np.trace(data).real
        self._consumed.update(handles)
        return outcome

    def state(self, handles: list[int]) -> DensityMatrix:
        """Current joint state of a whole system (bookkeeping, not an operation)."""
        for h in handles:
            self._known(h)
            if h in self._consumed:
                raise WiringError(f"qubit {h} was already consumed")
        sid = self._full_system(handles)
        return DensityMatrix(self._systems[sid], validate=False)
