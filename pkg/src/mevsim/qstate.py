"""Dense n-qubit states: GHZ construction, local gates, measurement, trace distance.

Bitstrings are big-endian throughout: qubit 1 (array axis 0) is the most
significant bit of a basis index, so index 0b011 on three qubits is |011>.

State documents
---------------
States are exchanged as JSON objects::

    {"n": 2, "kind": "pure",    "data": [[re, im], ...]}        # 2**n pairs
    {"n": 1, "kind": "density", "data": [[re, im], ...]}        # 4**n pairs, row-major

``data`` is a flat list of ``[re, im]`` pairs. Extra keys are rejected.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

from mevsim.errors import (
    DimensionError,
    InvalidDistributionError,
    InvalidStateError,
)

MAX_PURE_QUBITS = 20
MAX_DENSITY_QUBITS = 10

STATE_TOL = 1e-9
DRIFT_TOL = 1e-6

H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]], dtype=complex)
for _g in (H, SQRT_X):
    _g.setflags(write=False)

Bits = tuple[int, ...]


def gate_for(x: int) -> np.ndarray:
    """Local gate for verifier instruction ``x``: H for 0, sqrt(X) for 1."""
    if x == 0:
        return H
    if x == 1:
        return SQRT_X
    raise ValueError(f"instruction bit must be 0 or 1, got {x!r}")


def index_to_bits(k: int, n: int) -> Bits:
    return tuple((k >> (n - 1 - i)) & 1 for i in range(n))


def bits_to_index(bits: Sequence[int]) -> int:
    k = 0
    for b in bits:
        k = (k << 1) | int(b)
    return k


def all_bitstrings(n: int) -> list[Bits]:
    return list(itertools.product((0, 1), repeat=n))


def even_parity_strings(n: int) -> list[Bits]:
    return [x for x in all_bitstrings(n) if sum(x) % 2 == 0]


def _qubits_for_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise DimensionError(f"dimension {dim} is not a power of two >= 2")
    return n


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


class PureState:
    """Normalized amplitude vector over ``n`` qubits."""

    __slots__ = ("n", "amps")

    def __init__(self, amps, *, validate: bool = True):
        amps = _readonly(np.asarray(amps).reshape(-1))
        n = _qubits_for_dim(amps.shape[0])
        if n > MAX_PURE_QUBITS:
            raise DimensionError(f"pure states are capped at {MAX_PURE_QUBITS} qubits")
        if validate:
            if not np.all(np.isfinite(amps)):
                raise InvalidStateError("amplitudes must be finite")
            norm = float(np.vdot(amps, amps).real)
            if abs(norm - 1.0) > STATE_TOL:
                raise InvalidStateError(f"state norm {norm!r} differs from 1")
        self.n = n
        self.amps = amps

    def __repr__(self) -> str:
        return f"PureState(n={self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PureState) and np.array_equal(self.amps, other.amps)

    def __hash__(self) -> int:
        return hash(self.amps.tobytes())


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix over ``n`` qubits.

    Instances are immutable and hash by content, so they are safe to share
    between runs and to use as cache keys.
    """

    __slots__ = ("n", "data", "_digest")

    def __init__(self, data, *, validate: bool = True):
        data = _readonly(np.asarray(data))
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"density matrix must be square, got {data.shape}")
        n = _qubits_for_dim(data.shape[0])
        if n > MAX_DENSITY_QUBITS:
            raise DimensionError(f"density matrices are capped at {MAX_DENSITY_QUBITS} qubits")
        if validate:
            _check_density(data)
        self.n = n
        self.data = data
        self._digest = None

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.sha256(self.data.tobytes()).hexdigest()
        return self._digest

    def __repr__(self) -> str:
        return f"DensityMatrix(n={self.n}, digest={self.digest()[:12]})"

    def __eq__(self, other) -> bool:
        return isinstance(other, DensityMatrix) and self.digest() == other.digest()

    def __hash__(self) -> int:
        return hash(self.digest())


def _check_density(data: np.ndarray) -> None:
    if not np.all(np.isfinite(data)):
        raise InvalidStateError("density matrix entries must be finite")
    if np.max(np.abs(data - data.conj().T)) > STATE_TOL:
        raise InvalidStateError("density matrix is not Hermitian")
    tr = np.trace(data)
    if abs(tr - 1.0) > STATE_TOL:
        raise InvalidStateError(f"density matrix trace {tr!r} differs from 1")
    # validation only; the trace-distance path uses the Jacobi solver below
    lam_min = float(np.linalg.eigvalsh((data + data.conj().T) / 2)[0])
    if lam_min < -STATE_TOL:
        raise InvalidStateError(f"density matrix has negative eigenvalue {lam_min:.3e}")


def as_density(state: PureState | DensityMatrix) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    if isinstance(state, PureState):
        return to_density(state)
    raise TypeError(f"expected PureState or DensityMatrix, got {type(state).__name__}")


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def make_ghz(n: int) -> PureState:
    """(|0...0> + |1...1>)/sqrt(2) on ``n`` qubits."""
    if not 1 <= n <= MAX_PURE_QUBITS:
        raise DimensionError(f"GHZ qubit count must be in [1, {MAX_PURE_QUBITS}], got {n}")
    amps = np.zeros(1 << n, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return PureState(amps)


def basis_state(bits: Sequence[int] | str) -> PureState:
    """Computational basis state, e.g. ``basis_state("001")``."""
    bits = tuple(int(b) for b in bits)
    if not bits or any(b not in (0, 1) for b in bits):
        raise ValueError(f"invalid bitstring {bits!r}")
    amps = np.zeros(1 << len(bits), dtype=complex)
    amps[bits_to_index(bits)] = 1.0
    return PureState(amps)


def to_density(psi: PureState) -> DensityMatrix:
    if psi.n > MAX_DENSITY_QUBITS:
        raise DimensionError(f"{psi.n} qubits is too large for a density matrix")
    return DensityMatrix(np.outer(psi.amps, psi.amps.conj()), validate=False)


@lru_cache(maxsize=None)
def ghz_density(n: int) -> DensityMatrix:
    return to_density(make_ghz(n))


def maximally_mixed(n: int) -> DensityMatrix:
    if not 1 <= n <= MAX_DENSITY_QUBITS:
        raise DimensionError(f"qubit count must be in [1, {MAX_DENSITY_QUBITS}], got {n}")
    d = 1 << n
    return DensityMatrix(np.eye(d, dtype=complex) / d, validate=False)


def depolarize_ghz(n: int, lam: float) -> DensityMatrix:
    """(1 - lam) |GHZ><GHZ| + lam I / 2**n."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"depolarizing weight must be in [0, 1], got {lam}")
    g = ghz_density(n).data
    d = g.shape[0]
    return DensityMatrix((1 - lam) * g + lam * np.eye(d) / d, validate=False)


def random_pure_state(n: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return PureState(v / np.linalg.norm(v))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    d = 1 << n
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


# ---------------------------------------------------------------------------
# gates and measurement
# ---------------------------------------------------------------------------


def _apply_1q(data: np.ndarray, n: int, qubit: int, gate: np.ndarray) -> np.ndarray:
    """G rho G^dagger with G acting on 0-based ``qubit`` of an n-qubit Hermitian matrix."""
    d = data.shape[0]
    a = 1 << qubit
    t = np.matmul(gate, data.reshape(a, 2, -1)).reshape(d, d)
    if n <= 6:
        # rho Hermitian: G rho G^dagger = G (G rho)^dagger, two left actions
        return np.matmul(gate, t.conj().T.reshape(a, 2, -1)).reshape(d, d)
    b = 1 << (n - 1 - qubit)
    return np.matmul(gate.conj(), t.reshape(d * a, 2, b)).reshape(d, d)


def apply_gate(rho: DensityMatrix, qubit: int, gate: np.ndarray) -> DensityMatrix:
    if not 0 <= qubit < rho.n:
        raise DimensionError(f"qubit {qubit} out of range for {rho.n} qubits")
    return DensityMatrix(_apply_1q(rho.data, rho.n, qubit, gate), validate=False)


def apply_local_gates(rho: DensityMatrix, x: Sequence[int]) -> DensityMatrix:
    """Conjugate ``rho`` by the tensor product of H (x_i = 0) or sqrt(X) (x_i = 1)."""
    if len(x) != rho.n:
        raise DimensionError(f"instruction string has length {len(x)}, state has {rho.n} qubits")
    data = rho.data
    for q, xi in enumerate(x):
        data = _apply_1q(data, rho.n, q, gate_for(int(xi)))
    return DensityMatrix(data, validate=False)


def _diagonal_probabilities(diag: np.ndarray) -> np.ndarray:
    p = np.clip(diag.real, 0.0, 1.0)
    total = p.sum()
    if abs(total - 1.0) > DRIFT_TOL:
        raise InvalidStateError(f"outcome probabilities sum to {total!r}")
    return p / total


def outcome_distribution(rho: DensityMatrix) -> np.ndarray:
    """Computational-basis outcome probabilities, indexed big-endian."""
    return _diagonal_probabilities(np.diagonal(rho.data))


def check_distribution(dist) -> np.ndarray:
    dist = np.asarray(dist, dtype=float)
    if dist.ndim != 1 or dist.size == 0:
        raise InvalidDistributionError("distribution must be a non-empty vector")
    if np.any(dist < -STATE_TOL) or not np.all(np.isfinite(dist)):
        raise InvalidDistributionError("distribution has negative or non-finite entries")
    if abs(dist.sum() - 1.0) > DRIFT_TOL:
        raise InvalidDistributionError(f"distribution sums to {dist.sum()!r}")
    return np.clip(dist, 0.0, None)


def sample_index(dist, rng) -> int:
    """Draw an index with probability ``dist[k]``; ``rng`` needs a ``random()`` method."""
    dist = check_distribution(dist)
    cdf = np.cumsum(dist)
    k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(k, dist.size - 1)


def sample_outcome(dist, rng) -> Bits:
    """Sample a bitstring from a probability vector over ``2**n`` outcomes."""
    dist = np.asarray(dist, dtype=float)
    n = _qubits_for_dim(dist.size) if dist.size > 1 else 0
    return index_to_bits(sample_index(dist, rng), n)


# ---------------------------------------------------------------------------
# eigensolver and trace distance
# ---------------------------------------------------------------------------


def jacobi_eigvalsh_real(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations."""
    a = np.array(a, dtype=float, copy=True)
    m = a.shape[0]
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off < tol:
            return np.sort(np.diag(a))
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                scale = abs(a[p, p]) + abs(a[q, q])
                if abs(apq) <= 1e-18 * scale or abs(apq) < 1e-200:
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    raise RuntimeError(f"Jacobi did not converge in {max_sweeps} sweeps")


def eigvalsh(matrix: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Eigenvalues of a complex Hermitian matrix, ascending.

    The d x d matrix A + iB is embedded as the real symmetric 2d x 2d block
    matrix [[A, -B], [B, A]], whose spectrum is that of the original with
    every eigenvalue doubled.
    """
    matrix = np.asarray(matrix, dtype=complex)
    re, im = matrix.real, matrix.imag
    big = np.block([[re, -im], [im, re]])
    big = (big + big.T) / 2
    return jacobi_eigvalsh_real(big, tol=tol)[::2]


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """(1/2) sum |lambda_i| over the eigenvalues of rho - sigma."""
    if rho.dim != sigma.dim:
        raise DimensionError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")
    lam = eigvalsh(rho.data - sigma.data)
    return float(min(max(0.5 * np.sum(np.abs(lam)), 0.0), 1.0))


@lru_cache(maxsize=4096)
def ghz_distance(rho: DensityMatrix) -> float:
    """Trace distance between ``rho`` and the GHZ state on the same qubits."""
    return trace_distance(ghz_density(rho.n), rho)


@lru_cache(maxsize=65536)
def gated_outcome_distribution(rho: DensityMatrix, x: Bits) -> np.ndarray:
    """Outcome table of ``rho`` after the local gates selected by ``x`` (cached)."""
    dist = outcome_distribution(apply_local_gates(rho, x))
    dist.setflags(write=False)
    return dist


# ---------------------------------------------------------------------------
# state documents
# ---------------------------------------------------------------------------


def state_to_document(state: PureState | DensityMatrix) -> dict:
    if isinstance(state, PureState):
        flat, kind = state.amps, "pure"
    elif isinstance(state, DensityMatrix):
        flat, kind = state.data.reshape(-1), "density"
    else:
        raise TypeError(f"cannot serialize {type(state).__name__}")
    return {"n": state.n, "kind": kind, "data": [[float(z.real), float(z.imag)] for z in flat]}


def state_from_document(doc: dict) -> PureState | DensityMatrix:
    if not isinstance(doc, dict) or set(doc) != {"n", "kind", "data"}:
        raise InvalidStateError("state document needs exactly the keys n, kind, data")
    n, kind, data = doc["n"], doc["kind"], doc["data"]
    if not isinstance(n, int) or n < 1:
        raise InvalidStateError(f"invalid qubit count {n!r}")
    try:
        arr = np.array([complex(float(re), float(im)) for re, im in data], dtype=complex)
    except (TypeError, ValueError) as exc:
        raise InvalidStateError("state data must be a list of [re, im] pairs") from exc
    if kind == "pure":
        if arr.size != 1 << n:
            raise DimensionError(f"pure state on {n} qubits needs {1 << n} amplitudes")
        return PureState(arr)
    if kind == "density":
        if arr.size != 1 << (2 * n):
            raise DimensionError(f"density matrix on {n} qubits needs {1 << (2 * n)} entries")
        return DensityMatrix(arr.reshape(1 << n, 1 << n))
    raise InvalidStateError(f"unknown state kind {kind!r}")


def save_state(state: PureState | DensityMatrix, path: str | Path) -> None:
    Path(path).write_text(json.dumps(state_to_document(state)) + "\n")


def load_state(path: str | Path) -> PureState | DensityMatrix:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidStateError(f"{path}: not valid JSON ({exc.msg})") from exc
    return state_from_document(doc)
