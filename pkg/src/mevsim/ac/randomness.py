"""Per-machine random streams and the replay source used for exact enumeration.

Machines draw only discrete choices (``bit``, ``uniform``, ``choice``), which
lets the same machine code run either on a seeded stream or on a replayed
path of an exhaustive probability tree.
"""

from __future__ import annotations

import hashlib
import math
import struct
import zlib
from typing import Sequence

import numpy as np

from mevsim.errors import EnumerationTooLarge

PRUNE = 1e-14
_WORDS = struct.Struct("<8Q")
_TWO_M53 = 2.0**-53


def derive_seed(*parts: int | str) -> int:
    """Counter-based split of a seed; strings are keyed by CRC32 so the result is stable."""
    key = [zlib.crc32(p.encode()) if isinstance(p, str) else int(p) for p in parts]
    words = np.random.SeedSequence(key).generate_state(2, dtype=np.uint64)
    return int(words[0]) << 64 | int(words[1])


class SeededRandomness:
    """Counter-mode stream: block i is BLAKE2b keyed by the stream key over the counter i.

    Each 64-byte block yields eight 64-bit words. Construction is cheap,
    which matters because every run opens one stream per drawing machine.
    """

    __slots__ = ("_key", "_ctr", "_buf")

    def __init__(self, seed: int | str | bytes):
        if not isinstance(seed, bytes):
            seed = str(seed).encode()
        self._key = hashlib.blake2b(seed, digest_size=32).digest()
        self._ctr = 0
        self._buf: list[int] = []

    def _word(self) -> int:
        if not self._buf:
            block = hashlib.blake2b(self._ctr.to_bytes(8, "little"), key=self._key, digest_size=64).digest()
            self._ctr += 1
            self._buf = list(_WORDS.unpack(block))
        return self._buf.pop()

    def random(self) -> float:
        return (self._word() >> 11) * _TWO_M53

    def choice(self, weights: Sequence[float]) -> int:
        u = self.random() * math.fsum(weights)
        acc = 0.0
        last = 0
        for i, w in enumerate(weights):
            if w <= 0:
                continue
            acc += w
            last = i
            if u < acc:
                return i
        return last

    def bit(self, p_one: float = 0.5) -> int:
        return 1 if self.random() < p_one else 0

    def uniform(self, k: int) -> int:
        if k < 1:
            raise ValueError(f"uniform needs k >= 1, got {k}")
        width = (k - 1).bit_length()
        if width == 0:
            return 0
        while True:
            r = self._word() >> (64 - width)
            if r < k:
                return r

    def bits(self, k: int) -> tuple[int, ...]:
        out: list[int] = []
        while len(out) < k:
            w = self._word()
            take = min(64, k - len(out))
            out.extend((w >> (63 - i)) & 1 for i in range(take))
        return tuple(out)


class ReplayPath:
    """One root-to-leaf path of the probability tree of a run.

    ``prefix`` fixes the option taken at the first choice points; later
    choice points take their first surviving option. After the run,
    :meth:`next_prefix` gives the prefix of the next path in DFS order.
    """

    def __init__(self, prefix: Sequence[int], max_bits: float):
        self.prefix = list(prefix)
        self.max_bits = max_bits
        self.taken: list[tuple[int, int]] = []  # (option index, surviving option count)
        self.prob = 1.0
        self.bits = 0.0

    def choice(self, weights: Sequence[float]) -> int:
        survivors = [i for i, w in enumerate(weights) if w > PRUNE]
        if not survivors:
            raise ValueError("choice with no positive weight")
        if len(survivors) > 1:
            self.bits += math.log2(len(survivors))
            if self.bits > self.max_bits + 1e-9:
                raise EnumerationTooLarge(
                    f"run consumes more than {self.max_bits} random bits; use Monte Carlo"
                )
        pos = len(self.taken)
        j = self.prefix[pos] if pos < len(self.prefix) else 0
        self.taken.append((j, len(survivors)))
        idx = survivors[j]
        self.prob *= weights[idx] / math.fsum(weights[i] for i in survivors)
        return idx

    def next_prefix(self) -> list[int] | None:
        for pos in range(len(self.taken) - 1, -1, -1):
            j, count = self.taken[pos]
            if j + 1 < count:
                return [t[0] for t in self.taken[:pos]] + [j + 1]
        return None


class ReplayRandomness:
    """Machine-facing view of a shared :class:`ReplayPath`."""

    __slots__ = ("_path",)

    def __init__(self, path: ReplayPath):
        self._path = path

    def random(self) -> float:
        raise EnumerationTooLarge("continuous draws cannot be enumerated")

    def choice(self, weights: Sequence[float]) -> int:
        return self._path.choice(weights)

    def bit(self, p_one: float = 0.5) -> int:
        return self._path.choice((1.0 - p_one, p_one))

    def uniform(self, k: int) -> int:
        return self._path.choice((1.0 / k,) * k)

    def bits(self, k: int) -> tuple[int, ...]:
        return tuple(self.bit() for _ in range(k))
