"""Binary chromosome encoding of a materialized-view configuration.

Bit ``i`` (0-based, leftmost character of the bitstring) is 1 iff candidate
view ``i`` is materialized.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np


class Chromosome:
    """Immutable fixed-length bit vector."""

    __slots__ = ("_bits", "_key")

    def __init__(self, bits: Iterable[int] | np.ndarray | str) -> None:
        if isinstance(bits, str):
            text = bits.strip()
            if any(ch not in "01" for ch in text):
                raise ValueError(f"bitstring may only contain '0' and '1', got {bits!r}")
            bits = [ch == "1" for ch in text]
        arr = np.array(bits, dtype=np.uint8).reshape(-1)
        if arr.size and arr.max() > 1:
            raise ValueError("chromosome bits must be 0 or 1")
        arr.flags.writeable = False
        self._bits = arr
        self._key = arr.tobytes()

    @classmethod
    def from_string(cls, text: str) -> Chromosome:
        return cls(text)

    @classmethod
    def from_views(cls, view_ids: Iterable[int], length: int) -> Chromosome:
        bits = np.zeros(length, dtype=np.uint8)
        for v in view_ids:
            if not 0 <= v < length:
                raise ValueError(f"view id {v} out of range for length {length}")
            bits[v] = 1
        return cls(bits)

    @classmethod
    def zeros(cls, length: int) -> Chromosome:
        return cls(np.zeros(length, dtype=np.uint8))

    @property
    def bits(self) -> np.ndarray:
        return self._bits

    def __len__(self) -> int:
        return int(self._bits.size)

    def __getitem__(self, i: int) -> int:
        return int(self._bits[i])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Chromosome):
            return NotImplemented
        return self._key == other._key and len(self) == len(other)

    def __hash__(self) -> int:
        return hash(self._key)

    def __str__(self) -> str:
        return "".join("1" if b else "0" for b in self._bits)

    def __repr__(self) -> str:
        return f"Chromosome('{self}')"

    def count(self) -> int:
        return int(self._bits.sum())


def decode(c: Chromosome) -> set[int]:
    """View ids materialized by ``c``."""
    return {int(i) for i in np.flatnonzero(c.bits)}


def encode(view_ids: Iterable[int], length: int) -> Chromosome:
    return Chromosome.from_views(view_ids, length)


def hamming_similarity(a: Chromosome, b: Chromosome) -> float:
    """Fraction of positions at which ``a`` and ``b`` agree."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    if len(a) == 0:
        return 1.0
    return float(np.count_nonzero(a.bits == b.bits)) / len(a)


def random_chromosome(length: int, num_set: int, rng: np.random.Generator) -> Chromosome:
    """Chromosome with exactly ``num_set`` bits set at uniformly chosen positions."""
    if not 0 <= num_set <= length:
        raise ValueError(f"num_set must be in [0, {length}], got {num_set}")
    bits = np.zeros(length, dtype=np.uint8)
    bits[rng.choice(length, size=num_set, replace=False)] = 1
    return Chromosome(bits)
