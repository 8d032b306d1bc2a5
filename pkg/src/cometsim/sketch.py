"""Count-Min Sketch with conservative updates and saturating counters.

The table holds ``k`` rows of ``m`` counters. In the default *partitioned*
layout hash function ``i`` only ever indexes row ``i`` of the table, so
every key owns exactly one counter per row. The *shared* layout lets every
hash function range over the whole ``k * m`` array, which is how a counting
Bloom filter is usually built; it exists for layout comparisons.

Hash functions are of the form ``((row >> shift) * multiplier) mod m``.
When ``m`` is a power of two the modulus is a mask, so the whole family is
made of shifts, one multiply and a mask.
"""

from __future__ import annotations

import random
from typing import Iterable, Sequence

import numpy as np

# Shifts and odd multipliers of the default 4-function family.
DEFAULT_SHIFTS = (0, 3, 6, 9)
DEFAULT_MULTIPLIERS = (0x9E37, 0x85EB, 0xC2B3, 0x27D5)


class HashFamily:
    """Ordered list of ``(shift, multiplier, modulus)`` hash descriptors.

    Calling ``family.index(i, row)`` gives ``((row >> shift_i) * mult_i) % m_i``.
    """

    def __init__(self, functions: Iterable[Sequence[int]]):
        functions = [tuple(int(v) for v in f) for f in functions]
        if not functions:
            raise ValueError("a hash family needs at least one function")
        for shift, mult, modulus in functions:
            if shift < 0 or modulus < 1 or mult < 1:
                raise ValueError(f"bad hash descriptor {(shift, mult, modulus)}")
        if len(set(functions)) != len(functions):
            raise ValueError("hash descriptors must be pairwise distinct")
        self.functions: tuple[tuple[int, int, int], ...] = tuple(functions)
        self._masks = tuple(
            m - 1 if m & (m - 1) == 0 else None for _, _, m in self.functions
        )

    @classmethod
    def default(cls, k: int = 4, m: int = 512) -> "HashFamily":
        """The built-in family. Beyond four functions, extra ones are drawn
        from a fixed seed with shifts continuing the 0, 3, 6, 9 pattern."""
        funcs = [(DEFAULT_SHIFTS[i], DEFAULT_MULTIPLIERS[i] | 1, m)
                 for i in range(min(k, len(DEFAULT_SHIFTS)))]
        rng = random.Random(0xC0FFEE)
        while len(funcs) < k:
            f = ((3 * len(funcs) + 1) % 12, rng.randrange(1, 1 << 16) | 1, m)
            if f not in funcs:
                funcs.append(f)
        return cls(funcs)

    @classmethod
    def seeded(cls, k: int, m: int, seed: int, max_shift: int = 9) -> "HashFamily":
        """Random odd multipliers with shifts spread over ``[0, max_shift]``."""
        rng = random.Random(seed)
        funcs: list[tuple[int, int, int]] = []
        while len(funcs) < k:
            shift = (max_shift * len(funcs)) // max(k - 1, 1)
            f = (shift, rng.randrange(1, 1 << 16) | 1, m)
            if f not in funcs:
                funcs.append(f)
        return cls(funcs)

    def __len__(self) -> int:
        return len(self.functions)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, HashFamily) and self.functions == other.functions

    def __hash__(self) -> int:
        return hash(self.functions)

    def __repr__(self) -> str:
        return f"HashFamily({list(self.functions)!r})"

    def index(self, i: int, row: int) -> int:
        shift, mult, modulus = self.functions[i]
        mask = self._masks[i]
        if mask is not None:
            return ((row >> shift) * mult) & mask
        return ((row >> shift) * mult) % modulus

    def indices(self, row: int) -> list[int]:
        return [self.index(i, row) for i in range(len(self.functions))]


_GROUP_CACHES: dict[tuple, dict[int, tuple[int, ...]]] = {}


class SketchTable:
    """A ``k x m`` table of saturating counters addressed by a hash family.

    Parameters
    ----------
    n_hash, n_counters:
        Table shape: ``n_hash`` rows of ``n_counters`` counters.
    cap:
        Saturation value; counters never exceed it.
    hash_family:
        Defaults to :meth:`HashFamily.default`. In the partitioned layout each
        function must have modulus ``n_counters``; in the shared layout the
        modulus must be ``n_hash * n_counters``.
    shared:
        Use the shared (counting Bloom filter) layout.
    conservative:
        Conservative updates (only minimum-valued counters are incremented).
        ``False`` gives a plain CMS that increments the whole group.
    """

    def __init__(
        self,
        n_hash: int = 4,
        n_counters: int = 512,
        cap: int = 255,
        hash_family: HashFamily | None = None,
        shared: bool = False,
        conservative: bool = True,
    ):
        if n_hash < 1 or n_counters < 1:
            raise ValueError("table dimensions must be positive")
        if cap < 1:
            raise ValueError("cap must be >= 1")
        span = n_hash * n_counters if shared else n_counters
        if hash_family is None:
            hash_family = HashFamily.default(n_hash, span)
        if len(hash_family) != n_hash:
            raise ValueError(f"expected {n_hash} hash functions, got {len(hash_family)}")
        if any(m != span for _, _, m in hash_family.functions):
            raise ValueError(f"every hash function must range over {span} counters")
        self.k = n_hash
        self.m = n_counters
        self.cap = cap
        self.shared = shared
        self.conservative = conservative
        self.hash_family = hash_family
        self.counters = [0] * (n_hash * n_counters)
        self._offsets = [0] * n_hash if shared else [i * n_counters for i in range(n_hash)]
        # shared by every table with the same addressing
        self._groups = _GROUP_CACHES.setdefault((hash_family, tuple(self._offsets)), {})

    def __repr__(self) -> str:
        layout = "shared" if self.shared else "partitioned"
        return f"SketchTable(k={self.k}, m={self.m}, cap={self.cap}, {layout})"

    def flat_group(self, row: int) -> tuple[int, ...]:
        """Flat indices into ``counters`` for ``row``. Cached per row."""
        g = self._groups.get(row)
        if g is None:
            if row < 0:
                raise ValueError(f"row must be non-negative, got {row}")
            g = tuple(off + h for off, h in zip(self._offsets, self.hash_family.indices(row)))
            self._groups[row] = g
        return g

    def counter_group(self, row: int) -> list[tuple[int, int]]:
        """``(table row, column)`` of every counter that ``row`` maps to."""
        return [divmod(i, self.m) for i in self.flat_group(row)]

    def estimate(self, row: int) -> int:
        c = self.counters
        return min(c[i] for i in self.flat_group(row))

    def increment(self, row: int) -> int:
        """Count one occurrence of ``row`` and return its new estimate."""
        if self.conservative:
            return self.increment_conservative(row)
        c = self.counters
        cap = self.cap
        g = self.flat_group(row)
        for i in g:
            if c[i] < cap:
                c[i] += 1
        return min(c[i] for i in g)

    def increment_conservative(self, row: int) -> int:
        c = self.counters
        g = self.flat_group(row)
        v = min(c[i] for i in g)
        if v >= self.cap:
            return self.cap
        for i in g:
            if c[i] == v:
                c[i] = v + 1
        return v + 1

    def pin_group(self, row: int, value: int) -> None:
        """Raise every counter of ``row``'s group to at least ``value``."""
        if value > self.cap:
            raise ValueError(f"pin value {value} exceeds cap {self.cap}")
        c = self.counters
        for i in self.flat_group(row):
            if c[i] < value:
                c[i] = value

    def reset_all(self) -> None:
        self.counters[:] = [0] * (self.k * self.m)

    def as_array(self) -> np.ndarray:
        return np.array(self.counters, dtype=np.int64).reshape(self.k, self.m)

    @property
    def counter_bits(self) -> int:
        return self.cap.bit_length()
