"""Per-bank sketch-based tracker: Counter Table, Recent Aggressor Table, miss history.

A bank tracker is driven one activation at a time through
:meth:`CometBankTracker.on_activation`, which returns ``None`` when nothing
needs to happen, a :class:`PreventiveRefresh` naming the victim rows to
refresh, or an :class:`EarlyRefreshRequest` asking the memory controller to
refresh the whole rank and reset every tracker in it.

Periodic resets and rank-wide early refreshes are driven from outside (see
:mod:`cometsim.experiments`), since they involve timing and all banks.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, fields
from typing import Iterable, NamedTuple

from .sketch import HashFamily, SketchTable

DDR4_TREFW_NS = 64_000_000
DDR4_TREFI_NS = 7_800
# REF commands per refresh window in the nominal DDR4 schedule.
DDR4_REF_SLOTS = 8192


def reset_deadline(n: int, trefw_ns: int, k: int) -> int:
    """Time of the ``n``-th periodic counter reset (``n >= 1``) after time zero."""
    return n * trefw_ns // k


def derive_npr(n_rh: int, k: int) -> int:
    """Preventive refresh threshold for a reset period of ``tREFW / k``.

    An aggressor can straddle ``k`` counter resets inside one refresh window
    of its victim, collecting ``N_PR - 1`` activations in each of the
    ``k + 1`` pieces, so ``N_PR = floor(N_RH / (k + 1))`` keeps the total
    below ``N_RH``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_rh < k + 1:
        raise ValueError(f"n_rh={n_rh} is below k+1={k + 1}; N_PR would be zero")
    return n_rh // (k + 1)


@dataclass
class CometConfig:
    n_rh: int = 1000
    k_reset: int = 3
    n_hash: int = 4
    n_counters: int = 512
    n_rat_entries: int = 128
    history_len: int = 256
    eprt_fraction: float = 0.25
    blast_radius: int = 1
    row_bits: int = 17
    trefw_ns: int = DDR4_TREFW_NS
    trefi_ns: int = DDR4_TREFI_NS
    count_mitigation_acts: bool = False
    rng_seed: int = 0

    def __post_init__(self):
        derive_npr(self.n_rh, self.k_reset)
        if not 0 < self.eprt_fraction <= 1:
            raise ValueError(f"eprt_fraction must be in (0, 1], got {self.eprt_fraction}")
        if self.history_len < 1:
            raise ValueError("history_len must be positive")
        if self.n_rat_entries < 1:
            raise ValueError("n_rat_entries must be positive")
        if self.n_counters < 1 or self.n_counters & (self.n_counters - 1):
            raise ValueError(f"n_counters must be a power of two, got {self.n_counters}")
        if self.n_hash < 1:
            raise ValueError("n_hash must be positive")
        if self.blast_radius < 1:
            raise ValueError("blast_radius must be >= 1")
        if self.row_bits < 1:
            raise ValueError("row_bits must be positive")
        if self.trefw_ns <= 0 or self.trefi_ns <= 0:
            raise ValueError("refresh timings must be positive")

    @property
    def n_pr(self) -> int:
        return derive_npr(self.n_rh, self.k_reset)

    @property
    def eprt(self) -> int:
        return round(self.eprt_fraction * self.history_len)

    @property
    def rows_per_bank(self) -> int:
        return 1 << self.row_bits

    @property
    def reset_period_ns(self) -> float:
        return self.trefw_ns / self.k_reset

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class PreventiveRefresh(NamedTuple):
    aggressor: int
    victims: tuple[int, ...]


class EarlyRefreshRequest(NamedTuple):
    """Rank-wide refresh request; supersedes the aggressor's own refresh."""

    aggressor: int
    victims: tuple[int, ...]


def victims_of(row: int, blast_radius: int, rows_per_bank: int) -> tuple[int, ...]:
    lo = max(0, row - blast_radius)
    hi = min(rows_per_bank - 1, row + blast_radius)
    return tuple(v for v in range(lo, hi + 1) if v != row)


class RecentAggressorTable:
    """Tagged per-row counters with uniformly random eviction."""

    def __init__(self, n_entries: int, seed: int = 0):
        self.n_entries = n_entries
        self.counters: dict[int, int] = {}
        self._tags: list[int] = []
        self._pos: dict[int, int] = {}
        self._rng = random.Random(seed)

    def __len__(self) -> int:
        return len(self.counters)

    def __contains__(self, row: int) -> bool:
        return row in self.counters

    def get(self, row: int) -> int | None:
        return self.counters.get(row)

    def allocate(self, row: int) -> int | None:
        """Insert ``row`` with a zero counter. Returns the evicted tag, if any."""
        if row in self.counters:
            self.counters[row] = 0
            return None
        evicted = None
        if len(self._tags) >= self.n_entries:
            slot = self._rng.randrange(len(self._tags))
            evicted = self._tags[slot]
            del self.counters[evicted]
            del self._pos[evicted]
            self._tags[slot] = row
            self._pos[row] = slot
        else:
            self._pos[row] = len(self._tags)
            self._tags.append(row)
        self.counters[row] = 0
        return evicted

    def clear(self) -> None:
        self.counters.clear()
        self._tags.clear()
        self._pos.clear()


class RatMissHistory:
    """Sliding window over the last ``length`` RAT misses (1 = capacity miss)."""

    def __init__(self, length: int):
        self.length = length
        self.bits = bytearray(length)
        self.cursor = 0
        self.ones = 0

    def push(self, bit: int) -> None:
        old = self.bits[self.cursor]
        self.bits[self.cursor] = bit
        self.ones += bit - old
        self.cursor += 1
        if self.cursor == self.length:
            self.cursor = 0

    def clear(self) -> None:
        self.bits = bytearray(self.length)
        self.cursor = 0
        self.ones = 0


class CometBankTracker:
    """Tracker state for a single DRAM bank."""

    def __init__(
        self,
        config: CometConfig | None = None,
        seed: int | None = None,
        hash_family: HashFamily | None = None,
    ):
        self.config = config = config or CometConfig()
        self.n_pr = config.n_pr
        self.eprt = config.eprt
        self.rows_per_bank = config.rows_per_bank
        self.ct = SketchTable(
            config.n_hash, config.n_counters, cap=self.n_pr, hash_family=hash_family
        )
        self.rat = RecentAggressorTable(
            config.n_rat_entries, config.rng_seed if seed is None else seed
        )
        self.history = RatMissHistory(config.history_len)
        self._victims: dict[int, tuple[int, ...]] = {}
        self.last_evicted: int | None = None
        self.rat_hits = 0
        self.compulsory_misses = 0
        self.capacity_misses = 0
        self.evictions = 0

    def victims(self, row: int) -> tuple[int, ...]:
        v = self._victims.get(row)
        if v is None:
            v = self._victims[row] = victims_of(
                row, self.config.blast_radius, self.rows_per_bank
            )
        return v

    def estimate(self, row: int) -> int:
        """Current activation-count estimate (RAT counter if resident, else CT minimum)."""
        ctr = self.rat.counters.get(row)
        if ctr is not None:
            return ctr
        return self.ct.estimate(row)

    def on_activation(self, row: int):
        if not 0 <= row < self.rows_per_bank:
            raise ValueError(f"row {row} outside bank of {self.rows_per_bank} rows")
        n_pr = self.n_pr
        ct = self.ct
        counters = ct.counters
        group = ct.flat_group(row)
        min_ctr = min([counters[i] for i in group])
        rat = self.rat.counters
        rat_ctr = rat.get(row)
        self.last_evicted = None

        if rat_ctr is not None:
            self.rat_hits += 1
            if rat_ctr + 1 < n_pr:
                rat[row] = rat_ctr + 1
                return None
        elif min_ctr + 1 < n_pr:
            # conservative update, inlined
            for i in group:
                if counters[i] == min_ctr:
                    counters[i] = min_ctr + 1
            return None

        # threshold reached
        if rat_ctr is None:
            if min_ctr >= n_pr:
                self.capacity_misses += 1
                self.history.push(1)
            else:
                self.compulsory_misses += 1
                self.history.push(0)
        for i in group:
            if counters[i] < n_pr:
                counters[i] = n_pr
        if rat_ctr is not None:
            rat[row] = 0
        else:
            evicted = self.rat.allocate(row)
            if evicted is not None:
                self.evictions += 1
                self.last_evicted = evicted
        if self.history.ones > self.eprt:
            return EarlyRefreshRequest(row, self.victims(row))
        return PreventiveRefresh(row, self.victims(row))

    def reset(self) -> None:
        """Return to the initial state (periodic reset or early refresh)."""
        self.ct.reset_all()
        self.rat.clear()
        self.history.clear()
        self.last_evicted = None

    periodic_reset = reset


def apply_early_refresh(
    trackers: Iterable[CometBankTracker], ref_commands: int = DDR4_REF_SLOTS
) -> int:
    """Reset every tracker of a rank; return the REF commands to issue."""
    for t in trackers:
        t.reset()
    return ref_commands
