"""Reference trackers sharing the bank-tracker interface.

Every tracker here exposes ``on_activation(row)``, ``estimate(row)`` and
``reset()``. ``estimate`` returns ``None`` for trackers that keep no counts.
"""

from __future__ import annotations

import math
import random

from .sketch import HashFamily, SketchTable
from .tracker import PreventiveRefresh, victims_of

# Rows hammerable per bank per refresh window times the threshold:
# 2720 rows at N_RH=1000 and 21760 rows at N_RH=125 both give this.
ACTS_PER_BANK_PER_TREFW = 2_720_000


class _Victims:
    def __init__(self, blast_radius: int, rows_per_bank: int):
        self.blast_radius = blast_radius
        self.rows_per_bank = rows_per_bank
        self._cache: dict[int, tuple[int, ...]] = {}

    def __call__(self, row: int) -> tuple[int, ...]:
        v = self._cache.get(row)
        if v is None:
            v = self._cache[row] = victims_of(row, self.blast_radius, self.rows_per_bank)
        return v


class NullTracker:
    """No mitigation at all."""

    def __init__(self, *args, **kwargs):
        pass

    def on_activation(self, row: int):
        return None

    def estimate(self, row: int):
        return None

    def reset(self) -> None:
        pass


class PerRowOracleTracker:
    """An exact counter per row; refreshes exactly when a count reaches ``threshold``."""

    def __init__(self, threshold: int, blast_radius: int = 1, rows_per_bank: int = 1 << 17):
        self.threshold = threshold
        self.count: dict[int, int] = {}
        self.victims = _Victims(blast_radius, rows_per_bank)

    def on_activation(self, row: int):
        c = self.count.get(row, 0) + 1
        if c >= self.threshold:
            self.count[row] = 0
            return PreventiveRefresh(row, self.victims(row))
        self.count[row] = c
        return None

    def estimate(self, row: int) -> int:
        return self.count.get(row, 0)

    def reset(self) -> None:
        self.count.clear()


def graphene_entries(n_pr: int, k_reset: int = 3,
                     acts_per_trefw: int = ACTS_PER_BANK_PER_TREFW) -> int:
    """Misra-Gries table size that can hold every row able to reach ``n_pr``."""
    return math.ceil(acts_per_trefw / k_reset / n_pr)


class MisraGriesTracker:
    """Misra-Gries tracker with a spillover counter.

    A row absent from the table is estimated at the spillover value. On a
    miss the row takes over an entry whose counter equals the spillover (its
    counter becomes ``spillover + 1``); with no such entry the spillover
    itself is incremented. When an entry reaches ``threshold`` the victims
    are refreshed and the entry drops back to the spillover value.
    """

    def __init__(self, n_entries: int, threshold: int, blast_radius: int = 1,
                 rows_per_bank: int = 1 << 17):
        if n_entries < 1:
            raise ValueError("n_entries must be positive")
        self.n_entries = n_entries
        self.threshold = threshold
        self.entries: dict[int, int] = {}
        self.spillover = 0
        # rows currently sitting at the spillover value (replacement candidates)
        self._at_spill: set[int] = set()
        self.victims = _Victims(blast_radius, rows_per_bank)

    def _set(self, row: int, value: int) -> None:
        self.entries[row] = value
        if value == self.spillover:
            self._at_spill.add(row)
        else:
            self._at_spill.discard(row)

    def on_activation(self, row: int):
        entries = self.entries
        c = entries.get(row)
        if c is None:
            if len(entries) < self.n_entries:
                c = self.spillover + 1
            elif self._at_spill:
                old = self._at_spill.pop()
                del entries[old]
                c = self.spillover + 1
            else:
                self.spillover += 1
                # every entry is >= the old spillover + 1, so ties are exact matches
                self._at_spill = {r for r, v in entries.items() if v == self.spillover}
                if self.spillover >= self.threshold:
                    # undersized table: an untracked row may be the aggressor
                    return PreventiveRefresh(row, self.victims(row))
                return None
        else:
            c += 1
        if c >= self.threshold:
            self._set(row, self.spillover)
            return PreventiveRefresh(row, self.victims(row))
        self._set(row, c)
        return None

    def estimate(self, row: int) -> int:
        return self.entries.get(row, self.spillover)

    def reset(self) -> None:
        self.entries.clear()
        self._at_spill.clear()
        self.spillover = 0


def para_probability(n_rh: int, failure_probability: float = 1e-15) -> float:
    """Smallest ``p`` with ``(1 - p) ** n_rh <= failure_probability``."""
    return 1.0 - failure_probability ** (1.0 / n_rh)


class ParaTracker:
    """Refresh the victims with probability ``p`` on every activation."""

    def __init__(self, p: float, seed: int = 0, blast_radius: int = 1,
                 rows_per_bank: int = 1 << 17):
        if not 0 < p <= 1:
            raise ValueError(f"p must be in (0, 1], got {p}")
        self.p = p
        self.rng = random.Random(seed)
        self.victims = _Victims(blast_radius, rows_per_bank)

    def on_activation(self, row: int):
        if self.rng.random() < self.p:
            return PreventiveRefresh(row, self.victims(row))
        return None

    def estimate(self, row: int):
        return None

    def reset(self) -> None:
        pass


def shared_hash_family(n_hash: int = 4, n_counters: int = 512) -> HashFamily:
    """The default family, widened so every function spans the whole array."""
    return HashFamily.default(n_hash, n_hash * n_counters)


class CbfTracker:
    """Counting-Bloom-filter tracker: one counter array shared by all hash functions.

    Counting uses conservative updates by default. There is no per-row
    table, so once a row's counters saturate at ``threshold`` every further
    activation of it triggers a refresh until the next reset.
    """

    def __init__(self, threshold: int, n_hash: int = 4, n_counters: int = 512,
                 hash_family: HashFamily | None = None, conservative: bool = True,
                 blast_radius: int = 1, rows_per_bank: int = 1 << 17):
        self.threshold = threshold
        self.table = SketchTable(
            n_hash, n_counters, cap=threshold,
            hash_family=hash_family or shared_hash_family(n_hash, n_counters),
            shared=True, conservative=conservative,
        )
        self.victims = _Victims(blast_radius, rows_per_bank)

    def on_activation(self, row: int):
        if self.table.increment(row) >= self.threshold:
            return PreventiveRefresh(row, self.victims(row))
        return None

    def estimate(self, row: int) -> int:
        return self.table.estimate(row)

    def reset(self) -> None:
        self.table.reset_all()
