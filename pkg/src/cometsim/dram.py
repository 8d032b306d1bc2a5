"""Logical DRAM rank: geometry, periodic refresh schedule, ground-truth exposure.

The exposure oracle is the referee of every simulation. For each
(aggressor, victim) pair within the blast radius it counts the aggressor's
activations since the victim was last refreshed, by any means: a periodic
REF slot, a preventive refresh, or a rank-wide early refresh. A pair whose
count reaches ``N_RH`` is a security violation.

It also keeps, per row, the activations since the tracker last "forgot" that
row (a tracker reset, or a preventive refresh the row itself triggered).
A tracker estimate below that count is an underestimate.

Time is integer nanoseconds. ``advance_to(t)`` fires every scheduled event
with a deadline strictly before ``t``, so an ACT stamped ``t`` is processed
before a refresh due at the same instant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

from .tracker import DDR4_REF_SLOTS, DDR4_TREFW_NS


@dataclass(frozen=True)
class Geometry:
    ranks: int = 2
    banks_per_rank: int = 16
    rows_per_bank: int = 1 << 17

    def __post_init__(self):
        if self.ranks < 1 or self.banks_per_rank < 1:
            raise ValueError("ranks and banks_per_rank must be positive")
        r = self.rows_per_bank
        if r < 2 or r & (r - 1):
            raise ValueError(f"rows_per_bank must be a power of two, got {r}")

    @property
    def row_bits(self) -> int:
        return self.rows_per_bank.bit_length() - 1

    @property
    def n_banks(self) -> int:
        return self.ranks * self.banks_per_rank

    def check(self, rank: int, bank: int, row: int) -> None:
        if not (0 <= rank < self.ranks and 0 <= bank < self.banks_per_rank
                and 0 <= row < self.rows_per_bank):
            raise ValueError(f"coordinates (rank={rank}, bank={bank}, row={row}) outside {self}")


class RefreshScheduler:
    """Round-robin REF slots; slot ``n`` is due at ``floor(n * tREFW / slots)``.

    Every slot refreshes ``rows_per_bank // slots`` consecutive rows in every
    bank of the rank, so each row is refreshed exactly once per ``tREFW``.
    """

    def __init__(self, trefw_ns: int = DDR4_TREFW_NS, slots: int = DDR4_REF_SLOTS,
                 rows_per_bank: int = 1 << 17):
        if slots < 1 or rows_per_bank % slots:
            raise ValueError(f"{rows_per_bank} rows do not split into {slots} slots")
        self.trefw_ns = trefw_ns
        self.slots = slots
        self.rows_per_slot = rows_per_bank // slots
        self.fired = 0
        self.time = 0

    @property
    def pointer(self) -> int:
        return self.fired % self.slots

    def deadline(self, n: int) -> int:
        return n * self.trefw_ns // self.slots

    @property
    def next_deadline(self) -> int:
        return self.deadline(self.fired)

    def first_refresh_of(self, row: int) -> int:
        """Deadline of the first REF slot covering ``row``."""
        return self.deadline(row // self.rows_per_slot)

    def advance_to(self, time_ns: int) -> list[int]:
        """Fire every slot due strictly before ``time_ns``; return their indices."""
        if time_ns < self.time:
            raise ValueError(f"time regression: {time_ns} < {self.time}")
        self.time = time_ns
        out = []
        while self.deadline(self.fired) < time_ns:
            out.append(self.fired % self.slots)
            self.fired += 1
        return out


class Violation(NamedTuple):
    kind: str  # "exposure" or "underestimate"
    bank: int
    row: int
    victim: int | None
    value: int
    limit: int
    time_ns: int


@dataclass
class AuditReport:
    violations: list[Violation] = field(default_factory=list)
    max_exposure: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations


class ExposureOracle:
    """Ground-truth per-(aggressor, victim) activation counts for one rank.

    Refreshes are stamped with a monotonically increasing tick. An exposure
    entry is stale, and counts as zero, once its victim has a refresh tick
    newer than the entry's last update. Entries are never swept eagerly.
    """

    def __init__(self, banks: int, rows_per_bank: int, rows_per_slot: int,
                 blast_radius: int = 1, n_rh: int = 1000):
        self.banks = banks
        self.rows_per_bank = rows_per_bank
        self.rows_per_slot = rows_per_slot
        self.blast_radius = blast_radius
        self.n_rh = n_rh
        self._width = 2 * blast_radius + 1
        self._tick = 0
        self._slot_tick = [-1] * (rows_per_bank // rows_per_slot)
        self._rank_tick = -1
        self._row_tick: list[dict[int, int]] = [{} for _ in range(banks)]
        # key a * width + (v - a + radius) -> (count, stamp) packed as count | stamp << 32
        self._exposure: list[dict[int, int]] = [{} for _ in range(banks)]
        self.true_counts: list[dict[int, int]] = [{} for _ in range(banks)]
        self.max_exposure = 0
        self.total_acts = 0
        self.n_exposure_violations = 0
        # details of the first few only
        self.exposure_violations: list[tuple[int, int, int, int]] = []
        self.max_logged = 100

    def _last_refresh(self, bank: int, v: int) -> int:
        t = self._slot_tick[v // self.rows_per_slot]
        if self._rank_tick > t:
            t = self._rank_tick
        p = self._row_tick[bank].get(v, -1)
        return p if p > t else t

    def exposure(self, bank: int, aggressor: int, victim: int) -> int:
        d = victim - aggressor
        if d == 0 or abs(d) > self.blast_radius:
            return 0
        packed = self._exposure[bank].get(aggressor * self._width + d + self.blast_radius)
        if packed is None or (packed >> 32) < self._last_refresh(bank, victim):
            return 0
        return packed & 0xFFFFFFFF

    def max_exposure_of(self, bank: int, aggressor: int) -> int:
        r = self.blast_radius
        return max((self.exposure(bank, aggressor, v)
                    for v in range(aggressor - r, aggressor + r + 1)
                    if v != aggressor and 0 <= v < self.rows_per_bank), default=0)

    def record_act(self, bank: int, row: int) -> int:
        """Count one activation of ``row``; return the largest resulting exposure."""
        self.total_acts += 1
        tc = self.true_counts[bank]
        tc[row] = tc.get(row, 0) + 1
        exp = self._exposure[bank]
        tick = self._tick
        r = self.blast_radius
        base = row * self._width + r
        rank_tick = self._rank_tick
        slot_tick = self._slot_tick
        row_tick = self._row_tick[bank]
        rps = self.rows_per_slot
        worst = 0
        for d in range(-r, r + 1):
            if d == 0:
                continue
            v = row + d
            if v < 0 or v >= self.rows_per_bank:
                continue
            lr = slot_tick[v // rps]
            if rank_tick > lr:
                lr = rank_tick
            p = row_tick.get(v, -1)
            if p > lr:
                lr = p
            key = base + d
            packed = exp.get(key)
            if packed is None or (packed >> 32) < lr:
                count = 1
            else:
                count = (packed & 0xFFFFFFFF) + 1
            exp[key] = count | (tick << 32)
            if count > worst:
                worst = count
        if worst > self.max_exposure:
            self.max_exposure = worst
        if worst >= self.n_rh:
            self.n_exposure_violations += 1
            if len(self.exposure_violations) < self.max_logged:
                self.exposure_violations.append((bank, row, worst, self.total_acts))
        return worst

    def refresh_slot(self, slot: int) -> None:
        self._tick += 1
        self._slot_tick[slot] = self._tick

    def refresh_rows(self, bank: int, rows: Iterable[int]) -> None:
        self._tick += 1
        rt = self._row_tick[bank]
        for v in rows:
            rt[v] = self._tick

    def refresh_all(self) -> None:
        self._tick += 1
        self._rank_tick = self._tick

    def forget_row(self, bank: int, row: int) -> None:
        """The tracker restarted counting ``row`` (it triggered a refresh)."""
        self.true_counts[bank].pop(row, None)

    def forget_all(self) -> None:
        """Every tracker of the rank was reset."""
        for tc in self.true_counts:
            tc.clear()

    def true_count(self, bank: int, row: int) -> int:
        return self.true_counts[bank].get(row, 0)

    def prune(self) -> None:
        """Drop stale exposure entries to bound memory."""
        r = self.blast_radius
        w = self._width
        for bank, exp in enumerate(self._exposure):
            if not exp:
                continue
            stale = []
            for key, packed in exp.items():
                a, off = divmod(key, w)
                if (packed >> 32) < self._last_refresh(bank, a + off - r):
                    stale.append(key)
            for key in stale:
                del exp[key]
            if self._rank_tick >= 0:
                rt = self._row_tick[bank]
                for v in [v for v, t in rt.items() if t <= self._rank_tick]:
                    del rt[v]


class DramModel:
    """One rank: refresh schedule plus exposure oracle."""

    def __init__(self, geometry: Geometry | None = None, n_rh: int = 1000,
                 blast_radius: int = 1, trefw_ns: int = DDR4_TREFW_NS,
                 slots: int = DDR4_REF_SLOTS):
        self.geometry = geometry = geometry or Geometry()
        self.scheduler = RefreshScheduler(trefw_ns, slots, geometry.rows_per_bank)
        self.oracle = ExposureOracle(
            geometry.banks_per_rank, geometry.rows_per_bank,
            self.scheduler.rows_per_slot, blast_radius, n_rh,
        )
        self.time = 0
        self.ref_commands = 0
        self.victim_refreshes = 0
        self.refresh_log: list[tuple[int, int, tuple[int, ...]]] = []
        self.log_refreshes = False

    @property
    def n_rh(self) -> int:
        return self.oracle.n_rh

    def advance_to(self, time_ns: int) -> list[tuple[int, int, int]]:
        """Fire due REF slots; return refreshed ``(bank, first_row, stop_row)`` ranges."""
        slots = self.scheduler.advance_to(time_ns)
        self.time = time_ns
        out = []
        rps = self.scheduler.rows_per_slot
        for s in slots:
            self.oracle.refresh_slot(s)
            self.ref_commands += 1
            lo = s * rps
            out.extend((b, lo, lo + rps) for b in range(self.geometry.banks_per_rank))
        return out

    def record_act(self, bank: int, row: int, time_ns: int | None = None) -> int:
        if not (0 <= bank < self.geometry.banks_per_rank and 0 <= row < self.geometry.rows_per_bank):
            raise ValueError(f"bank {bank} / row {row} out of range")
        if time_ns is not None and time_ns != self.time:
            self.advance_to(time_ns)
        return self.oracle.record_act(bank, row)

    def apply_preventive_refresh(self, bank: int, victims: Iterable[int],
                                 aggressor: int | None = None) -> None:
        victims = tuple(victims)
        for v in victims:
            if not 0 <= v < self.geometry.rows_per_bank:
                raise ValueError(f"victim row {v} out of range")
        self.oracle.refresh_rows(bank, victims)
        self.victim_refreshes += len(victims)
        if aggressor is not None:
            self.oracle.forget_row(bank, aggressor)
        if self.log_refreshes:
            self.refresh_log.append((self.time, bank, victims))

    def apply_rank_refresh(self, ref_commands: int | None = None) -> int:
        """Refresh every row of the rank at once (early preventive refresh)."""
        n = self.scheduler.slots if ref_commands is None else ref_commands
        self.oracle.refresh_all()
        self.oracle.forget_all()
        self.ref_commands += n
        return n

    def tracker_reset(self) -> None:
        self.oracle.forget_all()

    def audit(self, tracker_estimates: Iterable[tuple[int, int, int]] = ()) -> AuditReport:
        """Check exposures and ``(bank, row, estimate)`` triples against ground truth."""
        report = AuditReport(max_exposure=self.oracle.max_exposure)
        for bank, row, worst, _ in self.oracle.exposure_violations:
            report.violations.append(
                Violation("exposure", bank, row, None, worst, self.n_rh, self.time))
        for bank, row, est in tracker_estimates:
            truth = self.oracle.true_count(bank, row)
            if est < truth:
                report.violations.append(
                    Violation("underestimate", bank, row, None, est, truth, self.time))
        return report
