"""Activation traces: container, text I/O and deterministic generators.

On disk a trace is ASCII text with one ACT per line::

    <time_ns> <rank> <bank> <row>

Lines starting with ``#`` are comments. A ``.gz`` suffix means gzip.
"""

from __future__ import annotations

import gzip
import io
import os
from typing import Iterator, NamedTuple

import numpy as np

from .baselines import ACTS_PER_BANK_PER_TREFW
from .dram import Geometry, RefreshScheduler
from .tracker import DDR4_REF_SLOTS, DDR4_TREFW_NS, CometConfig, reset_deadline

# Minimum spacing between two ACTs to the same bank.
MIN_BANK_INTERVAL_NS = 20


class TraceEvent(NamedTuple):
    time_ns: int
    rank: int
    bank: int
    row: int


class TraceFormatError(ValueError):
    pass


class Trace:
    """Time-ordered ACT events stored column-wise in int64 arrays."""

    def __init__(self, time_ns, rank, bank, row, name: str = "trace"):
        self.time_ns = np.asarray(time_ns, dtype=np.int64)
        self.rank = np.asarray(rank, dtype=np.int64)
        self.bank = np.asarray(bank, dtype=np.int64)
        self.row = np.asarray(row, dtype=np.int64)
        n = len(self.time_ns)
        if not len(self.rank) == len(self.bank) == len(self.row) == n:
            raise ValueError("trace columns differ in length")
        if n and (self.time_ns[0] < 0 or np.any(np.diff(self.time_ns) < 0)):
            raise ValueError("trace timestamps must be non-negative and non-decreasing")
        self.name = name

    @classmethod
    def from_events(cls, events, name: str = "trace") -> "Trace":
        arr = np.array(list(events), dtype=np.int64).reshape(-1, 4)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], name=name)

    @classmethod
    def empty(cls, name: str = "trace") -> "Trace":
        return cls([], [], [], [], name=name)

    def __len__(self) -> int:
        return len(self.time_ns)

    def __iter__(self) -> Iterator[TraceEvent]:
        for chunk in self.iter_chunks():
            for ev in chunk:
                yield TraceEvent(*ev)

    def iter_chunks(self, size: int = 1 << 16):
        """Yield lists of plain ``(time, rank, bank, row)`` tuples."""
        for lo in range(0, len(self), size):
            hi = lo + size
            yield list(zip(self.time_ns[lo:hi].tolist(), self.rank[lo:hi].tolist(),
                           self.bank[lo:hi].tolist(), self.row[lo:hi].tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return all(np.array_equal(getattr(self, c), getattr(other, c))
                   for c in ("time_ns", "rank", "bank", "row"))

    def __repr__(self) -> str:
        return f"Trace({self.name!r}, {len(self)} events)"

    @property
    def duration_ns(self) -> int:
        return int(self.time_ns[-1]) if len(self) else 0

    def shifted(self, offset_ns: int) -> "Trace":
        return Trace(self.time_ns + offset_ns, self.rank, self.bank, self.row, self.name)

    def check_geometry(self, geometry: Geometry) -> None:
        if not len(self):
            return
        if (self.rank.min() < 0 or self.rank.max() >= geometry.ranks
                or self.bank.min() < 0 or self.bank.max() >= geometry.banks_per_rank
                or self.row.min() < 0 or self.row.max() >= geometry.rows_per_bank):
            raise ValueError(f"{self!r} does not fit {geometry}")

    def per_bank_counts(self) -> dict[tuple[int, int], int]:
        keys, counts = np.unique(np.stack([self.rank, self.bank]), axis=1, return_counts=True)
        return {(int(r), int(b)): int(c) for (r, b), c in zip(keys.T, counts)}

    def min_bank_interval(self) -> int | None:
        """Smallest time gap between two ACTs to the same bank."""
        best = None
        for (r, b) in self.per_bank_counts():
            t = self.time_ns[(self.rank == r) & (self.bank == b)]
            if len(t) > 1:
                gap = int(np.diff(t).min())
                best = gap if best is None else min(best, gap)
        return best


def merge(*traces: Trace, name: str = "merged") -> Trace:
    """Interleave traces by timestamp (stable)."""
    if not traces:
        return Trace.empty(name)
    cols = [np.concatenate([getattr(t, c) for t in traces])
            for c in ("time_ns", "rank", "bank", "row")]
    order = np.argsort(cols[0], kind="stable")
    return Trace(*(c[order] for c in cols), name=name)


def concat(*traces: Trace, gap_ns: int = 0, name: str = "concat") -> Trace:
    """Play traces back to back, each starting ``gap_ns`` after the previous ends."""
    out = []
    t0 = 0
    for t in traces:
        if not len(t):
            continue
        s = t.shifted(t0 - int(t.time_ns[0]))
        out.append(s)
        t0 = s.duration_ns + gap_ns
    return merge(*out, name=name) if out else Trace.empty(name)


def _open(path, mode: str):
    path = os.fspath(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode + "t", encoding="ascii", newline="\n")
    return open(path, mode, encoding="ascii", newline="\n")


def write_trace(trace: Trace, path, header: str | None = None) -> None:
    with _open(path, "w") as f:
        if header:
            for line in header.splitlines():
                f.write(f"# {line}\n")
        buf = io.StringIO()
        for chunk in trace.iter_chunks():
            buf.seek(0)
            buf.truncate()
            buf.writelines(f"{t} {r} {b} {w}\n" for t, r, b, w in chunk)
            f.write(buf.getvalue())


def read_trace(path, name: str | None = None) -> Trace:
    cols: list[list[int]] = [[], [], [], []]
    last = 0
    with _open(path, "r") as f:
        for lineno, line in enumerate(f, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 4:
                raise TraceFormatError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
            try:
                vals = [int(p) for p in parts]
            except ValueError:
                raise TraceFormatError(f"{path}:{lineno}: non-integer field in {s!r}") from None
            if min(vals) < 0:
                raise TraceFormatError(f"{path}:{lineno}: negative field in {s!r}")
            if vals[0] < last:
                raise TraceFormatError(f"{path}:{lineno}: timestamp {vals[0]} goes backwards")
            last = vals[0]
            for c, v in zip(cols, vals):
                c.append(v)
    if name is None:
        name = os.path.basename(os.fspath(path))
    return Trace(*cols, name=name)


def _bank_coords(geometry: Geometry):
    ranks = np.repeat(np.arange(geometry.ranks), geometry.banks_per_rank)
    banks = np.tile(np.arange(geometry.banks_per_rank), geometry.ranks)
    return ranks, banks


def _check_spacing(geometry: Geometry, act_interval_ns: int) -> None:
    if act_interval_ns < 1:
        raise ValueError("act_interval_ns must be positive")
    if act_interval_ns * geometry.n_banks < MIN_BANK_INTERVAL_NS:
        raise ValueError(
            f"{act_interval_ns} ns round-robin over {geometry.n_banks} banks puts ACTs to one "
            f"bank closer than {MIN_BANK_INTERVAL_NS} ns")


def gen_uniform(geometry: Geometry, duration_ns: int, act_interval_ns: int,
                unique_rows: int, seed: int = 0) -> Trace:
    """Fixed-rate ACTs round-robin over banks; rows uniform over a random per-bank subset."""
    if unique_rows < 1:
        raise ValueError("unique_rows must be >= 1")
    if unique_rows > geometry.rows_per_bank:
        raise ValueError(f"unique_rows={unique_rows} exceeds {geometry.rows_per_bank} rows per bank")
    _check_spacing(geometry, act_interval_ns)
    rng = np.random.default_rng(seed)
    n = duration_ns // act_interval_ns
    nb = geometry.n_banks
    subsets = np.stack([rng.choice(geometry.rows_per_bank, unique_rows, replace=False)
                        for _ in range(nb)])
    idx = np.arange(n)
    which = idx % nb
    rows = subsets[which, rng.integers(0, unique_rows, n)]
    ranks, banks = _bank_coords(geometry)
    return Trace(idx * act_interval_ns, ranks[which], banks[which], rows,
                 name=f"uniform-u{unique_rows}-s{seed}")


def hammer_rows(geometry: Geometry, n_aggressors: int, layout: str = "spread") -> np.ndarray:
    """Aggressor rows for :func:`gen_hammer`.

    ``spread`` places aggressors evenly across the bank; ``double_sided``
    places them in adjacent pairs ``v - 1, v + 1`` around spread-out victims.
    """
    rows = geometry.rows_per_bank
    if layout == "spread":
        step = rows // n_aggressors
        return np.arange(n_aggressors) * step + step // 2
    if layout == "double_sided":
        pairs = (n_aggressors + 1) // 2
        step = rows // pairs
        victims = np.arange(pairs) * step + step // 2
        return np.stack([victims - 1, victims + 1], axis=1).ravel()[:n_aggressors]
    raise ValueError(f"unknown hammer layout {layout!r}")


def gen_hammer(geometry: Geometry, n_aggressors: int, act_interval_ns: int = 20,
               duration_ns: int = DDR4_TREFW_NS, layout: str = "spread",
               rows=None) -> Trace:
    """Traditional attack: one ACT every ``act_interval_ns``, round-robin over all banks,
    each bank cycling through its ``n_aggressors`` rows."""
    if n_aggressors < 1:
        raise ValueError("n_aggressors must be >= 1")
    _check_spacing(geometry, act_interval_ns)
    aggr = np.asarray(rows, dtype=np.int64) if rows is not None else \
        hammer_rows(geometry, n_aggressors, layout)
    if len(aggr) != n_aggressors or aggr.min() < 0 or aggr.max() >= geometry.rows_per_bank:
        raise ValueError("bad aggressor rows")
    n = duration_ns // act_interval_ns
    nb = geometry.n_banks
    idx = np.arange(n)
    which = idx % nb
    ranks, banks = _bank_coords(geometry)
    return Trace(idx * act_interval_ns, ranks[which], banks[which],
                 aggr[(idx // nb) % n_aggressors], name=f"hammer-a{n_aggressors}-{layout}")


def hammerable_rows(trace: Trace, n_rh: int, trefw_ns: int = DDR4_TREFW_NS) -> float:
    """Most rows any bank of ``trace`` could drive to ``n_rh`` ACTs in one refresh window."""
    if not len(trace):
        return 0.0
    per_bank = max(trace.per_bank_counts().values())
    window = max(trace.duration_ns, 1)
    return per_bank * min(1.0, trefw_ns / window) / n_rh


def budget_hammerable_rows(n_rh: int) -> float:
    return ACTS_PER_BANK_PER_TREFW / n_rh


def gen_rat_thrash(geometry: Geometry, n_aggressors: int, n_pr: int,
                   act_interval_ns: int = 20, duration_ns: int = DDR4_TREFW_NS,
                   first_row: int = 0, spacing: int = 2) -> Trace:
    """Targeted attack on the Recent Aggressor Table.

    Each round first drives every aggressor to exactly ``n_pr`` ACTs, one
    aggressor after another, so every aggressor needs a RAT entry; then it
    touches every aggressor once more, so aggressors that were evicted miss
    in the RAT with saturated counters. Rounds repeat until ``duration_ns``.
    Aggressors sit ``spacing`` rows apart from ``first_row`` in every bank.
    """
    if n_aggressors < 1 or n_pr < 1:
        raise ValueError("n_aggressors and n_pr must be >= 1")
    _check_spacing(geometry, act_interval_ns)
    aggr = first_row + spacing * np.arange(n_aggressors)
    if aggr[-1] >= geometry.rows_per_bank:
        raise ValueError("aggressors do not fit in the bank")
    one_round = np.concatenate([np.repeat(aggr, n_pr), aggr])
    n = duration_ns // act_interval_ns
    nb = geometry.n_banks
    idx = np.arange(n)
    which = idx % nb
    ranks, banks = _bank_coords(geometry)
    rows = one_round[(idx // nb) % len(one_round)]
    return Trace(idx * act_interval_ns, ranks[which], banks[which], rows,
                 name=f"thrash-a{n_aggressors}-p{n_pr}")


def straddle_schedule(config: CometConfig, target_row: int,
                      slots: int = DDR4_REF_SLOTS) -> tuple[int, int, list[int]]:
    """``(victim, victim refresh time, reset times inside its refresh interval)``."""
    rows = config.rows_per_bank
    if not 0 <= target_row < rows:
        raise ValueError(f"target_row {target_row} out of range")
    victim = target_row + 1 if target_row + 1 < rows else target_row - 1
    sched = RefreshScheduler(config.trefw_ns, slots, rows)
    t_v = sched.first_refresh_of(victim)
    end = t_v + config.trefw_ns
    resets = []
    n = 1
    while (r := reset_deadline(n, config.trefw_ns, config.k_reset)) < end:
        if r > t_v:
            resets.append(r)
        n += 1
    return victim, t_v, resets


def gen_reset_straddle(config: CometConfig, target_row: int = 1000,
                       burst_len: int | None = None, act_interval_ns: int = 20,
                       rank: int = 0, bank: int = 0, slots: int = DDR4_REF_SLOTS) -> Trace:
    """Hammer ``target_row`` just before every counter reset inside one refresh
    interval of its victim, and once more just before the victim's next refresh.

    With the default ``burst_len = N_PR - 1`` no burst reaches the threshold,
    yet the victim collects ``(k + 1) * (N_PR - 1)`` activations.
    """
    if burst_len is None:
        burst_len = config.n_pr - 1
    victim, t_v, resets = straddle_schedule(config, target_row, slots)
    # ACTs at a deadline are processed before the event due then
    ends = resets + [t_v + config.trefw_ns]
    times = []
    for end in ends:
        times.extend(end - act_interval_ns * i for i in range(burst_len - 1, -1, -1))
    if times and times[0] <= t_v:
        raise ValueError("burst does not fit after the victim's refresh")
    n = len(times)
    return Trace(times, [rank] * n, [bank] * n, [target_row] * n,
                 name=f"straddle-nrh{config.n_rh}-k{config.k_reset}-b{burst_len}")


def gen_random_mix(geometry: Geometry, n_events: int, seed: int = 0,
                   act_interval_ns: int = 20, hot_rows: int = 64,
                   hot_fraction: float = 0.5, row_span: int | None = None) -> Trace:
    """Seeded mixture: a hot set of rows per bank hammered in random bursts,
    interleaved with uniformly random background ACTs."""
    _check_spacing(geometry, act_interval_ns)
    rng = np.random.default_rng(seed)
    span = row_span or geometry.rows_per_bank
    nb = geometry.n_banks
    hot = rng.integers(0, span, size=(nb, hot_rows))
    which = rng.integers(0, nb, n_events)
    is_hot = rng.random(n_events) < hot_fraction
    # bursts: consecutive hot ACTs in a bank reuse one row for a random run length
    burst_id = np.cumsum(rng.random(n_events) < 0.05)
    hot_pick = rng.integers(0, hot_rows, burst_id[-1] + 1 if n_events else 1)[burst_id]
    rows = np.where(is_hot, hot[which, hot_pick], rng.integers(0, span, n_events))
    ranks, banks = _bank_coords(geometry)
    # keep per-bank spacing legal by spacing every event by the full interval
    times = np.arange(n_events) * max(act_interval_ns, MIN_BANK_INTERVAL_NS)
    return Trace(times, ranks[which], banks[which], rows, name=f"mix-s{seed}")
