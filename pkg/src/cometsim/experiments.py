"""Replay traces through trackers and the DRAM model; storage and FP studies.

:func:`run` is the harness every experiment goes through. It replays ACTs in
time order, fires REF slots and periodic counter resets between them,
applies tracker decisions to the DRAM model, and collects :class:`RunStats`.
With ``audit=True`` it checks the tracker's estimate of every activated row
against ground truth and stops at the first violation.
"""

from __future__ import annotations

import csv
import io
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, NamedTuple, Sequence

from .baselines import (
    CbfTracker,
    MisraGriesTracker,
    NullTracker,
    ParaTracker,
    PerRowOracleTracker,
    graphene_entries,
    para_probability,
    shared_hash_family,
)
from .dram import DramModel, Geometry, Violation
from .sketch import HashFamily, SketchTable
from .tracker import (
    DDR4_REF_SLOTS,
    CometBankTracker,
    CometConfig,
    PreventiveRefresh,
    apply_early_refresh,
    reset_deadline,
)
from .traces import Trace

TRACKERS = ("comet", "perrow", "graphene", "para", "cbf", "none")

CSV_COLUMNS = (
    "config_id", "tracker", "trace", "total_acts", "prev_refreshes", "early_refreshes",
    "ref_cmds", "rat_hits", "rat_cap_miss", "rat_comp_miss", "unnecessary",
    "underestimates", "max_exposure",
)


def make_tracker(kind: str, config: CometConfig, seed: int = 0,
                 graphene_table: int | None = None, para_p: float | None = None,
                 hash_family: HashFamily | None = None):
    """Build one bank tracker of the given kind."""
    n_pr = config.n_pr
    br = config.blast_radius
    rows = config.rows_per_bank
    if kind == "comet":
        return CometBankTracker(config, seed=seed, hash_family=hash_family)
    if kind == "perrow":
        return PerRowOracleTracker(n_pr, br, rows)
    if kind == "graphene":
        n = graphene_table or graphene_entries(n_pr, config.k_reset)
        return MisraGriesTracker(n, n_pr, br, rows)
    if kind == "para":
        p = para_p if para_p is not None else para_probability(config.n_rh)
        return ParaTracker(p, seed, br, rows)
    if kind == "cbf":
        return CbfTracker(n_pr, config.n_hash, config.n_counters, None, True, br, rows)
    if kind == "none":
        return NullTracker()
    raise ValueError(f"unknown tracker {kind!r}; choose from {', '.join(TRACKERS)}")


@dataclass
class RunStats:
    tracker: str = "comet"
    trace: str = ""
    total_acts: int = 0
    preventive_refreshes: int = 0
    victim_refreshes: int = 0
    mitigation_acts: int = 0
    early_refreshes: int = 0
    ref_commands_issued: int = 0
    periodic_resets: int = 0
    rat_hits: int = 0
    rat_compulsory_misses: int = 0
    rat_capacity_misses: int = 0
    rat_evictions: int = 0
    unnecessary_refreshes: int = 0
    underestimates: int = 0
    exposure_violations: int = 0
    max_exposure: int = 0
    aborted: bool = False
    violations: list[Violation] = field(default_factory=list)
    per_bank: dict[tuple[int, int], dict[str, int]] = field(default_factory=dict)
    refresh_log: list[tuple[int, int, int, int, str]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.underestimates == 0 and self.exposure_violations == 0

    def csv_row(self, config_id: str = "") -> dict[str, object]:
        return {
            "config_id": config_id,
            "tracker": self.tracker,
            "trace": self.trace,
            "total_acts": self.total_acts,
            "prev_refreshes": self.preventive_refreshes,
            "early_refreshes": self.early_refreshes,
            "ref_cmds": self.ref_commands_issued,
            "rat_hits": self.rat_hits,
            "rat_cap_miss": self.rat_capacity_misses,
            "rat_comp_miss": self.rat_compulsory_misses,
            "unnecessary": self.unnecessary_refreshes,
            "underestimates": self.underestimates,
            "max_exposure": self.max_exposure,
        }

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "VIOLATION"
        return (f"{self.tracker} on {self.trace}: {self.total_acts} ACTs, "
                f"{self.preventive_refreshes} preventive refreshes "
                f"({self.unnecessary_refreshes} unnecessary), "
                f"{self.early_refreshes} early refreshes, {self.ref_commands_issued} REF, "
                f"max exposure {self.max_exposure}, {self.underestimates} underestimates, "
                f"{self.exposure_violations} exposure violations -> {verdict}")


def write_csv(rows: Iterable[dict], out=None, comment: str | None = None) -> str:
    """Write rows with the fixed column set; returns the text if ``out`` is None."""
    buf = io.StringIO() if out is None else out
    if comment:
        for line in comment.splitlines():
            buf.write(f"# {line}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue() if out is None else ""


class _Rank:
    __slots__ = ("model", "trackers", "reset_origin", "reset_n", "next_reset")

    def __init__(self, model, trackers, trefw, k):
        self.model = model
        self.trackers = trackers
        self.reset_origin = 0
        self.reset_n = 1
        self.next_reset = reset_deadline(1, trefw, k)


def run(trace: Trace, tracker: str = "comet", config: CometConfig | None = None,
        geometry: Geometry | None = None, audit: bool = False, seed: int | None = None,
        record_refreshes: bool = False, slots: int = DDR4_REF_SLOTS,
        graphene_table: int | None = None, para_p: float | None = None,
        hash_family: HashFamily | None = None) -> RunStats:
    """Replay ``trace`` through one tracker per bank and the DRAM oracle."""
    config = config or CometConfig()
    geometry = geometry or Geometry(rows_per_bank=config.rows_per_bank)
    if geometry.rows_per_bank != config.rows_per_bank:
        raise ValueError(f"geometry has {geometry.rows_per_bank} rows per bank but "
                         f"config row_bits={config.row_bits}")
    trace.check_geometry(geometry)
    seed = config.rng_seed if seed is None else seed
    trefw, k = config.trefw_ns, config.k_reset
    n_pr = config.n_pr
    feedback = config.count_mitigation_acts

    ranks = []
    for r in range(geometry.ranks):
        model = DramModel(geometry, config.n_rh, config.blast_radius, trefw, slots)
        trackers = [make_tracker(tracker, config, seed * 7919 + r * 1009 + b,
                                 graphene_table, para_p, hash_family)
                    for b in range(geometry.banks_per_rank)]
        ranks.append(_Rank(model, trackers, trefw, k))

    stats = RunStats(tracker=tracker, trace=trace.name)
    prev_per_bank = [[0] * geometry.banks_per_rank for _ in range(geometry.ranks)]
    log = stats.refresh_log if record_refreshes else None

    def next_event() -> int:
        return min(min(rk.model.scheduler.next_deadline, rk.next_reset) for rk in ranks)

    def fire(t: int) -> None:
        for rk in ranks:
            rk.model.advance_to(t)
            if rk.next_reset < t:
                while rk.next_reset < t:
                    rk.reset_n += 1
                    rk.next_reset = rk.reset_origin + reset_deadline(rk.reset_n, trefw, k)
                stats.periodic_resets += 1
                for tr in rk.trackers:
                    tr.reset()
                rk.model.tracker_reset()
                rk.model.oracle.prune()

    def apply(rk: _Rank, r: int, b: int, d, t: int, act_index: int) -> None:
        model = rk.model
        if type(d) is PreventiveRefresh:
            stats.preventive_refreshes += 1
            prev_per_bank[r][b] += 1
            if model.oracle.true_count(b, d.aggressor) < n_pr:
                stats.unnecessary_refreshes += 1
            model.apply_preventive_refresh(b, d.victims, aggressor=d.aggressor)
            if log is not None:
                log.append((act_index, r, b, d.aggressor, "preventive"))
            if feedback:
                tr = rk.trackers[b]
                for v in d.victims:
                    stats.mitigation_acts += 1
                    model.oracle.record_act(b, v)
                    d2 = tr.on_activation(v)
                    if d2 is not None:
                        apply(rk, r, b, d2, t, act_index)
        else:
            stats.early_refreshes += 1
            n = apply_early_refresh(rk.trackers, model.scheduler.slots)
            model.apply_rank_refresh(n)
            rk.reset_origin = t
            rk.reset_n = 1
            rk.next_reset = t + reset_deadline(1, trefw, k)
            if log is not None:
                log.append((act_index, r, b, d.aggressor, "early"))

    horizon = next_event()
    act_index = 0
    stop = False
    for chunk in trace.iter_chunks():
        for t, r, b, row in chunk:
            if t > horizon:
                fire(t)
                horizon = next_event()
            act_index += 1
            rk = ranks[r]
            oracle = rk.model.oracle
            oracle.record_act(b, row)
            tr = rk.trackers[b]
            d = tr.on_activation(row)
            if d is not None:
                apply(rk, r, b, d, t, act_index)
                horizon = next_event()
            if audit:
                est = tr.estimate(row)
                checks = [(row, est)]
                ev = getattr(tr, "last_evicted", None)
                if ev is not None:
                    checks.append((ev, tr.estimate(ev)))
                for rr, e in checks:
                    if e is not None and e < oracle.true_count(b, rr):
                        stats.underestimates += 1
                        stats.violations.append(Violation(
                            "underestimate", b, rr, None, e, oracle.true_count(b, rr), t))
                if oracle.n_exposure_violations or stats.underestimates:
                    stop = True
                    break
        if stop:
            stats.aborted = True
            break

    stats.total_acts = act_index
    for ri, rk in enumerate(ranks):
        o = rk.model.oracle
        stats.exposure_violations += o.n_exposure_violations
        stats.max_exposure = max(stats.max_exposure, o.max_exposure)
        stats.ref_commands_issued += rk.model.ref_commands
        stats.victim_refreshes += rk.model.victim_refreshes
        for bank, row, worst, _ in o.exposure_violations:
            if len(stats.violations) < 100:
                stats.violations.append(
                    Violation("exposure", bank, row, None, worst, config.n_rh, rk.model.time))
        for tr in rk.trackers:
            if isinstance(tr, CometBankTracker):
                stats.rat_hits += tr.rat_hits
                stats.rat_compulsory_misses += tr.compulsory_misses
                stats.rat_capacity_misses += tr.capacity_misses
                stats.rat_evictions += tr.evictions
    for (r, b), n in trace.per_bank_counts().items():
        stats.per_bank[(r, b)] = {"acts": n, "prev_refreshes": prev_per_bank[r][b]}
    return stats


# ---------------------------------------------------------------- storage model

class StorageCost(NamedTuple):
    ct_kib: float
    rat_kib: float
    total_kib: float


def storage_model(config: CometConfig | None = None, banks: int = 32) -> StorageCost:
    """Counter Table and RAT storage for ``banks`` banks (default: 2 ranks x 16)."""
    config = config or CometConfig()
    w = config.n_pr.bit_length()  # ceil(log2(N_PR + 1))
    ct_bits = banks * config.n_hash * config.n_counters * w
    rat_bits = banks * config.n_rat_entries * (config.row_bits + w)
    ct = ct_bits / 8 / 1024
    rat = rat_bits / 8 / 1024
    return StorageCost(round(ct, 1), round(rat, 1), round(ct + rat, 1))


# ------------------------------------------------------------- FP experiment

class FpResult(NamedTuple):
    fp_comet: float
    fp_cbf: float
    rows_evaluated: int

    @property
    def relative_reduction(self) -> float:
        """How much smaller the partitioned rate is, as a fraction of the shared rate."""
        if self.fp_cbf == 0:
            return float("nan")
        return 1.0 - self.fp_comet / self.fp_cbf


def _fp_stream(unique_rows: int, total_acts: int, rng: random.Random, row_space: int):
    rows = rng.sample(range(row_space), unique_rows)
    base, extra = divmod(total_acts, unique_rows)
    truth = {r: base + (1 if i < extra else 0) for i, r in enumerate(rows)}
    stream = [r for r, c in truth.items() for _ in range(c)]
    rng.shuffle(stream)
    return {r: c for r, c in truth.items() if c}, stream


def fp_experiment(unique_rows: int, total_acts: int = 10_000, threshold: int = 125,
                  trials: int = 100, seed: int = 0, predicate: str = "threshold",
                  n_hash: int = 4, n_counters: int = 512, row_space: int = 1 << 17,
                  cbf_conservative: bool = True, comet_family: HashFamily | None = None,
                  cbf_family: HashFamily | None = None) -> FpResult:
    """False-positive rates of the partitioned and shared (counting Bloom filter) layouts.

    Each trial spreads ``total_acts`` as evenly as possible over
    ``unique_rows`` random rows, shuffles them into one stream, and counts
    it in both layouts (no RAT, no resets, counters do not saturate). A
    touched row is a false positive when

    * ``predicate="threshold"``: its estimate is ``>= threshold`` while its
      true count is below ``threshold``;
    * ``predicate="overestimate"``: its estimate exceeds its true count.
    """
    if unique_rows < 1:
        raise ValueError("unique_rows must be >= 1")
    if predicate not in ("threshold", "overestimate"):
        raise ValueError(f"unknown predicate {predicate!r}")
    rng = random.Random(seed)
    cap = max(total_acts, threshold) + 1
    fp = [0, 0]
    evaluated = 0
    for _ in range(trials):
        truth, stream = _fp_stream(unique_rows, total_acts, rng, row_space)
        tables = (
            SketchTable(n_hash, n_counters, cap, comet_family),
            SketchTable(n_hash, n_counters, cap, cbf_family or shared_hash_family(n_hash, n_counters),
                        shared=True, conservative=cbf_conservative),
        )
        for i, tab in enumerate(tables):
            inc = tab.increment
            for r in stream:
                inc(r)
            est = tab.estimate
            if predicate == "threshold":
                fp[i] += sum(1 for r, c in truth.items() if c < threshold <= est(r))
            else:
                fp[i] += sum(1 for r, c in truth.items() if est(r) > c)
        evaluated += len(truth)
    return FpResult(fp[0] / evaluated, fp[1] / evaluated, evaluated)


# ------------------------------------------------------------------- sweeps

SWEEP_AXES = {
    "ct": ("n_hash", "n_counters"),
    "rat": ("n_rat_entries",),
    "history": ("history_len", "eprt_fraction"),
    "k": ("k_reset",),
}

DEFAULT_GRIDS = {
    "ct": [(h, c) for h in (1, 2, 4, 8) for c in (128, 256, 512, 1024)],
    "rat": [(n,) for n in (16, 32, 64, 128, 256, 512)],
    "history": [(h, e) for h in (64, 128, 256, 512) for e in (0.25, 0.5, 0.75, 1.0)],
    "k": [(k,) for k in (1, 2, 3, 4, 5)],
}


def sweep_configs(axis: str, grid: Sequence, base: CometConfig) -> list[tuple[str, CometConfig]]:
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
    if not grid:
        raise ValueError("grid must be non-empty")
    names = SWEEP_AXES[axis]
    out = []
    for point in grid:
        point = point if isinstance(point, (tuple, list)) else (point,)
        if len(point) != len(names):
            raise ValueError(f"axis {axis} expects {len(names)} values per point, got {point}")
        cfg = replace(base, **dict(zip(names, point)))
        cid = axis + "-" + "-".join(f"{n}={v}" for n, v in zip(names, point))
        out.append((cid, cfg))
    return out


def _sweep_job(args):
    cid, cfg, trace, tracker, geometry = args
    return run(trace, tracker, cfg, geometry).csv_row(cid)


def sweep(axis: str, grid: Sequence, traces: Sequence[Trace], base: CometConfig | None = None,
          tracker: str = "comet", geometry: Geometry | None = None,
          jobs: int = 1) -> list[dict[str, object]]:
    """One run per (grid point, trace); rows in CSV column order."""
    base = base or CometConfig()
    jobs_args = [(cid, cfg, t, tracker, geometry)
                 for cid, cfg in sweep_configs(axis, grid, base) for t in traces]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            return list(ex.map(_sweep_job, jobs_args))
    return [_sweep_job(a) for a in jobs_args]


def config_dict(config: CometConfig) -> dict[str, object]:
    return asdict(config)


# -------------------------------------------------------- adversarial suite

SUITE_KINDS = ("uniform", "hammer", "thrash", "straddle", "mix")


class SuiteCase(NamedTuple):
    kind: str
    config: CometConfig
    geometry: Geometry
    trace: Trace


def audit_suite(n_rh_values: Sequence[int] = (125, 250, 500, 1000), kinds: Sequence[str] = SUITE_KINDS,
                scale: float = 1.0, seed: int = 0, base: CometConfig | None = None):
    """Yield the adversarial cases, about 3.2M ACTs per threshold at ``scale=1``.

    Traces are built lazily so only one is in memory at a time.
    """
    from . import traces as T

    base = base or CometConfig()
    for kind in kinds:
        if kind not in SUITE_KINDS:
            raise ValueError(f"unknown suite {kind!r}; choose from all, {', '.join(SUITE_KINDS)}")
    full = Geometry(rows_per_bank=base.rows_per_bank)
    one_bank = Geometry(1, 1, base.rows_per_bank)

    def n(x):
        return max(1, int(x * scale))

    for n_rh in n_rh_values:
        cfg = replace(base, n_rh=n_rh)
        n_pr = cfg.n_pr
        if "uniform" in kinds:
            yield SuiteCase("uniform", cfg, full, T.gen_uniform(full, n(500_000) * 20, 20, 1000, seed))
        if "hammer" in kinds:
            # one bank at the full attack rate for a quarter of the refresh window
            yield SuiteCase("hammer", cfg, one_bank, T.gen_hammer(one_bank, 16, 20, n(800_000) * 20))
            yield SuiteCase("hammer", cfg, full,
                            T.gen_hammer(full, 32, 20, n(500_000) * 20, layout="double_sided"))
        if "thrash" in kinds:
            yield SuiteCase("thrash", cfg, full, T.gen_rat_thrash(full, 256, n_pr, 20, n(500_000) * 20))
            yield SuiteCase("thrash", cfg, one_bank,
                            T.gen_rat_thrash(one_bank, 300, n_pr, 20, n(400_000) * 20, spacing=3))
        if "straddle" in kinds:
            for row in (0, 1000, 77_777, cfg.rows_per_bank - 1):
                yield SuiteCase("straddle", cfg, one_bank, T.gen_reset_straddle(cfg, row))
            yield SuiteCase("straddle", cfg, one_bank, T.gen_reset_straddle(cfg, 1000, burst_len=n_pr))
        if "mix" in kinds:
            yield SuiteCase("mix", cfg, full, T.gen_random_mix(full, n(500_000), seed + n_rh))
