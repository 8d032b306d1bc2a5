"""Command-line front end: ``cometsim <command> [options]``.

Commands: generate, simulate, storage, fpcompare, sweep, audit.
Exit codes: 0 pass, 1 operational error, 2 security violation.

Settings come from, in increasing precedence: built-in defaults, a flat
``key = value`` file given with ``--config``, and command-line flags.
``COMET_SEED`` in the environment supplies the default seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, fields, replace

from . import experiments as ex
from . import traces as T
from .dram import Geometry
from .tracker import CometConfig

EXIT_OK, EXIT_ERROR, EXIT_VIOLATION = 0, 1, 2

# CLI-only keys accepted in config files besides the CometConfig fields
EXTRA_KEYS = ("ranks", "banks_per_rank", "tracker", "trace", "output", "seed", "audit")


class ConfigError(ValueError):
    pass


def _coerce(key: str, text: str, kind):
    if kind is bool or isinstance(kind, bool):
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {text!r}")
    try:
        return kind(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None


@dataclass
class CliConfig:
    comet: CometConfig
    ranks: int = 2
    banks_per_rank: int = 16
    tracker: str = "comet"
    trace: str | None = None
    output: str | None = None
    seed: int = 0
    audit: bool = False

    @property
    def geometry(self) -> Geometry:
        return Geometry(self.ranks, self.banks_per_rank, self.comet.rows_per_bank)

    def header(self) -> str:
        items = [f"{f.name}={getattr(self.comet, f.name)}" for f in fields(CometConfig)]
        # the output path does not affect results, so identical runs echo identical headers
        items += [f"{k}={getattr(self, k)}" for k in EXTRA_KEYS if k != "output"]
        return "config: " + " ".join(items)


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse flat ``key = value`` lines. ``#`` and ``;`` start comments."""
    types = {f.name: type(f.default) for f in fields(CometConfig)}
    types.update(ranks=int, banks_per_rank=int, tracker=str, trace=str, output=str,
                 seed=int, audit=bool)
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value, types[key])
    return out


def load_config(path: str | None = None, overrides: dict | None = None,
                env: dict | None = None) -> CliConfig:
    env = os.environ if env is None else env
    values: dict[str, object] = {}
    if "COMET_SEED" in env:
        values["seed"] = _coerce("COMET_SEED", env["COMET_SEED"], int)
    if path:
        with open(path, encoding="utf-8") as f:
            values.update(parse_config_text(f.read(), path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    comet_keys = set(CometConfig.field_names())
    unknown = set(values) - comet_keys - set(EXTRA_KEYS)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    comet = {k: v for k, v in values.items() if k in comet_keys}
    extra = {k: v for k, v in values.items() if k in EXTRA_KEYS}
    if "seed" in extra and "rng_seed" not in comet:
        comet["rng_seed"] = extra["seed"]
    try:
        cfg = CliConfig(CometConfig(**comet), **extra)
        cfg.geometry
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    if cfg.tracker not in ex.TRACKERS:
        raise ConfigError(f"unknown tracker {cfg.tracker!r}")
    return cfg


# ------------------------------------------------------------------ parser

_FLAG_KEYS = {
    "nrh": "n_rh", "k": "k_reset", "n_hash": "n_hash", "n_counters": "n_counters",
    "rat_entries": "n_rat_entries", "history_len": "history_len", "eprt": "eprt_fraction",
    "blast_radius": "blast_radius", "row_bits": "row_bits", "ranks": "ranks",
    "banks": "banks_per_rank", "seed": "seed", "count_mitigation_acts": "count_mitigation_acts",
}


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="flat key = value configuration file")
    g.add_argument("--nrh", type=int, help="RowHammer threshold N_RH")
    g.add_argument("--k", type=int, help="counter resets per refresh window")
    g.add_argument("--n-hash", type=int)
    g.add_argument("--n-counters", type=int)
    g.add_argument("--rat-entries", type=int)
    g.add_argument("--history-len", type=int)
    g.add_argument("--eprt", type=float, help="early refresh threshold as a fraction of the history")
    g.add_argument("--blast-radius", type=int)
    g.add_argument("--row-bits", type=int)
    g.add_argument("--ranks", type=int)
    g.add_argument("--banks", type=int, help="banks per rank")
    g.add_argument("--seed", type=int, help="RNG seed (default: $COMET_SEED or 0)")
    g.add_argument("--count-mitigation-acts", action="store_const", const=True, default=None,
                   help="feed victim-refresh ACTs back into the tracker")


def _resolve(args) -> CliConfig:
    overrides = {key: getattr(args, flag, None) for flag, key in _FLAG_KEYS.items()}
    for k in ("tracker", "trace", "output", "audit"):
        v = getattr(args, k, None)
        overrides[k] = v if v not in (False,) else None
    return load_config(args.config, overrides)


def _out(path):
    if path in (None, "-"):
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="\n")


def _close(f):
    if f is not sys.stdout:
        f.close()


def cmd_generate(args) -> int:
    cfg = _resolve(args)
    geo = cfg.geometry
    interval = args.interval_ns
    duration = int(args.duration_ms * 1_000_000) if args.duration_ms is not None else None
    kind = args.kind
    if kind == "hammer":
        tr = T.gen_hammer(geo, args.aggressors or 1, interval or 20,
                          duration if duration is not None else cfg.comet.trefw_ns, args.layout)
    elif kind == "uniform":
        interval = interval or 6400
        if args.acts is not None:
            duration = args.acts * interval
        if duration is None:
            duration = cfg.comet.trefw_ns
        tr = T.gen_uniform(geo, duration, interval, args.unique_rows or 100, cfg.seed)
    elif kind == "thrash":
        tr = T.gen_rat_thrash(geo, args.aggressors or 256, cfg.comet.n_pr, interval or 20,
                              duration if duration is not None else cfg.comet.trefw_ns)
    elif kind == "straddle":
        tr = T.gen_reset_straddle(cfg.comet, args.target_row, args.burst_len, interval or 20)
    else:  # mix
        tr = T.gen_random_mix(geo, args.acts or 100_000, cfg.seed, interval or 20)
    params = ("interval_ns", "duration_ms", "acts", "unique_rows", "aggressors", "layout",
              "target_row", "burst_len")
    header = f"generator: {kind} " + " ".join(f"{k}={getattr(args, k)}" for k in params)
    header += "\n" + cfg.header()
    if args.out in (None, "-"):
        sys.stdout.write("".join(f"# {h}\n" for h in header.splitlines()))
        for e in tr:
            sys.stdout.write(f"{e.time_ns} {e.rank} {e.bank} {e.row}\n")
    else:
        T.write_trace(tr, args.out, header=header)
        print(f"wrote {len(tr)} events to {args.out}", file=sys.stderr)
    return EXIT_OK


def _load_trace(path):
    if not path:
        raise ConfigError("no trace given (use --trace or trace = ... in the config)")
    return T.read_trace(path)


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    tr = _load_trace(cfg.trace)
    stats = ex.run(tr, cfg.tracker, cfg.comet, cfg.geometry, audit=cfg.audit, seed=cfg.seed)
    out = _out(cfg.output)
    try:
        ex.write_csv([stats.csv_row(args.config_id)], out, comment=cfg.header())
    finally:
        _close(out)
    print(stats.summary(), file=sys.stderr)
    if cfg.audit and not stats.passed:
        for v in stats.violations[:10]:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


DEFAULT_STORAGE_NRH = (1000, 500, 250, 125)


def cmd_storage(args) -> int:
    cfg = _resolve(args)
    nrhs = args.nrh_list or ([cfg.comet.n_rh] if args.nrh is not None else DEFAULT_STORAGE_NRH)
    banks = cfg.ranks * cfg.banks_per_rank
    rows = [(n, ex.storage_model(replace(cfg.comet, n_rh=n), banks)) for n in nrhs]
    if args.format == "csv":
        print("n_rh,ct_kib,rat_kib,total_kib")
        for n, s in rows:
            print(f"{n},{s.ct_kib:.1f},{s.rat_kib:.1f},{s.total_kib:.1f}")
    else:
        print(f"# {cfg.header()}")
        print(f"{'N_RH':>6} {'CT KiB':>8} {'RAT KiB':>8} {'Total KiB':>10}")
        for n, s in rows:
            print(f"{n:>6} {s.ct_kib:>8.1f} {s.rat_kib:>8.1f} {s.total_kib:>10.1f}")
    return EXIT_OK


def cmd_fpcompare(args) -> int:
    cfg = _resolve(args)
    print(f"# {cfg.header()}")
    print(f"# acts={args.acts} threshold={args.threshold} trials={args.trials} predicate={args.predicate}")
    print("unique_rows,fp_comet,fp_cbf,relative_reduction")
    for u in args.unique_rows:
        r = ex.fp_experiment(u, args.acts, args.threshold, args.trials, cfg.seed, args.predicate,
                             cfg.comet.n_hash, cfg.comet.n_counters, cfg.comet.rows_per_bank)
        print(f"{u},{r.fp_comet:.6f},{r.fp_cbf:.6f},{r.relative_reduction:.4f}")
    return EXIT_OK


def _parse_grid(axis: str, text: str | None):
    if not text:
        return ex.DEFAULT_GRIDS[axis]
    width = len(ex.SWEEP_AXES[axis])
    grid = []
    for item in text.split(","):
        parts = item.strip().split("x")
        if len(parts) != width:
            raise ConfigError(f"grid point {item!r} needs {width} value(s) joined by 'x'")
        grid.append(tuple(float(p) if "." in p else int(p) for p in parts))
    return grid


def cmd_sweep(args) -> int:
    cfg = _resolve(args)
    if not args.trace:
        raise ConfigError("sweep needs at least one --trace")
    traces = [T.read_trace(p) for p in args.trace]
    rows = ex.sweep(args.axis, _parse_grid(args.axis, args.grid), traces, cfg.comet,
                    cfg.tracker, cfg.geometry, args.jobs)
    out = _out(cfg.output)
    try:
        ex.write_csv(rows, out, comment=cfg.header())
    finally:
        _close(out)
    return EXIT_OK


def cmd_audit(args) -> int:
    cfg = _resolve(args)
    kinds = ex.SUITE_KINDS if args.suite == "all" else tuple(args.suite.split(","))
    nrhs = args.nrh_list or ((cfg.comet.n_rh,) if args.nrh is not None else (125, 250, 500, 1000))
    print(f"# {cfg.header()}")
    total = 0
    failed = 0
    for case in ex.audit_suite(nrhs, kinds, args.scale, cfg.seed, cfg.comet):
        s = ex.run(case.trace, "comet", case.config, case.geometry, audit=True, seed=cfg.seed)
        total += s.total_acts
        ok = s.passed and s.max_exposure < case.config.n_rh
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} n_rh={case.config.n_rh} {case.kind:<8} {s.trace}: "
              f"acts={s.total_acts} prev={s.preventive_refreshes} early={s.early_refreshes} "
              f"max_exposure={s.max_exposure} underestimates={s.underestimates}", flush=True)
        if not ok:
            for v in s.violations[:5]:
                print(f"  violation: {v}")
    print(f"{'PASS' if not failed else 'FAIL'}: {total} ACTs audited, {failed} failing run(s)")
    return EXIT_VIOLATION if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cometsim", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic trace")
    g.add_argument("kind", choices=("hammer", "uniform", "thrash", "straddle", "mix"))
    g.add_argument("--out", "-o", help="output path (.gz compresses); default stdout")
    g.add_argument("--interval-ns", type=int)
    g.add_argument("--duration-ms", type=float)
    g.add_argument("--acts", type=int, help="event count (uniform, mix)")
    g.add_argument("--unique-rows", type=int)
    g.add_argument("--aggressors", type=int, help="aggressor rows per bank (hammer, thrash)")
    g.add_argument("--layout", choices=("spread", "double_sided"), default="spread")
    g.add_argument("--target-row", type=int, default=1000)
    g.add_argument("--burst-len", type=int, help="straddle burst length (default N_PR - 1)")
    _common(g)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="replay a trace through a tracker")
    s.add_argument("--trace")
    s.add_argument("--tracker", choices=ex.TRACKERS)
    s.add_argument("--audit", action="store_true")
    s.add_argument("--output", "-o", help="CSV path; default stdout")
    s.add_argument("--config-id", default="cli")
    _common(s)
    s.set_defaults(func=cmd_simulate)

    st = sub.add_parser("storage", help="CT/RAT storage for a dual-rank channel")
    st.add_argument("--nrh-list", type=int, nargs="+")
    st.add_argument("--format", choices=("table", "csv"), default="table")
    _common(st)
    st.set_defaults(func=cmd_storage)

    f = sub.add_parser("fpcompare", help="false-positive rates, partitioned vs shared counters")
    f.add_argument("--unique-rows", type=int, nargs="+", default=[100, 250, 1000, 100_000])
    f.add_argument("--trials", type=int, default=100)
    f.add_argument("--acts", type=int, default=10_000)
    f.add_argument("--threshold", type=int, default=125)
    f.add_argument("--predicate", choices=("threshold", "overestimate"), default="threshold")
    _common(f)
    f.set_defaults(func=cmd_fpcompare)

    w = sub.add_parser("sweep", help="parameter sweep, one CSV row per point and trace")
    w.add_argument("--axis", choices=tuple(ex.SWEEP_AXES), required=True)
    w.add_argument("--grid", help="points like 4x512,4x1024 (default: built-in grid)")
    w.add_argument("--trace", action="append")
    w.add_argument("--tracker", choices=ex.TRACKERS)
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--output", "-o")
    _common(w)
    w.set_defaults(func=cmd_sweep)

    a = sub.add_parser("audit", help="run the adversarial security suite on the sketch tracker")
    a.add_argument("--suite", default="all", help="all or a comma list of " + ",".join(ex.SUITE_KINDS))
    a.add_argument("--nrh-list", type=int, nargs="+")
    a.add_argument("--scale", type=float, default=1.0, help="multiply trace lengths")
    _common(a)
    a.set_defaults(func=cmd_audit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
