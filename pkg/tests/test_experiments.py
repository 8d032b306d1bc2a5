import csv
import io

import pytest

from cometsim.dram import Geometry
from cometsim.experiments import (
    CSV_COLUMNS,
    audit_suite,
    fp_experiment,
    run,
    storage_model,
    sweep,
    sweep_configs,
    write_csv,
)
from cometsim.tracker import CometConfig
from cometsim.traces import Trace, gen_hammer, gen_random_mix, gen_rat_thrash, gen_uniform

ONE = Geometry(1, 1, 1 << 17)


def single_row(n, row=7, interval=20):
    return Trace([i * interval for i in range(n)], [0] * n, [0] * n, [row] * n, name="single")


def test_first_refresh_at_act_250():
    s = run(single_row(600), "comet", CometConfig(n_rh=1000), ONE, record_refreshes=True)
    assert [e[0] for e in s.refresh_log] == [250, 500]
    p = run(single_row(600), "perrow", CometConfig(n_rh=1000), ONE, record_refreshes=True)
    assert p.refresh_log == s.refresh_log
    assert p.unnecessary_refreshes == 0 and s.unnecessary_refreshes == 0


def test_geometry_mismatch():
    with pytest.raises(ValueError):
        run(single_row(5), "comet", CometConfig(row_bits=10), ONE)
    with pytest.raises(ValueError):
        run(Trace([0], [1], [0], [0]), "comet", CometConfig(), ONE)
    with pytest.raises(ValueError):
        run(single_row(5), "nope", CometConfig(), ONE)


@pytest.mark.parametrize("tracker", ["comet", "perrow", "graphene", "para", "cbf"])
def test_mitigating_trackers_pass_hammer(tracker):
    cfg = CometConfig(n_rh=125)
    s = run(gen_hammer(ONE, 4, 20, 5_000_000), tracker, cfg, ONE, audit=True)
    assert s.passed and s.max_exposure < 125 and not s.aborted


def test_unmitigated_hammer_aborts_in_audit():
    s = run(gen_hammer(ONE, 4, 20, 5_000_000), "none", CometConfig(n_rh=125), ONE, audit=True)
    assert s.aborted and s.exposure_violations == 1 and s.violations[0].kind == "exposure"


def test_perrow_never_unnecessary():
    for tr in (gen_random_mix(Geometry(1, 2, 1 << 17), 100_000, 3),
               gen_rat_thrash(ONE, 200, 31, 20, 2_000_000)):
        geo = Geometry(1, 2 if tr.name.startswith("mix") else 1, 1 << 17)
        assert run(tr, "perrow", CometConfig(n_rh=125), geo).unnecessary_refreshes == 0


def test_early_refresh_restarts_reset_timer():
    cfg = CometConfig(n_rh=125)
    s = run(gen_rat_thrash(ONE, 256, 31, 20, 8_000_000), "comet", cfg, ONE, audit=True)
    assert s.early_refreshes >= 1 and s.passed
    assert s.ref_commands_issued == 8192 * s.early_refreshes + 1024
    # no periodic reset falls inside 8 ms
    assert s.periodic_resets == 0


def test_periodic_resets_fire():
    t = gen_uniform(ONE, 64_000_000, 64_000, 10, seed=0)
    assert run(t, "comet", CometConfig(), ONE).periodic_resets == 2


def test_mitigation_acts_feedback():
    cfg = CometConfig(n_rh=125, count_mitigation_acts=True)
    s = run(gen_hammer(ONE, 2, 20, 2_000_000, layout="double_sided"), "comet", cfg, ONE, audit=True)
    assert s.mitigation_acts == 2 * s.preventive_refreshes and s.passed


def test_deterministic():
    t = gen_random_mix(Geometry(1, 4, 1 << 17), 50_000, 9)
    g = Geometry(1, 4, 1 << 17)
    for tracker in ("para", "comet"):
        a = run(t, tracker, CometConfig(n_rh=125, rng_seed=7), g)
        b = run(t, tracker, CometConfig(n_rh=125, rng_seed=7), g)
        assert a.csv_row() == b.csv_row()


@pytest.mark.parametrize("n_rh, ct, rat, total", [
    (1000, 64.0, 12.5, 76.5), (500, 56.0, 12.0, 68.0), (250, 48.0, 11.5, 59.5),
    (125, 40.0, 11.0, 51.0), (2000, 72.0, 13.0, 85.0),
])
def test_storage_model(n_rh, ct, rat, total):
    assert tuple(storage_model(CometConfig(n_rh=n_rh))) == (ct, rat, total)


def test_fp_degenerate_case():
    r = fp_experiment(10, trials=3)
    assert r.fp_comet == 0 and r.fp_cbf == 0 and r.rows_evaluated == 30


def test_fp_overestimate_predicate_counts_collisions():
    r = fp_experiment(2000, trials=2, predicate="overestimate")
    assert 0 < r.fp_comet <= 1 and 0 < r.fp_cbf <= 1
    with pytest.raises(ValueError):
        fp_experiment(0)


def test_sweep_rows_and_csv():
    t = gen_uniform(ONE, 2_000_000, 20, 1000, seed=1)
    rows = sweep("ct", [(4, 128), (4, 512)], [t], CometConfig(n_rh=125), geometry=ONE)
    assert [r["config_id"] for r in rows] == ["ct-n_hash=4-n_counters=128",
                                              "ct-n_hash=4-n_counters=512"]
    text = write_csv(rows, comment="config: x=1")
    lines = text.splitlines()
    assert lines[0] == "# config: x=1"
    assert lines[1] == ",".join(CSV_COLUMNS)
    parsed = list(csv.DictReader(io.StringIO("\n".join(lines[1:]))))
    assert int(parsed[0]["prev_refreshes"]) >= int(parsed[1]["prev_refreshes"])


def test_sweep_parallel_matches_serial():
    t = gen_uniform(ONE, 400_000, 20, 500, seed=2)
    grid = [(64,), (128,)]
    base = CometConfig(n_rh=125)
    assert sweep("rat", grid, [t], base, geometry=ONE, jobs=2) == sweep("rat", grid, [t], base, geometry=ONE)


def test_sweep_config_validation():
    with pytest.raises(ValueError):
        sweep_configs("ct", [], CometConfig())
    with pytest.raises(ValueError):
        sweep_configs("bogus", [(1,)], CometConfig())
    with pytest.raises(ValueError):
        sweep_configs("ct", [(4,)], CometConfig())
    (cid, cfg), = sweep_configs("history", [(128, 0.5)], CometConfig())
    assert cfg.history_len == 128 and cfg.eprt == 64


def test_audit_suite_small_scale():
    cases = list(audit_suite((125,), scale=0.01))
    assert {c.kind for c in cases} == {"uniform", "hammer", "thrash", "straddle", "mix"}
    for c in cases:
        s = run(c.trace, "comet", c.config, c.geometry, audit=True)
        assert s.passed and s.max_exposure < 125, c.trace.name
