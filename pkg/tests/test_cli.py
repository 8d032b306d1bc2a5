import pytest

from cometsim.cli import ConfigError, load_config, main, parse_config_text


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_storage_default(capsys):
    code, out, _ = run_cli(capsys, "storage")
    assert code == 0
    rows = [l.split() for l in out.splitlines() if l.strip() and l.split()[0].isdigit()]
    assert [r[-1] for r in rows] == ["76.5", "68.0", "59.5", "51.0"]
    assert [r[1] for r in rows] == ["64.0", "56.0", "48.0", "40.0"]
    assert [r[2] for r in rows] == ["12.5", "12.0", "11.5", "11.0"]
    assert out.startswith("# config: n_rh=1000")


def test_storage_csv_custom(capsys):
    code, out, _ = run_cli(capsys, "storage", "--nrh", "2000", "--format", "csv")
    assert code == 0
    assert out.splitlines() == ["n_rh,ct_kib,rat_kib,total_kib", "2000,72.0,13.0,85.0"]


def test_generate_and_simulate(tmp_path, capsys):
    trc = tmp_path / "h.trc"
    assert main(["generate", "hammer", "--interval-ns", "20", "--duration-ms", "2",
                 "--ranks", "1", "--banks", "1", "-o", str(trc)]) == 0
    capsys.readouterr()
    code, out, err = run_cli(capsys, "simulate", "--trace", str(trc), "--tracker", "comet",
                             "--nrh", "1000", "--ranks", "1", "--banks", "1", "--audit")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# config:") and "tracker=comet" in lines[0]
    assert lines[1].startswith("config_id,tracker,trace,total_acts,prev_refreshes")
    assert "PASS" in err
    code, out, err = run_cli(capsys, "simulate", "--trace", str(trc), "--tracker", "none",
                             "--nrh", "125", "--ranks", "1", "--banks", "1", "--audit")
    assert code == 2 and "violation" in err


def test_generate_uniform_fp_workload(tmp_path, capsys):
    trc = tmp_path / "u.trc"
    assert main(["generate", "uniform", "--acts", "10000", "--unique-rows", "100", "-o", str(trc)]) == 0
    body = [l for l in trc.read_text().splitlines() if not l.startswith("#")]
    assert len(body) == 10_000


def test_generate_straddle_to_stdout(capsys):
    code, out, _ = run_cli(capsys, "generate", "straddle", "--nrh", "125", "--k", "3")
    assert code == 0
    assert len([l for l in out.splitlines() if not l.startswith("#")]) == 120


def test_para_seed_reproducible(tmp_path, capsys):
    trc = tmp_path / "m.trc"
    main(["generate", "mix", "--acts", "20000", "-o", str(trc)])
    outs = []
    for _ in range(2):
        p = tmp_path / f"o{len(outs)}.csv"
        assert main(["simulate", "--tracker", "para", "--seed", "7", "--trace", str(trc), "-o", str(p)]) == 0
        outs.append(p.read_text())
    assert outs[0] == outs[1]
    assert "seed=7" in outs[0].splitlines()[0]


def test_missing_trace_is_operational_error(capsys):
    code, _, err = run_cli(capsys, "simulate", "--trace", "/nonexistent/t.trc")
    assert code == 1 and "error" in err


def test_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("# comment\n[comet]\nn_rh = 500\nk_reset = 3\naudit = yes\n")
    c = load_config(str(cfg), {"n_counters": 256}, env={"COMET_SEED": "9"})
    assert (c.comet.n_rh, c.comet.n_counters, c.seed, c.comet.rng_seed, c.audit) == (500, 256, 9, 9, True)
    code, out, _ = run_cli(capsys, "storage", "--config", str(cfg), "--nrh", "125", "--format", "csv")
    assert out.splitlines()[1] == "125,40.0,11.0,51.0"


def test_unknown_config_key_rejected(tmp_path, capsys):
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("n_rh = 100\nbogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config_text("audit = maybe\n")
    cfg = tmp_path / "bad.ini"
    cfg.write_text("colour = blue\n")
    code, _, err = run_cli(capsys, "storage", "--config", str(cfg))
    assert code == 1 and "colour" in err


def test_invalid_config_values(capsys):
    code, _, err = run_cli(capsys, "storage", "--nrh", "3")
    assert code == 1


def test_fpcompare(capsys):
    code, out, _ = run_cli(capsys, "fpcompare", "--unique-rows", "10", "2000", "--trials", "2")
    assert code == 0
    lines = [l for l in out.splitlines() if not l.startswith("#")]
    assert lines[0] == "unique_rows,fp_comet,fp_cbf,relative_reduction"
    assert lines[1].startswith("10,0.000000,0.000000")


def test_sweep(tmp_path, capsys):
    trc = tmp_path / "u.trc"
    main(["generate", "uniform", "--acts", "50000", "--interval-ns", "20", "--unique-rows", "1000",
          "--ranks", "1", "--banks", "1", "-o", str(trc)])
    capsys.readouterr()
    code, out, _ = run_cli(capsys, "sweep", "--axis", "ct", "--grid", "4x128,4x512", "--trace", str(trc),
                           "--nrh", "125", "--ranks", "1", "--banks", "1", "--jobs", "2")
    assert code == 0
    lines = out.splitlines()
    assert lines[1].split(",")[0] == "config_id" and len(lines) == 4
    code, _, _ = run_cli(capsys, "sweep", "--axis", "ct", "--grid", "4", "--trace", str(trc))
    assert code == 1


def test_audit_small_suite(capsys):
    code, out, _ = run_cli(capsys, "audit", "--suite", "straddle,hammer", "--nrh-list", "125",
                           "--scale", "0.01")
    assert code == 0
    assert out.splitlines()[-1].startswith("PASS")
    code, _, _ = run_cli(capsys, "audit", "--suite", "nope")
    assert code == 1
