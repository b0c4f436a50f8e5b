import csv
import json

import numpy as np
import pytest

from asyncswap import pipeline
from asyncswap import tomography as tomo
from asyncswap.cli import main
from asyncswap.config import VERSION, ConfigError, load_config, preset_text
from asyncswap.record import read_record
from asyncswap.states import canonical_state, dumps_density, phase_max_fidelity
from asyncswap.tdc import extract_fourfolds

SMALL = """
[run]
circuit = swap
seed = 5
duration_s = 36
mode = gated
gate_window_ps = 1000
calibration_duration_s = 0.2

[sources]
pair_rate_a_hz = 1e6
pair_rate_b_hz = 1e6

[detectors]
efficiency = 1
stray_rate_hz = 2000

[analysis]
windows_ps = 80, 230, 560
bootstrap = 0
"""


@pytest.fixture()
def small_cfg(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


@pytest.fixture()
def simulated(tmp_path, small_cfg):
    out = tmp_path / "run"
    assert main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == 0
    return out


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# -- config ----------------------------------------------------------------------


def test_config_precedence(small_cfg):
    cfg = load_config(small_cfg, overrides={"seed": 99})
    assert cfg.seed == 99 and cfg.pair_rate_a_hz == 1e6
    assert cfg.efficiency == (1.0,) * 4 and cfg.stray_rate_hz == (2000.0,) * 4
    base = load_config(preset="paper-swap")
    assert base.pair_rate_a_hz == 3.18e5
    mixed = load_config(small_cfg, preset="paper-swap")
    assert mixed.pair_rate_a_hz == 1e6 and mixed.fidelity_a == base.fidelity_a


def test_config_round_trip_and_digest(tmp_path):
    cfg = load_config(preset="paper-ghz")
    p = tmp_path / "c.ini"
    p.write_text(cfg.to_ini())
    again = load_config(p)
    assert again == cfg and again.digest() == cfg.digest()
    assert load_config(p, overrides={"seed": 1}).digest() != cfg.digest()


@pytest.mark.parametrize("text", [
    "[run]\nduration_s = 0\n",
    "[run]\ncircuit = teleport\n",
    "[run]\nbogus = 1\n",
    "[weird]\nx = 1\n",
    "[detectors]\nefficiency = 0.5, 0.5\n",
    "[analysis]\nwindows_ps = 230, 80\n",
    "[analysis]\nwindows_ps = 2000\n",
    "[analysis]\nbootstrap = 10\n",
])
def test_config_errors(tmp_path, text):
    p = tmp_path / "bad.ini"
    p.write_text(text)
    with pytest.raises(ConfigError):
        load_config(p)


def test_presets_carry_rationale():
    for name in ("paper-swap", "paper-ghz"):
        assert preset_text(name).lstrip().startswith("#")
        assert load_config(preset=name).duration_s >= 10 * 3600


# -- simulate ------------------------------------------------------------------------


def test_simulate_zero_duration_exit_2(tmp_path, capsys):
    p = tmp_path / "z.ini"
    p.write_text("[run]\nduration_s = 0\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "duration" in capsys.readouterr().err


def test_same_seed_byte_identical(tmp_path, small_cfg, simulated):
    other = tmp_path / "again"
    assert main(["simulate", "--config", str(small_cfg), "--out", str(other)]) == 0
    for name in ("record.astr", "calibration.astr", "config.ini"):
        assert (other / name).read_bytes() == (simulated / name).read_bytes()
    third = tmp_path / "seed"
    assert main(["simulate", "--config", str(small_cfg), "--seed", "6", "--out", str(third)]) == 0
    assert (third / "record.astr").read_bytes() != (simulated / "record.astr").read_bytes()


def test_record_embeds_digest_and_version(small_cfg, simulated):
    rec = read_record(simulated / "record.astr")
    cfg = load_config(small_cfg)
    assert rec.metadata["config_digest"] == cfg.digest() == rec.digest.hex()
    assert rec.metadata["version"] == VERSION
    info = json.loads((simulated / "run.json").read_text())
    assert info["config_digest"] == cfg.digest()


def test_locked_directory_exit_3(tmp_path, small_cfg):
    out = tmp_path / "locked"
    out.mkdir()
    (out / ".lock").write_text("1")
    assert main(["simulate", "--config", str(small_cfg), "--out", str(out)]) == 3
    assert not (out / "record.astr").exists()


# -- analyze ---------------------------------------------------------------------------


def test_analyze_rates_monotone(tmp_path, small_cfg, simulated):
    out = tmp_path / "an"
    code = main(["analyze", "--config", str(small_cfg), "--record", str(simulated / "record.astr"),
                 "--out", str(out)])
    assert code in (0, 4)
    table = rows(out / "report.csv")
    rates = [float(r["rate_per_hour"]) for r in table]
    assert [int(r["tau_w_ps"]) for r in table] == [80, 230, 560]
    assert rates[0] < rates[1] < rates[2]
    assert all(r["config_digest"] == load_config(small_cfg).digest() for r in table)
    assert all(r["version"] == VERSION for r in table)
    report = json.loads((out / "report.json").read_text())
    assert report["calibration"]["pair_rate_A_hz"] > 0
    ok = [r for r in report["windows"] if r["status"] == "ok"]
    assert ok and all(0 <= r["metrics"]["phase_max_fidelity"] <= 1 for r in ok)


def test_analyze_is_reproducible(tmp_path, small_cfg, simulated):
    args = ["analyze", "--config", str(small_cfg), "--record", str(simulated / "record.astr"),
            "--windows", "230,560"]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()


def test_pipeline_equals_manual_stages(small_cfg, simulated):
    cfg = load_config(small_cfg)
    rec = read_record(simulated / "record.astr")
    auto = pipeline.analyze(rec, [560], cfg).report["windows"][0]
    ev = extract_fourfolds(rec, 560)
    counts = pipeline.counts_for(rec, ev, 2, 560)
    rho = tomo.mle_reconstruct(counts, cfg.epsilon, cfg.tol, cfg.max_iter).rho
    assert auto["fourfolds"] == len(ev)
    assert auto["counts"] == counts.as_dict()
    assert auto["metrics"]["phase_max_fidelity"] == phase_max_fidelity(rho, "psi_minus_theta")[1]


def test_analyze_empty_record(tmp_path):
    p = tmp_path / "empty.ini"
    p.write_text("[run]\nduration_s = 3.6\n[sources]\npair_rate_a_hz = 0\npair_rate_b_hz = 0\n"
                 "[analysis]\nwindows_ps = 80, 230\nbootstrap = 0\n")
    assert main(["simulate", "--config", str(p), "--out", str(tmp_path / "r")]) == 0
    code = main(["analyze", "--config", str(p), "--record", str(tmp_path / "r" / "record.astr"),
                 "--out", str(tmp_path / "a")])
    assert code == 4
    table = rows(tmp_path / "a" / "report.csv")
    assert all(float(r["rate_per_hour"]) == 0 for r in table)
    assert all(r["status"].startswith("skipped") for r in table)


def test_analyze_io_errors(tmp_path, small_cfg):
    assert main(["analyze", "--config", str(small_cfg), "--record", str(tmp_path / "missing.astr"),
                 "--out", str(tmp_path / "a")]) == 3
    bad = tmp_path / "bad.astr"
    bad.write_bytes(b"not a record at all, just some bytes" * 3)
    assert main(["analyze", "--config", str(small_cfg), "--record", str(bad),
                 "--out", str(tmp_path / "a")]) == 3


def test_window_beyond_gate_is_config_error(tmp_path, small_cfg, simulated):
    assert main(["analyze", "--config", str(small_cfg), "--record", str(simulated / "record.astr"),
                 "--windows", "80,2000", "--out", str(tmp_path / "a")]) == 2


# -- sweep ----------------------------------------------------------------------------


def test_sweep_outputs_and_narrow_grid_warning(tmp_path, small_cfg, simulated, capsys):
    out = tmp_path / "sw"
    main(["sweep", "--config", str(small_cfg), "--record", str(simulated / "record.astr"),
          "--windows", "230,400,560,1000", "--out", str(out)])
    summary = json.loads((out / "fig4.json").read_text())
    assert "slope_large" in summary and "slope_small" not in summary
    assert any("small" in w for w in summary["warnings"])
    assert "warning" in capsys.readouterr().err
    assert len(rows(out / "fig4.csv")) == 4


def test_loglog_slope():
    w = np.array([10, 20, 40, 80])
    assert pipeline.loglog_slope(w, 3 * w**2.0) == pytest.approx(2.0)
    assert pipeline.loglog_slope([10], [1]) is None


# -- standalone tools -----------------------------------------------------------------


def test_tomo_and_metrics_commands(tmp_path, capsys):
    psi = canonical_state("psi_minus").density()
    counts = tomo.CountTable(2, np.rint(tomo.expected_counts(psi, 2, 1000)))
    (tmp_path / "c.txt").write_text(counts.to_text())
    assert main(["tomo", "--counts", str(tmp_path / "c.txt"), "--out", str(tmp_path / "rho.txt")]) == 0
    assert "phase_max_fidelity" in (tmp_path / "rho.txt").read_text()
    assert main(["metrics", "--rho", str(tmp_path / "rho.txt")]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["concurrence"] > 0.99
    (tmp_path / "bad.txt").write_text(dumps_density(np.diag([1.5, -0.5, 0, 0])))
    assert main(["metrics", "--rho", str(tmp_path / "bad.txt")]) == 2


def test_tauc_command(tmp_path, simulated, capsys):
    hist = tmp_path / "h.txt"
    assert main(["tauc", "--record", str(simulated / "calibration.astr"), "--out", str(hist)]) == 0
    tau = float(capsys.readouterr().out.strip().split(",")[1])
    assert tau == pytest.approx(230, rel=0.1)
    assert main(["tauc", "--hist", str(hist)]) == 0
    assert main(["tauc"]) == 2
