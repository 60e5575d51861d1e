"""End-to-end command-line workflows and the exit-code contract."""

import json
import os

import pytest

from sideband_thermometry import cli
from sideband_thermometry.estimation import fit_lorentzian
from sideband_thermometry.spectra import read_trace_csv

CONFIG = os.path.join(os.path.dirname(__file__), "..", "configs", "default_scenario.toml")

MINI_CONFIG = """
[optical.cooling]
omega_hz = 205.3e12
kappa_hz = 390e6
kappa_e_hz = 46e6
g0_hz = 960e3

[optical.readout]
omega_hz = 194.1e12
kappa_hz = 1.0e9
kappa_e_hz = 300e6
g0_hz = 430e3

[mechanics]
omega_hz = 3.99e9
gamma_i_hz = 43e3
n_b = 94.0
x_zpf_m = 2.7e-15

[drive.cooling]
n_photons = 160.0

[drive.readout]
n_photons = 42.0

[detection]
g_edfa = 1000.0
g_e_v_per_w = 1.0e4
quantum_efficiency = 1.0
noise_floor_v2_per_hz = 1.0e-26

[grid]
start_hz = 3.974e9
stop_hz = 4.006e9
n_points = 4096

[noise]
n_averages = 16
seed = 7

[sweep]
n_photons = [20.0, 60.0, 160.0]
"""


@pytest.fixture
def mini_config(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(MINI_CONFIG)
    return str(path)


def read_bytes_tree(root):
    out = {}
    for base, _, files in os.walk(root):
        for name in files:
            path = os.path.join(base, name)
            out[os.path.relpath(path, root)] = open(path, "rb").read()
    return out


def test_simulate_writes_traces_and_truth(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--config", CONFIG, "--out", str(out), "--seed", "7"]) == 0
    plus = read_trace_csv(str(out / "trace_plus.csv"))
    minus = read_trace_csv(str(out / "trace_minus.csv"))
    truth = json.load(open(out / "truth.json"))
    assert plus.metadata.detuning_hz > 0 > minus.metadata.detuning_hz
    # the fitted linewidths differ according to the readout cooperativity
    fit_plus, fit_minus = fit_lorentzian(plus), fit_lorentzian(minus)
    assert fit_plus.fwhm > fit_minus.fwhm
    c_est = (fit_plus.fwhm - fit_minus.fwhm) / (fit_plus.fwhm + fit_minus.fwhm)
    assert abs(c_est - truth["c_r"]) < 0.02


def test_simulate_deterministic_given_seed(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", CONFIG, "--out", str(out1), "--seed", "7"]) == 0
    assert cli.main(["simulate", "--config", CONFIG, "--out", str(out2), "--seed", "7"]) == 0
    assert read_bytes_tree(out1) == read_bytes_tree(out2)


def test_simulate_env_seed_override(tmp_path, monkeypatch):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    monkeypatch.setenv("SIDEBAND_SEED", "99")
    assert cli.main(["simulate", "--config", CONFIG, "--out", str(out1)]) == 0
    monkeypatch.delenv("SIDEBAND_SEED")
    assert cli.main(["simulate", "--config", CONFIG, "--out", str(out2), "--seed", "99"]) == 0
    assert read_bytes_tree(out1) == read_bytes_tree(out2)


def test_simulate_invalid_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINI_CONFIG.replace("kappa_e_hz = 300e6", "kappa_e_hz = 2.0e9"))
    code = cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "kappa_e" in capsys.readouterr().err


def test_simulate_unknown_key_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text(MINI_CONFIG + "\n[extra]\nmystery = 1\n")
    code = cli.main(["simulate", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "extra" in capsys.readouterr().err


def test_fit_recovers_truth(tmp_path, mini_config, capsys):
    sim = tmp_path / "sim"
    assert cli.main(["simulate", "--config", mini_config, "--out", str(sim), "--seed", "3"]) == 0
    out = tmp_path / "fit"
    code = cli.main(
        ["fit", str(sim / "trace_plus.csv"), str(sim / "trace_minus.csv"), "--out", str(out)]
    )
    assert code == 0
    summary_line = capsys.readouterr().out
    assert "n_c" in summary_line and "C_r" in summary_line
    results = json.load(open(out / "fits.json"))
    truth = json.load(open(sim / "truth.json"))
    estimate = results["occupancy"]
    assert abs(estimate["n_c_est"] - truth["n_c"]) <= 3 * estimate["ci95_n_c"]


def test_fit_single_trace_has_no_occupancy_section(tmp_path, mini_config):
    sim = tmp_path / "sim"
    cli.main(["simulate", "--config", mini_config, "--out", str(sim), "--seed", "3"])
    out = tmp_path / "fit"
    assert cli.main(["fit", str(sim / "trace_plus.csv"), "--out", str(out)]) == 0
    results = json.load(open(out / "fits.json"))
    assert "occupancy" not in results
    assert set(results["fits"]) == {"plus"}


def test_fit_malformed_csv_exits_3(tmp_path, mini_config, capsys):
    sim = tmp_path / "sim"
    cli.main(["simulate", "--config", mini_config, "--out", str(sim), "--seed", "3"])
    path = sim / "trace_plus.csv"
    lines = path.read_text().splitlines()
    lines[25] = "garbage row"
    path.write_text("\n".join(lines) + "\n")
    code = cli.main(["fit", str(path), "--out", str(tmp_path / "fit")])
    assert code == 3
    assert "line 26" in capsys.readouterr().err


def test_fit_flat_trace_exits_4_with_partial_results(tmp_path, mini_config):
    sim = tmp_path / "sim"
    cli.main(["simulate", "--config", mini_config, "--out", str(sim), "--seed", "3"])
    # flatten the psd column to kill the peak
    path = sim / "trace_plus.csv"
    lines = path.read_text().splitlines()
    flat = [lines[0], lines[1]]
    for line in lines[2:]:
        nu = line.split(",")[0]
        flat.append(f"{nu},1.0")
    path.write_text("\n".join(flat) + "\n")
    out = tmp_path / "fit"
    code = cli.main(["fit", str(path), str(sim / "trace_minus.csv"), "--out", str(out)])
    assert code == 4
    results = json.load(open(out / "fits.json"))
    assert "error" in results and "NoPeak" in results["error"]


def test_sweep_and_report_round_trip(tmp_path, mini_config):
    sweep_dir = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", mini_config, "--out", str(sweep_dir)]) == 0
    assert (sweep_dir / "records.csv").exists()
    assert (sweep_dir / "summary.json").exists()
    assert (sweep_dir / "sxx.csv").exists()
    assert len(list((sweep_dir / "traces").iterdir())) == 6

    report_dir = tmp_path / "report"
    assert cli.main(["report", str(sweep_dir), "--out", str(report_dir)]) == 0
    names = {p.name for p in report_dir.iterdir()}
    assert {
        "table_cooperativity.csv",
        "table_ratios.csv",
        "table_cooling_curve.csv",
        "table_asymmetry.csv",
        "table_sxx.csv",
    } <= names

    first = read_bytes_tree(report_dir)
    assert cli.main(["report", str(sweep_dir), "--out", str(report_dir)]) == 0
    assert read_bytes_tree(report_dir) == first


def test_sweep_deterministic(tmp_path, mini_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", mini_config, "--out", str(a), "--seed", "5"]) == 0
    assert cli.main(["sweep", "--config", mini_config, "--out", str(b), "--seed", "5"]) == 0
    assert read_bytes_tree(a) == read_bytes_tree(b)


def test_sweep_jobs_do_not_change_results(tmp_path, mini_config):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["sweep", "--config", mini_config, "--out", str(a), "--seed", "5"]) == 0
    assert cli.main(
        ["sweep", "--config", mini_config, "--out", str(b), "--seed", "5", "--jobs", "2"]
    ) == 0
    assert read_bytes_tree(a) == read_bytes_tree(b)


def test_report_on_empty_dir_exits_2(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    assert cli.main(["report", str(empty), "--out", str(tmp_path / "r")]) == 2
    assert "records.csv" in capsys.readouterr().err


def test_default_sweep_terminal_point(tmp_path):
    sweep_dir = tmp_path / "sweep"
    assert cli.main(["sweep", "--config", CONFIG, "--out", str(sweep_dir)]) == 0
    from sideband_thermometry.experiment import read_records_csv

    records = read_records_csv(str(sweep_dir / "records.csv"))
    assert len(records) == 16
    assert records[-1].status == "ok"
    assert abs(records[-1].n_c_est - 2.6) < 0.3
