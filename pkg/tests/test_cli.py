import json
import math
from pathlib import Path

import numpy as np
import pytest

from eprbsim.cli import main, parse_angle
from eprbsim.model import SimConfig, read_station_log
from eprbsim.simulate import run_experiment
from eprbsim.tagdata import embed_in_timeline
from eprbsim.model import write_station_log

NS = 1e-9


@pytest.mark.parametrize(
    "text,value",
    [
        ("pi", math.pi),
        ("pi/8", math.pi / 8),
        ("3pi/8", 3 * math.pi / 8),
        ("3*pi/8", 3 * math.pi / 8),
        ("-pi/4", -math.pi / 4),
        ("0.5pi", math.pi / 2),
        ("0.5235987755982988", 0.5235987755982988),
        ("PI/2", math.pi / 2),
    ],
)
def test_parse_angle(text, value):
    assert parse_angle(text) == pytest.approx(value, rel=1e-15)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ValueError):
        parse_angle("pie")
    with pytest.raises(ValueError):
        parse_angle("pi/0")


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--out-dir", "x"])  # --seed is mandatory
    assert exc.value.code == 2


def test_unknown_command_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_oracle_check_passes():
    assert main(["oracle-check", "--max-k1", "12", "--max-k2", "12", "--max-k", "15"]) == 0


def test_simulate_writes_outputs_and_is_deterministic(tmp_path):
    args = [
        "simulate", "--n", "4000", "--theta-grid", "5", "--tau", "0.01",
        "--seed", "7", "--out-dir",
    ]
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(args + [str(out1)]) == 0
    assert main(args + [str(out2)]) == 0
    for name in ("curve.csv", "curve_infinite_window.csv", "singles.csv", "manifest.json"):
        assert (out1 / name).exists()
    assert (out1 / "curve.csv").read_bytes() == (out2 / "curve.csv").read_bytes()
    assert (out1 / "singles.csv").read_bytes() == (out2 / "singles.csv").read_bytes()

    header = (out1 / "curve.csv").read_text().splitlines()[0]
    assert header == "theta,S,E_ab,E_abp,E_apb,E_apbp,n_coincidences"
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["parameters"]["seed"] == 7


def test_simulate_single_theta_saves_valid_logs(tmp_path):
    out = tmp_path / "run"
    assert main([
        "simulate", "--n", "500", "--theta", "pi/8", "--tau", "0.01",
        "--seed", "3", "--out-dir", str(out),
    ]) == 0
    log1 = read_station_log(out / "logs" / "theta_000" / "station1.log")
    log2 = read_station_log(out / "logs" / "theta_000" / "station2.log")
    assert len(log1) == len(log2) == 500
    assert log1.meta["rng"] == "pcg64"


def test_simulate_experiment_two(tmp_path):
    out = tmp_path / "e2"
    assert main([
        "simulate", "--experiment", "II", "--xi", "pi/6", "--n", "3000",
        "--theta-grid", "3", "--tau", "0.01", "--seed", "5", "--out-dir", str(out),
    ]) == 0
    rows = (out / "singles.csv").read_text().splitlines()[1:]
    assert len(rows) == 3 * 4  # theta points x (station, setting) combos


def test_sweep_rejects_empty_d_list(tmp_path):
    assert main([
        "sweep", "--d-list", "", "--n", "100", "--seed", "1",
        "--out-dir", str(tmp_path / "s"),
    ]) == 1


def test_sweep_outputs(tmp_path):
    out = tmp_path / "sweep"
    assert main([
        "sweep", "--d-list", "0,2", "--w-over-tau-list", "1,4", "--theta-grid", "3",
        "--n", "2000", "--tau", "0.05", "--seed", "11", "--out-dir", str(out),
    ]) == 0
    smax_lines = (out / "sweep_smax.csv").read_text().splitlines()
    assert smax_lines[0] == "w_over_tau,d,s_max"
    assert len(smax_lines) == 1 + 2 * 2
    curve_lines = (out / "sweep_curve.csv").read_text().splitlines()
    assert len(curve_lines) == 1 + 2 * 2 * 3


def test_analytic_compare_table(tmp_path):
    out = tmp_path / "an"
    assert main([
        "analytic", "--d", "2", "--tau", "1e-3", "--quad-points", "5000",
        "--grid-points", "8", "--out-dir", str(out),
    ]) == 0
    lines = (out / "correlation_compare.csv").read_text().splitlines()
    assert lines[0] == "delta_angle,E_numeric,E_closed"
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(-1.0, abs=1e-6)
    assert float(first[2]) == -1.0


def test_analytic_unsupported_exponent(tmp_path):
    assert main([
        "analytic", "--d", "3", "--tau", "1e-3", "--quad-points", "2000",
        "--grid-points", "4", "--out-dir", str(tmp_path / "bad"),
    ]) == 1


def test_smax_curve_smoke(tmp_path):
    out = tmp_path / "curve"
    assert main([
        "smax-curve", "--d-list", "2", "--w-over-tau-list", "1,1000",
        "--tau", "1e-3", "--quad-points", "2000", "--grid", "16",
        "--out-dir", str(out), "--gnuplot",
    ]) == 0
    lines = (out / "smax_curve.csv").read_text().splitlines()
    rows = [line.split(",") for line in lines[1:]]
    assert float(rows[0][2]) > 2.7
    assert float(rows[1][2]) == pytest.approx(2.0, abs=0.01)
    assert (out / "smax_curve.gp").exists()


def test_analyze_pipeline_on_synthetic_files(tmp_path):
    cfg = SimConfig(
        experiment="I", n_events=40_000, delay_exponent=2.0, learning=0.999,
        tag_resolution=0.01, window=0.01, max_delay=1.0,
        settings_1=(0.0, math.pi / 4), settings_2=(math.pi / 8, 3 * math.pi / 8),
        seed=31,
    )
    log1, log2 = run_experiment(cfg)
    t1, t2 = embed_in_timeline(log1, log2, spacing=100 * NS, delay_unit=2 * NS, shift=4 * NS)
    f1, f2 = tmp_path / "alice.log", tmp_path / "bob.log"
    write_station_log(t1, f1)
    write_station_log(t2, f2)

    out = tmp_path / "analysis"
    assert main([
        "analyze", "--log1", str(f1), "--log2", str(f2),
        "--scan-range", "50e-9", "--w-list", "1e-9,2e-9,4e-9",
        "--out-dir", str(out),
    ]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["shift_used_s"] == pytest.approx(4e-9, abs=0.25e-9)
    lines = (out / "smax_vs_window.csv").read_text().splitlines()
    assert lines[0] == "W_ns,S_max,n_pairs"
    assert len(lines) == 4
    n_pairs = [int(line.split(",")[2]) for line in lines[1:]]
    assert n_pairs == sorted(n_pairs)
    assert (out / "delay_histograms.csv").exists()
    assert (out / "shift_scan.csv").exists()
