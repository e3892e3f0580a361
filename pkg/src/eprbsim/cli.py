"""Command-line front end: reproducible runs and figure-data emission.

Every command takes an explicit seed where randomness is involved (no silent
entropy), writes plain-CSV outputs plus a manifest.json echoing the resolved
configuration, and is deterministic given that manifest: re-running the same
command reproduces byte-identical CSV bodies. Angles accept radians or
pi-fraction shorthand ("pi/8", "3pi/8", "-pi/4").

Exit codes: 0 success, 1 data/runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import math
import os
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import (
    INFINITE_WINDOW,
    SMALL_WINDOW,
    DelayProfile,
    correlation_closed_form,
    correlation_numeric,
    pair_count,
    pair_count_brute,
    smax_curve,
    verify_pair_count,
)
from .coincidence import count_coincidences, four_correlations, s_from_table, single_particle_rates
from .model import SimConfig, derive_seed, read_station_log, write_station_log
from .simulate import run_experiment, theta_settings
from .tagdata import (
    delay_histogram_by_setting,
    diff_histogram,
    match_pairs,
    optimal_shift,
    smax_vs_window,
)

_PI_PATTERN = re.compile(r"^\s*([+-]?)\s*(\d+\.?\d*|\.\d+)?\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*|\.\d+))?\s*$", re.IGNORECASE)


def parse_angle(text: str) -> float:
    """Radians from a float literal or a pi fraction like 'pi/8' or '3pi/8'."""
    m = _PI_PATTERN.match(text)
    if m:
        sign = -1.0 if m.group(1) == "-" else 1.0
        coef = float(m.group(2)) if m.group(2) else 1.0
        den = float(m.group(3)) if m.group(3) else 1.0
        if den == 0.0:
            raise ValueError(f"zero denominator in angle {text!r}")
        return sign * coef * math.pi / den
    try:
        return float(text)
    except ValueError:
        raise ValueError(f"cannot parse angle {text!r}") from None


def _parse_float_list(text: str) -> list[float]:
    items = [s for s in (part.strip() for part in text.split(",")) if s]
    if not items:
        raise ValueError("empty list")
    return [float(s) for s in items]


def _parse_window(text: str, tau: float) -> float:
    low = text.strip().lower()
    if low == "tau":
        return tau
    if low in ("inf", "infinity"):
        return math.inf
    return float(text)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _write_manifest(out_dir: Path, command: str, params: dict, outputs: list[str], t_start: float) -> None:
    manifest = {
        "tool": "eprbsim",
        "version": __version__,
        "command": command,
        "parameters": params,
        "outputs": outputs,
        "wall_time_s": round(time.monotonic() - t_start, 3),
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _worker_count() -> int:
    env = os.environ.get("EPRBSIM_WORKERS")
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _gnuplot_script(path: Path, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(["set datafile separator ','", "set key outside"] + lines) + "\n")


# ---------------------------------------------------------------- simulate

def _theta_grid(args) -> np.ndarray:
    if args.theta is not None:
        return np.array([parse_angle(args.theta)])
    return np.linspace(0.0, parse_angle(args.theta_max), args.theta_grid)


def _point_config(args, theta: float, point_seed: int) -> SimConfig:
    s1, s2 = theta_settings(args.experiment, theta)
    return SimConfig(
        experiment=args.experiment,
        n_events=args.n,
        delay_exponent=args.d,
        learning=args.l,
        tag_resolution=args.tau,
        window=_parse_window(args.window, args.tau),
        max_delay=args.t0,
        settings_1=s1,
        settings_2=s2,
        seed=point_seed,
        source_angle=parse_angle(args.xi) if args.experiment == "II" else None,
    )


def _analyze_point(config: SimConfig, logs) -> dict:
    log1, log2 = logs
    out = {}
    for label, window in (("windowed", config.window), ("infinite", math.inf)):
        table = count_coincidences(log1, log2, config.tag_resolution, window)
        e = four_correlations(table)
        out[label] = {
            "e": e,
            "s": s_from_table(table),
            "n": table.n_coincidences,
            "singles": single_particle_rates(table),
            "singles_n": {
                (st, si): sum(table.singles(st, si, x) for x in (1, -1))
                for st in (1, 2)
                for si in (0, 1)
            },
        }
    return out


def _run_points(args, thetas, out_dir: Path) -> list[dict]:
    save_logs = args.save_logs or len(thetas) == 1

    def one(k: int) -> dict:
        theta = float(thetas[k])
        config = _point_config(args, theta, derive_seed(args.seed, k))
        logs = run_experiment(config)
        if save_logs:
            log_dir = out_dir / "logs" / f"theta_{k:03d}"
            log_dir.mkdir(parents=True, exist_ok=True)
            write_station_log(logs[0], log_dir / "station1.log")
            write_station_log(logs[1], log_dir / "station2.log")
        return {"theta": theta, **_analyze_point(config, logs)}

    with concurrent.futures.ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        return list(pool.map(one, range(len(thetas))))


def _emit_curves(results: list[dict], out_dir: Path, gnuplot: bool) -> list[str]:
    files = []
    for label, fname in (("windowed", "curve.csv"), ("infinite", "curve_infinite_window.csv")):
        rows = [
            [r["theta"], r[label]["s"], *r[label]["e"], r[label]["n"]]
            for r in results
        ]
        _write_csv(out_dir / fname, ["theta", "S", "E_ab", "E_abp", "E_apb", "E_apbp", "n_coincidences"], rows)
        files.append(fname)

    singles_rows = []
    for r in results:
        rates = r["windowed"]["singles"]
        for st in (1, 2):
            for si in (0, 1):
                singles_rows.append([
                    r["theta"], st, si,
                    rates[(st, si, 1)], rates[(st, si, -1)],
                    r["windowed"]["singles_n"][(st, si)],
                ])
    _write_csv(out_dir / "singles.csv",
               ["theta", "station", "setting_index", "p_plus", "p_minus", "n_involved"],
               singles_rows)
    files.append("singles.csv")

    if gnuplot:
        _gnuplot_script(out_dir / "curve.gp", [
            "plot 'curve.csv' using 1:2 skip 1 with points title 'S (windowed)', \\",
            "     'curve_infinite_window.csv' using 1:2 skip 1 with points title 'S (no window)'",
        ])
        files.append("curve.gp")
    return files


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    thetas = _theta_grid(args)
    results = _run_points(args, thetas, out_dir)
    files = _emit_curves(results, out_dir, args.gnuplot)
    _write_manifest(out_dir, "simulate", _public_params(args), files, t0)
    print(f"simulate: wrote {', '.join(files)} to {out_dir}")
    return 0


def cmd_sweep(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d_list = _parse_float_list(args.d_list)
    ratios = _parse_float_list(args.w_over_tau_list)
    thetas = np.linspace(0.0, parse_angle(args.theta_max), args.theta_grid)

    def one(key):
        di, k = key
        theta = float(thetas[k])
        s1, s2 = theta_settings(args.experiment, theta)
        config = SimConfig(
            experiment=args.experiment,
            n_events=args.n,
            delay_exponent=d_list[di],
            learning=args.l,
            tag_resolution=args.tau,
            window=max(ratios) * args.tau,
            max_delay=args.t0,
            settings_1=s1,
            settings_2=s2,
            seed=derive_seed(args.seed, di, k),
            source_angle=parse_angle(args.xi) if args.experiment == "II" else None,
        )
        log1, log2 = run_experiment(config)
        point = []
        for ratio in ratios:
            table = count_coincidences(log1, log2, args.tau, ratio * args.tau)
            point.append((ratio, four_correlations(table), s_from_table(table), table.n_coincidences))
        return key, theta, point

    keys = [(di, k) for di in range(len(d_list)) for k in range(len(thetas))]
    with concurrent.futures.ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        results = dict((key, (theta, point)) for key, theta, point in pool.map(one, keys))

    curve_rows = []
    smax_rows = []
    for di, d in enumerate(d_list):
        for ri, ratio in enumerate(ratios):
            best = 0.0
            for k in range(len(thetas)):
                theta, point = results[(di, k)]
                _, e, s, n = point[ri]
                curve_rows.append([d, ratio, theta, s, *e, n])
                best = max(best, abs(s))
            smax_rows.append([ratio, d, best])
    _write_csv(out_dir / "sweep_curve.csv",
               ["d", "w_over_tau", "theta", "S", "E_ab", "E_abp", "E_apb", "E_apbp", "n_coincidences"],
               curve_rows)
    _write_csv(out_dir / "sweep_smax.csv", ["w_over_tau", "d", "s_max"], smax_rows)
    files = ["sweep_curve.csv", "sweep_smax.csv"]
    _write_manifest(out_dir, "sweep", _public_params(args), files, t0)
    print(f"sweep: wrote {', '.join(files)} to {out_dir}")
    return 0


# ---------------------------------------------------------------- analytic

def cmd_analytic(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = DelayProfile(exponent=args.d)
    deltas = np.linspace(0.0, math.pi, args.grid_points, endpoint=False)
    regime = SMALL_WINDOW if args.regime == "small-window" else INFINITE_WINDOW
    rows = []
    for delta in deltas:
        e_num = correlation_numeric(0.0, float(delta), profile, args.tau, args.w_over_tau * args.tau, args.quad_points)
        e_closed = correlation_closed_form(0.0, float(delta), args.d, regime)
        rows.append([float(delta), e_num, e_closed])
    _write_csv(out_dir / "correlation_compare.csv", ["delta_angle", "E_numeric", "E_closed"], rows)
    _write_manifest(out_dir, "analytic", _public_params(args), ["correlation_compare.csv"], t0)
    print(f"analytic: wrote correlation_compare.csv to {out_dir}")
    return 0


def cmd_smax_curve(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    d_list = _parse_float_list(args.d_list)
    ratios = _parse_float_list(args.w_over_tau_list)
    rows = []
    for d in d_list:
        for ratio, smax in smax_curve(d, ratios, args.tau, args.quad_points, args.grid):
            rows.append([ratio, d, smax])
    _write_csv(out_dir / "smax_curve.csv", ["w_over_tau", "d", "s_max"], rows)
    files = ["smax_curve.csv"]
    if args.gnuplot:
        _gnuplot_script(out_dir / "smax_curve.gp", [
            "set logscale x",
            "plot 'smax_curve.csv' using 1:3 skip 1 with linespoints title 'S_max'",
        ])
        files.append("smax_curve.gp")
    _write_manifest(out_dir, "smax-curve", _public_params(args), files, t0)
    print(f"smax-curve: wrote {', '.join(files)} to {out_dir}")
    return 0


def cmd_oracle_check(args) -> int:
    t0 = time.monotonic()
    mismatches = verify_pair_count(args.max_k1, args.max_k2, args.max_k)
    total = args.max_k1 * args.max_k2 * args.max_k
    print(
        f"oracle-check: {total} cases, {mismatches} mismatches "
        f"({time.monotonic() - t0:.2f}s)"
    )
    if mismatches:
        print("pair_count disagrees with brute-force enumeration", file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------------- analyze

def cmd_analyze(args) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log1 = read_station_log(args.log1)
    log2 = read_station_log(args.log2)

    hist = diff_histogram(log1, log2, args.bin, args.scan_range)
    scan_rows = [[hist.center(b) * 1e9, c] for b, c in sorted(hist.counts.items())]
    _write_csv(out_dir / "shift_scan.csv", ["dt_ns", "count"], scan_rows)

    shift = optimal_shift(hist) if args.shift is None else args.shift
    windows = _parse_float_list(args.w_list)
    sweep = smax_vs_window(log1, log2, shift, windows)
    _write_csv(
        out_dir / "smax_vs_window.csv",
        ["W_ns", "S_max", "n_pairs"],
        [[w * 1e9, s, n] for w, s, n in sweep],
    )

    delay_rows = []
    pairs = match_pairs(log1, log2, shift, max(windows))
    for setting_pair in ((0, 0), (0, 1)):
        try:
            h = delay_histogram_by_setting(pairs, log1, log2, setting_pair, (1, 1), args.bin)
        except ValueError:
            continue
        for b, frac in sorted(h.normalized().items()):
            delay_rows.append([h.center(b) * 1e9, frac, f"{setting_pair[0]}-{setting_pair[1]}"])
    _write_csv(out_dir / "delay_histograms.csv", ["dt_ns", "normalized_count", "setting_pair"], delay_rows)

    files = ["shift_scan.csv", "smax_vs_window.csv", "delay_histograms.csv"]
    if args.gnuplot:
        _gnuplot_script(out_dir / "smax_vs_window.gp", [
            "plot 'smax_vs_window.csv' using 1:2 skip 1 with linespoints title 'S_max(W)'",
        ])
        files.append("smax_vs_window.gp")
    params = _public_params(args)
    params["shift_used_s"] = shift
    _write_manifest(out_dir, "analyze", params, files, t0)
    print(f"analyze: shift {shift * 1e9:.3f} ns, wrote {', '.join(files)} to {out_dir}")
    return 0


# ------------------------------------------------------------------- main

def _public_params(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _add_sim_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--experiment", choices=("I", "II"), default="I")
    p.add_argument("--n", type=int, default=1_000_000, help="events per run")
    p.add_argument("--d", type=float, default=2.0, help="delay exponent")
    p.add_argument("--l", type=float, default=0.999, help="learning parameter in (0,1)")
    p.add_argument("--tau", type=float, default=0.00025, help="tag resolution (units of t0)")
    p.add_argument("--t0", type=float, default=1.0, help="maximum delay")
    p.add_argument("--xi", default="pi/6", help="source polarization (experiment II)")
    p.add_argument("--theta-max", default="pi/2", help="top of the theta grid")
    p.add_argument("--seed", type=int, required=True, help="run seed (required; no silent entropy)")
    p.add_argument("--out-dir", required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprbsim", description=__doc__)
    parser.add_argument("--version", action="version", version=f"eprbsim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a run and emit S(theta)/singles curves")
    _add_sim_options(p)
    p.add_argument("--window", default="tau", help="coincidence window: 'tau', 'inf' or a number")
    p.add_argument("--theta-grid", type=int, default=33, help="points on [0, theta-max]")
    p.add_argument("--theta", default=None, help="single theta instead of a grid (always saves logs)")
    p.add_argument("--save-logs", action="store_true", help="write station logs for every grid point")
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="sweep delay exponents and window ratios")
    _add_sim_options(p)
    p.add_argument("--d-list", required=True, help="comma-separated delay exponents")
    p.add_argument("--w-over-tau-list", default="1", help="comma-separated W/tau ratios")
    p.add_argument("--theta-grid", type=int, default=33)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("analytic", help="compare quadrature vs closed-form correlations")
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--w-over-tau", type=float, default=1.0)
    p.add_argument("--quad-points", type=int, default=200_000)
    p.add_argument("--grid-points", type=int, default=32)
    p.add_argument("--regime", choices=("small-window", "infinite-window"), default="small-window")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("smax-curve", help="S_max as a function of W/tau (quadrature)")
    p.add_argument("--d-list", default="2")
    p.add_argument("--w-over-tau-list", default="1,2,5,10,20,50,100,200,500,1000")
    p.add_argument("--tau", type=float, default=1e-3)
    p.add_argument("--quad-points", type=int, default=20_000)
    p.add_argument("--grid", type=int, default=48)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_smax_curve)

    p = sub.add_parser("analyze", help="time-tag pipeline for unpaired two-station logs")
    p.add_argument("--log1", required=True)
    p.add_argument("--log2", required=True)
    p.add_argument("--bin", type=float, default=0.5e-9, help="histogram bin (seconds)")
    p.add_argument("--scan-range", type=float, default=1e-6, help="max |t1-t2| scanned (seconds)")
    p.add_argument("--w-list", default="1e-9,2e-9,3e-9,5e-9,10e-9,20e-9", help="windows in seconds")
    p.add_argument("--shift", type=float, default=None, help="clock shift in seconds (default: recovered)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--gnuplot", action="store_true")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("oracle-check", help="validate pair_count against brute force")
    p.add_argument("--max-k1", type=int, default=30)
    p.add_argument("--max-k2", type=int, default=30)
    p.add_argument("--max-k", type=int, default=35)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
