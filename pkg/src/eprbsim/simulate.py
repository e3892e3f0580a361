"""Full experiment runs: source emission, switches, polarizers, time tags.

Each of the N events proceeds independently at the two stations. A station
owns two polarizer machines at fixed orientations; a switch variate routes
each incoming photon to one of them, the selected machine produces the +-1
outcome, and a time tag is drawn uniformly from [0, T] where the delay scale
T depends only on the angle between the photon polarization and the selected
polarizer: T = max_delay * |sin 2(xi - theta)|**d.

Locality holds by construction: station 1's record is a function of the
emitted polarization, station 1's machines and station 1's streams alone.
Five named random streams (source, one switch and one tag stream per
station) all derive from the single run seed, so changing one station's
settings cannot perturb the sequences consumed by the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .dlm import DlmState, _step_kernel
from .model import (
    RNG_ALGORITHM,
    STREAM_SOURCE,
    STREAM_SWITCH_1,
    STREAM_SWITCH_2,
    STREAM_TAGS_1,
    STREAM_TAGS_2,
    RngStream,
    SimConfig,
    StationLog,
    wrap_angle,
)

__all__ = [
    "PairEmission",
    "StationState",
    "emit_pair",
    "time_delay_scale",
    "draw_time_tag",
    "run_experiment",
    "theta_settings",
]


@dataclass(frozen=True)
class PairEmission:
    """Polarization angles of one emitted photon pair (always orthogonal)."""

    xi_1: float
    xi_2: float

    def __post_init__(self):
        gap = (self.xi_2 - self.xi_1) % (2.0 * math.pi)
        if abs(gap - math.pi / 2.0) > 1e-12:
            raise ValueError("pair polarizations must differ by pi/2")


@dataclass
class StationState:
    """One station: two polarizer machines plus its switch and tag streams."""

    polarizer_a: DlmState
    polarizer_b: DlmState
    switch_rng: RngStream
    tag_rng: RngStream


def emit_pair(config: SimConfig, source_rng: RngStream) -> PairEmission:
    """Draw one pair: xi_1 uniform on [0, 2*pi) for experiment I, fixed for II."""
    if config.experiment == "I":
        xi = source_rng.uniform() * 2.0 * math.pi
    else:
        xi = config.source_angle
    return PairEmission(xi_1=xi, xi_2=wrap_angle(xi + math.pi / 2.0))


def time_delay_scale(xi: float, theta: float, d: float, t0: float) -> float:
    """Maximum delay T = t0 * |sin 2(xi - theta)|**d (T = t0 everywhere for d = 0)."""
    if d < 0.0:
        raise ValueError(f"delay exponent must be >= 0, got {d}")
    if not t0 > 0.0:
        raise ValueError(f"max delay must be positive, got {t0}")
    return t0 * abs(math.sin(2.0 * (xi - theta))) ** d


def draw_time_tag(t_scale: float, tag_rng: RngStream) -> float:
    """Uniform tag on (0, T]; exactly 0 when T = 0.

    The open lower end keeps the discretized tag ceil(t/tau) inside 1..K for
    positive delays.
    """
    if t_scale < 0.0:
        raise ValueError(f"delay scale must be >= 0, got {t_scale}")
    return (1.0 - tag_rng.uniform()) * t_scale


@njit(cache=True, nogil=True)
def _station_kernel(xi, switch_u, tag_u, theta_a, theta_b, l, d, t0,
                    out_setting, out_outcome, out_tag):
    # Sequential by necessity: the two machines carry path-dependent state.
    ax, ay = 1.0, 0.0
    bx, by = 1.0, 0.0
    for n in range(xi.size):
        pick_b = switch_u[n] >= 0.5
        theta = theta_b if pick_b else theta_a
        a = xi[n] - theta
        wx = math.cos(a)
        wy = math.sin(a)
        if pick_b:
            ch, bx, by = _step_kernel(bx, by, l, wx, wy)
        else:
            ch, ax, ay = _step_kernel(ax, ay, l, wx, wy)
        t_scale = t0 * abs(math.sin(2.0 * a)) ** d
        out_setting[n] = 1 if pick_b else 0
        out_outcome[n] = ch
        out_tag[n] = (1.0 - tag_u[n]) * t_scale


def _run_station(xi, switch_u, tag_u, settings, config):
    n = xi.size
    out_setting = np.empty(n, dtype=np.uint8)
    out_outcome = np.empty(n, dtype=np.int8)
    out_tag = np.empty(n, dtype=np.float64)
    _station_kernel(
        xi, switch_u, tag_u,
        float(settings[0]), float(settings[1]),
        float(config.learning), float(config.delay_exponent), float(config.max_delay),
        out_setting, out_outcome, out_tag,
    )
    return out_setting, out_outcome, out_tag


def _config_meta(config: SimConfig, station: int) -> dict[str, str]:
    settings = config.settings_1 if station == 1 else config.settings_2
    meta = {
        "seed": str(config.seed),
        "rng": RNG_ALGORITHM,
        "experiment": config.experiment,
        "n_events": str(config.n_events),
        "delay_exponent": repr(config.delay_exponent),
        "learning": repr(config.learning),
        "tag_resolution": repr(config.tag_resolution),
        "window": repr(config.window),
        "max_delay": repr(config.max_delay),
        "setting_a": repr(settings[0]),
        "setting_b": repr(settings[1]),
    }
    if config.source_angle is not None:
        meta["source_angle"] = repr(config.source_angle)
    return meta


def run_experiment(config: SimConfig) -> tuple[StationLog, StationLog]:
    """Simulate all N events; returns the two index-aligned station logs.

    Fully deterministic for a given config: reruns produce identical logs.
    Tags are in units of config.max_delay (time_unit = 1.0).
    """
    n = config.n_events
    source = RngStream(config.seed, STREAM_SOURCE)
    switch_1 = RngStream(config.seed, STREAM_SWITCH_1)
    switch_2 = RngStream(config.seed, STREAM_SWITCH_2)
    tags_1 = RngStream(config.seed, STREAM_TAGS_1)
    tags_2 = RngStream(config.seed, STREAM_TAGS_2)

    if config.experiment == "I":
        xi_1 = source.uniform(n) * 2.0 * math.pi
    else:
        xi_1 = np.full(n, config.source_angle, dtype=np.float64)
    xi_2 = xi_1 + math.pi / 2.0  # orthogonal partner (trig functions wrap)

    s1, x1, t1 = _run_station(xi_1, switch_1.uniform(n), tags_1.uniform(n), config.settings_1, config)
    s2, x2, t2 = _run_station(xi_2, switch_2.uniform(n), tags_2.uniform(n), config.settings_2, config)

    index = np.arange(1, n + 1, dtype=np.int64)
    ang_1 = np.asarray(config.settings_1, dtype=np.float64)
    ang_2 = np.asarray(config.settings_2, dtype=np.float64)
    log1 = StationLog(
        station_id=1, time_unit=1.0, index=index,
        setting_index=s1, setting=ang_1[s1], outcome=x1, time_tag=t1,
        meta=_config_meta(config, 1),
    )
    log2 = StationLog(
        station_id=2, time_unit=1.0, index=index.copy(),
        setting_index=s2, setting=ang_2[s2], outcome=x2, time_tag=t2,
        meta=_config_meta(config, 2),
    )
    return log1, log2


def theta_settings(experiment: str, theta: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Polarizer settings used when tracing out S(theta).

    Experiment I follows the one-parameter family (0, 2*theta) / (theta,
    3*theta). Experiment II keeps each station's two polarizers equal, at
    theta and theta + pi/4, so all four setting pairs estimate the same E.
    """
    if experiment == "I":
        return (0.0, 2.0 * theta), (theta, 3.0 * theta)
    if experiment == "II":
        return (theta, theta), (theta + math.pi / 4.0, theta + math.pi / 4.0)
    raise ValueError(f"experiment must be 'I' or 'II', got {experiment!r}")
