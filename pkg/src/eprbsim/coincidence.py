"""Two-particle event identification and CHSH analysis.

A pair of index-aligned station logs is reduced to a table of coincidence
counts C_xy keyed by the two setting indices: event n is a coincidence when
its discretized tags k = ceil(t/tau) differ by less than ceil(W/tau).
Correlations E, the CHSH combination S and its maximum over settings are
computed from the table.

Sign convention: the source emits anticorrelated pairs, so aligned settings
give E = -1. S(theta) values reported here are oriented so that this
anticorrelation counts positively, i.e. the ideal singlet-like model traces
S(theta) = 3*cos(2*theta) - cos(6*theta) with maximum +2*sqrt(2) at
theta = pi/8. The orientation has no effect on |S| or any bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import StationLog

__all__ = [
    "NoCoincidencesError",
    "CoincidenceTable",
    "discretize_tag",
    "count_coincidences",
    "correlation",
    "single_particle_rates",
    "chsh",
    "chsh_max",
    "s_theta",
    "s_from_table",
    "s_max",
]

#: Outcome value -> index into the 2x2 count matrices.
OUTCOME_INDEX = {1: 0, -1: 1}
OUTCOME_VALUE = (1, -1)

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class NoCoincidencesError(ValueError):
    """A correlation was requested for a settings pair with zero coincidences."""


def discretize_tag(t: float, tau: float) -> int:
    """Discretized tag max(1, ceil(t / tau)).

    The floor at 1 keeps zero-delay events (a measure-zero case) pairable:
    occupied bins run 1..K.
    """
    if t < 0.0:
        raise ValueError(f"time tag must be >= 0, got {t}")
    if not tau > 0.0:
        raise ValueError(f"tag resolution must be positive, got {tau}")
    return max(1, int(math.ceil(t / tau)))


@dataclass
class CoincidenceTable:
    """Coincidence counts for all setting and outcome combinations.

    ``counts[i, j, a, b]`` is the number of coincident events with station-1
    setting index i, station-2 setting index j, station-1 outcome
    OUTCOME_VALUE[a] and station-2 outcome OUTCOME_VALUE[b]. Single-particle
    counts are conditioned on coincidence and derived from the same tensor;
    ``singles_unconditioned`` (when requested) additionally counts every
    event regardless of pairing.
    """

    counts: np.ndarray  # int64, shape (2, 2, 2, 2)
    total_events: int
    singles_unconditioned: np.ndarray | None = None  # int64, shape (2, 2, 2): station, setting, outcome

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (2, 2, 2, 2):
            raise ValueError(f"counts must have shape (2,2,2,2), got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if int(self.counts.sum()) > self.total_events:
            raise ValueError("coincidences exceed total events")

    def matrix(self, pair: tuple[int, int]) -> np.ndarray:
        """The 2x2 outcome-count matrix for one (setting_1, setting_2) pair."""
        i, j = pair
        return self.counts[i, j]

    def pair_total(self, pair: tuple[int, int]) -> int:
        return int(self.matrix(pair).sum())

    @property
    def n_coincidences(self) -> int:
        return int(self.counts.sum())

    def singles(self, station: int, setting_index: int, outcome: int) -> int:
        """Coincidence-conditioned single count (row/column sums of the table)."""
        a = OUTCOME_INDEX[outcome]
        if station == 1:
            return int(self.counts[setting_index, :, a, :].sum())
        if station == 2:
            return int(self.counts[:, setting_index, :, a].sum())
        raise ValueError(f"station must be 1 or 2, got {station}")


def _table_from_arrays(
    s1: np.ndarray,
    x1: np.ndarray,
    s2: np.ndarray,
    x2: np.ndarray,
) -> np.ndarray:
    """Count tensor for already-selected coincident events."""
    cell = (
        s1.astype(np.int64) * 8
        + s2.astype(np.int64) * 4
        + (x1 < 0).astype(np.int64) * 2
        + (x2 < 0).astype(np.int64)
    )
    return np.bincount(cell, minlength=16).reshape(2, 2, 2, 2)


def count_coincidences(
    log1: StationLog,
    log2: StationLog,
    tau: float,
    window: float,
    include_unconditioned: bool = False,
) -> CoincidenceTable:
    """Scan two index-aligned logs and accumulate the coincidence table.

    ``window`` may be math.inf, in which case every aligned pair counts (the
    no-window analysis). Serves simulated, index-paired data; unpaired
    two-station data goes through the tagdata pipeline instead.
    """
    if not tau > 0.0:
        raise ValueError(f"tag resolution must be positive, got {tau}")
    if window < tau:
        raise ValueError(f"window ({window}) must be >= tag resolution ({tau})")
    if len(log1) != len(log2) or not np.array_equal(log1.index, log2.index):
        raise ValueError("logs are not index-aligned; use the tagdata pipeline for unpaired data")

    if math.isinf(window):
        coincident = np.ones(len(log1), dtype=bool)
    else:
        k1 = np.maximum(1, np.ceil(log1.time_tag / tau)).astype(np.int64)
        k2 = np.maximum(1, np.ceil(log2.time_tag / tau)).astype(np.int64)
        k = int(math.ceil(window / tau))
        coincident = np.abs(k1 - k2) < k

    counts = _table_from_arrays(
        log1.setting_index[coincident],
        log1.outcome[coincident],
        log2.setting_index[coincident],
        log2.outcome[coincident],
    )
    unconditioned = None
    if include_unconditioned:
        unconditioned = np.zeros((2, 2, 2), dtype=np.int64)
        for station, log in ((0, log1), (1, log2)):
            cell = log.setting_index.astype(np.int64) * 2 + (log.outcome < 0).astype(np.int64)
            unconditioned[station] = np.bincount(cell, minlength=4).reshape(2, 2)
    return CoincidenceTable(
        counts=counts, total_events=len(log1), singles_unconditioned=unconditioned
    )


def correlation(table: CoincidenceTable, pair: tuple[int, int]) -> float:
    """E = (C++ + C-- - C+- - C-+) / (sum of all coincidences) for one pair."""
    m = table.matrix(pair)
    total = int(m.sum())
    if total == 0:
        raise NoCoincidencesError(f"no coincidences for settings pair {pair}")
    return float(m[0, 0] + m[1, 1] - m[0, 1] - m[1, 0]) / total


def single_particle_rates(table: CoincidenceTable) -> dict[tuple[int, int, int], float]:
    """P(outcome | station, setting) among coincident events.

    Normalized per setting over the coincidences involving it, so
    P(+1) + P(-1) = 1 for every (station, setting).
    """
    rates: dict[tuple[int, int, int], float] = {}
    for station in (1, 2):
        for setting in (0, 1):
            involved = sum(table.singles(station, setting, x) for x in (1, -1))
            if involved == 0:
                raise NoCoincidencesError(
                    f"no coincidences involve station {station} setting {setting}"
                )
            for x in (1, -1):
                rates[(station, setting, x)] = table.singles(station, setting, x) / involved
    return rates


def _check_correlation(value: float, label: str) -> float:
    value = float(value)
    if not -1.0 <= value <= 1.0:
        raise ValueError(f"{label} must lie in [-1, 1], got {value}")
    return value


def chsh(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    """The combination E(a,b) - E(a,b') + E(a',b) + E(a',b'); always in [-4, 4]."""
    vals = [
        _check_correlation(e, n)
        for e, n in ((e_ab, "E(a,b)"), (e_abp, "E(a,b')"), (e_apb, "E(a',b)"), (e_apbp, "E(a',b')"))
    ]
    return vals[0] - vals[1] + vals[2] + vals[3]


def chsh_max(e_ab: float, e_abp: float, e_apb: float, e_apbp: float) -> float:
    """max |S| over the four choices of which term carries the minus sign.

    Used for fixed-angle data that does not follow the theta parameterization.
    """
    e = np.array([_check_correlation(v, "E") for v in (e_ab, e_abp, e_apb, e_apbp)])
    total = e.sum()
    return float(np.max(np.abs(total - 2.0 * e)))


def four_correlations(table: CoincidenceTable) -> tuple[float, float, float, float]:
    """E for the setting pairs (0,0), (0,1), (1,0), (1,1), in that order."""
    return (
        correlation(table, (0, 0)),
        correlation(table, (0, 1)),
        correlation(table, (1, 0)),
        correlation(table, (1, 1)),
    )


def s_from_table(table: CoincidenceTable) -> float:
    """Oriented S for a run whose settings follow `theta_settings`.

    Setting indices map to (a,b)=(0,0), (a,b')=(0,1), (a',b)=(1,0),
    (a',b')=(1,1); the sign is flipped so the anticorrelated source yields
    the positive singlet curve (see module docstring).
    """
    e = four_correlations(table)
    return -chsh(*e)


def s_theta(e_fn: Callable[[float, float], float], theta: float) -> float:
    """S under the one-parameter settings family a=0, a'=2t, b=t, b'=3t.

    Oriented as in `s_from_table`: with E(a,b) = -cos 2(a-b) this returns
    3*cos(2*theta) - cos(6*theta), i.e. +2*sqrt(2) at theta = pi/8.
    """
    return -chsh(
        e_fn(0.0, theta),
        e_fn(0.0, 3.0 * theta),
        e_fn(2.0 * theta, theta),
        e_fn(2.0 * theta, 3.0 * theta),
    )


def _golden_max(f: Callable[[float], float], lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    """Golden-section search; returns (argmax, max) within [lo, hi]."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
        else:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
    candidates = [(c, fc), (d, fd), (0.5 * (a + b), f(0.5 * (a + b)))]
    return max(candidates, key=lambda p: p[1])


def s_max(
    e_fn: Callable[[float, float], float],
    grid: int = 64,
    rotation_invariant: bool = True,
) -> float:
    """max |S| over settings, by grid scan plus golden-section refinement.

    For rotation-invariant E (anything depending only on a - b) the scan runs
    over theta in [0, pi/2); otherwise all three free angles are scanned with
    the global rotation fixed at a = 0.
    """
    if grid < 8:
        raise ValueError(f"grid must be >= 8, got {grid}")
    if rotation_invariant:
        step = (math.pi / 2.0) / grid
        thetas = np.arange(grid) * step
        vals = [abs(s_theta(e_fn, t)) for t in thetas]
        t0 = float(thetas[int(np.argmax(vals))])
        _, val = _golden_max(lambda t: abs(s_theta(e_fn, t)), t0 - step, t0 + step)
        return float(val)

    step = math.pi / grid
    angles = np.arange(grid) * step
    best_val = -1.0
    pt = [0.0, 0.0, 0.0]
    for ap in angles:
        for b in angles:
            e_ab = e_fn(0.0, b)
            e_apb = e_fn(ap, b)
            for bp in angles:
                v = abs(e_ab - e_fn(0.0, bp) + e_apb + e_fn(ap, bp))
                if v > best_val:
                    best_val = v
                    pt = [float(ap), float(b), float(bp)]

    def s_at(q):
        ap, b, bp = q
        return abs(e_fn(0.0, b) - e_fn(0.0, bp) + e_fn(ap, b) + e_fn(ap, bp))

    val = best_val
    for _ in range(2):  # coordinate-wise refinement sweeps
        for axis in range(3):
            def along(t, axis=axis):
                q = list(pt)
                q[axis] = t
                return s_at(q)

            arg, refined = _golden_max(along, pt[axis] - step, pt[axis] + step, iters=50)
            if refined > val:
                val = refined
                pt[axis] = arg
    return float(val)
