"""Analytical oracle for the large-N limit of the coincidence analysis.

Everything here is exact or quadrature-based, independent of the event-by-
event simulation, and serves as ground truth for it: the closed pair-count
formula (validated exhaustively against brute-force enumeration), the
coincidence density over the discretized tag grid, midpoint quadrature of
the limiting correlation

    E(a, b) = - int x1(xi,a) x2(xi,b) P(T1,T2,W) dxi / int P(T1,T2,W) dxi,

with x_i the sign of cos 2(xi - setting) and T_i the delay scale, and the
closed-form correlations known for delay exponents 0, 1, 2 and 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import setting_gap

__all__ = [
    "DelayProfile",
    "DegenerateGeometryError",
    "pair_count",
    "pair_count_brute",
    "verify_pair_count",
    "coincidence_density",
    "correlation_numeric",
    "correlation_limit",
    "correlation_closed_form",
    "smax_curve",
    "SMALL_WINDOW",
    "INFINITE_WINDOW",
]

SMALL_WINDOW = "small_window"      # W = tau -> 0
INFINITE_WINDOW = "infinite_window"  # W -> inf (no window)

#: Quadrature nodes sit at (j + golden fraction) * h: the irrational offset
#: guarantees no node ever lands on a sign discontinuity or a delay zero,
#: which all sit at rational multiples of pi for rational-pi settings.
_NODE_OFFSET = (math.sqrt(5.0) - 1.0) / 2.0

_SINGULAR_GAP = 1e-3  # angular margin around multiples of pi/2


class DegenerateGeometryError(ValueError):
    """The correlation integral has a vanishing denominator."""


@dataclass(frozen=True)
class DelayProfile:
    """Delay law T(xi, theta) = max_delay * |sin 2(xi - theta)|**exponent."""

    exponent: float
    max_delay: float = 1.0

    def __post_init__(self):
        if not self.exponent >= 0.0:
            raise ValueError(f"exponent must be >= 0, got {self.exponent}")
        if not self.max_delay > 0.0:
            raise ValueError(f"max_delay must be positive, got {self.max_delay}")

    def scale(self, xi, theta):
        return self.max_delay * np.abs(np.sin(2.0 * (np.asarray(xi) - theta))) ** self.exponent


@njit(cache=True, nogil=True)
def pair_count_brute(k1_max: int, k2_max: int, k: int) -> int:
    """Enumerate pairs (k1, k2) in [1,K1]x[1,K2] with |k1 - k2| < k.

    The independent oracle: a literal double loop over the grid, kept free of
    any closed-form shortcut.
    """
    count = 0
    for i in range(1, k1_max + 1):
        for j in range(1, k2_max + 1):
            if abs(i - j) < k:
                count += 1
    return count


def pair_count(k1_max: int, k2_max: int, k: int) -> int:
    """Closed-form count of pairs (k1, k2) in [1,K1]x[1,K2] with |k1 - k2| < k."""
    if k1_max < 1 or k2_max < 1 or k < 1:
        raise ValueError(f"K1, K2, k must all be >= 1, got ({k1_max}, {k2_max}, {k})")
    k0 = min(k1_max, k2_max, k)
    k12 = min(k1_max, k2_max)
    big = max(k1_max, k2_max)
    k12_eff = k12 - max(0, big - k)
    return (
        (2 * k0 - 1) * k12
        - (k0 * (k0 - 1)) // 2
        - max(0, ((k12_eff - 1) * max(0, k12_eff)) // 2)
        + max(0, k - k0) * k0
        - max(0, k * k12 - k1_max * k2_max)
    )


def _pair_count_vec(k1: np.ndarray, k2: np.ndarray, k: int) -> np.ndarray:
    k0 = np.minimum(np.minimum(k1, k2), k)
    k12 = np.minimum(k1, k2)
    big = np.maximum(k1, k2)
    k12_eff = k12 - np.maximum(0, big - k)
    return (
        (2 * k0 - 1) * k12
        - (k0 * (k0 - 1)) // 2
        - np.maximum(0, ((k12_eff - 1) * np.maximum(0, k12_eff)) // 2)
        + np.maximum(0, k - k0) * k0
        - np.maximum(0, k * k12 - k1 * k2)
    )


def verify_pair_count(max_k1: int = 30, max_k2: int = 30, max_k: int = 35) -> int:
    """Compare closed formula against brute force on the full box; returns #mismatches."""
    mismatches = 0
    for k1 in range(1, max_k1 + 1):
        for k2 in range(1, max_k2 + 1):
            for k in range(1, max_k + 1):
                if pair_count(k1, k2, k) != pair_count_brute(k1, k2, k):
                    mismatches += 1
    return mismatches


def _bins(t: np.ndarray, tau: float) -> np.ndarray:
    return np.maximum(1, np.ceil(np.asarray(t, dtype=np.float64) / tau)).astype(np.int64)


def coincidence_density(t1: float, t2: float, tau: float, window: float) -> float:
    """Probability that two tags, uniform on (0, t1] and (0, t2], fall within
    the discretized window: C(K1, K2, k) / (K1 * K2)."""
    if t1 < 0.0 or t2 < 0.0:
        raise ValueError("delay scales must be >= 0")
    if not tau > 0.0:
        raise ValueError(f"tag resolution must be positive, got {tau}")
    if window < tau:
        raise ValueError(f"window ({window}) must be >= tag resolution ({tau})")
    if math.isinf(window):
        return 1.0
    k1 = max(1, math.ceil(t1 / tau))
    k2 = max(1, math.ceil(t2 / tau))
    k = math.ceil(window / tau)
    return pair_count(k1, k2, k) / (k1 * k2)


def _quad_nodes(quad_points: int) -> np.ndarray:
    if quad_points < 1000:
        raise ValueError(f"quad_points must be >= 1000, got {quad_points}")
    h = 2.0 * math.pi / quad_points
    return (np.arange(quad_points) + _NODE_OFFSET) * h


def _ratio(alpha: float, beta: float, x1x2: np.ndarray, density: np.ndarray) -> float:
    den = float(np.sum(density))
    if den < 1e-12:
        raise DegenerateGeometryError(
            f"coincidence density vanishes for settings ({alpha}, {beta})"
        )
    return -float(np.sum(x1x2 * density)) / den


def correlation_numeric(
    alpha: float,
    beta: float,
    profile: DelayProfile,
    tau: float,
    window: float,
    quad_points: int = 200_000,
) -> float:
    """Midpoint quadrature of the limiting correlation at finite tau and W.

    The integrand depends on the settings only through their gap modulo pi,
    so the pair is canonicalized to (0, gap) before discretizing; rotation
    invariance and station-swap symmetry then hold exactly, not just to the
    quadrature error.
    """
    if not tau > 0.0:
        raise ValueError(f"tag resolution must be positive, got {tau}")
    if window < tau:
        raise ValueError(f"window ({window}) must be >= tag resolution ({tau})")
    gap = setting_gap(alpha, beta)
    xi = _quad_nodes(quad_points)
    x1x2 = np.sign(np.cos(2.0 * xi)) * np.sign(np.cos(2.0 * (xi - gap)))
    if math.isinf(window):
        density = np.ones_like(xi)
    else:
        k1 = _bins(profile.scale(xi, 0.0), tau)
        k2 = _bins(profile.scale(xi, gap), tau)
        k = int(math.ceil(window / tau))
        density = _pair_count_vec(k1, k2, k) / (k1 * k2)
    return _ratio(alpha, beta, x1x2, density)


def correlation_limit(
    alpha: float,
    beta: float,
    profile: DelayProfile,
    quad_points: int = 200_000,
    regime: str = SMALL_WINDOW,
) -> float:
    """Limiting-regime correlation, bypassing the tag discretization.

    small_window uses the W = tau -> 0 density 1/max(T1, T2); at settings a
    zero gap apart (mod pi/2) that density is non-integrable for exponents
    >= 1, so those points short-circuit to the exact limits -1 / +1 forced by
    perfect (anti)correlation. infinite_window uses unit density.
    """
    gap = setting_gap(alpha, beta)
    if regime == INFINITE_WINDOW:
        xi = _quad_nodes(quad_points)
        x1x2 = np.sign(np.cos(2.0 * xi)) * np.sign(np.cos(2.0 * (xi - gap)))
        return _ratio(alpha, beta, x1x2, np.ones_like(xi))
    if regime != SMALL_WINDOW:
        raise ValueError(f"unknown regime {regime!r}")
    if profile.exponent >= 1.0:
        if gap < _SINGULAR_GAP:
            return -1.0
        if gap > math.pi / 2.0 - _SINGULAR_GAP:
            return 1.0
    xi = _quad_nodes(quad_points)
    x1x2 = np.sign(np.cos(2.0 * xi)) * np.sign(np.cos(2.0 * (xi - gap)))
    t1 = profile.scale(xi, 0.0)
    t2 = profile.scale(xi, gap)
    density = 1.0 / np.maximum(t1, t2)
    return _ratio(alpha, beta, x1x2, density)


def _sawtooth(delta: float) -> float:
    # Correlation of the two sign-of-cos responses under unit density:
    # piecewise linear, period pi, -1 at aligned settings, +1 at orthogonal.
    folded = math.pi - abs(math.fmod(abs(2.0 * delta), 2.0 * math.pi) - math.pi)
    return -1.0 + (2.0 / math.pi) * folded


def correlation_closed_form(alpha: float, beta: float, d: float, regime: str = SMALL_WINDOW) -> float:
    """Exact correlations: W -> inf for any exponent, W -> 0 for d in {0,1,2,4}."""
    delta = alpha - beta
    if regime == INFINITE_WINDOW:
        return _sawtooth(delta)
    if regime != SMALL_WINDOW:
        raise ValueError(f"unknown regime {regime!r}")
    if d == 0:
        return _sawtooth(delta)
    if d == 2:
        return -math.cos(2.0 * delta)
    if d == 4:
        c = math.cos(2.0 * delta)
        return -(3.0 - c * c) * c / 2.0
    if d == 1:
        ac = abs(math.cos(delta))
        as_ = abs(math.sin(delta))
        # Removable singularities: aligned settings -> -1, orthogonal -> +1.
        if ac >= 1.0 - 1e-12:
            return -1.0
        if as_ >= 1.0 - 1e-12:
            return 1.0
        log_c = math.log((1.0 + ac) / (1.0 - ac))
        log_s = math.log((1.0 + as_) / (1.0 - as_))
        return -(log_c - log_s) / (log_c + log_s)
    raise ValueError(f"no closed form for delay exponent {d}")


def smax_curve(
    d: float,
    w_over_tau_values: list[float],
    tau: float,
    quad_points: int = 20_000,
    grid: int = 48,
) -> list[tuple[float, float]]:
    """max |S| as a function of W/tau, from the quadrature correlation."""
    from .coincidence import s_max  # deferred: coincidence owns the maximizer

    profile = DelayProfile(exponent=d)
    out = []
    for ratio in w_over_tau_values:
        if ratio < 1.0:
            raise ValueError(f"W/tau values must be >= 1, got {ratio}")
        window = ratio * tau

        def e_fn(a, b, _w=window):
            return correlation_numeric(a, b, profile, tau, _w, quad_points)

        out.append((float(ratio), s_max(e_fn, grid=grid)))
    return out
