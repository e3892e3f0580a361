"""Deterministic learning machine modeling a single polarizer.

The machine keeps a unit 2-vector R and a learning parameter l in (0, 1).
Each incoming unit vector Y is compared against eight trial updates of R
(one per sign triple (delta, s, s')); the closest trial replaces R and the
value of delta for the winning rule decides which output channel fires.

Channel calibration: the rule family with delta = -1 leaves R unchanged when
R lies on the x-axis, i.e. it reproduces inputs aligned with the polarizer
axis, where the mean outcome must be +1 (Malus' law). The +1 channel is
therefore wired to delta = -1 and the -1 channel to delta = +1. With this
mapping a fixed input at angle psi yields outcomes averaging cos(2*psi), and
uniformly distributed inputs yield the balanced sign(cos 2(xi - theta))
response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = ["DlmState", "TrialVector", "trial_vectors", "step", "polarizer_response", "step_many"]

_UNIT_TOL = 1e-9


@dataclass(frozen=True)
class TrialVector:
    """One of the eight candidate updates: a unit vector plus its rule signs."""

    x: float
    y: float
    delta: int
    s: int
    s_prime: int


@dataclass(frozen=True)
class DlmState:
    """Internal unit vector (x, y) and learning parameter l."""

    x: float
    y: float
    learning: float

    def __post_init__(self):
        if not 0.0 < self.learning < 1.0:
            raise ValueError(f"learning must lie in (0, 1), got {self.learning}")
        if abs(self.x * self.x + self.y * self.y - 1.0) > 1e-9:
            raise ValueError(f"internal vector must have unit norm, got ({self.x}, {self.y})")

    @classmethod
    def initial(cls, learning: float) -> "DlmState":
        # Any unit vector works as a start; the machine adapts. (1, 0) keeps
        # runs reproducible and no warm-up events are discarded.
        return cls(1.0, 0.0, learning)


def _decode_signs(i: int) -> tuple[int, int, int]:
    # Fixed enumeration: lexicographic over (delta, s, s'), +1 before -1.
    delta = 1 if i < 4 else -1
    s = 1 if (i >> 1) & 1 == 0 else -1
    sp = 1 if i & 1 == 0 else -1
    return delta, s, sp


def trial_vectors(state: DlmState) -> list[TrialVector]:
    """The eight unit trial vectors, in fixed (delta, s, s') enumeration order.

    delta=+1 rescales the x-coordinate: (l*s'*x, s*sqrt(1 - l^2 + l^2*y^2));
    delta=-1 rescales the y-coordinate: (s*sqrt(1 - l^2 + l^2*x^2), l*s'*y).
    """
    l = state.learning
    rx = math.sqrt(1.0 - l * l + l * l * state.x * state.x)
    ry = math.sqrt(1.0 - l * l + l * l * state.y * state.y)
    out = []
    for i in range(8):
        delta, s, sp = _decode_signs(i)
        if delta == 1:
            tx, ty = l * sp * state.x, s * ry
        else:
            tx, ty = s * rx, l * sp * state.y
        out.append(TrialVector(tx, ty, delta, s, sp))
    return out


@njit(cache=True, nogil=True)
def _step_kernel(x, y, l, wx, wy):
    """One update: returns (channel, new_x, new_y).

    Squared distances only (argmin is invariant); first strict improvement
    wins, which breaks ties toward the lowest enumeration index.
    """
    rx = math.sqrt(1.0 - l * l + l * l * x * x)
    ry = math.sqrt(1.0 - l * l + l * l * y * y)
    best = np.inf
    best_i = 0
    bx = 0.0
    by = 0.0
    for i in range(8):
        if i < 4:  # delta = +1
            tx = l * x if i & 1 == 0 else -l * x
            ty = ry if (i >> 1) & 1 == 0 else -ry
        else:  # delta = -1
            tx = rx if (i >> 1) & 1 == 0 else -rx
            ty = l * y if i & 1 == 0 else -l * y
        d2 = (wx - tx) * (wx - tx) + (wy - ty) * (wy - ty)
        if d2 < best:
            best = d2
            best_i = i
            bx = tx
            by = ty
    channel = 1 if best_i >= 4 else -1
    return channel, bx, by


def step(state: DlmState, y: tuple[float, float]) -> tuple[int, DlmState]:
    """Process one unit input vector; returns (channel, updated state)."""
    wx, wy = float(y[0]), float(y[1])
    if abs(wx * wx + wy * wy - 1.0) > _UNIT_TOL:
        raise ValueError(f"input vector must have unit norm, got ({wx}, {wy})")
    channel, nx, ny = _step_kernel(state.x, state.y, state.learning, wx, wy)
    return int(channel), DlmState(float(nx), float(ny), state.learning)


def polarizer_response(state: DlmState, polarization: float, orientation: float) -> tuple[int, DlmState]:
    """Outcome of a polarizer at `orientation` hit by a photon at `polarization`.

    Only the relative angle matters: the input is rotated into the polarizer
    frame, Y = (cos(xi - theta), sin(xi - theta)), then stepped.
    """
    a = polarization - orientation
    return step(state, (math.cos(a), math.sin(a)))


@njit(cache=True, nogil=True)
def _step_many_kernel(x, y, l, wx, wy, out):
    for i in range(wx.size):
        ch, x, y = _step_kernel(x, y, l, wx[i], wy[i])
        out[i] = ch
    return x, y


def step_many(state: DlmState, inputs: np.ndarray) -> tuple[np.ndarray, DlmState]:
    """Process a (n, 2) array of unit inputs; returns (outcomes, final state)."""
    inputs = np.asarray(inputs, dtype=np.float64)
    wx = np.ascontiguousarray(inputs[:, 0])
    wy = np.ascontiguousarray(inputs[:, 1])
    norms = wx * wx + wy * wy
    if np.any(np.abs(norms - 1.0) > _UNIT_TOL):
        bad = int(np.argmax(np.abs(norms - 1.0)))
        raise ValueError(f"input {bad} does not have unit norm")
    out = np.empty(wx.size, dtype=np.int8)
    nx, ny = _step_many_kernel(state.x, state.y, state.learning, wx, wy, out)
    return out, DlmState(float(nx), float(ny), state.learning)
