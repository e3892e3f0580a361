"""Reference expectation values from quantum theory, used as test oracles.

Closed forms only: experiment I is the maximally entangled (singlet-like)
state with flat singles and E = -cos 2(a - b); experiment II is the product
state of two fixed polarizations eta_1, eta_2 with Malus-law singles and a
factorizing E.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["QuantumPrediction", "predict", "singlet_s_theta", "bounds"]


@dataclass(frozen=True)
class QuantumPrediction:
    p_plus_1: float  # P(+1) behind the station-1 polarizer at alpha
    p_minus_2: float  # P(-1) behind the station-2 polarizer at beta
    e1: float  # single-particle expectation at station 1
    e2: float  # single-particle expectation at station 2
    e12: float  # two-particle correlation


def predict(
    experiment: str,
    alpha: float,
    beta: float,
    eta1: float | None = None,
    eta2: float | None = None,
) -> QuantumPrediction:
    if experiment == "I":
        return QuantumPrediction(0.5, 0.5, 0.0, 0.0, -math.cos(2.0 * (alpha - beta)))
    if experiment == "II":
        if eta1 is None or eta2 is None:
            raise ValueError("experiment II predictions need both source angles")
        e1 = math.cos(2.0 * (alpha - eta1))
        e2 = math.cos(2.0 * (beta - eta2))
        return QuantumPrediction(
            p_plus_1=math.cos(alpha - eta1) ** 2,
            p_minus_2=math.sin(beta - eta2) ** 2,
            e1=e1,
            e2=e2,
            e12=e1 * e2,
        )
    raise ValueError(f"experiment must be 'I' or 'II', got {experiment!r}")


def singlet_s_theta(theta: float) -> float:
    """S(theta) = 3 cos 2theta - cos 6theta; peaks at 2*sqrt(2), theta = pi/8."""
    return 3.0 * math.cos(2.0 * theta) - math.cos(6.0 * theta)


def bounds() -> tuple[float, float, float]:
    """(product-state bound, quantum bound, algebraic bound) for |S|."""
    return 2.0, 2.0 * math.sqrt(2.0), 4.0
