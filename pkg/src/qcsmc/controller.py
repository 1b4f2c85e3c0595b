"""Pointwise control laws and state-space region classification.

The modified law drives the plant with ``-gamma*sgn(x1)`` everywhere and adds
the nonlinear damping ``|x2|*x2/|x1|`` only where ``x1*x2 < 0``. The original
law applies the damping in every quadrant and is kept for comparison runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ControlParams, Domain, Quadrant, QUADRANT_CODES, Region, State
from .errors import UndefinedOnAxis

MODIFIED = "modified"
ORIGINAL = "original"
LAWS = (MODIFIED, ORIGINAL)


@dataclass(frozen=True)
class ControlOutput:
    u: float
    delta: float
    clamped: bool = False


def sgn(v: float) -> int:
    """Sign with the single-valued convention ``sgn(0) = 0``."""
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _clamp(delta: float, cap: float) -> tuple[float, bool]:
    if abs(delta) > cap:
        return math.copysign(cap, delta), True
    return delta, False


def damping_delta(x: State, delta_cap: float) -> tuple[float, bool]:
    x1, x2 = x.x1, x.x2
    if x1 * x2 >= 0:
        return 0.0, False
    return _clamp(abs(x2) * x2 / abs(x1), delta_cap)


def control_modified(x: State, params: ControlParams, delta_cap: float) -> ControlOutput:
    delta, clamped = damping_delta(x, delta_cap)
    return ControlOutput(-params.gamma * sgn(x.x1) - delta, delta, clamped)


def control_original(x: State, params: ControlParams, delta_cap: float) -> ControlOutput:
    """Damping active in all quadrants; undefined on the x2-axis off the origin."""
    x1, x2 = x.x1, x.x2
    if x1 == 0:
        if x2 != 0:
            raise UndefinedOnAxis(f"original law undefined at x1=0, x2={x2}")
        return ControlOutput(0.0, 0.0, False)
    delta, clamped = _clamp(abs(x2) * x2 / abs(x1), delta_cap)
    return ControlOutput(-params.gamma * sgn(x1) - delta, delta, clamped)


def control(x: State, params: ControlParams, delta_cap: float, law: str = MODIFIED) -> ControlOutput:
    if law == MODIFIED:
        return control_modified(x, params, delta_cap)
    if law == ORIGINAL:
        return control_original(x, params, delta_cap)
    raise ValueError(f"unknown law {law!r}")


def control_scalar(x1: float, x2: float, gamma: float, cap: float, law: str) -> tuple[float, bool]:
    """Fast path used by the simulator: returns ``(u, clamped)`` on raw floats.

    Performs the same floating-point operations, in the same order, as
    :func:`control_modified` / :func:`control_original`.
    """
    s = -gamma if x1 > 0 else (gamma if x1 < 0 else 0.0)
    if law == MODIFIED:
        if x1 * x2 >= 0:
            return s - 0.0, False
    elif x1 == 0:
        if x2 != 0:
            raise UndefinedOnAxis(f"original law undefined at x1=0, x2={x2}")
        return 0.0, False
    delta = abs(x2) * x2 / abs(x1)
    if abs(delta) > cap:
        return s - math.copysign(cap, delta), True
    return s - delta, False


def classify(x: State, gamma: float) -> Region:
    x1, x2 = x.x1, x.x2
    domain = Domain.U if x1 * x2 >= 0 else Domain.C
    if x1 == 0 and x2 == 0:
        quadrant = Quadrant.ORIGIN
    elif x1 == 0:
        quadrant = Quadrant.AXIS_X2
    elif x2 == 0:
        quadrant = Quadrant.AXIS_X1
    elif x1 > 0:
        quadrant = Quadrant.I if x2 > 0 else Quadrant.IV
    else:
        quadrant = Quadrant.II if x2 > 0 else Quadrant.III
    in_ca = domain is Domain.C and x2 * x2 < 2.0 * gamma * abs(x1)
    return Region(domain, quadrant, in_ca)


_Q = {q: i for i, q in enumerate(QUADRANT_CODES)}


def classify_arrays(x1: np.ndarray, x2: np.ndarray, gamma: float):
    """Vectorised :func:`classify`: returns ``(domain_code, quadrant_code, in_ca)``."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    in_c = x1 * x2 < 0
    domain = in_c.astype(np.int8)
    quadrant = np.select(
        [
            (x1 == 0) & (x2 == 0),
            x1 == 0,
            x2 == 0,
            (x1 > 0) & (x2 > 0),
            (x1 > 0) & (x2 < 0),
            (x1 < 0) & (x2 > 0),
        ],
        [_Q[Quadrant.ORIGIN], _Q[Quadrant.AXIS_X2], _Q[Quadrant.AXIS_X1],
         _Q[Quadrant.I], _Q[Quadrant.IV], _Q[Quadrant.II]],
        default=_Q[Quadrant.III],
    ).astype(np.int8)
    in_ca = in_c & (x2 * x2 < 2.0 * gamma * np.abs(x1))
    return domain, quadrant, in_ca
